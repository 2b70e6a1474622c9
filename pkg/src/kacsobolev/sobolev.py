"""Homogeneous negative Sobolev norms of zero-mass atomic measures.

The norm of a signed measure m in H^{-s}(R^d), with s = d/2 + r, is

    ||m||^2 = int |m^(xi)|^2 |xi|^{-2s} dxi        (unitary Fourier transform)

For a finite sum of point masses with zero total mass this equals the
energy-distance quadratic form

    ||m||^2 = -(C_r^2 / 2) sum_ij a_i a_j |x_i - x_j|^{2r}

where C_r is the norm of a unit dipole.  ``hnorm`` evaluates the quadratic
form; ``hnorm_fourier_oracle`` integrates the Fourier side numerically and
serves as an independent check.
"""
from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi, sqrt

import numpy as np
from scipy import special

from . import _pairs
from .errors import DomainError, InvariantViolation, MassError, NumericError

MASS_RTOL = 1e-9
NEGATIVE_RTOL = 1e-9


@dataclass(frozen=True)
class SobolevIndex:
    """Dimension ``d`` and regularity ``r``; the Sobolev exponent is d/2 + r."""

    d: int
    r: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.d}")
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"regularity r must lie in (0, 1), got {self.r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "r", float(self.r))

    @property
    def s(self):
        return self.d / 2 + self.r

    @cached_property
    def C_r(self):
        return dipole_constant(self)

    @cached_property
    def c_sd(self):
        return riesz_constant(self)


def riesz_constant(index):
    """Constant c(s, d) = Gamma((d-s)/2) / ((2 pi)^{d/2} Gamma(s/2)).

    It is the coefficient of the Riesz kernel |x|^{s-d} whose Fourier
    transform is |xi|^{-s}; requires 0 < s < d.
    """
    d, s = index.d, index.s
    if not 0.0 < s < d:
        raise DomainError(f"Riesz constant needs 0 < s < d, got s={s}, d={d}")
    return gamma((d - s) / 2) / ((2 * pi) ** (d / 2) * gamma(s / 2))


def dipole_constant(index):
    """Norm of delta_x - delta_y for |x - y| = 1, in closed form.

    Uses int (1 - cos xi_1) |xi|^{-d-2r} dxi
        = pi^{d/2} |Gamma(-r)| / (2^{2r} Gamma(d/2 + r)).
    """
    d, r = index.d, index.r
    stable = pi ** (d / 2) * abs(gamma(-r)) / (2 ** (2 * r) * gamma(d / 2 + r))
    return sqrt(2 * stable / (2 * pi) ** d)


def dipole_constant_quadrature(index, quad=None):
    """C_r from radial quadrature of the Fourier integral of a unit dipole."""
    dipole = AtomicSignedMeasure(
        np.vstack([np.zeros(index.d), np.eye(index.d)[0]]), [1.0, -1.0])
    return hnorm_fourier_oracle(dipole, index, quad)


class AtomicSignedMeasure:
    """Finite weighted sum of point masses on R^d."""

    def __init__(self, locations, weights):
        loc = np.asarray(locations, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if loc.ndim == 1:
            loc = loc.reshape(len(w), -1) if len(w) else loc.reshape(0, 0)
        if loc.shape[0] != w.shape[0]:
            raise DomainError("locations and weights differ in length")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(w))):
            raise DomainError("atoms must have finite locations and weights")
        self.locations = loc
        self.weights = w

    @classmethod
    def empirical(cls, points):
        points = np.asarray(points, dtype=np.float64)
        n = len(points)
        return cls(points, np.full(n, 1.0 / n) if n else np.zeros(0))

    @classmethod
    def dirac(cls, x, weight=1.0):
        return cls(np.atleast_2d(x), [weight])

    def __len__(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.locations.shape[1] if self.locations.ndim == 2 else 0

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    def __add__(self, other):
        if len(self) == 0:
            return other
        if len(other) == 0:
            return self
        return AtomicSignedMeasure(np.vstack([self.locations, other.locations]),
                                   np.concatenate([self.weights, other.weights]))

    def __neg__(self):
        return AtomicSignedMeasure(self.locations, -self.weights)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return AtomicSignedMeasure(self.locations, c * self.weights)

    __rmul__ = __mul__

    def pushforward(self, matrix=None, shift=None):
        """Image measure under x -> matrix @ x + shift."""
        loc = self.locations
        if matrix is not None:
            loc = loc @ np.asarray(matrix, dtype=np.float64).T
        if shift is not None:
            loc = loc + np.asarray(shift, dtype=np.float64)
        return AtomicSignedMeasure(loc, self.weights)


def _check_mass(m):
    tol = MASS_RTOL * float(np.sum(np.abs(m.weights)))
    if abs(m.total_mass) > tol:
        raise MassError("H^-s norm undefined for nonzero total mass "
                        f"(mass={m.total_mass:.3e}, tolerance={tol:.3e})")


def hnorm(m, index):
    """H^{-s} norm of a zero-mass atomic measure via the kernel identity."""
    if len(m) == 0:
        return 0.0
    _check_mass(m)
    signed, scale = _pairs.weighted_form(m.locations, m.weights, 2 * index.r)
    q = -0.5 * index.C_r ** 2 * signed
    floor = 0.5 * index.C_r ** 2 * scale
    if q < 0.0:
        if q < -NEGATIVE_RTOL * floor:
            raise InvariantViolation(
                f"negative quadratic form {q:.3e} (scale {floor:.3e})")
        q = 0.0
    return sqrt(q)


def empirical_distance(x, y, index, yy_sum=None):
    """H^{-s} distance between the empirical measures of samples x and y.

    ``yy_sum`` may carry a precomputed ``self_sum(y, 2r)`` so a large shared
    reference is only paired with itself once.
    """
    n, m = len(x), len(y)
    two_r = 2 * index.r
    sxx = _pairs.self_sum(x, two_r)
    syy = _pairs.self_sum(y, two_r) if yy_sum is None else yy_sum
    sxy = _pairs.cross_sum(x, y, two_r)
    form = 2 * sxy / (n * m) - sxx / n ** 2 - syy / m ** 2
    scale = 2 * sxy / (n * m) + sxx / n ** 2 + syy / m ** 2
    if form < 0.0:
        if form < -NEGATIVE_RTOL * scale:
            raise InvariantViolation(f"negative energy distance {form:.3e}")
        form = 0.0
    return index.C_r * sqrt(0.5 * form)


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for the Fourier-side oracle.

    Radial integration is split at |xi| = 1 (after rescaling the atoms to
    unit diameter).  Below 1 the panels are geometric towards the origin;
    above 1 they have fixed width and the cutoff doubles until two
    successive values agree to ``rtol``.
    """

    rtol: float = 1e-4
    order: int = 16
    inner_panels: int = 48
    inner_floor: float = 1e-9
    panel_width: float = pi / 2
    start_cutoff: float = 64.0
    max_cutoff: float = 2.0 ** 20


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    cutoff: float = field(default=0.0)

    def __float__(self):
        return self.value


def _sphere_average(z, d):
    # mean of cos(z * omega_1) over the unit sphere S^{d-1}
    nu = d / 2 - 1
    z = np.asarray(z, dtype=np.float64)
    out = np.ones_like(z)
    nz = z > 0
    if d == 3:
        out[nz] = np.sin(z[nz]) / z[nz]
    else:
        out[nz] = gamma(d / 2) * (2 / z[nz]) ** nu * special.jv(nu, z[nz])
    return out


def _one_minus_sphere_average(z, d):
    # 1 - mean of cos(z * omega_1), by power series where it would cancel
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z < 0.5
    zs = z[small] ** 2
    term = np.ones_like(zs)
    acc = np.zeros_like(zs)
    for k in range(1, 12):
        term = -term * zs / (4 * k * (d / 2 + k - 1))
        acc -= term
    out[small] = acc
    out[~small] = 1.0 - _sphere_average(z[~small], d)
    return out


def _gl(a, b, order):
    t, w = np.polynomial.legendre.leggauss(order)
    a = np.asarray(a)[:, None]
    b = np.asarray(b)[:, None]
    nodes = 0.5 * (b - a) * t + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def hnorm_fourier_oracle(m, index, quad=None):
    """Independent H^{-s} norm by integrating |m^(xi)|^2 |xi|^{-2s} numerically.

    The angular part of |m^|^2 = sum_jk a_j a_k cos(xi . (x_j - x_k)) is
    averaged over spheres in closed form (Bessel functions); the radial
    integral is done by Gauss-Legendre panels.  Returns an ``OracleResult``
    whose ``error`` is the change between the last two refinements.
    """
    quad = quad or QuadratureSpec()
    if len(m) == 0:
        return OracleResult(0.0, 0.0)
    tol = MASS_RTOL * float(np.sum(np.abs(m.weights)))
    if abs(m.total_mass) > tol:
        raise MassError("Fourier integral diverges at the origin for nonzero "
                        f"total mass (mass={m.total_mass:.3e})")
    d, r = index.d, index.r
    x, a = m.locations, m.weights
    iu, ju = np.triu_indices(len(a), 1)
    dist = np.linalg.norm(x[iu] - x[ju], axis=1)
    coef = 2 * a[iu] * a[ju]
    keep = dist > 0
    diag = float(np.sum(a ** 2) + np.sum(coef[~keep]))
    dist, coef = dist[keep], coef[keep]
    if len(dist) == 0:
        return OracleResult(0.0, 0.0)
    diam = dist.max()
    t = dist / diam

    mass2 = float(np.sum(a)) ** 2

    def radial(rho):
        # rho^{-1-2r} * spherical average of |m^|^2 at radius rho, written
        # as mass^2 - sum c (1 - avg) so that small rho does not cancel
        vals = np.full(rho.shape, mass2)
        for c, tj in zip(coef, t):
            vals -= c * _one_minus_sphere_average(rho * tj, d)
        return rho ** (-1 - 2 * r) * vals

    def inner(order):
        edges = np.geomspace(quad.inner_floor, 1.0, quad.inner_panels + 1)
        nodes, weights = _gl(edges[:-1], edges[1:], order)
        body = float(np.dot(weights, radial(nodes)))
        # below the floor the integrand is ~ rho^{1-2r}
        f0 = radial(np.array([quad.inner_floor]))[0]
        return body + f0 * quad.inner_floor / (2 - 2 * r)

    def tail_between(lo, hi, order):
        npan = max(1, int(np.ceil((hi - lo) / quad.panel_width)))
        edges = np.linspace(lo, hi, npan + 1)
        nodes, weights = _gl(edges[:-1], edges[1:], order)
        osc = np.zeros(nodes.shape)
        for c, tj in zip(coef, t):
            osc += c * _sphere_average(nodes * tj, d)
        return float(np.dot(weights, nodes ** (-1 - 2 * r) * osc))

    lo_order, hi_order = quad.order // 2, quad.order
    inner_hi = inner(hi_order)
    inner_err = abs(inner_hi - inner(lo_order))

    # diagonal term integrated in closed form on [1, inf)
    tail = diag / (2 * r)
    cutoff = quad.start_cutoff
    osc_tail = tail_between(1.0, cutoff, hi_order)
    area = 2 * pi ** (d / 2) / gamma(d / 2)
    prefactor = area / (2 * pi) ** d * diam ** (2 * r)
    prev = None
    while True:
        total = inner_hi + tail + osc_tail
        if prev is not None and abs(total - prev) <= quad.rtol * abs(total):
            break
        if cutoff >= quad.max_cutoff:
            raise NumericError("Fourier oracle did not converge",
                               cutoff=cutoff, value=total, previous=prev)
        prev = total
        osc_tail += tail_between(cutoff, 2 * cutoff, hi_order)
        cutoff *= 2
    sq = prefactor * total
    err_sq = prefactor * (abs(total - prev) + inner_err)
    if sq < 0:
        if sq < -err_sq:
            raise NumericError("Fourier oracle produced a negative square norm",
                               value=sq, error=err_sq)
        sq = 0.0
    value = sqrt(sq)
    # d sqrt(q) = dq / (2 sqrt(q))
    error = err_sq / (2 * value) if value > 0 else sqrt(err_sq)
    return OracleResult(value, error, cutoff)

"""Angular collision kernels, binary collisions and the contraction constant."""
from dataclasses import dataclass
from math import gamma, pi, sqrt
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InvariantViolation, NumericError

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class AngularKernel:
    """Deviation-angle rate measure of a Maxwellian collision model.

    ``density`` is dgamma/dtheta on (0, pi] (rate per unit angle) and
    ``total_rate`` its integral.  ``inverse_cdf`` maps uniforms in [0, 1)
    to angles with density ``density / total_rate``.  A kernel made of point
    masses sets ``atoms`` = ((angle, rate), ...) instead of a density.
    """

    name: str
    total_rate: float
    density: Optional[Callable] = None
    inverse_cdf: Optional[Callable] = None
    cdf: Optional[Callable] = None
    support: tuple = (0.0, pi)
    atoms: tuple = ()
    params: tuple = ()

    def sample(self, u):
        """Vectorised inverse-CDF sampling of deviation angles."""
        u = np.asarray(u, dtype=np.float64)
        if self.atoms:
            angles = np.array([a for a, _ in self.atoms])
            cum = np.cumsum([w for _, w in self.atoms]) / self.total_rate
            return angles[np.searchsorted(cum, u, side="right").clip(0, len(angles) - 1)]
        return self.inverse_cdf(u)

    def scaled(self, factor):
        """Same angular law with every rate multiplied by ``factor``."""
        if factor <= 0:
            raise DomainError("kernel scale factor must be positive")
        dens = None
        if self.density is not None:
            base = self.density
            dens = lambda th: factor * base(th)
        return AngularKernel(
            name=f"{self.name}*{factor:g}", total_rate=factor * self.total_rate,
            density=dens, inverse_cdf=self.inverse_cdf, cdf=self.cdf,
            support=self.support,
            atoms=tuple((a, factor * w) for a, w in self.atoms),
            params=self.params + (("scale", factor),))


def kac_kernel(d):
    """Kac model: post-collision relative velocity uniform on its sphere."""
    if int(d) != d or d < 2:
        raise DomainError(f"Kac kernel needs integer d >= 2, got {d}")
    d = int(d)
    norm = gamma(d - 1) / (2 ** (d - 2) * gamma((d - 1) / 2) ** 2)
    half = (d - 1) / 2

    def density(theta):
        return norm * np.sin(theta) ** (d - 2)

    def cdf(theta):
        # (1 - cos theta)/2 is Beta((d-1)/2, (d-1)/2)
        return special.betainc(half, half, (1 - np.cos(theta)) / 2)

    def inverse_cdf(u):
        if d == 3:
            return np.arccos(np.clip(1.0 - 2.0 * u, -1.0, 1.0))
        if d == 2:
            return pi * u
        b = special.betaincinv(half, half, u)
        return np.arccos(np.clip(1.0 - 2.0 * b, -1.0, 1.0))

    return AngularKernel(name="kac", total_rate=1.0, density=density,
                         inverse_cdf=inverse_cdf, cdf=cdf, params=(("d", d),))


def maxwell_potential_surrogate(d, cutoff):
    """Pure-power surrogate theta^{-3/2} 1{theta >= cutoff} for Maxwellian potentials.

    The true cross-section is only known through its small-angle behaviour;
    the normalisation here is a modelling choice, not a physical constant.
    """
    if int(d) != d or d < 2:
        raise DomainError(f"surrogate kernel needs integer d >= 2, got {d}")
    eps = float(cutoff)
    if eps <= 0:
        raise DomainError("cutoff must be positive: the uncut rate diverges")
    if eps >= pi:
        raise DomainError("cutoff >= pi leaves an empty kernel")
    head = eps ** -0.5
    rate = 2 * (head - pi ** -0.5)

    def density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        return np.where(theta >= eps, np.maximum(theta, eps) ** -1.5, 0.0)

    def cdf(theta):
        theta = np.clip(np.asarray(theta, dtype=np.float64), eps, pi)
        return 2 * (head - theta ** -0.5) / rate

    def inverse_cdf(u):
        return (head - 0.5 * rate * np.asarray(u)) ** -2.0

    return AngularKernel(name="maxwell_surrogate", total_rate=rate,
                         density=density, inverse_cdf=inverse_cdf, cdf=cdf,
                         support=(eps, pi), params=(("d", int(d)), ("cutoff", eps)))


def point_kernel(angle, rate=1.0):
    """Kernel concentrated on one deviation angle (test fixture)."""
    return AngularKernel(name="point", total_rate=float(rate),
                         atoms=((float(angle), float(rate)),), params=(("angle", angle),))


def kernel_from_name(name, d, **params):
    if name == "kac":
        return kac_kernel(d)
    if name in ("maxwell_surrogate", "maxwell"):
        return maxwell_potential_surrogate(d, params.get("cutoff", 0.01))
    raise DomainError(f"unknown kernel {name!r}")


def sample_angle(kernel, u):
    return kernel.sample(u)


def orthonormal_direction(u_hat, g):
    """Unit vector orthogonal to ``u_hat`` from a Gaussian vector ``g``."""
    e = g - np.dot(g, u_hat) * u_hat
    n = np.linalg.norm(e)
    if n == 0.0:
        raise NumericError("degenerate azimuth draw")
    return e / n


def collide(v, w, theta, e):
    """Rotate the relative velocity w - v by ``theta`` towards ``e``.

    Returns ``(v', w')``.  Centre of mass and relative speed are preserved.
    """
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    u = w - v
    speed = np.linalg.norm(u)
    if speed == 0.0:
        return v.copy(), w.copy()
    e = np.asarray(e, dtype=np.float64)
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise DomainError("azimuth vector must be a unit vector")
    if abs(np.dot(e, u)) > ORTHO_TOL * speed:
        raise DomainError("azimuth vector must be orthogonal to w - v")
    u_new = speed * (np.cos(theta) * (u / speed) + np.sin(theta) * e)
    centre = 0.5 * (v + w)
    return centre - 0.5 * u_new, centre + 0.5 * u_new


def _kappa_integrand(theta, r):
    # cos(theta/2) written as sin((pi-theta)/2) so theta = pi gives exactly 0
    c = np.sin((pi - theta) / 2)
    s = np.sin(theta / 2)
    return 1.0 - np.abs(c) ** r - np.abs(s) ** r


def _graded_gauss(f, lo, hi, order, levels):
    # Gauss-Legendre panels graded geometrically towards both endpoints
    mid = 0.5 * (lo + hi)
    ratios = 0.5 ** np.arange(levels)
    left = np.concatenate([lo + (mid - lo) * ratios, [lo]])[::-1]
    right = np.concatenate([[hi], hi - (hi - mid) * ratios[::-1]])[::-1]
    edges = np.unique(np.concatenate([left, right]))
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return float(np.dot(weights, f(nodes)))


def kappa(kernel, r, atol=1e-9):
    """Contraction constant int [1 - cos(theta/2)^r - sin(theta/2)^r] dgamma(theta).

    Two quadratures are compared: adaptive Gauss-Kronrod (QUADPACK) and
    Gauss-Legendre on panels graded towards both endpoints.  Disagreement
    beyond ``atol`` raises ``NumericError``.
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if kernel.atoms:
        return float(sum(w * _kappa_integrand(a, r) for a, w in kernel.atoms))
    if not np.isfinite(kernel.total_rate):
        raise DomainError("kappa needs a finite total rate")
    lo, hi = kernel.support

    def f(theta):
        return _kappa_integrand(theta, r) * kernel.density(theta)

    adaptive, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=500)
    graded = _graded_gauss(f, lo, hi, order=20, levels=40)
    if abs(adaptive - graded) > atol:
        raise NumericError("kappa quadratures disagree",
                           adaptive=adaptive, graded=graded)
    return adaptive


def kernel_rate_check(kernel, rtol=1e-9):
    """Verify that the density integrates to ``total_rate``."""
    if kernel.atoms:
        return float(sum(w for _, w in kernel.atoms))
    lo, hi = kernel.support
    mass, _ = integrate.quad(kernel.density, lo, hi, epsabs=0, epsrel=1e-12, limit=500)
    if abs(mass - kernel.total_rate) > rtol * kernel.total_rate:
        raise InvariantViolation(
            f"kernel {kernel.name}: density integrates to {mass}, rate {kernel.total_rate}")
    return mass


def qtheta_sample(v, theta, rng):
    """One draw of v' = v/2 + |v|/2 (cos theta v^ + sin theta e), e uniform on v^-perp."""
    v = np.asarray(v, dtype=np.float64)
    speed = np.linalg.norm(v)
    if speed == 0.0:
        return np.zeros_like(v)
    v_hat = v / speed
    e = orthonormal_direction(v_hat, rng.standard_normal(v.shape[0]))
    return 0.5 * v + 0.5 * speed * (np.cos(theta) * v_hat + np.sin(theta) * e)


def qtheta_sample_many(v, theta, rng, count):
    """``count`` independent draws of ``qtheta_sample(v, theta)`` as rows."""
    v = np.asarray(v, dtype=np.float64)
    speed = np.linalg.norm(v)
    if speed == 0.0:
        return np.zeros((count, v.shape[0]))
    v_hat = v / speed
    g = rng.standard_normal((count, v.shape[0]))
    g -= np.outer(g @ v_hat, v_hat)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return 0.5 * v + 0.5 * speed * (np.cos(theta) * v_hat + np.sin(theta) * g)


def qtheta_norm_estimate(m, theta, index, draws, rng):
    """Monte-Carlo estimate of the H^{-s} norm of Q_theta applied to ``m``.

    Each draw pushes every atom through two independent copies of the
    Q_theta move, X_i and Y_j, and scores -(C_r^2/2) sum_ij a_i a_j
    |X_i - Y_j|^{2r}.  This is unbiased for the squared norm because X_i
    and Y_j are independent even when i = j.  Returns (norm, stderr) with
    the stderr carried through the square root by the delta method.
    """
    x = np.asarray(m.locations, dtype=np.float64)
    a = np.asarray(m.weights, dtype=np.float64)
    if draws < 2:
        raise DomainError("need at least 2 draws")
    if len(a) == 0:
        return 0.0, 0.0
    xs = np.stack([qtheta_sample_many(v, theta, rng, draws) for v in x], axis=1)
    ys = np.stack([qtheta_sample_many(v, theta, rng, draws) for v in x], axis=1)
    dist = np.linalg.norm(xs[:, :, None, :] - ys[:, None, :, :], axis=-1)
    score = -0.5 * index.C_r ** 2 * np.einsum("i,kij,j->k", a, dist ** (2 * index.r), a)
    mean = float(score.mean())
    se = float(score.std(ddof=1) / sqrt(draws))
    norm = sqrt(max(mean, 0.0))
    # delta method, guarded near zero where sqrt is not differentiable
    norm_se = sqrt(max(mean, 0.0) + se) - norm if mean <= se else se / (2 * norm)
    return norm, norm_se

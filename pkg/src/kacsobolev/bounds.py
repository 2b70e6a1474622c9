"""Non-asymptotic Gaussian concentration bounds for the empirical measure.

Everything here is a closed-form evaluation except ``sigma2``/``big_a`` for
non-discrete laws (Monte Carlo) and ``optimize_lambda`` (golden section).
Bounds are on ln E[U(lambda (mu^N_T - mu_T))] with U(x) = 2 cosh ||x||;
Markov's inequality turns them into tail probabilities.
"""
from dataclasses import dataclass, field
from math import exp, expm1, log, sqrt

import numpy as np
from scipy import special

from .collisions import kappa as kappa_of
from .errors import DomainError
from .particles import make_rng
from .sobolev import AtomicSignedMeasure, hnorm

LN2 = log(2.0)
SERIES_CUT = 1e-4
GOLDEN_RTOL = 1e-6


def e1(t):
    """(e^t - 1)/t, equal to 1 at t = 0."""
    if abs(t) < SERIES_CUT:
        return 1.0 + t / 2 + t * t / 6 + t ** 3 / 24
    return expm1(t) / t


def e2(t):
    """(e^t - 1 - t)/t^2, equal to 1/2 at t = 0."""
    if abs(t) < SERIES_CUT:
        return 0.5 + t / 6 + t * t / 24 + t ** 3 / 120
    return (expm1(t) - t) / (t * t)


@dataclass(frozen=True)
class ModelConstants:
    """Constants of the synthetic bound for one model and energy cap k1."""

    index: object
    kappa: float
    k1: float
    ell: float
    omega: float
    kernel: object = None

    @property
    def r(self):
        return self.index.r


def model_constants(index, kernel, k1, kappa=None):
    """kappa from the kernel; ell and omega from C_r and the energy cap ``k1``."""
    if k1 < 0:
        raise DomainError("energy cap k1 must be >= 0")
    r, cr = index.r, index.C_r
    kap = kappa_of(kernel, r) if kappa is None else float(kappa)
    ell = 2 ** (1 + r) * sqrt(2 ** (1 - r) - 1) * cr * k1 ** (r / 2)
    omega = (2 ** (1 - r) - 1) * 2 ** (1 + 2 * r) * cr ** 2 * k1 ** r
    return ModelConstants(index, kap, float(k1), ell, omega, kernel)


def jump_amplitude_L(k_total, n, c):
    """Largest H^{-s} jump of the empirical measure at total energy ``k_total``."""
    if k_total < 0:
        raise DomainError("energy must be >= 0")
    r = c.index.r
    return 2 ** (1 + r) * sqrt(2 ** (1 - r) - 1) * c.index.C_r * k_total ** (r / 2) / n


def jump_variance_V(k_total, n, c):
    """Bound on the expected squared jump size per unit time."""
    if k_total < 0:
        raise DomainError("energy must be >= 0")
    r = c.index.r
    return ((2 ** (1 - r) - 1) * 2 ** (1 + 2 * r) * c.index.C_r ** 2
            * k_total ** r * n ** -(1 + r))


# --- initial fluctuations -------------------------------------------------

def _gaussian_abs_moment(tau2, d, p):
    # E|Z|^p for Z ~ N(0, tau2 I_d)
    return (2 * tau2) ** (p / 2) * special.gamma((d + p) / 2) / special.gamma(d / 2)


def _gaussian_shifted_moment(v, tau2, d, p):
    # E|v + Z|^p for Z ~ N(0, tau2 I_d), via Kummer's function
    x = np.sum(np.atleast_2d(v) ** 2, axis=1) / (2 * tau2)
    return _gaussian_abs_moment(tau2, d, p) * special.hyp1f1(-p / 2, d / 2, -x)


def dirac_deviation_norms(law, index, points=None):
    """||delta_v - mu_0|| for the atoms of a discrete law, or for ``points``.

    For a discrete law this is the kernel identity on the atoms of mu_0 plus
    one extra atom.  For a gaussian law it uses
    ||delta_v - mu||^2 = C_r^2 (E|v - X|^{2r} - E|X - X'|^{2r} / 2).
    """
    if law.kind == "discrete":
        locs = law.atoms if points is None else np.atleast_2d(points)
        base = AtomicSignedMeasure(law.atoms, -law.probs)
        return np.array([hnorm(AtomicSignedMeasure.dirac(v) + base, index) for v in locs])
    if law.kind == "gaussian":
        if points is None:
            raise DomainError("points are required for a continuous law")
        p, d, tau2 = 2 * index.r, law.d, law.coordinate_variance
        if tau2 == 0:
            return index.C_r * np.linalg.norm(np.atleast_2d(points), axis=1) ** index.r
        cross = _gaussian_shifted_moment(points, tau2, d, p)
        pair = _gaussian_abs_moment(2 * tau2, d, p)
        return index.C_r * np.sqrt(np.maximum(cross - 0.5 * pair, 0.0))
    raise DomainError("deviation norms need a discrete or gaussian law")


@dataclass(frozen=True)
class InitialFluctuation:
    """sigma^2 = E||delta_v - mu_0||^2 and A = E[e^{a||.||} - a||.|| - 1]."""

    sigma2: float
    a: float
    big_a: float
    sigma2_stderr: float = 0.0
    big_a_stderr: float = 0.0


def _excess_exp(x):
    # e^x - x - 1 without cancellation for small x
    return np.expm1(x) - x


def sigma2(law, index, samples=200_000, seed=0):
    """Variance of delta_v - mu_0 in H^{-s}; returns ``(value, stderr)``.

    Exact for discrete laws.  For gaussian laws it is closed form,
    sigma^2 = (C_r^2 / 2) E|X - X'|^{2r}.  Sampler laws use a Monte Carlo
    U-statistic of that same identity.
    """
    cr2 = index.C_r ** 2
    if law.kind == "discrete":
        norms = dirac_deviation_norms(law, index)
        return float(law.probs @ norms ** 2), 0.0
    if law.kind == "gaussian":
        return 0.5 * cr2 * _gaussian_abs_moment(2 * law.coordinate_variance, law.d, 2 * index.r), 0.0
    rng = make_rng(seed)
    x = law.sample(samples, rng)
    y = law.sample(samples, rng)
    vals = 0.5 * cr2 * np.linalg.norm(x - y, axis=1) ** (2 * index.r)
    return float(vals.mean()), float(vals.std(ddof=1) / sqrt(samples))


def big_a(law, a, index, samples=200_000, seed=0):
    """A(a, mu) = E[e^{a||nu||} - a||nu|| - 1] over nu = delta_v - mu_0; ``(value, stderr)``."""
    if a <= 0:
        raise DomainError("a must be > 0")
    if law.kind == "discrete":
        norms = dirac_deviation_norms(law, index)
        return float(law.probs @ _excess_exp(a * norms)), 0.0
    if law.kind == "gaussian":
        rng = make_rng(seed)
        pts = law.sample(samples, rng)
        vals = _excess_exp(a * dirac_deviation_norms(law, index, pts))
        if not np.all(np.isfinite(vals)):
            raise DomainError("exponential moment appears to diverge")
        return float(vals.mean()), float(vals.std(ddof=1) / sqrt(samples))
    raise DomainError("A(a, mu) for sampler laws is not supported")


def initial_fluctuation(law, a, index, samples=200_000, seed=0):
    s2, s2_err = sigma2(law, index, samples, seed)
    aa, aa_err = big_a(law, a, index, samples, seed)
    return InitialFluctuation(s2, float(a), aa, s2_err, aa_err)


# --- the bounds ------------------------------------------------------------

def initial_term(lam, n, fl):
    """ln 2 + lam^2 sigma^2/(2N) + lam^3 A/(N^2 a^3); returns ``(value, valid)``."""
    value = LN2 + lam ** 2 * fl.sigma2 / (2 * n) + lam ** 3 * fl.big_a / (n ** 2 * fl.a ** 3)
    return value, lam <= fl.a * n


def dynamic_term(lam, horizon, kappa, jump_l, jump_v):
    """lam^2 e2(lam e^{2 kappa_- T} L) e1(-2 kappa T) V T."""
    if jump_l < 0 or jump_v < 0 or horizon < 0:
        raise DomainError("L, V and T must be >= 0")
    kneg = max(-kappa, 0.0)
    return (lam ** 2 * e2(lam * exp(2 * kneg * horizon) * jump_l)
            * e1(-2 * kappa * horizon) * jump_v * horizon)


@dataclass
class BoundReport:
    n: int
    horizon: float
    lam: float
    static_log: float
    quadratic: float
    cubic: float
    dynamic: float
    total: float
    valid: bool
    lambda_max: float
    tails: dict = field(default_factory=dict)

    def terms(self):
        return {"static_log": self.static_log, "quadratic": self.quadratic,
                "cubic": self.cubic, "dynamic": self.dynamic}


def lambda_max(n, horizon, c, fl):
    """Upper end of the admissible range, a e^{-|kappa| T} N."""
    return fl.a * exp(-abs(c.kappa) * horizon) * n


def synthetic_bound(n, horizon, lam, c, fl, strict=False, epsilons=()):
    """Bound on ln E[1{K <= N k1} U(lam (mu^N_T - mu_T))] for the full model.

    ``strict`` replaces the growth factor of the cubic initial term by
    e^{3|kappa|T}, which is what composing the initial-value bound at
    lam e^{|kappa| T} gives.
    """
    if lam < 0 or horizon < 0 or n < 2:
        raise DomainError("need lam >= 0, T >= 0 and N >= 2")
    k = abs(c.kappa)
    grow = exp(2 * k * horizon)
    quad = grow * lam ** 2 * fl.sigma2 / (2 * n)
    cubic = (exp(3 * k * horizon) if strict else grow) * lam ** 3 * fl.big_a / (n ** 2 * fl.a ** 3)
    dyn = (lam ** 2 * c.omega * horizon / n * e1(2 * k * horizon)
           * e2(lam * grow * c.ell * n ** (c.r / 2 - 1)))
    total = LN2 + quad + cubic + dyn
    lmax = lambda_max(n, horizon, c, fl)
    rep = BoundReport(n, horizon, lam, LN2, quad, cubic, dyn, total, lam <= lmax, lmax)
    rep.tails = {eps: tail_probability(total, lam, eps) for eps in epsilons}
    return rep


def tail_probability(ln_bound, lam, eps):
    """Markov bound P(||X|| >= eps) <= min(1, exp(ln_bound - lam eps))."""
    if lam < 0 or eps < 0:
        raise DomainError("lam and eps must be >= 0")
    x = ln_bound - lam * eps
    return 1.0 if x >= 0 else exp(x)


def optimize_lambda(n, horizon, eps, c, fl, strict=False):
    """Minimise ln B(lam) - lam eps over (0, lambda_max]; returns ``(lam*, p*)``.

    The objective is convex in lam, so golden-section search is exact up to
    its tolerance; both endpoints are compared as well.
    """
    if eps < 0:
        raise DomainError("eps must be >= 0")
    hi = lambda_max(n, horizon, c, fl)
    if not hi > 0:
        raise DomainError("empty admissible lambda range")

    def f(lam):
        return synthetic_bound(n, horizon, lam, c, fl, strict).total - lam * eps

    inv = (sqrt(5) - 1) / 2
    a, b = 0.0, hi
    x1, x2 = b - inv * (b - a), a + inv * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > GOLDEN_RTOL * max(a, 1e-12 * hi):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = f(x2)
    cands = [(f(0.0), 0.0), (f(hi), hi), (f(0.5 * (a + b)), 0.5 * (a + b))]
    best, lam = min(cands)
    return lam, min(1.0, exp(best))


def asymptotic_gaussian_bound(x, horizon, c, fl):
    """Large-N limit 2 exp(-x^2 / (2 [e^{2|kappa|T} sigma^2 + e1(2|kappa|T) omega T]))."""
    if x < 0:
        raise DomainError("x must be >= 0")
    k = abs(c.kappa)
    denom = exp(2 * k * horizon) * fl.sigma2 + e1(2 * k * horizon) * c.omega * horizon
    return 2 * exp(-x * x / (2 * denom))


def asymptotic_log_mgf(y, horizon, c, fl):
    """Limit of ln E[U(y sqrt(N) (mu^N_T - mu_T))] as N grows."""
    k = abs(c.kappa)
    return (LN2 + exp(2 * k * horizon) * fl.sigma2 * y * y / 2
            + e1(2 * k * horizon) * c.omega * horizon * y * y / 2)

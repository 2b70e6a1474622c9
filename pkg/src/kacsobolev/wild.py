"""Reference samples of the mean-field limit via McKean's branching trees.

For a cutoff Maxwellian kernel with total rate Lambda the limit law solves

    mu_t = e^{-Lambda t} mu_0 + int_0^t Lambda e^{-Lambda (t - tau)} Q+(mu_tau, mu_tau) dtau

where Q+(mu, mu) is the law of the first output of a collision between two
independent mu-distributed velocities.  A sample of mu_t is therefore a
leaf of mu_0 with probability e^{-Lambda t}, and otherwise the collision of
two independent samples of mu_tau at a random earlier time tau.  Trees are
grown breadth-first for a whole batch of roots at once.
"""
import csv
import logging
from dataclasses import dataclass
from math import exp, sqrt

import numpy as np

from . import _pairs
from .errors import DomainError, InvariantViolation
from .particles import make_rng

log = logging.getLogger(__name__)

NODE_BUDGET = 4_000_000
NEGATIVE_RTOL = 1e-9


@dataclass(frozen=True)
class WildTreeSpec:
    kernel: object
    law: object
    horizon: float
    max_depth: int = 64

    def __post_init__(self):
        if self.horizon < 0:
            raise DomainError("horizon must be >= 0")
        if self.max_depth < 1:
            raise DomainError("max_depth must be >= 1")
        rate = self.kernel.total_rate
        if not np.isfinite(rate * self.horizon):
            raise DomainError("Lambda * t must be finite")


@dataclass
class WildStats:
    samples: int = 0
    nodes: int = 0
    depth_exceeded: int = 0


def collide_first(v, w, theta, gauss):
    """Vectorised first output of ``collide`` for rows of v, w."""
    u = w - v
    speed = np.linalg.norm(u, axis=1)
    moving = speed > 0
    u_hat = np.zeros_like(u)
    u_hat[moving] = u[moving] / speed[moving, None]
    e = gauss - np.sum(gauss * u_hat, axis=1, keepdims=True) * u_hat
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    u_new = speed[:, None] * (np.cos(theta)[:, None] * u_hat + np.sin(theta)[:, None] * e)
    out = 0.5 * (v + w) - 0.5 * u_new
    out[~moving] = v[~moving]
    return out


def _batch(spec, m, rng, stats):
    lam = spec.kernel.total_rate
    d = spec.law.d
    times = np.full(m, float(spec.horizon))
    roots = np.arange(m)
    levels = []
    bad = np.array([], dtype=np.int64)
    for _ in range(spec.max_depth):
        hold = rng.exponential(1.0 / lam, len(times)) if lam > 0 else np.full(len(times), np.inf)
        internal = hold < times
        levels.append((internal, roots))
        if not internal.any():
            break
        child_t = np.repeat(times[internal] - hold[internal], 2)
        roots = np.repeat(roots[internal], 2)
        times = child_t
    else:
        # children below max_depth are filled with leaves, then discarded
        levels.append((np.zeros(len(times), bool), roots))
        bad = np.unique(roots)

    stats.nodes += sum(len(r) for _, r in levels)
    values = None
    for internal, _ in reversed(levels):
        out = np.empty((len(internal), d))
        leaves = ~internal
        out[leaves] = spec.law.sample(int(leaves.sum()), rng)
        k = int(internal.sum())
        if k:
            theta = np.asarray(spec.kernel.sample(rng.random(k)), dtype=np.float64)
            gauss = rng.standard_normal((k, d))
            out[internal] = collide_first(values[0::2], values[1::2], theta, gauss)
        values = out
    if len(bad):
        stats.depth_exceeded += len(bad)
        log.warning("%d Wild trees exceeded depth %d; resampling", len(bad), spec.max_depth)
        values[bad] = _batch(spec, len(bad), rng, stats)
    return values


def wild_samples(spec, m, rng, stats=None):
    """``m`` i.i.d. samples of the limit law at ``spec.horizon``."""
    rng = make_rng(rng)
    stats = stats if stats is not None else WildStats()
    mean_nodes = 2 * exp(spec.kernel.total_rate * spec.horizon)
    per_batch = max(1, int(NODE_BUDGET / mean_nodes))
    parts = []
    done = 0
    while done < m:
        b = min(per_batch, m - done)
        parts.append(_batch(spec, b, rng, stats))
        done += b
    stats.samples += m
    return np.vstack(parts) if parts else np.zeros((0, spec.law.d))


def wild_sample(spec, rng):
    """One sample of the limit law."""
    return wild_samples(spec, 1, rng)[0]


class ReferenceMeasure:
    """Atomic probability measure standing in for the limit law at ``horizon``.

    Uniform weights unless ``weights`` is given.  Its pairwise self-energy is
    cached per exponent since it is shared by every distance evaluation.
    """

    def __init__(self, points, horizon, weights=None, stats=None):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.horizon = float(horizon)
        self.uniform = weights is None
        n = len(self.points)
        self.weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float)
        self.stats = stats
        self._self_sums = {}

    def __len__(self):
        return len(self.points)

    def self_sum(self, two_r):
        """sum_ij w_i w_j |y_i - y_j|^{2r}."""
        if two_r not in self._self_sums:
            if self.uniform:
                self._self_sums[two_r] = _pairs.self_sum(self.points, two_r) / len(self) ** 2
            else:
                self._self_sums[two_r] = _pairs.weighted_form(self.points, self.weights, two_r)[0]
        return self._self_sums[two_r]

    def cross_mean(self, x, two_r):
        """(1/n) sum_i sum_j w_j |x_i - y_j|^{2r}."""
        if self.uniform:
            return _pairs.cross_sum(x, self.points, two_r) / (len(x) * len(self))
        return sum(w * _pairs.cross_sum(x, y[None, :], two_r)
                   for w, y in zip(self.weights, self.points)) / len(x)

    def distance(self, x, index):
        """H^{-s} distance from the empirical measure of rows ``x`` to this measure."""
        two_r = 2 * index.r
        n = len(x)
        sxx = _pairs.self_sum(x, two_r) / n ** 2
        cross = self.cross_mean(x, two_r)
        syy = self.self_sum(two_r)
        form = 2 * cross - sxx - syy
        if form < 0.0:
            if form < -NEGATIVE_RTOL * (2 * cross + sxx + syy):
                raise InvariantViolation(f"negative energy distance {form:.3e}")
            form = 0.0
        return index.C_r * sqrt(0.5 * form)

    def to_measure(self):
        from .sobolev import AtomicSignedMeasure
        return AtomicSignedMeasure(self.points, self.weights)


def reference_measure(spec, m, seed):
    """Empirical measure of ``m`` Wild samples, deterministic in ``seed``."""
    if m < 1:
        raise DomainError("reference size must be >= 1")
    stats = WildStats()
    pts = wild_samples(spec, int(m), make_rng(seed), stats)
    return ReferenceMeasure(pts, spec.horizon, stats=stats)


def exact_reference(law, horizon=0.0):
    """The initial law itself when it is discrete (exact at time 0)."""
    if not law.is_discrete:
        raise DomainError("exact reference needs a discrete law")
    return ReferenceMeasure(law.atoms, horizon, weights=law.probs)


def equilibrium_moments(energy, d):
    """Per-coordinate variance 2k/d and fourth moment 3 (2k/d)^2 of the Maxwellian."""
    if energy < 0:
        raise DomainError("energy must be >= 0")
    var = 2.0 * energy / d
    return var, 3.0 * var ** 2


def write_reference_csv(path, ref):
    """One row per atom: weight, v1..vd."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["weight"] + [f"v{k + 1}" for k in range(ref.points.shape[1])])
        for wt, row in zip(ref.weights, ref.points):
            w.writerow([repr(float(wt))] + [repr(float(x)) for x in row])

"""Exact event-driven simulation of the N-particle Maxwellian collision process.

Every unordered pair {i, j}, i != j, collides at rate Lambda / N, so the
whole system jumps at the constant rate (N - 1) Lambda / 2.  Holding times,
pair choices, deviation angles and azimuth draws are pre-sampled in chunks
from one Philox stream and consumed in order by a compiled loop, which keeps
a trajectory a pure function of its seed.
"""
import csv
from dataclasses import dataclass, field
from math import inf, sqrt

import numpy as np
from numba import njit

from .errors import DomainError, InvariantViolation

CHUNK = 1 << 15
SPEED_RTOL = 1e-12


def make_rng(seed):
    """Counter-based generator from an int seed or a ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def derived_seed(master, *keys):
    """Independent stream for ``keys`` (e.g. N, replica) under ``master``."""
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))


class _EventStream:
    """Chunked pre-draws of the randomness one collision needs."""

    def __init__(self, rng, n, d, rate, kernel):
        self.rng, self.n, self.d, self.rate, self.kernel = rng, n, d, rate, kernel
        self.pos = 0
        self.size = 0
        self._refill()

    def _refill(self):
        rng = self.rng
        self.dt = rng.exponential(1.0 / self.rate, CHUNK) if self.rate > 0 else np.full(CHUNK, inf)
        i = rng.integers(0, self.n, CHUNK)
        j = rng.integers(0, self.n - 1, CHUNK)
        j = j + (j >= i)
        self.i, self.j = i.astype(np.int64), j.astype(np.int64)
        self.theta = np.asarray(self.kernel.sample(rng.random(CHUNK)), dtype=np.float64)
        self.gauss = rng.standard_normal((CHUNK, self.d))
        self.pos = 0
        self.size = CHUNK


@njit(cache=True, nogil=True)
def _advance(vel, last_jump, t_stop, max_events, dt, ii, jj, theta, gauss, pos):
    """Apply collisions until the next jump would pass ``t_stop``.

    Returns (last_jump, pos, events_done).  A jump scheduled after
    ``t_stop`` is left pending at ``pos``.
    """
    d = vel.shape[1]
    n_chunk = dt.shape[0]
    done = 0
    u = np.empty(d)
    e = np.empty(d)
    while pos < n_chunk and done < max_events:
        t_next = last_jump + dt[pos]
        if t_next > t_stop:
            break
        i = ii[pos]
        j = jj[pos]
        speed2 = 0.0
        for k in range(d):
            u[k] = vel[j, k] - vel[i, k]
            speed2 += u[k] * u[k]
        if speed2 > 0.0:
            speed = sqrt(speed2)
            gu = 0.0
            for k in range(d):
                u[k] /= speed
                gu += gauss[pos, k] * u[k]
            en = 0.0
            for k in range(d):
                e[k] = gauss[pos, k] - gu * u[k]
                en += e[k] * e[k]
            en = sqrt(en)
            c = np.cos(theta[pos])
            s = np.sin(theta[pos])
            for k in range(d):
                half = 0.5 * speed * (c * u[k] + s * e[k] / en)
                mid = 0.5 * (vel[i, k] + vel[j, k])
                vel[i, k] = mid - half
                vel[j, k] = mid + half
        last_jump = t_next
        pos += 1
        done += 1
    return last_jump, pos, done


@dataclass
class Ensemble:
    """Particle velocities plus the simulation clock and random stream."""

    velocities: np.ndarray
    time: float = 0.0
    collisions: int = 0
    rng: np.random.Generator = field(default=None, repr=False)
    last_jump: float = 0.0
    _stream: object = field(default=None, repr=False)

    def __post_init__(self):
        self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)
        if self.velocities.ndim != 2 or len(self.velocities) < 2:
            raise DomainError("an ensemble needs at least 2 particles")
        if self.rng is None:
            self.rng = make_rng(0)

    @property
    def n(self):
        return self.velocities.shape[0]

    @property
    def d(self):
        return self.velocities.shape[1]


def sample_initial(law, n, seed):
    """N i.i.d. velocities from ``law``; the same stream then drives collisions."""
    if n < 2:
        raise DomainError(f"N must be >= 2, got {n}")
    rng = make_rng(seed)
    return Ensemble(law.sample(int(n), rng), rng=rng)


def observables(velocities):
    """Momentum P, energy K and internal energy K - |P|^2 / (2N)."""
    v = np.asarray(velocities.velocities if isinstance(velocities, Ensemble) else velocities,
                   dtype=np.float64)
    if v.ndim != 2 or len(v) == 0:
        raise DomainError("observables of an empty ensemble")
    p = v.sum(axis=0)
    k = 0.5 * float(np.sum(v * v))
    k_int = max(k - float(p @ p) / (2 * len(v)), 0.0)
    return p, k, k_int


def total_rate(ensemble, kernel):
    """Jump rate of the whole system: C(N, 2) pairs at rate Lambda / N each."""
    if kernel.density is None and not kernel.atoms:
        raise DomainError("only Maxwellian kernels with a known total rate are supported")
    n = ensemble.n if isinstance(ensemble, Ensemble) else int(ensemble)
    return (n - 1) * kernel.total_rate / 2


def _stream(ensemble, kernel):
    st = ensemble._stream
    if st is None or st.kernel is not kernel:
        st = _EventStream(ensemble.rng, ensemble.n, ensemble.d,
                          total_rate(ensemble, kernel), kernel)
        ensemble._stream = st
    return st


def _run(ensemble, kernel, t_stop, max_events):
    st = _stream(ensemble, kernel)
    remaining = max_events
    while remaining > 0:
        if st.pos >= st.size:
            st._refill()
        last, pos, done = _advance(ensemble.velocities, ensemble.last_jump, t_stop,
                                   remaining, st.dt, st.i, st.j, st.theta, st.gauss, st.pos)
        ensemble.last_jump = last
        ensemble.collisions += done
        remaining -= done
        st.pos = pos
        if pos < st.size:
            break
    return max_events - remaining


def step(ensemble, kernel):
    """Advance to the next collision and apply it (in place); returns the ensemble."""
    if total_rate(ensemble, kernel) <= 0:
        ensemble.time = inf
        return ensemble
    _run(ensemble, kernel, inf, 1)
    ensemble.time = ensemble.last_jump
    return ensemble


def run_collisions(ensemble, kernel, count):
    """Apply exactly ``count`` collisions regardless of the clock."""
    _run(ensemble, kernel, inf, int(count))
    ensemble.time = ensemble.last_jump
    return ensemble


@dataclass
class Snapshot:
    time: float
    momentum: np.ndarray
    energy: float
    internal_energy: float
    collisions: int
    max_speed: float
    velocities: np.ndarray = None


@dataclass
class TrajectoryRecord:
    times: list
    snapshots: list

    def __getitem__(self, k):
        return self.snapshots[k]


def snapshot(ensemble, keep_velocities=True):
    p, k, k_int = observables(ensemble)
    vmax = float(np.sqrt(np.max(np.sum(ensemble.velocities ** 2, axis=1))))
    if vmax > sqrt(2 * k) * (1 + SPEED_RTOL) + 1e-300:
        raise InvariantViolation(f"particle speed {vmax} exceeds sqrt(2K) = {sqrt(2 * k)}")
    return Snapshot(ensemble.time, p, k, k_int, ensemble.collisions, vmax,
                    ensemble.velocities.copy() if keep_velocities else None)


def simulate(ensemble, kernel, horizon, checkpoints=None, keep_velocities=True):
    """Run the jump chain to ``horizon`` recording the state at each checkpoint.

    A snapshot at time t holds the state after the last jump at or before t.
    The ensemble is advanced in place.
    """
    if checkpoints is None:
        checkpoints = [horizon]
    checkpoints = [float(c) for c in checkpoints]
    if any(b < a for a, b in zip(checkpoints, checkpoints[1:])):
        raise DomainError("checkpoints must be sorted")
    if checkpoints and (checkpoints[0] < ensemble.time or checkpoints[-1] > horizon):
        raise DomainError("checkpoints must lie within [current time, horizon]")
    snaps = []
    rate = total_rate(ensemble, kernel)
    for c in checkpoints:
        if rate > 0:
            _run(ensemble, kernel, c, np.iinfo(np.int64).max)
        ensemble.time = c
        snaps.append(snapshot(ensemble, keep_velocities))
    if rate > 0 and horizon > ensemble.time:
        _run(ensemble, kernel, horizon, np.iinfo(np.int64).max)
    ensemble.time = float(horizon)
    return TrajectoryRecord(checkpoints, snaps)


def write_velocities_csv(path, velocities):
    """One row per particle: index, v1..vd."""
    velocities = np.asarray(velocities)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"v{k + 1}" for k in range(velocities.shape[1])])
        for i, row in enumerate(velocities):
            w.writerow([i] + [repr(float(x)) for x in row])

"""Initial velocity laws."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class InitialLaw:
    """Law of one initial velocity.

    ``kind`` is ``"discrete"`` (``atoms`` with ``probs``), ``"gaussian"``
    (centred isotropic, mean energy ``energy`` per particle) or
    ``"sampler"`` (``sampler(rng, n)`` returning an ``(n, d)`` array).
    """

    kind: str
    d: int
    atoms: Optional[np.ndarray] = field(default=None, compare=False)
    probs: Optional[np.ndarray] = field(default=None, compare=False)
    energy: float = 0.0
    sampler: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("law dimension must be >= 1")
        if self.kind == "discrete":
            atoms = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
            probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
            if atoms.shape != (len(probs), self.d):
                raise ConfigError(f"atoms must have shape ({len(probs)}, {self.d})")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ConfigError("atom probabilities must be >= 0 and sum to 1")
            if not np.all(np.isfinite(atoms)):
                raise ConfigError("atoms must be finite")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "probs", probs)
        elif self.kind == "gaussian":
            if not (self.energy >= 0 and np.isfinite(self.energy)):
                raise ConfigError("gaussian energy must be finite and >= 0")
        elif self.kind == "sampler":
            if self.sampler is None:
                raise ConfigError("sampler law needs a sampler callable")
        else:
            raise ConfigError(f"unknown law kind {self.kind!r}")

    @property
    def is_discrete(self):
        return self.kind == "discrete"

    @property
    def coordinate_variance(self):
        """Per-coordinate variance of the gaussian law (2k/d)."""
        return 2.0 * self.energy / self.d

    def sample(self, n, rng):
        if self.kind == "discrete":
            idx = rng.choice(len(self.probs), size=n, p=self.probs)
            return self.atoms[idx].copy()
        if self.kind == "gaussian":
            return rng.standard_normal((n, self.d)) * np.sqrt(self.coordinate_variance)
        out = np.asarray(self.sampler(rng, n), dtype=np.float64)
        if out.shape != (n, self.d):
            raise ConfigError(f"sampler returned shape {out.shape}, expected {(n, self.d)}")
        return out

    def mean_energy(self):
        """k = E|v|^2 / 2 for discrete and gaussian laws."""
        if self.kind == "discrete":
            return 0.5 * float(self.probs @ np.sum(self.atoms ** 2, axis=1))
        if self.kind == "gaussian":
            return self.energy
        raise ConfigError("mean energy of a sampler law is not known in closed form")


def discrete_law(atoms, probs):
    atoms = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
    return InitialLaw("discrete", atoms.shape[1], atoms=atoms, probs=probs)


def two_atom_law(d=3, speed=1.0):
    """Half the mass at -speed e_1, half at +speed e_1."""
    e1 = np.zeros(d)
    e1[0] = speed
    return discrete_law(np.vstack([-e1, e1]), [0.5, 0.5])


def gaussian_law(d, energy):
    return InitialLaw("gaussian", d, energy=float(energy))

"""Experiment configuration: INI-style sections with a fixed set of keys.

Example::

    [model]
    d = 3
    r = 0.5
    kernel = kac
    law = two_atom
    k1 = 0.5
    a = 1.0

    [run]
    n = 500, 1000, 2000, 4000
    t = 1.0
    replicas = 100
    seed = 12345

    [bound]
    lambda = 500
    epsilon = 0.01

    [reference]
    wild_samples = 200000

    [output]
    dir = results

Unknown sections or keys are rejected.  Lists are comma separated; the
atoms of a discrete law are separated by semicolons.
"""
import configparser
from dataclasses import dataclass, field, replace
from typing import Optional

from .collisions import kernel_from_name
from .errors import ConfigError, DomainError
from .laws import discrete_law, gaussian_law, two_atom_law
from .sobolev import SobolevIndex

KEYS = {
    "model": {"d", "r", "kernel", "cutoff", "law", "atoms", "probs", "energy",
              "speed", "k1", "a", "strict_cubic"},
    "run": {"n", "t", "checkpoints", "replicas", "seed"},
    "bound": {"lambda", "epsilon"},
    "reference": {"wild_samples", "particle_n", "max_depth"},
    "output": {"dir"},
}


@dataclass
class ModelBlock:
    d: int = 3
    r: float = 0.5
    kernel: str = "kac"
    cutoff: float = 0.01
    law: str = "two_atom"
    atoms: Optional[list] = None
    probs: Optional[list] = None
    energy: float = 0.5
    speed: float = 1.0
    k1: Optional[float] = None
    a: float = 1.0
    strict_cubic: bool = False

    def index(self):
        return SobolevIndex(self.d, self.r)

    def angular_kernel(self):
        return kernel_from_name(self.kernel, self.d, cutoff=self.cutoff)

    def initial_law(self):
        if self.law == "two_atom":
            return two_atom_law(self.d, self.speed)
        if self.law == "discrete":
            return discrete_law(self.atoms, self.probs)
        if self.law == "gaussian":
            return gaussian_law(self.d, self.energy)
        raise ConfigError(f"unknown law {self.law!r}")

    def energy_cap(self):
        if self.k1 is not None:
            return self.k1
        return self.initial_law().mean_energy()


@dataclass
class RunBlock:
    n: list = field(default_factory=lambda: [1000])
    t: float = 1.0
    checkpoints: Optional[list] = None
    replicas: int = 10
    seed: int = 0

    def checkpoint_times(self):
        return self.checkpoints if self.checkpoints is not None else [self.t]


@dataclass
class BoundBlock:
    lambdas: Optional[list] = None  # None means optimise per epsilon
    epsilons: Optional[list] = None  # None means automatic grid


@dataclass
class ReferenceBlock:
    wild_samples: Optional[int] = 200_000
    particle_n: Optional[int] = None
    max_depth: int = 64


@dataclass
class ExperimentConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    run: Optional[RunBlock] = None
    bound: Optional[BoundBlock] = None
    reference: ReferenceBlock = field(default_factory=ReferenceBlock)
    out_dir: str = "out"

    def with_overrides(self, seed=None, out_dir=None):
        cfg = replace(self)
        if seed is not None:
            if cfg.run is None:
                cfg.run = RunBlock()
            cfg.run = replace(cfg.run, seed=int(seed))
        if out_dir is not None:
            cfg.out_dir = out_dir
        return cfg


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_config(text):
    """Parse and validate configuration text into an ``ExperimentConfig``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    for section in cp.sections():
        if section not in KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(cp[section]) - KEYS[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")
    try:
        cfg = _build(cp)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    validate(cfg)
    return cfg


def _build(cp):
    cfg = ExperimentConfig()
    if cp.has_section("model"):
        s = cp["model"]
        m = cfg.model
        m.d = _ints(s.get("d", "3"))[0]
        m.r = float(s.get("r", "0.5"))
        m.kernel = s.get("kernel", m.kernel).strip()
        m.cutoff = float(s.get("cutoff", str(m.cutoff)))
        m.law = s.get("law", m.law).strip()
        if "atoms" in s:
            m.atoms = [_floats(a) for a in s["atoms"].split(";") if a.strip()]
        if "probs" in s:
            m.probs = _floats(s["probs"])
        m.energy = float(s.get("energy", str(m.energy)))
        m.speed = float(s.get("speed", str(m.speed)))
        if "k1" in s:
            m.k1 = float(s["k1"])
        m.a = float(s.get("a", str(m.a)))
        m.strict_cubic = _bool(s.get("strict_cubic", "false"))
    if cp.has_section("run"):
        s = cp["run"]
        run = RunBlock()
        if "n" in s:
            run.n = _ints(s["n"])
        run.t = float(s.get("t", str(run.t)))
        if "checkpoints" in s:
            run.checkpoints = _floats(s["checkpoints"])
        run.replicas = _ints(s.get("replicas", str(run.replicas)))[0]
        run.seed = _ints(s.get("seed", "0"))[0]
        cfg.run = run
    if cp.has_section("bound"):
        s = cp["bound"]
        b = BoundBlock()
        lam = s.get("lambda", "auto").strip()
        b.lambdas = None if lam == "auto" else _floats(lam)
        eps = s.get("epsilon", "auto").strip()
        b.epsilons = None if eps == "auto" else _floats(eps)
        cfg.bound = b
    if cp.has_section("reference"):
        s = cp["reference"]
        ref = ReferenceBlock()
        if "particle_n" in s:
            ref.particle_n = _ints(s["particle_n"])[0]
            ref.wild_samples = None
        if "wild_samples" in s:
            ref.wild_samples = _ints(s["wild_samples"])[0]
        ref.max_depth = _ints(s.get("max_depth", "64"))[0]
        cfg.reference = ref
    if cp.has_section("output"):
        cfg.out_dir = cp["output"].get("dir", cfg.out_dir)
    return cfg


def validate(cfg):
    """Check every range before any computation starts."""
    m = cfg.model
    try:
        m.index()
        law = m.initial_law()
        m.angular_kernel()
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    if law.d != m.d:
        raise ConfigError(f"law dimension {law.d} differs from d = {m.d}")
    if m.a <= 0:
        raise ConfigError("a must be > 0")
    if m.k1 is not None and m.k1 < 0:
        raise ConfigError("k1 must be >= 0")
    if m.law == "gaussian" and m.energy < 0:
        raise ConfigError("energy must be >= 0")
    run = cfg.run
    if run is not None:
        if not run.n:
            raise ConfigError("N list is empty")
        if any(n < 2 for n in run.n):
            raise ConfigError("every N must be >= 2")
        if run.t < 0:
            raise ConfigError("T must be >= 0")
        if run.replicas < 1:
            raise ConfigError("replica count must be >= 1")
        cps = run.checkpoint_times()
        if any(c < 0 or c > run.t for c in cps) or list(cps) != sorted(cps):
            raise ConfigError("checkpoints must be sorted and lie in [0, T]")
    if cfg.bound is not None:
        if cfg.bound.lambdas is not None and any(x <= 0 for x in cfg.bound.lambdas):
            raise ConfigError("lambda values must be > 0")
        if cfg.bound.epsilons is not None and any(x < 0 for x in cfg.bound.epsilons):
            raise ConfigError("epsilon values must be >= 0")
    ref = cfg.reference
    if ref.wild_samples is not None and ref.wild_samples < 1:
        raise ConfigError("wild_samples must be >= 1")
    if ref.particle_n is not None and ref.particle_n < 2:
        raise ConfigError("particle_n must be >= 2")
    if ref.max_depth < 1:
        raise ConfigError("max_depth must be >= 1")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def reference_scenario_config():
    """Kac d=3, r=1/2, two-atom start, N=8e5, T=3, lambda=500, eps=1e-2."""
    return parse_config("""
[model]
d = 3
r = 0.5
kernel = kac
law = two_atom
k1 = 0.5
a = 1.0
[run]
n = 800000
t = 3
[bound]
lambda = 500
epsilon = 0.01
""")


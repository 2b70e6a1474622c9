"""Config-driven runs: bound reports, convergence studies and tail checks.

Every random stream is derived from (master seed, purpose, ...) so outputs
are reproducible bit for bit and independent of replica scheduling.
"""
import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import sqrt
from statistics import NormalDist

import numpy as np

from . import _pairs
from .bounds import initial_fluctuation, model_constants, optimize_lambda, synthetic_bound
from .errors import ConfigError
from .particles import derived_seed, make_rng, observables, sample_initial, simulate
from .wild import ReferenceMeasure, WildTreeSpec, exact_reference, reference_measure

log = logging.getLogger(__name__)

CONVERGE_HEADER = ["N", "replica", "checkpoint_time", "distance", "collisions", "K", "Ktilde"]
TAIL_HEADER = ["epsilon", "lambda_star", "theoretical_bound", "empirical_freq",
               "ci_low", "ci_high", "dominated"]
BOUND_HEADER = ["lambda", "epsilon", "static_log", "quadratic", "cubic", "dynamic",
                "total", "valid", "tail_probability"]

# stream tags under the master seed
REFERENCE_STREAM = 0
REPLICA_STREAM = 1
BOOTSTRAP_STREAM = 2
FLUCTUATION_STREAM = 3


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_kv(path, items):
    with open(path, "w") as fh:
        for key, val in items:
            fh.write(f"{key} = {val if isinstance(val, str) else _fmt(val)}\n")


def _setup(cfg):
    m = cfg.model
    index = m.index()
    kernel = m.angular_kernel()
    law = m.initial_law()
    seed = cfg.run.seed if cfg.run is not None else 0
    consts = model_constants(index, kernel, m.energy_cap())
    fl = initial_fluctuation(law, m.a, index, seed=derived_seed(seed, FLUCTUATION_STREAM))
    return index, kernel, law, consts, fl


# --- bound report ----------------------------------------------------------

def run_bound_report(cfg):
    """Constants, synthetic bounds and tail probabilities for each (lambda, eps)."""
    if cfg.run is None:
        raise ConfigError("bound-report needs a [run] section with n and t")
    if cfg.bound is None:
        raise ConfigError("bound-report needs a [bound] section")
    index, kernel, law, c, fl = _setup(cfg)
    eps_list = cfg.bound.epsilons
    if eps_list is None:
        raise ConfigError("bound-report needs explicit epsilon values")
    strict = cfg.model.strict_cubic
    rows = []
    reports = []
    for n in cfg.run.n:
        for eps in eps_list:
            lams = cfg.bound.lambdas
            if lams is None:
                lams = [optimize_lambda(n, cfg.run.t, eps, c, fl, strict)[0]]
            for lam in lams:
                rep = synthetic_bound(n, cfg.run.t, lam, c, fl, strict, epsilons=[eps])
                reports.append(rep)
                rows.append([n, lam, eps, rep.static_log, rep.quadratic, rep.cubic,
                             rep.dynamic, rep.total, rep.valid, rep.tails[eps]])
    os.makedirs(cfg.out_dir, exist_ok=True)
    kv = [("d", index.d), ("r", index.r), ("s", index.s), ("kernel", kernel.name),
          ("C_r", index.C_r), ("c_sd", index.c_sd), ("kappa", c.kappa),
          ("minus_kappa", -c.kappa), ("k1", c.k1), ("ell", c.ell), ("omega", c.omega),
          ("sigma2", fl.sigma2), ("a", fl.a), ("A", fl.big_a), ("T", cfg.run.t),
          ("strict_cubic", strict)]
    for k, row in enumerate(rows):
        n, lam, eps = row[:3]
        kv += [(f"case{k}.N", n), (f"case{k}.lambda", lam), (f"case{k}.epsilon", eps),
               (f"case{k}.static_log", row[3]), (f"case{k}.quadratic", row[4]),
               (f"case{k}.cubic", row[5]), (f"case{k}.dynamic", row[6]),
               (f"case{k}.total", row[7]), (f"case{k}.valid", row[8]),
               (f"case{k}.tail_probability", row[9])]
    _write_kv(os.path.join(cfg.out_dir, "bound_report.txt"), kv)
    header = ["N"] + BOUND_HEADER
    _write_csv(os.path.join(cfg.out_dir, "bound_report.csv"), header, rows)
    return {"constants": c, "fluctuation": fl, "index": index, "reports": reports,
            "rows": rows}


# --- simulation helpers ------------------------------------------------------

def build_references(cfg, law, kernel, times):
    """Shared reference measure per checkpoint time."""
    ref_cfg = cfg.reference
    seed = cfg.run.seed
    refs = {}
    for k, t in enumerate(times):
        if t == 0 and law.is_discrete:
            refs[t] = exact_reference(law, 0.0)
        elif ref_cfg.particle_n is not None and ref_cfg.wild_samples is None:
            ens = sample_initial(law, ref_cfg.particle_n, derived_seed(seed, REFERENCE_STREAM, 1, k))
            simulate(ens, kernel, t, [t], keep_velocities=False)
            refs[t] = ReferenceMeasure(ens.velocities.copy(), t)
        else:
            spec = WildTreeSpec(kernel, law, t, ref_cfg.max_depth)
            refs[t] = reference_measure(spec, ref_cfg.wild_samples,
                                        derived_seed(seed, REFERENCE_STREAM, 0, k))
            if refs[t].stats.depth_exceeded:
                log.warning("reference at t=%g: %d depth exceedances", t,
                             refs[t].stats.depth_exceeded)
    return refs


def _replica(law, kernel, index, n, rep, seed, times, refs):
    ens = sample_initial(law, n, derived_seed(seed, REPLICA_STREAM, n, rep))
    rows = []
    for t in times:
        simulate(ens, kernel, t, [t], keep_velocities=False)
        _, k, k_int = observables(ens)
        dist = refs[t].distance(ens.velocities, index)
        rows.append((n, rep, t, dist, ens.collisions, k, k_int))
    return rows


def run_replicas(cfg, law, kernel, index, refs, threads=1):
    """All (N, replica, checkpoint) rows, sorted canonically."""
    seed = cfg.run.seed
    times = cfg.run.checkpoint_times()
    for t in times:
        refs[t].self_sum(2 * index.r)  # fill the cache before threads share it
    jobs = [(n, rep) for n in sorted(cfg.run.n) for rep in range(cfg.run.replicas)]
    if threads > 1:
        saved = _pairs.get_threads()
        _pairs.set_threads(1)
        try:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(
                    lambda job: _replica(law, kernel, index, job[0], job[1], seed, times, refs),
                    jobs))
        finally:
            _pairs.set_threads(saved)
    else:
        parts = [_replica(law, kernel, index, n, rep, seed, times, refs) for n, rep in jobs]
    rows = [row for part in parts for row in part]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


# --- convergence -------------------------------------------------------------

@dataclass
class RunSummary:
    checkpoint_time: float
    ns: list
    medians: list
    quantiles: dict = field(default_factory=dict)
    tail_freqs: dict = field(default_factory=dict)
    slope: float = float("nan")
    intercept: float = float("nan")
    slope_ci: tuple = (float("nan"), float("nan"))
    residuals: list = field(default_factory=list)


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def _fit(ns, meds):
    x = np.log(np.asarray(ns, float))
    y = np.log(np.asarray(meds, float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), (y - (slope * x + intercept)).tolist()


def summarize(rows, t, replicas, seed, epsilons=(), boot=1000):
    """Medians, quantiles and the log-log slope of median distance against N."""
    by_n = {}
    for n, rep, ct, dist, *_ in rows:
        if ct == t:
            by_n.setdefault(n, []).append(dist)
    ns = sorted(by_n)
    dists = [np.asarray(by_n[n]) for n in ns]
    meds = [float(np.median(d)) for d in dists]
    summ = RunSummary(t, ns, meds)
    if replicas >= 2:
        summ.quantiles = {n: [float(q) for q in np.quantile(d, QUANTILES)]
                          for n, d in zip(ns, dists)}
    for eps in epsilons:
        summ.tail_freqs[eps] = {n: float(np.mean(d >= eps)) for n, d in zip(ns, dists)}
    if len(ns) >= 2 and all(m > 0 for m in meds):
        summ.slope, summ.intercept, summ.residuals = _fit(ns, meds)
        if replicas >= 2:
            rng = make_rng(derived_seed(seed, BOOTSTRAP_STREAM))
            slopes = []
            for _ in range(boot):
                bm = [float(np.median(d[rng.integers(0, len(d), len(d))])) for d in dists]
                if all(m > 0 for m in bm):
                    slopes.append(_fit(ns, bm)[0])
            if slopes:
                summ.slope_ci = (float(np.quantile(slopes, 0.025)),
                                 float(np.quantile(slopes, 0.975)))
    return summ


def run_convergence_experiment(cfg, threads=1):
    """Distances of many particle runs to a shared reference, for each N."""
    if cfg.run is None or not cfg.run.n:
        raise ConfigError("converge needs a [run] section with a nonempty N list")
    index = cfg.model.index()
    kernel = cfg.model.angular_kernel()
    law = cfg.model.initial_law()
    times = cfg.run.checkpoint_times()
    refs = build_references(cfg, law, kernel, times)
    rows = run_replicas(cfg, law, kernel, index, refs, threads)
    eps = cfg.bound.epsilons if cfg.bound is not None and cfg.bound.epsilons else ()
    summaries = [summarize(rows, t, cfg.run.replicas, cfg.run.seed, eps) for t in times]
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_csv(os.path.join(cfg.out_dir, "converge.csv"), CONVERGE_HEADER, rows)
    kv = []
    for s in summaries:
        p = f"t{_fmt(s.checkpoint_time)}"
        for n, med in zip(s.ns, s.medians):
            kv.append((f"{p}.N{n}.median", med))
            if n in s.quantiles:
                for q, v in zip(QUANTILES, s.quantiles[n]):
                    kv.append((f"{p}.N{n}.q{int(q * 100):02d}", v))
        for e, freqs in s.tail_freqs.items():
            for n, f in freqs.items():
                kv.append((f"{p}.N{n}.freq_ge_{_fmt(e)}", f))
        kv.append((f"{p}.slope", s.slope))
        kv.append((f"{p}.intercept", s.intercept))
        if cfg.run.replicas >= 2:
            kv.append((f"{p}.slope_ci_low", s.slope_ci[0]))
            kv.append((f"{p}.slope_ci_high", s.slope_ci[1]))
        for n, res in zip(s.ns, s.residuals):
            kv.append((f"{p}.N{n}.residual", res))
    for t, ref in refs.items():
        if ref.stats is not None:
            kv.append((f"reference.t{_fmt(t)}.depth_exceeded", ref.stats.depth_exceeded))
    _write_kv(os.path.join(cfg.out_dir, "converge_summary.txt"), kv)
    return rows, summaries


# --- bound vs empirical -------------------------------------------------------

def wilson_interval(k, m, level=0.95):
    z = NormalDist().inv_cdf(0.5 + level / 2)
    if m == 0:
        return 0.0, 1.0
    p = k / m
    den = 1 + z * z / m
    centre = (p + z * z / (2 * m)) / den
    half = z * sqrt(p * (1 - p) / m + z * z / (4 * m * m)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def auto_epsilons(dists, n, horizon, c, fl, strict, count=10, p_floor=1e-3):
    """Grid from the 10% distance quantile up to where the bound reaches ``p_floor``."""
    lo = float(np.quantile(dists, 0.1))
    hi = max(lo * 2, 1e-12)
    while optimize_lambda(n, horizon, hi, c, fl, strict)[1] > p_floor:
        hi *= 1.5
    return [float(x) for x in np.geomspace(max(lo, 1e-12), hi, count)]


def run_bound_vs_empirical(cfg, threads=1):
    """Empirical tail frequencies against the optimised theoretical tail bound."""
    if cfg.run is None or cfg.bound is None:
        raise ConfigError("tail-check needs both [run] and [bound] sections")
    if len(cfg.run.n) != 1:
        raise ConfigError("tail-check takes exactly one N")
    index, kernel, law, c, fl = _setup(cfg)
    horizon = cfg.run.t
    n = cfg.run.n[0]
    strict = cfg.model.strict_cubic
    run = cfg.run
    if run.checkpoints is not None and run.checkpoints != [horizon]:
        raise ConfigError("tail-check evaluates at T only; drop checkpoints")
    refs = build_references(cfg, law, kernel, [horizon])
    rows = run_replicas(cfg, law, kernel, index, refs, threads)
    dists = np.array([r[3] for r in rows])
    m = len(dists)
    eps_list = cfg.bound.epsilons
    if eps_list is None:
        eps_list = auto_epsilons(dists, n, horizon, c, fl, strict)
    out = []
    for eps in eps_list:
        lam, p = optimize_lambda(n, horizon, eps, c, fl, strict)
        hits = int(np.sum(dists >= eps))
        freq = hits / m
        lo, hi = wilson_interval(hits, m)
        se = sqrt(p * (1 - p) / m)
        out.append([eps, lam, p, freq, lo, hi, freq <= p + 3 * se])
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_csv(os.path.join(cfg.out_dir, "tail_check.csv"), TAIL_HEADER, out)
    _write_csv(os.path.join(cfg.out_dir, "tail_check_distances.csv"), CONVERGE_HEADER, rows)
    return out, rows


__all__ = ["run_bound_report", "run_convergence_experiment", "run_bound_vs_empirical",
           "summarize", "wilson_interval", "RunSummary", "CONVERGE_HEADER", "TAIL_HEADER"]

import csv
import subprocess
import sys
from math import exp

import numpy as np
import pytest
from scipy import stats

from kacsobolev import cli, experiments
from kacsobolev.bounds import initial_term
from kacsobolev.config import load_config, reference_scenario_config, parse_config
from kacsobolev.errors import ConfigError, InvariantViolation
from kacsobolev.experiments import (CONVERGE_HEADER, TAIL_HEADER, run_bound_report,
                                    run_bound_vs_empirical, run_convergence_experiment,
                                    summarize, wilson_interval)

SCENARIO = """
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
"""

SMALL_CONVERGE = """
[model]
d = 3
r = 0.5
law = two_atom
[run]
n = 60, 120
t = 0.5
checkpoints = 0.25, 0.5
replicas = 4
seed = 11
[bound]
epsilon = 0.05
[reference]
wild_samples = 800
"""


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# --- config parsing ---------------------------------------------------------------

def test_scenario_config_parses():
    cfg = reference_scenario_config()
    assert cfg.model.d == 3 and cfg.model.r == 0.5 and cfg.run.n == [800_000]
    assert cfg.bound.lambdas == [500.0] and cfg.bound.epsilons == [0.01]


@pytest.mark.parametrize("bad", [
    "[model]\nr = 1.2\n",
    "[model]\nd = 1\n",
    "[model]\ncolour = blue\n",
    "[physics]\nd = 3\n",
    "[run]\nn = 1\n",
    "[run]\nn =\n",
    "[run]\nt = -1\n",
    "[run]\nt = 1\ncheckpoints = 0.5, 2\n",
    "[run]\nt = 1\ncheckpoints = 0.8, 0.5\n",
    "[run]\nreplicas = 0\n",
    "[run]\nn = 10.5\n",
    "[bound]\nlambda = -3\n",
    "[model]\nlaw = discrete\natoms = 1 0 0; -1 0 0\nprobs = 0.5, 0.6\n",
    "[model]\nkernel = hard_spheres\n",
    "[model]\nkernel = maxwell_surrogate\ncutoff = 4\n",
    "[model]\nstrict_cubic = maybe\n",
    "[reference]\nwild_samples = 0\n",
    "not an ini file",
])
def test_invalid_configs_are_rejected(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_discrete_and_gaussian_laws_parse():
    cfg = parse_config("[model]\nd = 2\nlaw = discrete\natoms = 1 0; -1 0; 0 2\nprobs = 0.25, 0.25, 0.5\n")
    law = cfg.model.initial_law()
    assert law.atoms.shape == (3, 2) and cfg.model.energy_cap() == pytest.approx(1.25)
    cfg = parse_config("[model]\nlaw = gaussian\nenergy = 1.5\n[bound]\nlambda = auto\nepsilon = auto\n")
    assert cfg.model.energy_cap() == 1.5 and cfg.bound.lambdas is None and cfg.bound.epsilons is None


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))


# --- bound report --------------------------------------------------------------------

def test_bound_report_scenario(tmp_path):
    cfg = parse_config(SCENARIO).with_overrides(out_dir=str(tmp_path / "a"))
    out = run_bound_report(cfg)
    c, fl = out["constants"], out["fluctuation"]
    for got, paper in ((-c.kappa, 0.600), (c.ell, 0.432), (c.omega, 0.0933),
                       (fl.sigma2, 0.0398), (fl.big_a, 0.0213)):
        # published values are rounded up to three significant digits
        unit = 10.0 ** (np.floor(np.log10(paper)) - 2)
        assert paper - unit < got <= paper + 1e-12
    kv = dict(line.split(" = ") for line in (tmp_path / "a" / "bound_report.txt").read_text().splitlines())
    assert float(kv["case0.tail_probability"]) < 0.1
    assert kv["case0.valid"] == "true"
    rows = read_csv(tmp_path / "a" / "bound_report.csv")
    assert rows[0][1:] == experiments.BOUND_HEADER


def test_bound_report_is_deterministic(tmp_path):
    for name in ("a", "b"):
        run_bound_report(parse_config(SCENARIO).with_overrides(out_dir=str(tmp_path / name)))
    for f in ("bound_report.txt", "bound_report.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_bound_report_auto_lambda(tmp_path):
    text = SCENARIO.replace("lambda = 500", "lambda = auto")
    out = run_bound_report(parse_config(text).with_overrides(out_dir=str(tmp_path)))
    assert out["rows"][0][1] != 500.0
    assert out["rows"][0][-1] <= 0.0273


# --- convergence --------------------------------------------------------------------

def test_converge_outputs_and_determinism(tmp_path):
    cfg = parse_config(SMALL_CONVERGE)
    rows, summaries = run_convergence_experiment(cfg.with_overrides(out_dir=str(tmp_path / "a")))
    run_convergence_experiment(cfg.with_overrides(out_dir=str(tmp_path / "b")), threads=3)
    a = (tmp_path / "a" / "converge.csv").read_bytes()
    assert a == (tmp_path / "b" / "converge.csv").read_bytes()
    table = read_csv(tmp_path / "a" / "converge.csv")
    assert table[0] == CONVERGE_HEADER
    assert len(table) - 1 == 2 * 4 * 2
    keys = [(int(r[0]), int(r[1]), float(r[2])) for r in table[1:]]
    assert keys == sorted(keys)
    for s in summaries:
        for q in s.quantiles.values():
            assert q == sorted(q)
        assert len(s.residuals) == 2
    other = run_convergence_experiment(cfg.with_overrides(seed=12, out_dir=str(tmp_path / "c")))[0]
    assert [r[3] for r in other] != [r[3] for r in rows]


def test_converge_single_replica_omits_dispersion(tmp_path):
    cfg = parse_config(SMALL_CONVERGE.replace("replicas = 4", "replicas = 1"))
    rows, summaries = run_convergence_experiment(cfg.with_overrides(out_dir=str(tmp_path)))
    assert len(rows) == 2 * 2
    assert all(not s.quantiles for s in summaries)
    text = (tmp_path / "converge_summary.txt").read_text()
    assert "q25" not in text and "slope_ci" not in text and "median" in text


def test_converge_requires_n(tmp_path):
    cfg = parse_config("[model]\nd = 3\n")
    with pytest.raises(ConfigError):
        run_convergence_experiment(cfg)


def test_summary_slope_and_residuals():
    ns = [100, 400, 1600]
    rows = [(n, rep, 1.0, 2.0 / np.sqrt(n) * (1 + 0.01 * rep), 0, 0, 0) for n in ns for rep in range(5)]
    s = summarize(rows, 1.0, 5, seed=0)
    assert s.slope == pytest.approx(-0.5, abs=1e-12)
    assert np.allclose(s.residuals, 0, atol=1e-12)
    assert s.slope_ci[0] <= -0.5 <= s.slope_ci[1]


# --- tail check -------------------------------------------------------------------

def test_wilson_interval_matches_scipy():
    for k, m in ((0, 50), (7, 200), (50, 50), (333, 1000)):
        ci = stats.binomtest(k, m).proportion_ci(method="wilson")
        lo, hi = wilson_interval(k, m)
        assert lo == pytest.approx(ci.low, abs=1e-12) and hi == pytest.approx(ci.high, abs=1e-12)


TAIL = """
[model]
d = 3
r = 0.5
law = two_atom
[run]
n = 200
t = {t}
replicas = 150
seed = 5
[bound]
epsilon = {eps}
[reference]
wild_samples = 3000
"""


def test_tail_check_large_epsilon(tmp_path):
    cfg = parse_config(TAIL.format(t=0.5, eps="0.01, 10")).with_overrides(out_dir=str(tmp_path))
    out, rows = run_bound_vs_empirical(cfg)
    assert read_csv(tmp_path / "tail_check.csv")[0] == TAIL_HEADER
    big = out[1]
    assert big[3] == 0.0 and big[3] <= big[2] and big[6]


def test_tail_check_at_time_zero_uses_initial_term(tmp_path):
    cfg = parse_config(TAIL.format(t=0, eps="auto")).with_overrides(out_dir=str(tmp_path))
    out, rows = run_bound_vs_empirical(cfg)
    assert len(out) == 10
    fl = experiments._setup(cfg)[4]
    for eps, lam, p, freq, lo, hi, dom in out:
        assert dom
        # at T = 0 the synthetic bound is the initial-value bound
        assert p == pytest.approx(min(1.0, exp(initial_term(lam, 200, fl)[0] - lam * eps)), rel=1e-12)


def test_tail_check_needs_single_n(tmp_path):
    cfg = parse_config(TAIL.format(t=0.5, eps="0.1").replace("n = 200", "n = 100, 200"))
    with pytest.raises(ConfigError):
        run_bound_vs_empirical(cfg)
    with pytest.raises(ConfigError):
        run_bound_vs_empirical(parse_config("[run]\nn = 100\n"))


# --- command line -------------------------------------------------------------------

def test_cli_bound_report(tmp_path, capsys):
    path = write(tmp_path, SCENARIO)
    assert cli.main(["bound-report", "--config", path, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "bound_report.txt").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, SCENARIO.replace("r = 0.5", "r = 1.2"))
    assert cli.main(["bound-report", "--config", path, "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["converge", "--config", path, "--threads", "-1"]) == 2


def test_cli_numeric_error_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg, threads):
        raise InvariantViolation("speed bound broken")
    monkeypatch.setitem(cli.COMMANDS, "converge", boom)
    path = write(tmp_path, SMALL_CONVERGE)
    assert cli.main(["converge", "--config", path, "--out", str(tmp_path)]) == 3
    assert "speed bound broken" in capsys.readouterr().err


def test_cli_seed_override_and_module_entry(tmp_path):
    path = write(tmp_path, SMALL_CONVERGE)
    outs = []
    for name, seed in (("x", "3"), ("y", "3")):
        res = subprocess.run([sys.executable, "-m", "kacsobolev", "converge", "--config", path,
                              "--seed", seed, "--out", str(tmp_path / name), "--threads", "0"],
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append((tmp_path / name / "converge.csv").read_bytes())
    assert outs[0] == outs[1]

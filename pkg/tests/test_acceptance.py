"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line."""

import json
import math

import numpy as np

from conftest import TRACE_BENCHMARKS, benchmark
from sinkrate import bounds as B
from sinkrate.benchmarks import benchmark_config, benchmark_scenarios
from sinkrate.cli import main
from sinkrate.conjugate import biconjugate, conjugate, conjugate_y, mgf_check
from sinkrate.measures import DiscreteMeasure, perturb
from sinkrate.runner import scaling_section, stability_sweep
from sinkrate.scenario import parse_scenario
from sinkrate.sinkhorn import identity_audit

GAUSSIAN_SQ = ("gauss_sq_eps1", "gauss_sq_eps0.25", "gauss_sq_far", "gauss2d_sq", "stability16")


def verdicts(name):
    return benchmark(name)[3]["verdicts"]


def failing(names, keys):
    return [f"{n}:{k}" for n in names for k in keys if not verdicts(n)[k]["passed"]]


def test_01_exact_identity(acceptance_line):
    worst, bad = 0.0, []
    for name in TRACE_BENCHMARKS:
        trace = benchmark(name)[0]
        # float64 trace, relative 1e-9 plus the rounding floor of the potentials
        if not verdicts(name)["identity"]["passed"]:
            bad.append(f"{name}:float64")
        # same iterations in extended precision, pure relative 1e-9 at every t
        audit = identity_audit(trace.cost, trace.mx, trace.my, trace.T)
        if audit["rel"].size:
            worst = max(worst, float(audit["rel"].max()))
            if np.any(audit["rel"] > 1e-9):
                bad.append(f"{name}:extended")
    ok = not bad
    acceptance_line(1, "exact per-iteration identity", ok,
                    f"{len(TRACE_BENCHMARKS)} traces, worst extended-precision rel {worst:.1e}")
    assert ok, bad


def test_02_monotonicity(acceptance_line):
    bad = failing(TRACE_BENCHMARKS, ["monotonicity"])
    worst = min(verdicts(n)["monotonicity"]["worst_slack"] for n in TRACE_BENCHMARKS)
    acceptance_line(2, "monotonicity chains", not bad, f"min slack {worst:.1e} incl. 1e-10 allowance")
    assert not bad


def test_03_theorem_dominance(acceptance_line):
    bad = failing(TRACE_BENCHMARKS, ["theorem", "difference_inequality"])
    for n in TRACE_BENCHMARKS:
        rep = benchmark(n)[1]
        if not rep.t1 <= max(min(rep.t2, rep.t3) - 1, 0):
            bad.append(f"{n}:t1")
    t1s = {n: benchmark(n)[1].t1 for n in TRACE_BENCHMARKS if benchmark(n)[1].t1}
    acceptance_line(3, "theorem dominance and t1 bound", not bad, f"instances with t1>0: {t1s}")
    assert not bad


def test_04_rates(acceptance_line):
    bad, shown = [], []
    for n in GAUSSIAN_SQ:
        s = benchmark(n)[3]["slopes"]
        for key, thr in (("coupling", -0.9), ("marginal", -1.8), ("dual_gap", -0.9)):
            if not (math.isfinite(s[key]) and s[key] <= thr):
                bad.append(f"{n}:{key}={s[key]}")
        shown.append(f"{n} {s['coupling']:.1f}/{s['marginal']:.1f}/{s['dual_gap']:.1f}")
    acceptance_line(4, "final-decade rate slopes", not bad, "; ".join(shown))
    assert not bad


def test_05_corollary_dominance(acceptance_line):
    keys = ["marginal_prop", "marginal_cor", "coupling_stab", "coupling_cor",
            "subopt_inter", "subopt_cor_min", "subopt_cor_max"]
    bad = failing(TRACE_BENCHMARKS, keys)
    checked = sum(verdicts(n)[k]["checked"] for n in TRACE_BENCHMARKS for k in keys)
    acceptance_line(5, "corollary dominance", not bad, f"{checked} (t, form) points")
    assert not bad


def test_06_stability(acceptance_line):
    specs = {s["name"]: (i, s) for i, s in enumerate(benchmark_scenarios())}
    bad, points, worst = [], 0, math.inf
    for name in ("two_by_two", "stability16"):
        i, spec = specs[name]
        scen = parse_scenario(spec, i)
        *_, (cost, mx, my, pi_star) = benchmark(name)
        rows, verdict = stability_sweep(scen, (cost, mx, my), pi_star, scen.alpha_grid)
        mags = sorted({r[0] for r in rows})
        seeds = sorted({r[1] for r in rows})
        assert mags == [0.01, 0.05, 0.1] and seeds == [0, 1, 2, 3, 4]
        points += len(rows)
        for r in rows:
            worst = min(worst, r[3] - r[2])
            if not r[2] <= r[3]:
                bad.append(f"{name}:mag={r[0]}:seed={r[1]}")
    acceptance_line(6, "stability sweep", not bad, f"{points} points, min bound-measured {worst:.2e}")
    assert not bad


def test_07_bolley_villani(acceptance_line):
    rng = np.random.default_rng(20240607)
    grid = B.AlphaGrid()
    worst, bad = math.inf, 0
    for k in range(1000):
        n = int(rng.integers(1, 33))
        m = DiscreteMeasure.from_unnormalized(np.arange(n, dtype=float)[:, None],
                                              rng.uniform(0.001, 1.0, n))
        style = k % 4
        if style == 0:
            F = rng.normal(0, rng.uniform(0.1, 20), n)
        elif style == 1:
            F = rng.standard_t(2, n) * rng.uniform(0.1, 5)
        elif style == 2:
            F = np.full(n, rng.normal(0, 5))
        else:
            F = np.linspace(0, 1, n) ** 2 * rng.uniform(0, 50)
        if k % 3 == 0:
            mp = DiscreteMeasure.from_unnormalized(m.points, rng.dirichlet(np.ones(n)) + 1e-6)
        else:
            mp = perturb(m, "reweight", float(rng.uniform(0, 3)), int(rng.integers(2 ** 31)))
        s = B.bolley_villani_check(F, m, mp, grid)["slack"]
        worst = min(worst, s)
        bad += s < -1e-9
    acceptance_line(7, "Bolley-Villani randomized suite", bad == 0, f"1000 triples, min slack {worst:.2e}")
    assert bad == 0


def test_08_growth_bounds(acceptance_line):
    growth = ("gauss_sq_eps1", "gauss_sq_eps0.25", "gauss_sq_far", "gauss2d_sq", "dist_pow1.5")
    modulus = ("dist_pow0.5", "bounded_custom")
    bad = failing(growth, ["growth"]) + failing(modulus, ["modulus_growth"])
    margin = min(verdicts(n)["growth"]["worst_slack"] for n in growth)
    acceptance_line(8, "uniform growth of iterates", not bad, f"min K - ratio {margin:.3g}")
    assert not bad


def test_09_epsilon_scaling(acceptance_line):
    eps = benchmark_scenarios()[-1]["epsilon_grid"]
    assert eps == [1.0, 0.5, 0.25, 0.1]
    specs = {s["name"]: (i, s) for i, s in enumerate(benchmark_scenarios())}
    i, spec = specs["eps_scaling"]
    subs = {e: benchmark("eps_scaling", e)[3] for e in eps}
    fit = scaling_section(parse_scenario(spec, i), subs)
    ok = fit["p"] == 2.0 and all(v["passed"] for v in fit["verdicts"].values()) and len(fit["verdicts"]) == 2
    acceptance_line(9, "epsilon scaling of constants", ok,
                    f"C1 slope {fit['C1_slope']:.3f} <= 2.2, rate constant slope "
                    f"{fit['rate_constant_slope']:.3f} <= 4.3")
    assert ok


def test_10_conjugation(acceptance_line):
    bad = []
    fixed = 0.0
    for n in TRACE_BENCHMARKS:
        tr = benchmark(n)[0]
        c, mx, my = tr.cost, tr.mx, tr.my
        fixed = max(fixed, float(np.max(np.abs(biconjugate(tr.pi_star.phi, c, mx, my) - tr.pi_star.phi))))
        for t in range(tr.T + 1):
            if not (np.array_equal(conjugate(tr.phi(t), c, mx), tr.psi(t))
                    and np.array_equal(conjugate_y(tr.psi(t), c, my), tr.phi(t + 1))
                    and np.array_equal(biconjugate(tr.phi(t), c, mx, my), tr.phi(t + 1))):
                bad.append(f"{n}:t={t}")
                break
        for lam in (0.05, 0.25, 1.0):
            r = mgf_check(my, my.norms(), lam, 2.0, 1.0, np.arange(0, 10.5, 0.5))
            if r["mgf_slack"] < 0:
                bad.append(f"{n}:mgf:{lam}")
    if fixed > 1e-10:
        bad.append(f"fixed point {fixed:.1e}")
    xi = np.linspace(0, 50, 2_000_001)
    C_num = max(float(np.max(2 * t * xi - xi ** 2)) / (2 * t * t) for t in (0.5, 1.0, 3.0, 7.0))
    C = mgf_check(benchmark("two_by_two")[0].my, np.zeros(2), 1.0, 2.0, 1.0, [0.0])["C"]
    if abs(C_num - C) > 1e-6 or abs(C - 0.5) > 1e-6:
        bad.append(f"C {C} vs numeric {C_num}")
    acceptance_line(10, "conjugation consistency", not bad,
                    f"|phi*cc - phi*| <= {fixed:.1e}, C = {C} (numeric {C_num:.9f})")
    assert not bad


def test_11_determinism(acceptance_line, tmp_path):
    cfg = tmp_path / "benchmarks.json"
    cfg.write_text(json.dumps(benchmark_config()), encoding="utf-8")
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["run", "--config", str(cfg), "--out", str(o), "--jobs", "4"]) for o in outs]
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*")
                   if p.name in ("trace.csv", "bounds.csv", "report.json", "stability.csv"))
    differ = [str(f) for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    ok = codes == [0, 0] and files and not differ
    acceptance_line(11, "byte-identical repeated runs", ok, f"{len(files)} files compared, exit codes {codes}")
    assert ok, differ

"""Scenario pipeline: solve, bound, verify, and write deterministic reports."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds as B
from .conjugate import (build_growth_certificate, build_modulus_certificate, growth_ratio,
                        modulus_excess)
from .cost import build_cost_matrix
from .measures import MeasureError, perturb
from .scenario import Scenario
from .sinkhorn import InvariantViolation, SinkhornError, attach_reference, run, solve_reference

TRACE_COLUMNS = ("t", "mu_phi_t", "nu_psi_t", "H_mu2t_mu", "H_mu_mu2t", "H_nu_nu2t1",
                 "H_nu2t1_nu", "H_pistar_pit", "H_pit_pistar", "dual_gap")
TRACE_SCHEMA = "sinkrate.trace/1"
BOUNDS_SCHEMA = "sinkrate.bounds/1"
STABILITY_SCHEMA = "sinkrate.stability/1"
STABILITY_COLUMNS = ("magnitude", "seed", "measured", "bound", "bound_b", "C1", "C2",
                     "H_mu_prime_mu", "H_nu_prime_nu", "slack")

RATE_THRESHOLDS = {"coupling": -0.9, "marginal": -1.8, "dual_gap": -0.9}


# -- formatting ------------------------------------------------------------

def fmt(v) -> str:
    """Shortest round-trip text for a number."""
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, schema: str, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#schema={schema};columns={','.join(columns)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_json(path: Path, obj):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def trace_rows(trace):
    for k, t in enumerate(trace.ts):
        yield (int(t), trace.mu_phi[k], trace.nu_psi[k], trace.H_mu2t_mu[k], trace.H_mu_mu2t[k],
               trace.H_nu_nu2t1[k], trace.H_nu2t1_nu[k], trace.H_pistar_pit[k],
               trace.H_pit_pistar[k], trace.dual_gap[k])


# -- one (scenario, epsilon) pipeline --------------------------------------

def analyse(s: Scenario, epsilon: float | None = None):
    """Solve and bound one problem; returns ``(trace, report, curves, payload)``."""
    mx, my = s.measures()
    model = s.cost_model(epsilon)
    cost = build_cost_matrix(model, mx, my)
    pi_star, pot_star = solve_reference(cost, mx, my, s.ref_tol)
    trace = attach_reference(run(cost, mx, my, s.max_t, s.stop_tol), pi_star)

    grid = s.alpha_grid
    c1 = B.c1_constants(trace, grid)
    cert = build_growth_certificate(model, cost)
    mod = build_modulus_certificate(model, cost)
    C1_cert = None
    if cert is not None:
        C1_cert = B.certificate_c1(trace, cert.K_iterate, cert.p, cert.reference, grid).value
    C1_used = c1.C1
    if s.certificate_mode and C1_cert is not None:
        C1_used = max(c1.C1, C1_cert)
    prov = {"C1_trace": c1.C1, "C1_t": c1.C1_t, "C1_alpha": c1.C1_alpha,
            "C1_tilde_t": c1.C1_tilde_t, "C1_tilde_alpha": c1.C1_tilde_alpha,
            "C1_certificate": C1_cert if C1_cert is not None else "not certified",
            "certificate_mode": s.certificate_mode}
    report = B.rate_constants(trace, C1_used, c1.C1_tilde, grid, prov)
    report.C_F_values = {"phi_t - phi*": c1.C1, "phi_t": c1.C1_tilde}
    if C1_cert is not None:
        report.C_F_values["2K(1+|x|^p)"] = C1_cert
    curves = B.bound_curves(trace, report)

    verdicts = [B.check_identity(trace), B.check_monotonicity(trace),
                B.check_theorem(trace, report), B.check_difference_inequality(trace, report),
                *B.check_marginal(trace, report), *B.check_coupling(trace, report),
                *B.check_suboptimality(trace, report),
                B.check_phi_lp(trace, 1.0), B.check_phi_lp(trace, 2.0)]
    allphi = np.vstack([trace.phis, pi_star.phi[None, :]])
    if cert is not None:
        ratio = growth_ratio(allphi, mx.norms(cert.reference), cert.p)
        verdicts.append(B.Verdict("growth", ratio <= cert.K_iterate, cert.K_iterate - ratio, None,
                                  allphi.shape[0]))
    if mod is not None:
        excess = modulus_excess(allphi, mx.norms(), mod.omega)
        verdicts.append(B.Verdict("modulus_growth", excess <= mod.K, mod.K - excess, None,
                                  allphi.shape[0]))
    slopes = B.rate_slopes(trace)
    for key, thr in RATE_THRESHOLDS.items():
        v = slopes.get(key, math.nan)
        if math.isfinite(v):
            verdicts.append(B.Verdict(f"rate_{key}", v <= thr, thr - v, None, 1))
        else:
            verdicts.append(B.Verdict(f"rate_{key}", True, math.inf, None, 0,
                                      "fewer than three points above the noise floor"))

    payload = {
        "epsilon": model.epsilon,
        "cost": {k: v for k, v in model.to_spec().items() if k != "matrix"},
        "sizes": [mx.size, my.size],
        "iterations": trace.T,
        "stopped_by_tolerance": trace.stopped_by_tolerance,
        "log_xi": trace.log_xi,
        "constants": report.to_json(),
        "growth_certificate": cert.to_json() if cert is not None else "not certified",
        "modulus_certificate": mod.to_json() if mod is not None else "not certified",
        "slopes": slopes,
        "verdicts": {v.name: v.to_json() for v in verdicts},
        "final": {c: _last(getattr(trace, a)) for c, a in
                  (("H_pistar_pit", "H_pistar_pit"), ("H_pit_pistar", "H_pit_pistar"),
                   ("dual_gap", "dual_gap"), ("H_mu2t_mu", "H_mu2t_mu"))},
    }
    return trace, report, curves, payload, (cost, mx, my, pi_star)


def _last(a):
    return float(a[-1])


def write_outputs(out: Path, trace, curves, payload, plots: bool = False):
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "trace.csv", TRACE_SCHEMA, TRACE_COLUMNS, trace_rows(trace))
    cols = ("t",) + B.CURVE_COLUMNS
    rows = ([int(t)] + [curves[c][k] for c in B.CURVE_COLUMNS] for k, t in enumerate(trace.ts))
    write_csv(out / "bounds.csv", BOUNDS_SCHEMA, cols, rows)
    write_json(out / "report.json", payload)
    if plots:
        from .plotting import render_rate_plots
        render_rate_plots(out, trace, curves)


def stability_sweep(s: Scenario, problem, pi_star, grid):
    cost, mx, my = problem
    pert = s.perturbation
    rows, worst = [], math.inf
    for mag in pert.magnitudes:
        for seed in pert.seeds:
            mx_p = perturb(mx, pert.kind, mag, seed) if pert.target in ("mu", "both") else mx
            # the second marginal uses the next seed so the two draws are independent
            my_p = perturb(my, pert.kind, mag, seed + 1) if pert.target in ("nu", "both") else my
            cost_p = build_cost_matrix(cost.model, mx_p, my_p)
            pi_p, _ = solve_reference(cost_p, mx_p, my_p, s.ref_tol)
            rep = B.stability_bound((cost, mx, my), (cost_p, mx_p, my_p), grid,
                                    solutions=(pi_star, pi_p))
            worst = min(worst, rep.slack)
            rows.append((mag, seed, rep.measured, rep.bound, rep.bound_b, rep.C1, rep.C2,
                         rep.H_mu[0], rep.H_nu[0], rep.slack))
    n = len(rows)
    verdict = B.Verdict("stability", worst >= -B.DOMINANCE_SLACK, worst, None, n)
    return rows, verdict


def _single(s: Scenario, out: Path, epsilon, plots, with_stability=True):
    trace, report, curves, payload, (cost, mx, my, pi_star) = analyse(s, epsilon)
    payload["scenario"] = s.name
    if with_stability and s.perturbation is not None:
        rows, verdict = stability_sweep(s, (cost, mx, my), pi_star, s.alpha_grid)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "stability.csv", STABILITY_SCHEMA, STABILITY_COLUMNS, rows)
        payload["verdicts"]["stability"] = verdict.to_json()
    write_outputs(out, trace, curves, payload, plots)
    return payload


def eps_dirname(eps: float) -> str:
    return "eps_" + repr(float(eps))


def run_scenario(s: Scenario, out_dir, plots: bool = False) -> dict:
    """Run one scenario into ``out_dir/<name>``; returns its summary entry."""
    out = Path(out_dir) / s.name
    entry = {"name": s.name, "status": "ok", "verdicts": {}, "error": None}
    try:
        if s.epsilon_grid is None:
            payload = _single(s, out, None, plots)
            entry["verdicts"] = {k: v["passed"] for k, v in payload["verdicts"].items()}
        else:
            subs = {}
            for eps in s.epsilon_grid:
                payload = _single(s, out / eps_dirname(eps), eps, plots)
                subs[eps_dirname(eps)] = payload
                for k, v in payload["verdicts"].items():
                    entry["verdicts"][f"{eps_dirname(eps)}/{k}"] = v["passed"]
            fit = scaling_section(s, subs)
            entry["verdicts"].update({f"scaling/{k}": v["passed"] for k, v in fit["verdicts"].items()})
            write_json(out / "report.json", {"scenario": s.name, "epsilon_grid": list(s.epsilon_grid),
                                             "sub_reports": sorted(subs), "scaling_fit": fit})
    except (SinkhornError, InvariantViolation, B.BoundsError, MeasureError, ValueError) as e:
        entry["status"] = "error"
        entry["error"] = f"{type(e).__name__}: {e}"
        return entry
    if not all(entry["verdicts"].values()):
        entry["status"] = "fail"
    return entry


def scaling_section(s: Scenario, subs: dict) -> dict:
    eps = [p["epsilon"] for p in subs.values()]
    C1 = [p["constants"]["C1"] for p in subs.values()]
    rc = [p["constants"]["rate_constant"] for p in subs.values()]
    out = {"epsilon": eps, "C1": C1, "rate_constant": rc,
           "C1_slope": B.scaling_fit(eps, C1), "rate_constant_slope": B.scaling_fit(eps, rc),
           "verdicts": {}}
    p = s.cost_model().growth_exponent
    out["p"] = p
    if p is not None and len(eps) >= 2:
        for key, lim in (("C1_slope", p + 0.2), ("rate_constant_slope", 2 * p + 0.3)):
            v = out[key]
            out["verdicts"][key] = {"passed": bool(v <= lim), "value": v, "limit": lim}
    return out


def _worker(args):
    s, out_dir, plots = args
    return run_scenario(s, out_dir, plots)


def batch(scenarios: list[Scenario], out_dir, jobs: int = 1, plots: bool = False) -> int:
    """Run every scenario (up to ``jobs`` at once) and write ``summary.json``.

    Returns 0 when every scenario ran and passed every verdict, 1 otherwise.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(s, str(out), plots) for s in scenarios]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            entries = list(ex.map(_worker, tasks))
    else:
        entries = [_worker(t) for t in tasks]
    ok = all(e["status"] == "ok" for e in entries)
    write_json(out / "summary.json", {"passed": ok, "count": len(entries), "scenarios": entries})
    return 0 if ok else 1

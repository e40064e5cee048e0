"""Acceptance criteria, one test each.

Every test prints a single ``[criterion k] PASS|FAIL ...`` line (shown even
under output capture) before asserting. Run directly with
``python3 tests/test_acceptance.py`` for the summary lines alone.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.stats import norm

from constrained_risk.cli import main as cli_main
from constrained_risk.dist import Gaussian, Product, Tilted, builtin_score, rejection_sample
from constrained_risk.divergence import affinity_monte_carlo, affinity_quadrature, verify_lemma_tilt
from constrained_risk.experiments import (ExperimentConfig, numerical_fact, prop2_bound,
                                          prop2_closed_form, run_prop1, run_prop2)
from constrained_risk.loss import absolute, squared, threshold
from constrained_risk.simulate import mc_risk, sample_mean, violation_search


def report(capsys, k, ok, detail, elapsed):
    line = f"[criterion {k}] {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s) {detail}"
    with capsys.disabled():
        print("\n" + line, flush=True)
    return ok


def test_criterion_1_affinity_grid(capsys):
    start = time.perf_counter()
    worst_rel, worst_z, bad = 0.0, 0.0, []
    for theta in (0.0, 0.1, 0.3):
        for s2 in (0.5, 1.0, 2.0):
            for n in (1, 4, 16):
                exact = math.exp(n * theta * theta / s2)
                p1, p0 = Product(Gaussian(theta, s2), n), Product(Gaussian(0.0, s2), n)
                quad = affinity_quadrature(p1, p0).value
                rel = abs(quad - exact) / exact
                mc = affinity_monte_carlo(p1, p0, 10 ** 6, seed=n + int(100 * theta))
                diff = abs(mc.meta["raw_mean"] - exact)
                z = diff / mc.error_estimate if mc.error_estimate > 0 else (0.0 if diff == 0 else math.inf)
                worst_rel, worst_z = max(worst_rel, rel), max(worst_z, z)
                if rel > 1e-6 or z > 4:
                    bad.append((theta, s2, n, rel, z))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 60
    report(capsys, 1, ok, f"27 points, max quad rel err {worst_rel:.2e}, max MC |z| {worst_z:.2f}", elapsed)
    assert ok, bad


@pytest.mark.parametrize("loss", [squared(), absolute()], ids=["sq", "abs"])
def test_criterion_2_bound_soundness(loss, capsys):
    start = time.perf_counter()
    rep = violation_search(10_000, 2024, loss, tol=1e-6)
    elapsed = time.perf_counter() - start
    ok = rep.violations == 0 and elapsed < 600
    report(capsys, 2, ok, f"{loss.name}: {rep.instances} instances, {rep.violations} violations, "
                  f"worst margin {rep.worst_margin:.3e}", elapsed)
    assert ok, rep.records[:5]


def test_criterion_3_prop2_numbers(capsys):
    start = time.perf_counter()
    _, rep = prop2_bound(100, 0.01, 0.125)
    closed = prop2_closed_form(100, 0.01, 0.125)
    quarter = 0.25 * math.sqrt(math.log(100) / 100)
    grid = np.geomspace(1e-6, 1e-2, 50)
    fact = all(numerical_fact(float(e))[0] >= numerical_fact(float(e))[1] for e in grid)
    elapsed = time.perf_counter() - start
    ok = (abs(rep.value - closed) <= 1e-12 and abs(quarter - 0.053649) <= 1e-6
          and rep.value > quarter and fact and elapsed < 1.0)
    report(capsys, 3, ok, f"bound {rep.value:.10f}, closed form diff {abs(rep.value - closed):.1e}, "
                  f"quarter {quarter:.6f}, fact on 50 points: {fact}", elapsed)
    assert ok
    # the driver reproduces the same numbers (its Monte Carlo column is not timed)
    cfg = ExperimentConfig("prop2", {"alpha_grid": [0.125], "reps": 100})
    summary = run_prop2(cfg).summary
    assert summary["numerical_fact_holds"] and summary["quarter_claim_holds"]


def test_criterion_4_prop1_trend(capsys):
    start = time.perf_counter()
    n_grid = [100, 1000, 10_000, 100_000]
    cfg = ExperimentConfig("prop1", {"n_grid": n_grid, "delta_rule": "pow:1", "c": 0.5,
                                     "sigma2": 1.0, "reps": 10_000, "seed": 4})
    rep = run_prop1(cfg, skip_empty=True)
    elapsed = time.perf_counter() - start
    infs = {i["n"]: i["inf_bound"] for i in rep.summary["per_n"]}
    empty = rep.summary["empty_n"]
    seq = [infs.get(n) for n in n_grid]
    monotone = not empty and all(b >= a for a, b in zip(seq, seq[1:]))
    last = infs.get(100_000, float("nan"))
    ok = monotone and last > 0.9 and rep.ok and elapsed < 600
    report(capsys, 4, ok, f"Theta_n empty at n={empty}; inf bound by n: "
                  + ", ".join(f"{n}:{'empty' if v is None else f'{v:.6f}'}" for n, v in zip(n_grid, seq))
                  + f"; need > 0.9 at 1e5; row failures {len(rep.failures)}", elapsed)
    assert ok


def test_criterion_5_efficiency_benchmark(capsys):
    start = time.perf_counter()
    n = 100
    r = mc_risk(sample_mean(), Product(Gaussian(0.0, 1.0), n), threshold(1 / math.sqrt(n)),
                100_000, seed=5)
    target = 2 * norm.cdf(-1)
    elapsed = time.perf_counter() - start
    z = abs(r.mean - target) / r.std_error
    ok = z <= 4 and elapsed < 60
    report(capsys, 5, ok, f"risk {r.mean:.5f} +- {r.std_error:.5f} vs 2Phi(-1) {target:.7f} (|z| {z:.2f})",
           elapsed)
    assert ok


def test_criterion_6_small_tilt(capsys):
    start = time.perf_counter()
    base = Gaussian(0.0, 1.0)
    details, ok = [], True
    for name in ("id", "hermite2"):
        lem = verify_lemma_tilt(base, builtin_score(name, base), [0.2, 0.1, 0.05])
        last = lem.rows[-1]["ratio"]
        within = abs(last - lem.second_moment) <= 0.1 * lem.second_moment
        ok = ok and within and lem.ratios_converge and lem.normalizer_bound_holds
        if name == "id":
            sym = max(r["C_t_gap"] for r in lem.rows)
            ok = ok and sym <= 1e-10
            details.append(f"id |C_t-1| max {sym:.1e}")
        details.append(f"{name} ratios " + "/".join(f"{r['ratio']:.5f}" for r in lem.rows))
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 60
    report(capsys, 6, ok, "; ".join(details), elapsed)
    assert ok


@pytest.mark.parametrize("name, t", [("id", 0.5), ("hermite2", 0.3)])
def test_criterion_7_tilted_sampler(name, t, capsys):
    start = time.perf_counter()
    base = Gaussian(0.0, 1.0)
    g = builtin_score(name, base)
    m = Tilted(base, g, t)
    draws, rate = rejection_sample(m, 10 ** 6, np.random.default_rng(7))
    vals = g(draws)
    emp, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))
    exact, _ = m.expect(g)
    elapsed = time.perf_counter() - start
    z = abs(emp - exact) / se
    ok = z <= 4 and 0.45 <= rate <= 0.55 and elapsed < 60
    report(capsys, 7, ok, f"{name} t={t}: E[g] {emp:.5f} vs {exact:.5f} (|z| {z:.2f}), "
                  f"acceptance {rate:.4f}", elapsed)
    assert ok


def test_criterion_8_cli_determinism(tmp_path, capsys):
    start = time.perf_counter()
    cfg = tmp_path / "prop3.json"
    cfg.write_text(json.dumps({"experiment": "prop3",
                               "parameters": {"n_grid": [100, 1000], "reps": 200,
                                              "grid_points": 4, "seed": 8}}))
    commands = [
        ["affinity", "--p1", "gauss:0.3:1^n:4", "--p0", "gauss:0:1^n:4", "--method", "mc",
         "--count", "20000", "--seed", "8"],
        ["bound", "--loss", "sq", "--p0", "gauss:0:1", "--p1", "gauss:1:1", "--delta", "0.05"],
        ["simulate", "--est", "hodges:0.1", "--model", "gauss:0:1^n:50", "--loss", "abs",
         "--reps", "5000", "--seed", "8"],
        ["oracle", "--instances", "200", "--loss", "abs", "--seed", "8"],
        ["experiment", "prop3", "--config", str(cfg)],
    ]
    mismatched = []
    for argv in commands:
        outs = []
        for _ in range(2):
            cli_main(argv)
            outs.append(capsys.readouterr().out)
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(argv[0])
    elapsed = time.perf_counter() - start
    ok = not mismatched
    report(capsys, 8, ok, f"{len(commands)} commands rerun, mismatches: {mismatched or 'none'}",
           elapsed)
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

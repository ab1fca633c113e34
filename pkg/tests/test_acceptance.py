"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the pytest
terminal summary).  Run ``python3 tests/test_acceptance.py`` for the lines
alone.  Seeds are fixed up front; none were chosen after looking at results.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from eoranking.core import InclusionEstimate, delta_trace, expected_trace, group_fractions, n_rel, total_cost
from eoranking.metrics import effectiveness
from eoranking.optim.certificate import delta_max_bound, dual_certificate, eor_primal_lp, verify_certificate
from eoranking.optim.exposure import (
    _exposure_rows, check_doubly_stochastic, exposure_lp, exposure_residuals, group_exposure,
    rank_aggregation_exposure,
)
from eoranking.optim.ilp import ilp_curve
from eoranking.policies import (
    PolicySpec, dp_ranking, eor_ranking, fairstar_minima, fairstar_ranking, inclusion_estimate, prp_ranking,
)
from eoranking.synth import Scenario, scenario_run
from eoranking.core import CandidatePool

from conftest import fairstar_pool, random_pool, running_pool

RESULTS = {}


def report(num, ok, detail, elapsed=None, budget=None):
    if budget is not None and elapsed > budget:
        ok = False
        detail += f"; took {elapsed:.1f}s, budget {budget}s"
    elif elapsed is not None:
        detail += f" ({elapsed:.2f}s)"
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def test_criterion_1_worked_example():
    t = time.perf_counter()
    p = running_pool()
    eor, dp, prp = eor_ranking(p), dp_ranking(p), prp_ranking(p)
    d = [abs(delta_trace(p, r).delta[3]) for r in (eor, dp, prp)]
    rel = [math.fsum(p.probs[r[:4]]) for r in (eor, dp, prp)]
    frac = group_fractions(p, eor, 4)
    ok = (
        np.allclose(d, [0.15, 0.50, 0.825], atol=1e-9, rtol=0)
        and np.allclose(rel, [3.0, 3.2, 3.3], atol=1e-9, rtol=0)
        and np.allclose(frac, [1.8 / 4, 1.2 / 4], atol=1e-9, rtol=0)
    )
    el = time.perf_counter() - t
    report(1, ok, f"|delta_4| EOR/DP/PRP = {d[0]:.6g}/{d[1]:.6g}/{d[2]:.6g}, "
                  f"relevant@4 = {rel[0]:.6g}/{rel[1]:.6g}/{rel[2]:.6g}, EOR fractions {frac[0]:.4g}, {frac[1]:.4g}", el, 1)


def test_criterion_2_fairstar_example():
    t = time.perf_counter()
    p = fairstar_pool()
    d_eor = abs(delta_trace(p, eor_ranking(p)).delta[3])
    d_b = abs(delta_trace(p, fairstar_ranking(p, protected=1)).delta[3])
    d_a = abs(delta_trace(p, fairstar_ranking(p, protected=0)).delta[3])
    m = int(fairstar_minima(4, 0.5, 0.1)[3])
    # 0.1333/0.5333/0.9333 within 1e-3, and equal to the published two-decimal figures
    got, want = (d_eor, d_b, d_a), (0.1333, 0.5333, 0.9333)
    ok = all(abs(g - w) <= 1e-3 for g, w in zip(got, want))
    ok = ok and [round(g, 2) for g in got] == [0.13, 0.53, 0.93] and m == 1
    report(2, ok, f"delta_4 EOR {d_eor:.4f}, FA*IR(B) {d_b:.4f}, FA*IR(A) {d_a:.4f}, minima(4,.5,.1) = {m}",
           time.perf_counter() - t, 1)


def test_criterion_3_delta_max():
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    viol, worst = 0, -np.inf
    for G, count in ((2, 1000), (None, 500)):
        for _ in range(count):
            g = G or int(rng.integers(3, 6))
            pool = random_pool(rng, g, 200)
            tr = delta_trace(pool, eor_ranking(pool))
            excess = tr.abs_delta.max() - delta_max_bound(pool)
            worst = max(worst, excess)
            viol += excess > 1e-12
    report(3, viol == 0, f"{viol} violations over 1500 pools, worst max|delta| - delta_max = {worst:.3g}",
           time.perf_counter() - t, 30)


def test_criterion_4_certificate_suite():
    t = time.perf_counter()
    rng = np.random.default_rng(4)
    fails = {"sandwich": 0, "duals": 0, "cost_gap": 0, "delta0": 0}
    checked = zero_prefixes = 0
    for _ in range(300):
        pool = random_pool(rng, 2, 16)
        order = eor_ranking(pool)
        certs = [dual_certificate(pool, order, k) for k in range(1, pool.n + 1)]
        caps = np.concatenate([[-1.0], [c.delta for c in certs]])
        curve = ilp_curve(pool, caps)
        for k, cert in enumerate(certs, start=1):
            checked += 1
            lp = eor_primal_lp(pool, k, cert.delta).objective_value
            ilp = curve[k].objective
            if not (lp + 1e-9 >= ilp >= cert.eor_value - 1e-9):
                fails["sandwich"] += 1
            rep = verify_certificate(cert, pool, k, lp)
            neg = min(cert.lambda_k, min(cert.lambda_pair.values()), cert.lambda_prime.min()) < 0
            if neg or cert.lambda_prime[~cert.selected].max(initial=0) > 1e-9 or rep.residual_max > 1e-9:
                fails["duals"] += 1
            cost_eor = 1 - cert.eor_value
            cost_ilp = 1 - ilp
            if cost_eor - cost_ilp > cert.phi * cert.delta + 1e-9:
                fails["cost_gap"] += 1
            if cert.delta == 0.0:
                zero_prefixes += 1
                if abs(cost_eor - cost_ilp) > 1e-9:
                    fails["delta0"] += 1
    ok = not any(fails.values())
    report(4, ok, f"{checked} (pool, k) pairs; failures {fails}; {zero_prefixes} prefixes with delta = 0",
           time.perf_counter() - t, 120)


def test_criterion_5_zero_slack_costs():
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    grid = np.round(np.arange(1, 11) / 10, 1)
    viol = zero = 0
    for i in range(1000):
        if i % 2:
            pool = random_pool(rng, 2, 200)
        else:
            # grid-valued probabilities so that delta = 0 happens before k = n
            n = int(rng.integers(2, 41))
            probs = rng.choice(grid, n)
            groups = np.concatenate([[0, 1], rng.integers(0, 2, n - 2)])
            pool = CandidatePool([f"c{j}" for j in range(n)], groups, probs, ("A", "B"))
        tr = delta_trace(pool, eor_ranking(pool))
        n = pool.n
        for k in np.flatnonzero(np.abs(tr.delta) <= 1e-12) + 1:
            zero += 1
            lim = 1 - k / n + 1e-12
            if tr.total_cost[k - 1] > lim or np.any(tr.group_cost[k - 1] > lim):
                viol += 1
    report(5, viol == 0, f"{viol} violations over {zero} prefixes with |delta| <= 1e-12 in 1000 pools",
           time.perf_counter() - t, 10)


def test_criterion_6_synthetic_table():
    t = time.perf_counter()
    res = {lvl: scenario_run(lvl, runs=100, seed=0, policies=("eor", "prp", "uniform")) for lvl in ("high", "medium", "low")}
    target = {"high": 1.07, "medium": 1.02, "low": 1.02}
    parts = []
    ok = True
    for lvl, want in target.items():
        got = res[lvl]["eor"]["unfairness_mean"]
        good = abs(got - want) <= 0.15
        ok &= good
        parts.append(f"EOR {lvl} unfairness {got:.2f} (target {want}) {'ok' if good else 'OUT'}")
    prp = res["high"]["prp"]["unfairness_mean"]
    good = abs(prp - 15.41) <= 0.2 * 15.41
    ok &= good
    parts.append(f"PRP high unfairness {prp:.2f} (target 15.41 +-20%) {'ok' if good else 'OUT'}")
    eff = res["high"]["eor"]["effectiveness_mean"]
    good = abs(eff - 10.44) <= 0.1 * 10.44
    ok &= good
    parts.append(f"EOR high effectiveness {eff:.2f} (target 10.44 +-10%) {'ok' if good else 'OUT'}")
    uni = max(abs(res[lvl]["uniform"]["effectiveness_mean"]) for lvl in res)
    good = uni <= 1e-12
    ok &= good
    parts.append(f"UNIFORM max |effectiveness| {uni:.1e} {'ok' if good else 'OUT'}")
    report(6, ok, "; ".join(parts), time.perf_counter() - t, 300)


def _highs_status(pool):
    stoch, pair, _ = _exposure_rows(pool, "probs")
    A = np.vstack([stoch, pair])
    b = np.concatenate([np.ones(len(stoch)), np.zeros(len(pair))])
    return linprog(np.zeros(pool.n ** 2), A_eq=A, b_eq=b, bounds=(0, None), method="highs").status


def test_criterion_7_exposure_lp():
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    stoch_dev = 0.0
    over, highs_agree, worst_feasible = 0, 0, 0.0
    for _ in range(50):
        pool = random_pool(rng, 2, 20)
        ds = exposure_lp(pool)
        stoch_dev = max(stoch_dev, check_doubly_stochastic(ds.matrix))
        res = float(np.max(np.abs(exposure_residuals(pool, ds.matrix))))
        exact_exists = _highs_status(pool) == 0
        highs_agree += exact_exists == ds.exact
        if res > 1e-6:
            over += 1
        elif exact_exists:
            worst_feasible = max(worst_feasible, res)
    p = running_pool()
    ds = exposure_lp(p)
    incl = ds.inclusion()
    cost = [1 - float(incl.at(4)[p.members(g)] @ p.probs[p.members(g)]) / n_rel(p)[g] for g in range(2)]
    run_res = float(np.max(np.abs(exposure_residuals(p, ds.matrix))))
    direction = cost[0] > cost[1]
    ok = stoch_dev <= 1e-7 and over == 0 and direction and run_res <= 1e-6
    report(7, ok, f"doubly stochastic within {stoch_dev:.1e}; {over}/50 pools have residual > 1e-6 "
                  f"(HiGHS agrees on exact feasibility for {highs_agree}/50, so those pools admit no proportional "
                  f"matrix); worst residual on exactly-feasible pools {worst_feasible:.1e}; running example residual "
                  f"{run_res:.3f} (no exact solution exists), cost A {cost[0]:.3f} > cost B {cost[1]:.3f}: {direction}",
           time.perf_counter() - t, 60)


def test_criterion_8_rank_aggregation():
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    pools = [random_pool(rng, int(rng.integers(2, 4)), 60) for _ in range(500)]
    sc = Scenario("high", seed=0)
    pools += [sc.pool(r) for r in range(100)]
    already = identical = reached = flagged = bad = 0
    for pool in pools:
        prp = prp_ranking(pool)
        e = group_exposure(pool, prp)
        ra = rank_aggregation_exposure(pool, 0.95)
        if e.min() / e.max() >= 0.95:
            already += 1
            identical += np.array_equal(ra.ranking, prp)
            bad += not np.array_equal(ra.ranking, prp)
        elif ra.ratio >= 0.95:
            reached += 1
        elif ra.best_effort:
            flagged += 1
        else:
            bad += 1
    report(8, bad == 0, f"{len(pools)} pools: {identical}/{already} already-fair pools returned PRP unchanged, "
                        f"{reached} reached 0.95, {flagged} flagged best-effort, {bad} contract breaks",
           time.perf_counter() - t, 30)


def test_criterion_9_monte_carlo():
    t = time.perf_counter()
    p = running_pool()
    worst_sum = 0.0
    for kind in ("uniform", "ts"):
        est = inclusion_estimate(PolicySpec(kind, seed=9), p, 1000)
        worst_sum = max(worst_sum, float(np.max(np.abs(est.incl.sum(axis=1) - np.arange(1, p.n + 1)))))
    est = inclusion_estimate(PolicySpec("uniform", seed=9), p, 10**4)
    err = float(np.max(np.abs(est.incl - (np.arange(1, p.n + 1) / p.n)[:, None])))
    ok = worst_sum <= 1e-12 and err < 0.02
    report(9, ok, f"max |row sum - k| = {worst_sum:.1e}; UNIFORM d=1e4 max |incl - k/n| = {err:.4f}",
           time.perf_counter() - t, 30)


def test_criterion_10_scale():
    rng = np.random.default_rng(10)
    n = 10**6
    pool = CandidatePool([str(i) for i in range(n)], rng.integers(0, 2, n), rng.random(n), ("A", "B"))
    t = time.perf_counter()
    order = eor_ranking(pool)
    el = time.perf_counter() - t
    tr = delta_trace(pool, order)
    bound = delta_max_bound(pool)
    ok = el < 5 and tr.abs_delta.max() <= bound + 1e-12
    report(10, ok, f"eor_ranking on n=1e6 in {el:.2f}s; max|delta| {tr.abs_delta.max():.3g} <= delta_max {bound:.3g}: "
                   f"{tr.abs_delta.max() <= bound + 1e-12}")


if __name__ == "__main__":
    import sys

    tests = [(int(name.split("_")[2]), fn) for name, fn in globals().items() if name.startswith("test_criterion_")]
    for _, fn in sorted(tests, key=lambda t: t[0]):
        try:
            fn()
        except AssertionError:
            pass
    sys.exit(0 if all(line.startswith("PASS") for line in RESULTS.values()) else 1)

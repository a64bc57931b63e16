"""Acceptance criteria, each checked at its stated tolerance and time budget.

Each test records one PASS/FAIL line (printed, and repeated in the pytest
terminal summary).
"""

import math
import re
import time

import numpy as np

from acceptance_log import record
from graph_helpers import all_rejection_orders, closed_test, random_graph
from trialinfer import mc_engine
from trialinfer.graph_mcp import MCPGraph, adjusted_p_values, sequentially_rejective_test
from trialinfer.gsd import SpendingFunction, crossing_probabilities, make_design
from trialinfer.gsd_inference import (
    conditional_adjusted_estimate,
    median_unbiased_estimate,
    naive_estimate,
    observe,
    repeated_ci,
    repeated_p_value,
    stagewise_p_value,
    whitehead_adjusted_estimate,
)
from trialinfer.mc_engine import PathSampler, RngConfig, stopping_distribution
from trialinfer.trial_report import load_fixture, render, render_fixture, run_graph_report, verify
from trialinfer.trial_report.render import format_interval, format_p

_CELL = re.compile(r"([\[(])\s*([^,]+),\s*([^\])]+)([\])]);\s*p\s*([=<])\s*([0-9.]+)")


def _cell(s):
    """Parse '[−0.70, 0.00); p = 0.01' into comparable parts; '+' and U+2212 are normalised."""
    m = _CELL.fullmatch(s.strip())
    assert m, s
    num = lambda v: v.strip().replace("−", "-").lstrip("+").replace("∞", "inf")
    return m.group(1), num(m.group(2)), num(m.group(3)), m.group(4), m.group(5), m.group(6)


def _adjusted_cells(table):
    return {r.endpoint: f"{format_interval(r.adjusted_ci, table.digits)}; {format_p(r.adjusted_p, table.p_digits)}"
            for r in table.rows if r.adjusted_ci is not None}


def _hr(iv):
    return tuple(sorted(math.exp(-v) for v in iv))


def test_criterion_1_example_a():
    t0 = time.perf_counter()
    table = run_graph_report(load_fixture("A"))
    text = render(table).decode()
    got = _adjusted_cells(table)
    secs = time.perf_counter() - t0
    want = {"CDR-SB": "[−0.70, 0.00); p = 0.01", "ADAS-Cog13": "[−∞, +0.20]; p = 0.09",
            "FAQ": "[−∞, +∞]; p = 0.09"}
    ok = all(_cell(got[h]) == _cell(w) for h, w in want.items()) and all(got[h] in text for h in want)
    ok = ok and secs < 1.0
    record(1, "example A adjusted column", ok, secs, 1.0, "; ".join(got.values()))
    assert ok


def test_criterion_2_example_c():
    t0 = time.perf_counter()
    early = run_graph_report(load_fixture("C_week26"))
    full = run_graph_report(load_fixture("C_full"))
    secs = time.perf_counter() - t0
    a, b = _adjusted_cells(early), _adjusted_cells(full)
    want_a = {"WL26-D1": ("[−15.7, 0.0)", None), "WL26-D2": ("[−10.8, 0.2]", "0.061")}
    want_b = {"WL26-D1": ("[−15.7, −4.3]", None), "WL52-D1": ("[−∞, 0.0)", None),
              "WL26-D2": ("[−10.8, 0.0)", "0.046"), "WL52-D2": ("[−∞, 0.0)", "0.046")}
    ok = True
    for got, want in ((a, want_a), (b, want_b)):
        for h, (ci, p) in want.items():
            c = _cell(got[h])
            ok &= c[:4] == _cell(ci + "; p = 0")[:4]
            if p is not None:
                ok &= c[4:] == ("=", p)
    ok = ok and secs < 1.0
    record(2, "example C adjusted p and CIs (partial and complete)", ok, secs, 1.0,
           f"partial {list(a.values())}; full {list(b.values())}")
    assert ok


PFS = dict(info_fractions=[0.66, 1.0], max_information=230 / 4)
OS = dict(info_fractions=[0.5, 0.75, 1.0], max_information=233 / 4)


def test_criterion_3_example_b_closed_form():
    t0 = time.perf_counter()
    d = make_design(PFS["info_fractions"], 0.025, harm_boundary="symmetric", max_information=PFS["max_information"])
    o = observe(d, 1, -math.log(0.61))
    rci = _hr(repeated_ci(d, o))
    rp = repeated_p_value(d, o)
    sp = 2 * stagewise_p_value(d, o)
    mue_hr = math.exp(-median_unbiased_estimate(d, o))
    naive_hr = math.exp(-naive_estimate(o).estimate)
    dos = make_design(OS["info_fractions"], 0.025, harm_boundary="symmetric", max_information=OS["max_information"])
    oo = observe(dos, 1, -math.log(0.67))
    orci = _hr(repeated_ci(dos, oo))
    orp = repeated_p_value(dos, oo)
    secs = time.perf_counter() - t0
    checks = [
        abs(rci[0] - 0.41) <= 0.01, abs(rci[1] - 0.92) <= 0.01,
        abs(rp - 0.017) <= 0.002,
        format_p(sp, 3) == "p = 0.002",
        mue_hr == naive_hr and round(mue_hr, 2) == 0.61,
        abs(orci[0] - 0.39) <= 0.05, abs(orci[1] - 1.16) <= 0.05,
        abs(orp - 0.17) <= 0.02,
    ]
    ok = all(checks) and secs < 5.0
    record(3, "example B closed-form rows", ok, secs, 5.0,
           f"PFS RCI [{rci[0]:.3f}, {rci[1]:.3f}] p={rp:.4f}, stage-wise p={sp:.4f}, MUE={mue_hr:.4f}; "
           f"OS RCI [{orci[0]:.3f}, {orci[1]:.3f}] p={orp:.3f}")
    assert ok


def test_criterion_4_example_b_simulation():
    t0 = time.perf_counter()
    spec = load_fixture("B")
    g = spec.gsd_endpoints[0]
    cfg = RngConfig(spec.seed, spec.replications)
    o = observe(g.design, 1, g.latest.summary.benefit_estimate)
    runs = []
    for _ in range(2):
        mc_engine._normals.cache_clear()
        w = whitehead_adjusted_estimate(g.design, o, cfg)
        c = conditional_adjusted_estimate(g.design, o, cfg)
        runs.append((w.estimate, w.interval, c.estimate, c.interval))
    secs = (time.perf_counter() - t0) / 2
    w_est, w_iv, c_est, c_iv = runs[0]
    wh, ch = math.exp(-w_est), math.exp(-c_est)
    wi, ci = _hr(w_iv), _hr(c_iv)
    checks = [
        abs(wh - 0.62) <= 0.01, abs(ch - 0.78) <= 0.03,
        abs(wi[0] - 0.44) <= 0.01, abs(wi[1] - 0.84) <= 0.01,
        abs(ci[0] - 0.45) <= 0.03, abs(ci[1] - 0.98) <= 0.03,
        runs[0] == runs[1],
    ]
    ok = all(checks) and secs < 30.0
    record(4, "example B simulation rows", ok, secs, 30.0,
           f"unconditional {wh:.4f} [{wi[0]:.4f}, {wi[1]:.4f}], conditional {ch:.4f} [{ci[0]:.4f}, {ci[1]:.4f}], "
           f"repeat identical={runs[0] == runs[1]}")
    assert ok


def _random_design(rng):
    k = int(rng.integers(1, 6))
    while True:
        t = np.sort(rng.uniform(0.1, 0.95, k - 1))
        if k == 1 or (np.diff(np.r_[0.0, t, 1.0]).min() >= 0.05):
            break
    kind = "obrien_fleming_type" if rng.random() < 0.5 else "pocock_type"
    alpha = float(rng.choice([0.01, 0.025, 0.05]))
    harm = "symmetric" if rng.random() < 0.3 else "none"
    return make_design(list(t) + [1.0], alpha, SpendingFunction(kind), harm_boundary=harm)


def test_criterion_5_boundary_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_q, worst_z, kinds = 0.0, 0.0, set()
    for i in range(20):
        d = _random_design(rng)
        kinds.add(d.spending.kind)
        cum_q = np.array(crossing_probabilities(d, 0.0, 1.0).cumulative_upper(), dtype=float)
        worst_q = max(worst_q, float(np.max(np.abs(cum_q - d.cumulative_spend()))))
        mc_engine._normals.cache_clear()
        sd = stopping_distribution(d, 0.0, 1.0, RngConfig(1000 + i, 1_000_000, 4))
        cum_mc = np.cumsum(sd.upper)
        for q, m in zip(cum_q, cum_mc):
            se = sd.binomial_se(q)
            worst_z = max(worst_z, abs(m - q) / se)
    mc_engine._normals.cache_clear()
    secs = time.perf_counter() - t0
    ok = worst_q <= 1e-6 and worst_z <= 3.0 and len(kinds) == 2 and secs < 120
    record(5, "boundary crossing probabilities (20 random designs)", ok, secs, 120.0,
           f"max |quadrature - spend| = {worst_q:.2e}, max |MC - quadrature|/SE = {worst_z:.2f}")
    assert ok


def test_criterion_6_graph_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    order_ok = closed_ok = adj_ok = bonf_ok = True
    for _ in range(200):
        g, p = random_graph(rng)
        alpha = float(rng.choice([0.025, 0.05]))
        finals = all_rejection_orders(g, p, alpha)
        rej = sequentially_rejective_test(g, p, alpha).rejected
        order_ok &= finals == {rej}
        closed_ok &= set(rej) == closed_test(g, p, alpha)
        adj = adjusted_p_values(g, p)
        for a in (0.01, 0.025, 0.05, 0.1):
            r = sequentially_rejective_test(g, p, a).rejected
            adj_ok &= all((h in r) == (adj[h] <= a + 1e-12) for h in g.hypotheses)
        # Bonferroni: same weights, no transitions; brute force is p_i ≤ α w_i and adj = p_i / w_i
        b = MCPGraph.bonferroni(g.hypotheses, g.weights)
        rb = sequentially_rejective_test(b, p, alpha).rejected
        bonf_ok &= rb == {h for h in g.hypotheses if g.weight(h) > 0 and p[h] <= alpha * g.weight(h) + 1e-12}
        ab = adjusted_p_values(b, p)
        bonf_ok &= all(abs(ab[h] - (min(1.0, p[h] / g.weight(h)) if g.weight(h) > 0 else 1.0)) < 1e-12
                       for h in g.hypotheses)
    secs = time.perf_counter() - t0
    ok = order_ok and closed_ok and adj_ok and bonf_ok and secs < 60
    record(6, "graphical procedure properties (200 random graphs)", ok, secs, 60.0,
           f"order invariance={order_ok}, closed test={closed_ok}, adjusted p={adj_ok}, Bonferroni={bonf_ok}")
    assert ok


def test_criterion_7_median_unbiasedness():
    t0 = time.perf_counter()
    imax, theta = 1.0, 2.0                      # drift θ√I_max = 2.0
    d = make_design([0.5, 1.0], 0.025, max_information=imax)
    n = 100_000
    b = PathSampler(d, imax, RngConfig(77, n)).outcomes(theta)
    est = b.mle.copy()                          # look-1 stops: MUE equals the MLE
    late = b.stop_look == 2
    z2 = b.z_stop[late]
    grid = np.linspace(z2.min() - 1e-9, z2.max() + 1e-9, 161)
    table = np.array([median_unbiased_estimate(d, observe(d, 2, z / math.sqrt(imax))) for z in grid])
    est[late] = np.interp(z2, grid, table)
    frac = float(np.mean(est <= theta))
    se = math.sqrt(0.25 / n)
    med = float(np.median(est))
    secs = time.perf_counter() - t0
    ok = abs(frac - 0.5) <= 3 * se and secs < 60
    record(7, "median-unbiasedness (K=2, drift 2.0, 1e5 paths)", ok, secs, 60.0,
           f"P(MUE ≤ θ) = {frac:.4f} (±{3 * se:.4f}), median {med:.4f} vs θ = {theta}")
    assert ok


def test_criterion_8_determinism():
    t0 = time.perf_counter()
    renders = []
    for workers in (1, 1, 8):
        mc_engine._normals.cache_clear()
        renders.append(tuple(render_fixture(name, "text", workers) for name in ("A", "B", "C_week26", "C_full")))
    mc_engine._normals.cache_clear()
    results = verify(workers=8)
    secs = time.perf_counter() - t0
    ok = renders[0] == renders[1] == renders[2] and all(r.ok for r in results)
    record(8, "verify determinism (twice, workers 1 and 8)", ok, secs, None,
           ", ".join(f"{r.name}={'ok' if r.ok else 'MISMATCH'}" for r in results))
    assert ok

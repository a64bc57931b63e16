import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialinfer.gsd import make_design
from trialinfer.gsd_inference import (
    InferenceError,
    LookObservation,
    conditional_adjusted_estimate,
    median_unbiased,
    median_unbiased_estimate,
    naive_estimate,
    observe,
    repeated_ci,
    repeated_p_value,
    stagewise_ci,
    stagewise_p_value,
    whitehead_adjusted_estimate,
)
from trialinfer.mc_engine import PathSampler, RngConfig
from trialinfer.normal_core import std_normal_sf

PFS = make_design([0.66, 1.0], 0.025, harm_boundary="symmetric", max_information=57.5)
OS = make_design([0.5, 0.75, 1.0], 0.025, harm_boundary="symmetric", max_information=233 / 4)
TWO = make_design([0.5, 1.0], 0.025, max_information=40.0)
SMALL_MC = RngConfig(5, 40_000)


def _hr(iv):
    return tuple(sorted(math.exp(-v) for v in iv))


def test_observation_checks():
    with pytest.raises(InferenceError):
        LookObservation(1, 2.0, 1.0, 1.0, True)
    with pytest.raises(InferenceError):
        observe(PFS, 3, 0.1)
    o = observe(PFS, 1, -math.log(0.61))
    assert o.information == pytest.approx(0.66 * 57.5)
    assert o.stopped


def test_first_look_identities():
    o = observe(PFS, 1, -math.log(0.61))
    assert median_unbiased_estimate(PFS, o) == o.mle
    assert stagewise_p_value(PFS, o) == pytest.approx(std_normal_sf(o.z))
    n = naive_estimate(o)
    assert stagewise_ci(PFS, o) == pytest.approx(n.interval)
    assert median_unbiased(PFS, o).p_value == pytest.approx(n.p_value)


def test_pfs_closed_form_values():
    o = observe(PFS, 1, -math.log(0.61))
    lo, hi = _hr(repeated_ci(PFS, o))
    assert lo == pytest.approx(0.41, abs=0.01) and hi == pytest.approx(0.92, abs=0.01)
    assert repeated_p_value(PFS, o) == pytest.approx(0.017, abs=0.002)
    assert 2 * stagewise_p_value(PFS, o) == pytest.approx(0.0023, abs=1e-4)


def test_repeated_ci_is_naive_ci_at_nominal_level():
    o = observe(OS, 1, -math.log(0.67))
    level = 1 - 2 * OS.local_levels[0]
    assert repeated_ci(OS, o) == pytest.approx(naive_estimate(o, level).interval)


def test_repeated_p_inverts_repeated_ci():
    for d, look, z in [(PFS, 1, 2.8), (OS, 2, 2.1), (TWO, 2, 1.5), (OS, 3, 2.3)]:
        o = observe(d, look, z / math.sqrt(d.max_information * d.info_fractions[look - 1]))
        rp = repeated_p_value(d, o)
        lo, hi = repeated_ci(d, o, level=1 - rp)
        assert lo == pytest.approx(0.0, abs=1e-6)


def test_repeated_p_single_look_equals_naive():
    d = make_design([1.0], 0.025, max_information=100.0)
    o = observe(d, 1, 0.21)
    assert repeated_p_value(d, o) == pytest.approx(2 * std_normal_sf(o.z), rel=1e-8)


def test_stagewise_p_matches_simulation():
    # Independent MC under θ = 0: probability of stopping at look 1, or at look 2 with larger z.
    o = observe(TWO, 2, 2.2 / math.sqrt(40.0))
    rng = np.random.default_rng(3)
    n = 1_000_000
    z1 = rng.standard_normal(n)
    z2 = (z1 * math.sqrt(0.5) + rng.standard_normal(n) * math.sqrt(0.5))
    u1 = TWO.boundaries[0]
    p_mc = np.mean((z1 >= u1) | ((z1 < u1) & (z2 >= 2.2)))
    p = stagewise_p_value(TWO, o)
    assert abs(p - p_mc) < 4 * math.sqrt(p * (1 - p) / n)


def test_mue_and_ci_bracket_at_later_look():
    o = observe(TWO, 2, 2.2 / math.sqrt(40.0))
    est = median_unbiased_estimate(TWO, o)
    lo, hi = stagewise_ci(TWO, o)
    assert lo < est < hi
    assert est < o.mle  # shrinks toward zero after passing an early look


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=-1.0, max_value=3.5), st.floats(min_value=-1.0, max_value=3.5))
def test_mue_monotone_in_z(a, b):
    if abs(a - b) < 1e-3:
        return
    za, zb = sorted((a, b))
    ea = median_unbiased_estimate(TWO, observe(TWO, 2, za / math.sqrt(40.0)))
    eb = median_unbiased_estimate(TWO, observe(TWO, 2, zb / math.sqrt(40.0)))
    assert ea < eb


def test_not_stopped_observation_rejected():
    o = observe(OS, 1, -math.log(0.67))
    assert not o.stopped
    with pytest.raises(InferenceError):
        median_unbiased_estimate(OS, o)
    with pytest.raises(InferenceError):
        whitehead_adjusted_estimate(OS, o, SMALL_MC)


def test_whitehead_solves_expectation_equation():
    o = observe(PFS, 1, -math.log(0.61))
    a = whitehead_adjusted_estimate(PFS, o, SMALL_MC)
    m, se, _ = PathSampler(PFS, 57.5, SMALL_MC).expected_mle(a.estimate)
    assert m == pytest.approx(o.mle, abs=1e-6)
    assert a.interval[0] < a.estimate < a.interval[1]
    assert a.mc_meta.seed == 5 and a.mc_meta.replications == 40_000


def test_conditional_solves_conditional_equation():
    o = observe(PFS, 1, -math.log(0.61))
    a = conditional_adjusted_estimate(PFS, o, SMALL_MC)
    m, _, _ = PathSampler(PFS, 57.5, SMALL_MC).expected_mle(a.estimate, condition_on_look=1)
    assert m == pytest.approx(o.mle, abs=1e-5)
    assert a.estimate < o.mle


def test_adjusted_estimates_deterministic_and_worker_invariant():
    o = observe(PFS, 1, -math.log(0.61))
    a = whitehead_adjusted_estimate(PFS, o, RngConfig(8, 30_000, 1))
    b = whitehead_adjusted_estimate(PFS, o, RngConfig(8, 30_000, 1))
    c = whitehead_adjusted_estimate(PFS, o, RngConfig(8, 30_000, 4))
    assert a.estimate == b.estimate == c.estimate
    assert a.interval == c.interval


def test_single_look_adjusted_collapse_to_naive():
    d = make_design([1.0], 0.025, max_information=50.0)
    o = observe(d, 1, 0.4)
    n = naive_estimate(o)
    for fn in (whitehead_adjusted_estimate, conditional_adjusted_estimate):
        a = fn(d, o, SMALL_MC)
        assert a.estimate == n.estimate and a.interval == pytest.approx(n.interval)


def test_one_sided_conditional_limit_unbounded():
    # Without a harm boundary, E[MLE | stop at 1] ≥ u_1/√I_1 for every θ, so the
    # lower limit of the conditional interval has no preimage.
    d = make_design([0.66, 1.0], 0.025, max_information=57.5)
    o = observe(d, 1, -math.log(0.61))
    a = conditional_adjusted_estimate(d, o, SMALL_MC)
    assert a.interval[0] == -math.inf
    assert a.notes

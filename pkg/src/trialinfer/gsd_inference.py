"""Inference after (or during) a group-sequential trial.

All quantities are on the benefit-normalized analysis scale: ``mle`` is
positive when the treatment looks better, and θ is the true effect on that
scale. Information at look k is ``I_max·t_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from scipy.optimize import brentq

from .gsd import (GroupSequentialDesign, _Recursion, design_with_alpha, ensure_boundaries, spend)
from .mc_engine import PathSampler, RareConditioningError, RngConfig
from .normal_core import std_normal_quantile, std_normal_sf

BRACKET_DRIFT = 10.0
BISECTION_STEPS = 40


class InferenceError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class LookObservation:
    look: int
    z: float
    mle: float
    information: float
    stopped: bool

    def __post_init__(self):
        if not self.information > 0:
            raise InferenceError("information must be positive")
        if abs(self.z - self.mle * math.sqrt(self.information)) > 1e-9 * max(1.0, abs(self.z)):
            raise InferenceError("z must equal mle·√information")


def observe(d: GroupSequentialDesign, look: int, mle: float,
            information: Optional[float] = None) -> LookObservation:
    """Build an observation; ``stopped`` is set when a boundary is crossed or
    the look is the last one. Missing information is projected from the
    design's maximum information."""
    d = ensure_boundaries(d)
    if not 1 <= look <= d.looks:
        raise InferenceError(f"look {look} outside 1..{d.looks}")
    if information is None:
        if d.max_information is None:
            raise InferenceError("information needed when the design has no max_information")
        information = d.max_information * d.info_fractions[look - 1]
    z = mle * math.sqrt(information)
    u, l = d.boundaries[look - 1], d.lower_boundaries[look - 1]
    stopped = z >= u or z <= l or look == d.looks
    return LookObservation(look, z, mle, information, stopped)


def crossed(d: GroupSequentialDesign, obs: LookObservation) -> bool:
    return obs.z >= ensure_boundaries(d).boundaries[obs.look - 1]


def _max_info(d: GroupSequentialDesign, obs: LookObservation) -> float:
    return obs.information / d.info_fractions[obs.look - 1]


def _check_look(d: GroupSequentialDesign, obs: LookObservation):
    if not 1 <= obs.look <= d.looks:
        raise InferenceError(f"look {obs.look} outside 1..{d.looks}")


def _require_stopped(obs: LookObservation):
    if not obs.stopped:
        raise InferenceError("stage-wise inference needs an observation at which the trial stopped")


def _more_extreme(d: GroupSequentialDesign, obs: LookObservation, drift: float) -> float:
    """P_drift(outcome at least as extreme as obs in the stage-wise ordering)."""
    rec = _Recursion(d, drift)
    p = sum(rec.upper_tail(j, d.boundaries[j - 1]) for j in range(1, obs.look))
    return min(1.0, max(0.0, p + rec.upper_tail(obs.look, obs.z)))


def stagewise_p_value(d: GroupSequentialDesign, obs: LookObservation) -> float:
    """One-sided p-value from the stage-wise ordering."""
    d = ensure_boundaries(d)
    _check_look(d, obs)
    _require_stopped(obs)
    if obs.look == 1:
        return std_normal_sf(obs.z)
    return _more_extreme(d, obs, 0.0)


def _solve_theta(d, obs, target: float) -> float:
    imax = _max_info(d, obs)
    centre = obs.mle * math.sqrt(imax)
    lo, hi = centre - BRACKET_DRIFT, centre + BRACKET_DRIFT
    f = lambda dr: _more_extreme(d, obs, dr) - target
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise InferenceError(f"root not bracketed for target {target} within |drift - mle drift| ≤ {BRACKET_DRIFT}")
    drift = brentq(f, lo, hi, xtol=1e-10)
    return drift / math.sqrt(imax)


def median_unbiased_estimate(d: GroupSequentialDesign, obs: LookObservation) -> float:
    d = ensure_boundaries(d)
    _check_look(d, obs)
    _require_stopped(obs)
    if obs.look == 1:
        return obs.mle
    return _solve_theta(d, obs, 0.5)


def stagewise_ci(d: GroupSequentialDesign, obs: LookObservation, level: float = 0.95) -> tuple[float, float]:
    d = ensure_boundaries(d)
    _check_look(d, obs)
    _require_stopped(obs)
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if obs.look == 1:
        q = std_normal_quantile((1.0 + level) / 2.0) / math.sqrt(obs.information)
        return obs.mle - q, obs.mle + q
    return _solve_theta(d, obs, (1.0 - level) / 2.0), _solve_theta(d, obs, (1.0 + level) / 2.0)


def repeated_ci(d: GroupSequentialDesign, obs: LookObservation,
                level: Optional[float] = None) -> tuple[float, float]:
    """mle ± u_k/√I_k. A ``level`` other than the design's 1 - 2α recomputes
    the boundaries with one-sided α = (1 - level)/2."""
    d = ensure_boundaries(d)
    _check_look(d, obs)
    if level is not None and abs((1.0 - level) / 2.0 - d.alpha_one_sided) > 1e-12:
        d = design_with_alpha(d, (1.0 - level) / 2.0, upto=obs.look)
    half = d.boundaries[obs.look - 1] / math.sqrt(obs.information)
    return obs.mle - half, obs.mle + half


def _boundary_at(d: GroupSequentialDesign, look: int, alpha_two_sided: float) -> float:
    a1 = alpha_two_sided / 2.0
    if look == 1:
        s = spend(d.spending, d.info_fractions[0], a1)
        return -std_normal_quantile(s) if s > 0 else math.inf
    try:
        return design_with_alpha(d, a1, upto=look).boundaries[look - 1]
    except ValueError:
        # boundaries collapse to ≤ 0 near α = 1 for symmetric designs
        return 0.0


def repeated_p_value(d: GroupSequentialDesign, obs: LookObservation) -> float:
    """Smallest two-sided α' for which the design re-spent at α' is crossed by
    |z| at this look."""
    d = ensure_boundaries(d)
    _check_look(d, obs)
    z = abs(obs.z)
    if z == 0.0:
        return 1.0
    a_lo, a_hi = 1e-12, 1.0 - 1e-9
    f = lambda a: _boundary_at(d, obs.look, a) - z
    if f(a_hi) > 0:
        return 1.0
    if f(a_lo) <= 0:
        return a_lo
    return brentq(f, a_lo, a_hi, xtol=1e-12, rtol=1e-10)


# -- simulation-based bias adjustment ------------------------------------------

@dataclass(frozen=True)
class MCMeta:
    seed: int
    replications: int
    substreams: int
    estimate_se: float
    notes: tuple = ()


@dataclass(frozen=True)
class AdjustedEstimate:
    kind: str
    estimate: float
    interval: tuple
    p_value: Optional[float] = None
    mc_meta: Optional[MCMeta] = None
    notes: tuple = field(default=())


class _BiasCurve:
    """θ ↦ E_θ[MLE at stop] (optionally given the stopping look), with common
    random numbers across θ."""

    def __init__(self, d, obs, cfg: RngConfig, condition_on_look: Optional[int]):
        self.imax = _max_info(d, obs)
        self.sampler = PathSampler(d, self.imax, cfg)
        self.look = condition_on_look
        self.scale = 1.0 / math.sqrt(obs.information)

    def __call__(self, theta: float) -> Optional[float]:
        try:
            return self.sampler.expected_mle(theta, self.look)[0]
        except RareConditioningError:
            return None

    def se(self, theta: float) -> float:
        return self.sampler.expected_mle(theta, self.look)[1]


def _valid_end(curve: _BiasCurve, centre: float, end: float) -> tuple[float, float]:
    """Move ``end`` toward ``centre`` until the curve is defined there."""
    for _ in range(60):
        v = curve(end)
        if v is not None:
            return end, v
        end = centre + (end - centre) / 2.0
    raise RareConditioningError("conditioning event too rare under every candidate θ")


def _invert(curve: _BiasCurve, target: float, centre: float, steps: int = BISECTION_STEPS) -> float:
    """Bisection for curve(θ) = target; ±inf when the target is outside the
    range the curve attains on the search interval."""
    width = BRACKET_DRIFT * curve.scale
    lo, flo = _valid_end(curve, centre, centre - width)
    hi, fhi = _valid_end(curve, centre, centre + width)
    if target < flo:
        return -math.inf
    if target > fhi:
        return math.inf
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        fm = curve(mid)
        if fm is None:
            raise RareConditioningError(f"conditioning event too rare at θ={mid:.4g}")
        if fm < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _adjusted(d, obs, mc: RngConfig, level: float, kind: str) -> AdjustedEstimate:
    d = ensure_boundaries(d)
    _check_look(d, obs)
    _require_stopped(obs)
    q = std_normal_quantile((1.0 + level) / 2.0) / math.sqrt(obs.information)
    naive = (obs.mle - q, obs.mle + q)
    if d.looks == 1:
        return AdjustedEstimate(kind, obs.mle, naive)
    curve = _BiasCurve(d, obs, mc, obs.look if kind == "conditional_adjusted" else None)
    est = _invert(curve, obs.mle, obs.mle)
    if not math.isfinite(est):
        raise NonConvergenceError(f"{kind} estimate not attainable", {"mle": obs.mle, "bracket_end": est})
    limits = tuple(_invert(curve, v, est) for v in naive)
    notes = []
    if any(not math.isfinite(v) for v in limits):
        notes.append("confidence limit unattainable under the bias curve; reported as unbounded")
    if est * obs.mle < 0:
        notes.append("adjusted estimate has the opposite sign to the MLE")
    h = 0.1 * curve.scale
    lo_v, hi_v = curve(est - h), curve(est + h)
    slope = (hi_v - lo_v) / (2 * h) if lo_v is not None and hi_v is not None else float("nan")
    est_se = curve.se(est) / slope if slope and slope > 0 else float("nan")
    meta = MCMeta(int(mc.seed), int(mc.replications), int(mc.substreams), float(est_se), tuple(notes))
    return AdjustedEstimate(kind, est, limits, None, meta, tuple(notes))


def whitehead_adjusted_estimate(d: GroupSequentialDesign, obs: LookObservation,
                                mc: RngConfig = RngConfig(), level: float = 0.95) -> AdjustedEstimate:
    """Unconditional bias-adjusted estimate: solves E_θ[MLE] = observed MLE,
    the expectation taken over all stopping looks."""
    return _adjusted(d, obs, mc, level, "unconditional_adjusted")


def conditional_adjusted_estimate(d: GroupSequentialDesign, obs: LookObservation,
                                  mc: RngConfig = RngConfig(), level: float = 0.95) -> AdjustedEstimate:
    """Solves E_θ[MLE | trial stops at the observed look] = observed MLE."""
    return _adjusted(d, obs, mc, level, "conditional_adjusted")


def bias_shifted_ci(d: GroupSequentialDesign, obs: LookObservation, level: float = 0.95,
                    kind: str = "unconditional", mc: RngConfig = RngConfig()) -> tuple[float, float]:
    if kind not in ("unconditional", "conditional"):
        raise ValueError("kind must be 'unconditional' or 'conditional'")
    fn = whitehead_adjusted_estimate if kind == "unconditional" else conditional_adjusted_estimate
    return fn(d, obs, mc, level).interval


def naive_estimate(obs: LookObservation, level: float = 0.95) -> AdjustedEstimate:
    q = std_normal_quantile((1.0 + level) / 2.0) / math.sqrt(obs.information)
    return AdjustedEstimate("naive", obs.mle, (obs.mle - q, obs.mle + q), 2.0 * std_normal_sf(abs(obs.z)))


def median_unbiased(d: GroupSequentialDesign, obs: LookObservation, level: float = 0.95) -> AdjustedEstimate:
    """Median-unbiased estimate with its stage-wise CI and two-sided p-value."""
    p = min(1.0, 2.0 * stagewise_p_value(d, obs))
    return AdjustedEstimate("median_unbiased", median_unbiased_estimate(d, obs), stagewise_ci(d, obs, level), p)


__all__ = [
    "LookObservation", "observe", "crossed", "stagewise_p_value", "stagewise_ci",
    "median_unbiased_estimate", "repeated_ci", "repeated_p_value", "whitehead_adjusted_estimate",
    "conditional_adjusted_estimate", "bias_shifted_ci", "AdjustedEstimate", "MCMeta",
    "naive_estimate", "median_unbiased", "InferenceError", "NonConvergenceError",
]

"""Report orchestration: graph-based and group-sequential result tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from ..graph_mcp import UNAVAILABLE, sequentially_rejective_test, two_sided_inference
from ..gsd import ensure_boundaries
from ..gsd_inference import (
    conditional_adjusted_estimate,
    median_unbiased,
    observe,
    repeated_ci,
    repeated_p_value,
    whitehead_adjusted_estimate,
)
from ..mc_engine import DEFAULT_REPLICATIONS, DEFAULT_SEED, RngConfig
from ..normal_core import EndpointScale, ci_from_summary, std_normal_sf
from .spec import TrialSpec

CONFIRMATORY = "confirmatory"
DESCRIPTIVE = "descriptive"
NOT_YET_DECIDED = "not-yet-decided"
STATUSES = (CONFIRMATORY, DESCRIPTIVE, NOT_YET_DECIDED)

ROW_LABELS = {
    "naive": "Standard (Wald/Cox) estimate and test",
    "median_unbiased": "Median-unbiased estimate (stage-wise ordering)",
    "unconditional_adjusted": "Unconditional bias-adjusted estimate",
    "conditional_adjusted": "Conditional bias-adjusted estimate",
    "repeated": "Repeated CI and p-value",
}


class GateCycleError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    lower_open: bool = False
    upper_open: bool = False


@dataclass(frozen=True)
class ReportRow:
    section: str
    endpoint: str
    label: str
    kind: str
    estimate: Optional[float]
    ci: Optional[Interval]
    p: Optional[float]
    adjusted_ci: Optional[Interval]
    adjusted_p: Optional[float]
    status: str


@dataclass(frozen=True)
class ReportTable:
    title: str
    kind: str                 # "graph" or "gsd"
    estimate_header: str
    rows: tuple = ()
    footnotes: tuple = ()
    level: float = 0.95
    digits: int = 2
    p_digits: int = 3


@dataclass(frozen=True)
class GateStatus:
    endpoint: str
    gate_satisfied: bool
    reason: str
    status: str = NOT_YET_DECIDED


def _estimate_header(scales) -> str:
    kinds = {s.kind.value for s in scales}
    if kinds == {"log_hazard_ratio"}:
        return "Hazard ratio"
    if kinds == {"mean_difference"}:
        return "Mean difference"
    return "Estimate"


def _to_display(scale: EndpointScale, lo: float, hi: float, lo_open=False, hi_open=False) -> Interval:
    """Benefit-frame interval → natural direction on the display scale."""
    if scale.benefit_sign < 0:
        lo, hi, lo_open, hi_open = -hi, -lo, hi_open, lo_open
    return Interval(scale.to_display(lo), scale.to_display(hi), lo_open, hi_open)


# -- graph-based multiplicity report --------------------------------------------

def _optimistic_rejections(spec: TrialSpec, p_benefit: dict, p_harm: dict) -> set:
    """Hypotheses that would be rejected if every unavailable p-value were 0."""
    m = spec.mcp
    harm = m.benefit if m.harm is None else m.harm
    fill = lambda p: {h: (0.0 if v is UNAVAILABLE else v) for h, v in p.items()}
    out = set(sequentially_rejective_test(m.benefit, fill(p_benefit), m.alpha_one_sided).rejected)
    out |= set(sequentially_rejective_test(harm, fill(p_harm), m.alpha_one_sided).rejected)
    return out


def run_graph_report(spec: TrialSpec) -> ReportTable:
    if spec.mcp is None:
        raise ValueError("spec has no mcp section")
    m = spec.mcp
    level = spec.output.level
    hyps = m.benefit.hypotheses
    summaries, p_benefit = {}, {}
    for h in hyps:
        ep = spec.endpoint(h)
        if not ep.available:
            p_benefit[h] = UNAVAILABLE
            continue
        if ep.summary is None:
            raise ValueError(f"endpoint {h!r} has no summary")
        summaries[h] = ep.summary
        p_benefit[h] = ep.summary.p_one_sided
    p_harm = {h: (UNAVAILABLE if v is UNAVAILABLE else m.harm_p_values.get(h, 1.0 - v))
              for h, v in p_benefit.items()}
    inf = two_sided_inference(m.benefit, m.harm, p_benefit, p_harm, m.alpha_one_sided,
                              summaries, m.terminal_weights)
    optimistic = _optimistic_rejections(spec, p_benefit, p_harm)

    rows = []
    for h in [e for e in spec.endpoints if e in hyps]:
        ep = spec.endpoint(h)
        if h not in inf:
            rows.append(ReportRow(ep.section, h, ep.label, "comparison", None, None, None, None, None,
                                  NOT_YET_DECIDED))
            continue
        s, a = summaries[h], inf[h]
        lo, hi = ci_from_summary(s, level)
        iv = a.adjusted_interval
        if a.rejected_benefit or a.rejected_harm:
            status = CONFIRMATORY
        elif h in optimistic:
            status = NOT_YET_DECIDED
        else:
            status = DESCRIPTIVE
        rows.append(ReportRow(
            section=ep.section, endpoint=h, label=ep.label, kind="comparison",
            estimate=s.scale.to_display(s.estimate),
            ci=Interval(min(lo, hi), max(lo, hi)),
            p=s.p_two_sided,
            adjusted_ci=_to_display(s.scale, iv.lower, iv.upper, iv.lower_open, iv.upper_open),
            adjusted_p=a.adjusted_p_two_sided,
            status=status,
        ))
    alpha2 = 2 * m.alpha_one_sided
    notes = [
        f"Per-comparison CIs and p-values ignore multiplicity; adjusted results control the "
        f"familywise error rate at two-sided {alpha2:g}.",
        f"Adjusted results combine one-sided graphical tests for benefit and for harm, each at "
        f"level {m.alpha_one_sided:g}; the two simultaneous one-sided bounds form the adjusted CI.",
        "A bracket \"(\" or \")\" marks a limit fixed at the null value by a rejection; the limit itself is excluded.",
    ]
    if m.harm is None:
        notes.append("Harm-direction tests reuse the benefit graph with p-values 1 - p.")
    if any(r.status == NOT_YET_DECIDED for r in rows):
        notes.append("not-yet-decided: the outcome depends on results that are not yet available.")
    return ReportTable(spec.title, "graph", _estimate_header(spec.endpoint(h).scale for h in hyps),
                       tuple(rows), tuple(notes), level, spec.output.digits, spec.output.p_digits)


# -- hierarchical gating ------------------------------------------------------------

def apply_gating(spec: TrialSpec, rejected: Mapping[str, bool],
                 pending: Optional[Mapping[str, bool]] = None) -> list[GateStatus]:
    """Resolve confirmatory status along ``gate_on`` chains.

    ``rejected[e]`` is whether e's own boundary has been crossed and
    ``pending[e]`` whether e still has analyses to come.
    """
    pending = pending or {}
    gates = {g.endpoint: g.gate_on for g in spec.gsd_endpoints}
    out = []
    for eid in gates:
        ancestors, seen, cur = [], {eid}, gates[eid]
        while cur is not None:
            if cur in seen:
                raise GateCycleError(f"gate chain through {eid!r} is cyclic")
            seen.add(cur)
            ancestors.append(cur)
            cur = gates.get(cur)
        failed = [a for a in ancestors if not rejected.get(a, False)]
        own = bool(rejected.get(eid, False))
        if failed:
            out.append(GateStatus(eid, False, f"gate not satisfied: {', '.join(failed)} not rejected", DESCRIPTIVE))
        elif own:
            out.append(GateStatus(eid, True, "boundary crossed with gate satisfied", CONFIRMATORY))
        elif pending.get(eid, False):
            out.append(GateStatus(eid, True, "boundary not crossed; later analyses planned", NOT_YET_DECIDED))
        else:
            out.append(GateStatus(eid, True, "boundary not crossed at the final analysis", DESCRIPTIVE))
    return out


# -- group-sequential report --------------------------------------------------------

def simulation_config(spec: TrialSpec, seed: Optional[int] = None, replications: Optional[int] = None,
                      workers: int = 1) -> RngConfig:
    seed = seed if seed is not None else (spec.seed if spec.seed is not None else DEFAULT_SEED)
    reps = replications or spec.replications or DEFAULT_REPLICATIONS
    return RngConfig(int(seed), int(reps), int(workers))


def _fmt_level(x: float) -> str:
    return f"{x:.3f}"


def run_gsd_report(spec: TrialSpec, mc: Optional[RngConfig] = None,
                   endpoints: Optional[list] = None) -> ReportTable:
    if not spec.gsd_endpoints:
        raise ValueError("spec has no gsd_endpoints")
    mc = mc or simulation_config(spec)
    level = spec.output.level
    selected = [g for g in spec.gsd_endpoints if endpoints is None or g.endpoint in endpoints]

    work = {}
    for g in spec.gsd_endpoints:
        d = ensure_boundaries(g.design)
        o = g.latest
        if o.look > d.looks:
            raise ValueError(f"{g.endpoint}: observation look {o.look} exceeds design looks {d.looks}")
        obs = observe(d, o.look, o.summary.benefit_estimate, o.information)
        work[g.endpoint] = (g, d, o, obs)
    rejected = {e: obs.z >= d.boundaries[obs.look - 1] for e, (g, d, o, obs) in work.items()}
    pending = {e: not obs.stopped for e, (g, d, o, obs) in work.items()}
    gate = {s.endpoint: s for s in apply_gating(spec, rejected, pending)}

    rows, notes = [], []
    any_mc = False
    for g in selected:
        _, d, o, obs = work[g.endpoint]
        ep = spec.endpoint(g.endpoint)
        scale = ep.scale
        section = ep.section or ep.label
        status = gate[g.endpoint].status

        def row(kind, estimate, ci, p):
            return ReportRow(section, g.endpoint, ROW_LABELS[kind], kind, estimate, ci, p, None, None, status)

        def natural(v):
            return scale.to_display(scale.benefit_sign * v)

        lo, hi = ci_from_summary(o.summary, level)
        rows.append(row("naive", scale.to_display(o.summary.estimate), Interval(min(lo, hi), max(lo, hi)),
                        2.0 * std_normal_sf(abs(obs.z))))
        if obs.stopped:
            mu = median_unbiased(d, obs, level)
            rows.append(row("median_unbiased", natural(mu.estimate), _to_display(scale, *mu.interval), mu.p_value))
            for fn in (whitehead_adjusted_estimate, conditional_adjusted_estimate):
                a = fn(d, obs, mc, level)
                rows.append(row(a.kind, natural(a.estimate), _to_display(scale, *a.interval), None))
                notes += [f"{ep.label}, {ROW_LABELS[a.kind].lower()}: {n}." for n in a.notes]
            any_mc = any_mc or d.looks > 1
        rows.append(row("repeated", None, _to_display(scale, *repeated_ci(d, obs, level)),
                        repeated_p_value(d, obs)))

        k = obs.look
        nominal = 2.0 * d.local_levels[k - 1]
        word = "crossed" if rejected[g.endpoint] else "not crossed"
        notes.append(f"{ep.label}: efficacy boundary at analysis {k} of {d.looks} (two-sided nominal "
                     f"p ≤ {_fmt_level(nominal)}) {word}.")
        gs = gate[g.endpoint]
        if g.gate_on is not None:
            notes.append(f"{ep.label}: confirmatory only after {spec.endpoint(g.gate_on).label} is rejected; "
                         f"{gs.reason}.")
        elif gs.status == NOT_YET_DECIDED:
            notes.append(f"{ep.label}: {gs.reason}.")
    notes.append(f"Repeated CIs equal standard CIs at the nominal two-sided level of the current analysis, "
                 f"which keeps {level:.0%} coverage across all analyses.")
    if any_mc:
        notes.append("No p-values are reported for the bias-adjusted estimates.")
        notes.append(f"Bias-adjusted estimates use simulation (seed {mc.seed}, {mc.replications} replications).")
    header = _estimate_header(spec.endpoint(g.endpoint).scale for g in selected) if selected else "Estimate"
    return ReportTable(spec.title, "gsd", header, tuple(rows), tuple(notes), level,
                       spec.output.digits, spec.output.p_digits)


def run_report(spec: TrialSpec, mc: Optional[RngConfig] = None) -> list[ReportTable]:
    tables = []
    if spec.mcp is not None:
        tables.append(run_graph_report(spec))
    if spec.gsd_endpoints:
        tables.append(run_gsd_report(spec, mc))
    return tables

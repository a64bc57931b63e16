"""Graphical multiple comparison procedures.

A graph is a vector of initial local-α fractions plus a transition matrix that
redistributes a rejected hypothesis' weight. All tests are one-sided in the
benefit-normalized frame; two-sided inference is assembled from a benefit
graph and a harm graph.

p-value sets map hypothesis ids to a one-sided p-value or ``UNAVAILABLE``
(``None``) for endpoints that have not been observed yet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .normal_core import SummaryStat, std_normal_quantile

EPS = 1e-12
UNAVAILABLE = None


class GraphError(ValueError):
    """Raised when a graph violates its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class MCPGraph:
    hypotheses: tuple
    weights: tuple
    transitions: tuple

    def __init__(self, hypotheses: Sequence[str], weights: Sequence[float],
                 transitions: Sequence[Sequence[float]]):
        object.__setattr__(self, "hypotheses", tuple(hypotheses))
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))
        object.__setattr__(self, "transitions", tuple(tuple(float(g) for g in row) for row in transitions))

    @property
    def size(self) -> int:
        return len(self.hypotheses)

    def index(self, h: str) -> int:
        try:
            return self.hypotheses.index(h)
        except ValueError:
            raise KeyError(f"unknown hypothesis {h!r}") from None

    def weight(self, h: str) -> float:
        return self.weights[self.index(h)]

    def weight_map(self) -> dict:
        return dict(zip(self.hypotheses, self.weights))

    @classmethod
    def chain(cls, hypotheses: Sequence[str]) -> "MCPGraph":
        """Fixed-sequence (hierarchical) graph: all weight on the first node."""
        n = len(hypotheses)
        w = [1.0] + [0.0] * (n - 1)
        g = [[1.0 if j == i + 1 else 0.0 for j in range(n)] for i in range(n)]
        return cls(hypotheses, w, g)

    @classmethod
    def bonferroni(cls, hypotheses: Sequence[str], weights: Sequence[float]) -> "MCPGraph":
        n = len(hypotheses)
        return cls(hypotheses, weights, [[0.0] * n for _ in range(n)])


def validate_graph(g: MCPGraph) -> list[str]:
    """Every invariant violation, empty when the graph is valid."""
    out = []
    n = len(g.hypotheses)
    if len(set(g.hypotheses)) != n:
        out.append("duplicate hypothesis ids")
    if len(g.weights) != n:
        out.append(f"weights has length {len(g.weights)}, expected {n}")
    if len(g.transitions) != n:
        out.append(f"transitions has {len(g.transitions)} rows, expected {n}")
    for i, w in enumerate(g.weights):
        if not (0.0 <= w <= 1.0) or math.isnan(w):
            out.append(f"weight[{i}]={w} outside [0, 1]")
    if sum(g.weights) > 1.0 + EPS:
        out.append(f"Σw > 1 (sum of weights = {sum(g.weights):.12g})")
    for i, row in enumerate(g.transitions):
        if len(row) != n:
            out.append(f"transitions row {i} has length {len(row)}, expected {n}")
            continue
        for j, v in enumerate(row):
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                out.append(f"transition[{i}][{j}]={v} outside [0, 1]")
        if i < len(row) and row[i] != 0.0:
            out.append(f"transition[{i}][{i}]={row[i]} must be 0")
        if sum(row) > 1.0 + EPS:
            out.append(f"transitions row {i} sums to {sum(row):.12g} > 1")
    return out


def _check(g: MCPGraph) -> None:
    v = validate_graph(g)
    if v:
        raise GraphError(v)


def _update(w: np.ndarray, G: np.ndarray, active: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Remove hypothesis j: propagate its weight and re-wire the edges."""
    w_new = w + w[j] * G[j]
    G_new = np.zeros_like(G)
    n = len(w)
    for l in range(n):
        if not active[l] or l == j:
            continue
        for k in range(n):
            if k == l or k == j or not active[k]:
                continue
            denom = 1.0 - G[l, j] * G[j, l]
            if denom > EPS:
                G_new[l, k] = (G[l, k] + G[l, j] * G[j, k]) / denom
    w_new[j] = 0.0
    active = active.copy()
    active[j] = False
    w_new[~active] = 0.0
    return w_new, G_new


def update_after_rejection(g: MCPGraph, j: str, removed: Sequence[str] = ()) -> MCPGraph:
    """Graph after rejecting ``j``. Removed nodes keep their slot with zero
    weight and no edges so that ids stay stable."""
    jj = g.index(j)
    active = np.ones(g.size, dtype=bool)
    for r in removed:
        active[g.index(r)] = False
    if not active[jj]:
        raise ValueError(f"hypothesis {j!r} was already removed")
    w, G = _update(np.array(g.weights), np.array(g.transitions), active, jj)
    return MCPGraph(g.hypotheses, w.tolist(), G.tolist())


def _as_array(g: MCPGraph, p: Mapping[str, Optional[float]]) -> np.ndarray:
    missing = [h for h in g.hypotheses if h not in p]
    if missing:
        raise KeyError(f"p-value set lacks hypotheses {missing}")
    return np.array([np.nan if p[h] is UNAVAILABLE else float(p[h]) for h in g.hypotheses])


@dataclass
class RejectionResult:
    rejected: frozenset
    final_graph: MCPGraph
    trace: list = field(default_factory=list)  # (id, weight at rejection, local level)
    all_rejected: bool = False


def sequentially_rejective_test(g: MCPGraph, p: Mapping[str, Optional[float]], alpha: float) -> RejectionResult:
    """Reject while some available p_i ≤ α·w_i, updating the graph each time.

    Among several rejectable hypotheses the one with the smallest p/w goes
    first; the final rejected set does not depend on this choice.
    """
    _check(g)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    pv = _as_array(g, p)
    w, G = np.array(g.weights), np.array(g.transitions)
    active = np.ones(g.size, dtype=bool)
    trace = []
    while True:
        best, best_ratio = -1, math.inf
        for i in range(g.size):
            if not active[i] or np.isnan(pv[i]) or w[i] <= 0.0:
                continue
            if pv[i] <= alpha * w[i] + EPS:
                ratio = pv[i] / w[i]
                if ratio < best_ratio:
                    best, best_ratio = i, ratio
        if best < 0:
            break
        trace.append((g.hypotheses[best], float(w[best]), float(alpha * w[best])))
        w, G = _update(w, G, active, best)
        active[best] = False
    rejected = frozenset(h for h, _, _ in trace)
    return RejectionResult(
        rejected=rejected,
        final_graph=MCPGraph(g.hypotheses, w.tolist(), G.tolist()),
        trace=trace,
        all_rejected=len(rejected) == g.size,
    )


def adjusted_p_values(g: MCPGraph, p: Mapping[str, Optional[float]]) -> dict:
    """One-sided adjusted p-values by the sequential max-of-min-ratio scheme.

    UNAVAILABLE counts as p = 1 when ordering and gets adjusted p = 1.
    """
    _check(g)
    pv = _as_array(g, p)
    ratios_p = np.where(np.isnan(pv), 1.0, pv)
    w, G = np.array(g.weights), np.array(g.transitions)
    active = np.ones(g.size, dtype=bool)
    adj = np.ones(g.size)
    running = 0.0
    for _ in range(g.size):
        best, best_ratio = -1, math.inf
        for i in range(g.size):
            if not active[i]:
                continue
            ratio = ratios_p[i] / w[i] if w[i] > 0.0 else math.inf
            if ratio < best_ratio:
                best, best_ratio = i, ratio
        if best < 0 or best_ratio == math.inf:
            break
        running = max(running, best_ratio)
        adj[best] = min(1.0, running)
        w, G = _update(w, G, active, best)
        active[best] = False
    adj[np.isnan(pv)] = 1.0
    return dict(zip(g.hypotheses, adj.tolist()))


@dataclass(frozen=True)
class Bound:
    """One-sided confidence bound in the benefit-normalized frame."""

    value: float
    open: bool = False


def simultaneous_bounds(g: MCPGraph, p: Mapping[str, Optional[float]], alpha: float,
                        summaries: Mapping[str, SummaryStat],
                        terminal_weights: Optional[Sequence[float]] = None) -> dict:
    """Lower confidence bounds compatible with the sequentially rejective test.

    ``summaries`` must carry estimates in the frame the graph tests (benefit
    frame for the benefit graph). Hypotheses with UNAVAILABLE p-values get no
    bound.
    """
    result = sequentially_rejective_test(g, p, alpha)
    terminal = list(g.weights) if terminal_weights is None else [float(v) for v in terminal_weights]
    if len(terminal) != g.size:
        raise ValueError("terminal_weights length does not match the graph")
    if sum(terminal) > 1.0 + EPS or min(terminal, default=0.0) < 0.0:
        raise ValueError("terminal_weights must be non-negative and sum to at most 1")
    w_R = np.array(result.final_graph.weights)
    out = {}
    for i, h in enumerate(g.hypotheses):
        if p[h] is UNAVAILABLE:
            continue
        if h not in summaries:
            raise KeyError(f"no summary for hypothesis {h!r}")
        s = summaries[h]
        est, se = s.benefit_estimate, s.se
        if result.all_rejected:
            wi = terminal[i]
            if wi <= 0.0:
                out[h] = Bound(0.0, open=True)
                continue
            b = est - std_normal_quantile(1.0 - alpha * wi) * se
            out[h] = Bound(0.0, open=True) if b <= 0.0 else Bound(b)
        elif h in result.rejected:
            out[h] = Bound(0.0, open=True)
        else:
            wi = w_R[i]
            if wi <= 0.0:
                out[h] = Bound(-math.inf)
            else:
                out[h] = Bound(est - std_normal_quantile(1.0 - alpha * wi) * se)
    return out


@dataclass(frozen=True)
class AdjustedInterval:
    """Interval on the benefit-normalized scale with per-side open flags."""

    lower: float
    upper: float
    lower_open: bool = False
    upper_open: bool = False

    def excludes(self, value: float = 0.0) -> bool:
        if self.lower > value or (self.lower == value and self.lower_open):
            return True
        return self.upper < value or (self.upper == value and self.upper_open)


@dataclass(frozen=True)
class AdjustedInference:
    adjusted_p_two_sided: float
    adjusted_interval: AdjustedInterval
    rejected_benefit: bool
    rejected_harm: bool
    adjusted_p_benefit: float = 1.0
    adjusted_p_harm: float = 1.0


def mirror_p_values(p: Mapping[str, Optional[float]]) -> dict:
    return {h: (UNAVAILABLE if v is UNAVAILABLE else 1.0 - v) for h, v in p.items()}


def _flip(s: SummaryStat) -> SummaryStat:
    return SummaryStat(-s.estimate, s.se, s.scale)


def two_sided_inference(benefit: MCPGraph, harm: Optional[MCPGraph],
                        p_benefit: Mapping[str, Optional[float]],
                        p_harm: Optional[Mapping[str, Optional[float]]],
                        alpha_one_sided: float, summaries: Mapping[str, SummaryStat],
                        terminal_weights: Optional[Sequence[float]] = None,
                        harm_terminal_weights: Optional[Sequence[float]] = None) -> dict:
    """Combine benefit- and harm-direction procedures into two-sided inference.

    ``harm`` defaults to the benefit graph and ``p_harm`` to 1 - p_benefit.
    Intervals are returned in the benefit-normalized frame; callers map them
    back to the endpoint's natural direction.
    """
    harm = benefit if harm is None else harm
    if set(harm.hypotheses) != set(benefit.hypotheses):
        raise ValueError("benefit and harm graphs must share the hypothesis set")
    p_harm = mirror_p_values(p_benefit) if p_harm is None else p_harm
    if harm_terminal_weights is None and harm is benefit:
        harm_terminal_weights = terminal_weights

    rb = sequentially_rejective_test(benefit, p_benefit, alpha_one_sided)
    rh = sequentially_rejective_test(harm, p_harm, alpha_one_sided)
    ab = adjusted_p_values(benefit, p_benefit)
    ah = adjusted_p_values(harm, p_harm)
    lower = simultaneous_bounds(benefit, p_benefit, alpha_one_sided, summaries, terminal_weights)
    harm_summaries = {h: _flip(s) for h, s in summaries.items()}
    upper = simultaneous_bounds(harm, p_harm, alpha_one_sided, harm_summaries, harm_terminal_weights)

    out = {}
    for h in benefit.hypotheses:
        if h not in lower or h not in upper:
            continue
        lo, up = lower[h], upper[h]
        out[h] = AdjustedInference(
            adjusted_p_two_sided=min(1.0, 2.0 * min(ab[h], ah[h])),
            adjusted_interval=AdjustedInterval(lo.value, -up.value, lo.open, up.open),
            rejected_benefit=h in rb.rejected,
            rejected_harm=h in rh.rejected,
            adjusted_p_benefit=ab[h],
            adjusted_p_harm=ah[h],
        )
    return out

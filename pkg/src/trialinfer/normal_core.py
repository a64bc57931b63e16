"""Standard-normal primitives and conversions between summary-statistic forms.

Everything here works on the *analysis scale*: mean differences stay as they
are, hazard ratios are carried as log hazard ratios. Benefit is normalized so
that a positive ``z`` always favours the treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special


class ScaleKind(str, Enum):
    MEAN_DIFFERENCE = "mean_difference"
    LOG_HAZARD_RATIO = "log_hazard_ratio"


class BenefitDirection(str, Enum):
    LOWER_IS_BETTER = "lower_is_better"
    HIGHER_IS_BETTER = "higher_is_better"


@dataclass(frozen=True)
class EndpointScale:
    kind: ScaleKind = ScaleKind.MEAN_DIFFERENCE
    benefit_direction: BenefitDirection = BenefitDirection.HIGHER_IS_BETTER

    def __post_init__(self):
        object.__setattr__(self, "kind", ScaleKind(self.kind))
        object.__setattr__(self, "benefit_direction", BenefitDirection(self.benefit_direction))

    @property
    def benefit_sign(self) -> int:
        """+1 when larger values favour treatment, -1 otherwise."""
        return 1 if self.benefit_direction is BenefitDirection.HIGHER_IS_BETTER else -1

    @property
    def is_ratio(self) -> bool:
        return self.kind is ScaleKind.LOG_HAZARD_RATIO

    def to_analysis(self, value: float) -> float:
        """Map a displayed value (e.g. a hazard ratio) to the analysis scale."""
        if not self.is_ratio:
            return float(value)
        if value <= 0:
            raise ValueError(f"hazard ratio must be positive, got {value!r}")
        return math.log(value)

    def to_display(self, value: float) -> float:
        if not self.is_ratio:
            return float(value)
        if value == -math.inf:
            return 0.0
        return math.exp(value)


@dataclass(frozen=True)
class SummaryStat:
    """Point estimate and standard error of one comparison.

    ``estimate`` is on the analysis scale in the endpoint's natural direction;
    ``z`` and ``p_one_sided`` are benefit-normalized.
    """

    estimate: float
    se: float
    scale: EndpointScale = EndpointScale()

    def __post_init__(self):
        if not (self.se > 0 and math.isfinite(self.se)):
            raise ValueError(f"se must be positive and finite, got {self.se!r}")
        if not math.isfinite(self.estimate):
            raise ValueError(f"estimate must be finite, got {self.estimate!r}")

    @property
    def benefit_estimate(self) -> float:
        return self.scale.benefit_sign * self.estimate

    @property
    def z(self) -> float:
        return self.benefit_estimate / self.se

    @property
    def p_one_sided(self) -> float:
        return std_normal_sf(self.z)

    @property
    def p_two_sided(self) -> float:
        return min(1.0, 2.0 * std_normal_sf(abs(self.z)))

    def with_direction(self, benefit_direction) -> "SummaryStat":
        return SummaryStat(self.estimate, self.se, EndpointScale(self.scale.kind, benefit_direction))


def std_normal_cdf(x):
    """Φ(x); accepts scalars or arrays."""
    if np.ndim(x) == 0:
        x = float(x)
        if math.isnan(x):
            raise ValueError("x must not be NaN")
        return float(special.ndtr(x))
    return special.ndtr(np.asarray(x, dtype=float))


def std_normal_sf(x):
    """1 - Φ(x) without cancellation in the upper tail."""
    if np.ndim(x) == 0:
        return float(special.ndtr(-float(x)))
    return special.ndtr(-np.asarray(x, dtype=float))


def std_normal_pdf(x):
    if np.ndim(x) == 0:
        x = float(x)
        return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def std_normal_quantile(p):
    """Φ⁻¹(p) for p in the open unit interval.

    Raises:
        ValueError: if any p lies outside (0, 1).
    """
    if np.ndim(p) == 0:
        p = float(p)
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile requires 0 < p < 1, got {p!r}")
        return float(special.ndtri(p))
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("quantile requires 0 < p < 1 for every element")
    return special.ndtri(p)


def _two_sided_quantile(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    return std_normal_quantile((1.0 + level) / 2.0)


def summary_from_ci(estimate: float, lo: float, hi: float, level: float,
                    scale: EndpointScale = EndpointScale()) -> SummaryStat:
    """Back out the standard error from a symmetric (on the analysis scale) CI.

    For hazard-ratio scales all three inputs are hazard ratios and are
    log-transformed first.
    """
    if not lo < hi:
        raise ValueError(f"CI limits out of order: lo={lo!r}, hi={hi!r}")
    if not lo <= estimate <= hi:
        raise ValueError(f"estimate {estimate!r} outside CI [{lo!r}, {hi!r}]")
    est_a, lo_a, hi_a = (scale.to_analysis(v) for v in (estimate, lo, hi))
    se = (hi_a - lo_a) / (2.0 * _two_sided_quantile(level))
    return SummaryStat(est_a, se, scale)


def ci_from_summary(s: SummaryStat, level: float, analysis_scale: bool = False) -> tuple[float, float]:
    """Wald interval at ``level``; hazard ratios are exponentiated unless
    ``analysis_scale`` is set."""
    q = _two_sided_quantile(level)
    lo, hi = s.estimate - q * s.se, s.estimate + q * s.se
    if analysis_scale:
        return lo, hi
    return s.scale.to_display(lo), s.scale.to_display(hi)


def events_to_information(events: int, allocation_ratio: float = 1.0) -> float:
    """Fisher information for a log hazard ratio, I = d·r/(1+r)²."""
    if isinstance(events, bool) or not isinstance(events, (int, np.integer)):
        raise TypeError(f"events must be an integer, got {events!r}")
    if events < 1:
        raise ValueError(f"events must be >= 1, got {events}")
    if not allocation_ratio > 0:
        raise ValueError(f"allocation_ratio must be positive, got {allocation_ratio!r}")
    r = float(allocation_ratio)
    return events * r / (1.0 + r) ** 2

"""Group-sequential designs: α-spending, boundaries and crossing probabilities.

Probabilities are computed by recursive numerical integration of the
sub-densities of the sequential z-statistics

    Z_k ~ N(drift·√t_k, 1),   Cov(Z_i, Z_j) = √(t_i/t_j),  i ≤ j,

where ``drift = θ·√I_max``. Each sub-density lives on a uniform Simpson grid
covering ``mean ± half_width`` intersected with the continuation region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .normal_core import std_normal_cdf, std_normal_quantile, std_normal_sf

ZERO_SPEND = 1e-10
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CHUNK = 512


class DesignError(ValueError):
    pass


class GridTooCoarseError(DesignError):
    pass


@dataclass(frozen=True)
class SpendingFunction:
    """Cumulative α-spending.

    ``user_table`` knots are (t, fraction of the total α spent by t); values
    are linearly interpolated and (0, 0) is implied.
    """

    kind: str = "obrien_fleming_type"
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("obrien_fleming_type", "pocock_type", "user_table"):
            raise DesignError(f"unknown spending kind {self.kind!r}")
        if self.kind == "user_table":
            knots = tuple((float(t), float(a)) for t, a in self.table)
            object.__setattr__(self, "table", knots)
            ts = [t for t, _ in knots]
            fs = [a for _, a in knots]
            if not knots or any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] <= 0.0:
                raise DesignError("user_table times must be strictly increasing in (0, 1]")
            if abs(ts[-1] - 1.0) > 1e-12 or abs(fs[-1] - 1.0) > 1e-12:
                raise DesignError("user_table must end at (1, 1)")
            if any(b < a for a, b in zip(fs, fs[1:])) or fs[0] < 0.0:
                raise DesignError("user_table spending must be non-decreasing and non-negative")


OBRIEN_FLEMING = SpendingFunction("obrien_fleming_type")
POCOCK = SpendingFunction("pocock_type")


def spend(f: SpendingFunction, t: float, alpha_total: float) -> float:
    """Cumulative one-sided α spent by information fraction ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"information fraction must lie in [0, 1], got {t!r}")
    if t == 0.0:
        return 0.0
    if t == 1.0:
        return float(alpha_total)
    if f.kind == "obrien_fleming_type":
        q = std_normal_quantile(1.0 - alpha_total / 2.0)
        return 2.0 * std_normal_sf(q / math.sqrt(t))
    if f.kind == "pocock_type":
        return alpha_total * math.log(1.0 + (math.e - 1.0) * t)
    ts = [0.0] + [k[0] for k in f.table]
    fs = [0.0] + [k[1] for k in f.table]
    return alpha_total * float(np.interp(t, ts, fs))


@dataclass(frozen=True)
class Grid:
    half_width: float = 8.0
    points: int = 4001

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)


@dataclass(frozen=True)
class GroupSequentialDesign:
    """Efficacy design with optional symmetric harm boundary.

    ``alpha_one_sided`` is spent on the upper (benefit) boundary. With
    ``harm_boundary="symmetric"`` the trial also stops when Z_k ≤ -u_k.
    """

    info_fractions: tuple
    alpha_one_sided: float = 0.025
    spending: SpendingFunction = OBRIEN_FLEMING
    harm_boundary: str = "none"
    max_information: Optional[float] = None
    grid: Grid = field(default_factory=Grid)
    boundaries: Optional[tuple] = None

    def __post_init__(self):
        t = tuple(float(x) for x in self.info_fractions)
        object.__setattr__(self, "info_fractions", t)
        if not t:
            raise DesignError("a design needs at least one look")
        if any(b <= a for a, b in zip(t, t[1:])) or t[0] <= 0.0 or abs(t[-1] - 1.0) > 1e-12:
            raise DesignError(f"information fractions must increase strictly to 1, got {t}")
        if not 0.0 < self.alpha_one_sided < 0.5:
            raise DesignError(f"alpha_one_sided must lie in (0, 0.5), got {self.alpha_one_sided}")
        if self.harm_boundary not in ("none", "symmetric"):
            raise DesignError(f"harm_boundary must be 'none' or 'symmetric', got {self.harm_boundary!r}")
        if self.max_information is not None and not self.max_information > 0:
            raise DesignError("max_information must be positive")
        if self.boundaries is not None:
            object.__setattr__(self, "boundaries", tuple(float(u) for u in self.boundaries))

    @property
    def looks(self) -> int:
        return len(self.info_fractions)

    @property
    def symmetric(self) -> bool:
        return self.harm_boundary == "symmetric"

    @property
    def lower_boundaries(self) -> tuple:
        self._require_boundaries()
        if self.symmetric:
            return tuple(-u for u in self.boundaries)
        return tuple(-math.inf for _ in self.boundaries)

    @property
    def local_levels(self) -> tuple:
        """One-sided nominal level 1 - Φ(u_k) at each look."""
        self._require_boundaries()
        return tuple(std_normal_sf(u) for u in self.boundaries)

    def cumulative_spend(self) -> list[float]:
        return [spend(self.spending, t, self.alpha_one_sided) for t in self.info_fractions]

    def _require_boundaries(self):
        if self.boundaries is None:
            raise DesignError("boundaries not computed; call compute_boundaries first")


# -- grid machinery -----------------------------------------------------------

@dataclass
class _Stage:
    """Sub-density of Z_k on a Simpson grid; ``wf`` holds weight × density."""

    z: np.ndarray
    wf: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.wf.sum())


def _simpson(a: float, b: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    if not b > a:
        return np.empty(0), np.empty(0)
    n = max(2, int(math.ceil((b - a) / h)))
    n += n % 2
    z = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return z, w * (b - a) / (3.0 * n)


def _transition(t_prev: float, t_next: float, drift: float) -> tuple[float, float, float]:
    r = math.sqrt(t_prev / t_next)
    sigma = math.sqrt(1.0 - t_prev / t_next)
    shift = drift * (t_next - t_prev) / math.sqrt(t_next)
    return r, shift, sigma


class _Recursion:
    """Sub-densities of a design under one drift, built look by look."""

    def __init__(self, d: GroupSequentialDesign, drift: float, upper=None, lower=None):
        self.d = d
        self.drift = float(drift)
        self.t = d.info_fractions
        self.h = d.grid.spacing
        self.hw = d.grid.half_width
        self.upper = list(d.boundaries) if upper is None else list(upper)
        if lower is None:
            lower = [-u for u in self.upper] if d.symmetric else [-math.inf] * len(self.upper)
        self.lower = list(lower)
        self._cont: list[_Stage] = []

    def mean(self, k: int) -> float:
        return self.drift * math.sqrt(self.t[k - 1])

    def _grid_stage(self, k: int, lo: float, hi: float) -> _Stage:
        m = self.mean(k)
        z, w = _simpson(max(m - self.hw, lo), min(m + self.hw, hi), self.h)
        if k == 1:
            return _Stage(z, w * np.exp(-0.5 * (z - m) ** 2) / _SQRT_2PI)
        prev = self.continuation(k - 1)
        r, shift, sigma = self._step(k)
        f = np.empty_like(z)
        x = r * prev.z + shift
        for i in range(0, len(z), _CHUNK):
            zz = z[i:i + _CHUNK, None]
            u = (zz - x[None, :]) / sigma
            f[i:i + _CHUNK] = np.exp(-0.5 * u * u) @ prev.wf
        return _Stage(z, w * f / (sigma * _SQRT_2PI))

    def _step(self, k: int) -> tuple[float, float, float]:
        r, shift, sigma = _transition(self.t[k - 2], self.t[k - 1], self.drift)
        if self.h > sigma / 3.0:
            raise GridTooCoarseError(
                f"grid spacing {self.h:.3g} too coarse for look {k} (increment sd {sigma:.3g})")
        return r, shift, sigma

    def continuation(self, k: int) -> _Stage:
        """Sub-density of Z_k restricted to (lower_k, upper_k)."""
        while len(self._cont) < k:
            j = len(self._cont) + 1
            self._cont.append(self._grid_stage(j, self.lower[j - 1], self.upper[j - 1]))
        return self._cont[k - 1]

    def full(self, k: int) -> _Stage:
        """Sub-density of Z_k over the whole line, paths not stopped before k."""
        return self._grid_stage(k, -math.inf, math.inf)

    def reach(self, k: int) -> float:
        """P(no stop before look k)."""
        if k == 1:
            return 1.0
        return self.continuation(k - 1).mass

    def upper_tail(self, k: int, c: float) -> float:
        """P(reach k, Z_k ≥ c)."""
        if c == math.inf:
            return 0.0
        if k == 1:
            return std_normal_sf(c - self.mean(1))
        prev = self.continuation(k - 1)
        r, shift, sigma = self._step(k)
        return float(std_normal_sf((c - r * prev.z - shift) / sigma) @ prev.wf)

    def lower_tail(self, k: int, c: float) -> float:
        """P(reach k, Z_k ≤ c)."""
        if c == -math.inf:
            return 0.0
        if k == 1:
            return std_normal_cdf(c - self.mean(1))
        prev = self.continuation(k - 1)
        r, shift, sigma = self._step(k)
        return float(std_normal_cdf((c - r * prev.z - shift) / sigma) @ prev.wf)


# -- public operations --------------------------------------------------------

def compute_boundaries(d: GroupSequentialDesign, upto: Optional[int] = None,
                       tol: float = 1e-12) -> GroupSequentialDesign:
    """Fill in efficacy boundaries so that the cumulative θ=0 upper crossing
    probability at each look equals the cumulative spend.

    ``upto`` limits the computation to the first looks (the returned design
    then carries a truncated boundary tuple; used for repeated p-values).
    """
    K = d.looks if upto is None else upto
    cum = d.cumulative_spend()
    rec = _Recursion(d, 0.0, upper=[], lower=[])
    prev_spend = 0.0
    for k in range(1, K + 1):
        inc = cum[k - 1] - prev_spend
        prev_spend = cum[k - 1]
        if inc < -1e-12:
            raise DesignError(f"spending decreases at look {k} (increment {inc:.3g})")
        if inc < ZERO_SPEND:
            u = math.inf
        else:
            hi = 40.0
            lo = -40.0 if not d.symmetric else 0.0
            if rec.upper_tail(k, lo) - inc <= 0.0:
                raise DesignError(f"cannot place boundary at look {k}: spending exceeds remaining mass")
            u = brentq(lambda c: rec.upper_tail(k, c) - inc, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
            if d.symmetric and u <= 0.0:
                raise DesignError(f"symmetric design needs positive boundaries, look {k} gave {u:.4g}")
        rec.upper.append(u)
        rec.lower.append(-u if d.symmetric else -math.inf)
    return replace(d, boundaries=tuple(rec.upper))


def ensure_boundaries(d: GroupSequentialDesign) -> GroupSequentialDesign:
    return d if d.boundaries is not None and len(d.boundaries) == d.looks else compute_boundaries(d)


def stopping_subdensity(d: GroupSequentialDesign, theta_drift: float, k: int,
                        grid: Optional[Grid] = None) -> tuple[np.ndarray, np.ndarray]:
    """Grid values (z, f) of the sub-density of Z_k over paths not stopped
    before look k. Integrating f (Simpson) gives P(no crossing before k)."""
    if grid is not None:
        d = replace(d, grid=grid)
    d = ensure_boundaries(d)
    if not 1 <= k <= d.looks:
        raise IndexError(f"look {k} outside 1..{d.looks}")
    stage = _Recursion(d, theta_drift).full(k)
    _, w = _simpson(stage.z[0], stage.z[-1], d.grid.spacing)
    return stage.z, stage.wf / w


@dataclass(frozen=True)
class CrossingProbabilities:
    upper: tuple          # P(stop at look k through the efficacy boundary)
    lower: tuple          # P(stop at look k through the harm boundary)
    continuation: float   # P(no boundary crossed at any look)

    @property
    def power(self) -> float:
        return float(sum(self.upper))

    @property
    def stopping(self) -> tuple:
        """P(trial ends at look k); continuation mass is assigned to the last look."""
        s = [u + l for u, l in zip(self.upper, self.lower)]
        s[-1] += self.continuation
        return tuple(s)

    def cumulative_upper(self) -> list[float]:
        return list(np.cumsum(self.upper))


def crossing_probabilities(d: GroupSequentialDesign, theta: float,
                           max_information: float) -> CrossingProbabilities:
    if not max_information >= 0:
        raise ValueError("max_information must be non-negative")
    d = ensure_boundaries(d)
    rec = _Recursion(d, theta * math.sqrt(max_information))
    up, lo = [], []
    for k in range(1, d.looks + 1):
        up.append(rec.upper_tail(k, d.boundaries[k - 1]))
        lo.append(rec.lower_tail(k, rec.lower[k - 1]))
    cont = rec.continuation(d.looks).mass
    return CrossingProbabilities(tuple(up), tuple(lo), cont)


def drift_of(theta: float, max_information: float) -> float:
    return theta * math.sqrt(max_information)


def design_with_alpha(d: GroupSequentialDesign, alpha_one_sided: float,
                      upto: Optional[int] = None) -> GroupSequentialDesign:
    return compute_boundaries(replace(d, alpha_one_sided=alpha_one_sided, boundaries=None), upto=upto)


def make_design(info_fractions: Sequence[float], alpha_one_sided: float = 0.025,
                spending: SpendingFunction = OBRIEN_FLEMING, **kw) -> GroupSequentialDesign:
    """Convenience constructor that also computes the boundaries."""
    return compute_boundaries(GroupSequentialDesign(tuple(info_fractions), alpha_one_sided, spending, **kw))

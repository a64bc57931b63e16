"""Seeded Monte Carlo simulation of canonical group-sequential paths.

Random numbers come from numpy's counter-based Philox generator keyed by the
seed. Replication ``i`` always reads the counter blocks starting at
``i * blocks_per_rep``, so its variates depend only on ``(seed, i)``.
Replications are processed in fixed blocks of ``BLOCK`` and block ``b`` goes
to substream ``b mod substreams``; the partition count therefore never changes
a result.

Normal variates are produced by inverting uniforms with
:func:`trialinfer.normal_core.std_normal_quantile`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .gsd import GroupSequentialDesign, ensure_boundaries
from .normal_core import std_normal_quantile

BLOCK = 4096
MIN_CONDITIONAL_FRACTION = 1e-6
MIN_CONDITIONAL_COUNT = 10
DEFAULT_SEED = 20240611
DEFAULT_REPLICATIONS = 200_000


class RareConditioningError(RuntimeError):
    pass


@dataclass(frozen=True)
class RngConfig:
    seed: int = DEFAULT_SEED
    replications: int = DEFAULT_REPLICATIONS
    substreams: int = 1

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.replications < 1 or self.substreams < 1:
            raise ValueError("replications and substreams must be positive")


def _blocks_per_rep(n_looks: int) -> int:
    return (n_looks + 3) // 4


def _uniforms(seed: int, start: int, stop: int, n_looks: int) -> np.ndarray:
    bpr = _blocks_per_rep(n_looks)
    bg = np.random.Philox(key=int(seed), counter=start * bpr)
    raw = bg.random_raw((stop - start) * bpr * 4).reshape(stop - start, bpr * 4)[:, :n_looks]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _normals_block(seed: int, start: int, stop: int, n_looks: int) -> np.ndarray:
    return std_normal_quantile(_uniforms(seed, start, stop, n_looks))


@lru_cache(maxsize=8)
def _normals(seed: int, reps: int, n_looks: int, substreams: int) -> np.ndarray:
    out = np.empty((reps, n_looks))
    blocks = [(b * BLOCK, min(reps, (b + 1) * BLOCK)) for b in range((reps + BLOCK - 1) // BLOCK)]

    def work(s: int):
        for b in range(s, len(blocks), substreams):
            a, e = blocks[b]
            out[a:e] = _normals_block(seed, a, e, n_looks)

    if substreams == 1:
        work(0)
    else:
        with ThreadPoolExecutor(max_workers=substreams) as pool:
            list(pool.map(work, range(substreams)))
    out.setflags(write=False)
    return out


def standard_normals(cfg: RngConfig, n_looks: int) -> np.ndarray:
    """(replications, n_looks) array of independent N(0, 1) increments."""
    return _normals(int(cfg.seed), int(cfg.replications), int(n_looks), int(cfg.substreams))


@dataclass(frozen=True)
class SimulatedOutcome:
    stop_look: int
    z_path: tuple
    mle_at_stop: float
    crossed: bool


@dataclass(frozen=True)
class PathBatch:
    stop_look: np.ndarray   # 1-based
    z_stop: np.ndarray
    mle: np.ndarray
    crossed: np.ndarray
    crossed_lower: np.ndarray


class PathSampler:
    """Common-random-number sampler: one set of increments reused for every θ."""

    def __init__(self, d: GroupSequentialDesign, max_information: float, cfg: RngConfig):
        self.d = ensure_boundaries(d)
        self.cfg = cfg
        self.max_information = float(max_information)
        t = np.array(self.d.info_fractions)
        self.sqrt_t = np.sqrt(t)
        dt = np.diff(np.concatenate([[0.0], t]))
        eps = standard_normals(cfg, self.d.looks)
        self._base = np.cumsum(eps * np.sqrt(dt), axis=1) / self.sqrt_t
        self.upper = np.array(self.d.boundaries)
        self.lower = np.array(self.d.lower_boundaries)
        self.info = self.max_information * t

    def z(self, theta: float) -> np.ndarray:
        return self._base + theta * math.sqrt(self.max_information) * self.sqrt_t

    def outcomes(self, theta: float) -> PathBatch:
        z = self.z(theta)
        up = z >= self.upper
        lo = z <= self.lower
        hit = up | lo
        hit[:, -1] = True
        idx = np.argmax(hit, axis=1)
        rows = np.arange(z.shape[0])
        z_stop = z[rows, idx]
        return PathBatch(
            stop_look=idx + 1,
            z_stop=z_stop,
            mle=z_stop / np.sqrt(self.info[idx]),
            crossed=up[rows, idx],
            crossed_lower=lo[rows, idx],
        )

    def expected_mle(self, theta: float, condition_on_look: Optional[int] = None) -> tuple[float, float, int]:
        b = self.outcomes(theta)
        m = b.mle
        if condition_on_look is not None:
            keep = b.stop_look == condition_on_look
            n = int(keep.sum())
            if n < max(MIN_CONDITIONAL_COUNT, MIN_CONDITIONAL_FRACTION * len(m)):
                raise RareConditioningError(
                    f"only {n} of {len(m)} replications stop at look {condition_on_look} (θ={theta:.4g})")
            m = m[keep]
        n = len(m)
        sd = float(np.std(m, ddof=1)) if n > 1 else 0.0
        return float(np.mean(m)), sd / math.sqrt(n), n


def simulate_path(d: GroupSequentialDesign, theta: float, max_information: float,
                  rep_index: int, cfg: RngConfig) -> SimulatedOutcome:
    """One replication, regenerated from its own counter block."""
    d = ensure_boundaries(d)
    if not 0 <= rep_index < cfg.replications:
        raise IndexError("rep_index outside the configured replications")
    eps = _normals_block(cfg.seed, rep_index, rep_index + 1, d.looks)[0]
    t = np.array(d.info_fractions)
    dt = np.diff(np.concatenate([[0.0], t]))
    z = np.cumsum(eps * np.sqrt(dt)) / np.sqrt(t) + theta * math.sqrt(max_information) * np.sqrt(t)
    lower = d.lower_boundaries
    for k in range(d.looks):
        if z[k] >= d.boundaries[k] or z[k] <= lower[k] or k == d.looks - 1:
            return SimulatedOutcome(
                stop_look=k + 1,
                z_path=tuple(float(v) for v in z[:k + 1]),
                mle_at_stop=float(z[k] / math.sqrt(max_information * t[k])),
                crossed=bool(z[k] >= d.boundaries[k]),
            )
    raise AssertionError("unreachable")


def simulate_paths(d: GroupSequentialDesign, theta: float, max_information: float,
                   cfg: RngConfig) -> PathBatch:
    return PathSampler(d, max_information, cfg).outcomes(theta)


def expected_mle(d: GroupSequentialDesign, theta: float, max_information: float, cfg: RngConfig,
                 condition_on_look: Optional[int] = None) -> tuple[float, float, int]:
    """(mean MLE at stop, MC standard error, replications used)."""
    return PathSampler(d, max_information, cfg).expected_mle(theta, condition_on_look)


@dataclass(frozen=True)
class StoppingDistribution:
    stop: tuple     # fraction of trials ending at each look
    upper: tuple    # fraction stopping through the efficacy boundary
    lower: tuple
    replications: int

    def binomial_se(self, prob: float) -> float:
        return math.sqrt(max(prob * (1.0 - prob), 1e-300) / self.replications)


def stopping_distribution(d: GroupSequentialDesign, theta: float, max_information: float,
                          cfg: RngConfig) -> StoppingDistribution:
    b = simulate_paths(d, theta, max_information, cfg)
    K = ensure_boundaries(d).looks
    n = len(b.stop_look)
    stop = np.bincount(b.stop_look, minlength=K + 1)[1:] / n
    up = np.bincount(b.stop_look[b.crossed], minlength=K + 1)[1:] / n
    lo = np.bincount(b.stop_look[b.crossed_lower], minlength=K + 1)[1:] / n
    return StoppingDistribution(tuple(stop.tolist()), tuple(up.tolist()), tuple(lo.tolist()), n)

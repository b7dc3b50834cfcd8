"""The Arimoto-Blahut iteration, its capacity bounds and the solve loop.

One iteration maps ``p`` to ``p'`` with ``p'_i ∝ p_i exp(D_i)``, where
``D_i = D(W^i || pW)``. The normalizer ``ln sum_i p_i exp(D_i)`` is the
capacity estimate of that iteration and is a lower bound on the capacity;
``max_i D_i`` is an upper bound. The loop stops once the two are within
``epsilon`` of each other.
"""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union, overload

import numpy as np
from scipy.special import rel_entr

from .errors import AbsoluteContinuityViolation, DimensionMismatch, InvalidDistribution
from .info import Channel, Distribution, DistLike

# Coordinates below this are zeroed; slack indexes decay geometrically and
# would otherwise underflow into denormals.
UNDERFLOW_FLOOR = 1e-300
DEFAULT_MAX_ITERS = 10**6


class StopReason(str, enum.Enum):
    GAP_BELOW_EPSILON = "gap_below_epsilon"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    ``init`` is ``"uniform"``, ``"random"`` (a seeded interior point, needs
    ``seed``) or an explicit full-support :class:`Distribution`.
    """

    epsilon: float = 1e-8
    max_iters: int = DEFAULT_MAX_ITERS
    init: Union[str, Distribution] = "uniform"
    seed: int | None = None
    record_trace: bool = True
    long_horizon: bool = False

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if isinstance(self.init, str):
            if self.init not in ("uniform", "random"):
                raise ValueError(f"unknown init {self.init!r}")
            if self.init == "random" and self.seed is None:
                raise ValueError("random init needs a seed")
        elif isinstance(self.init, Distribution):
            if not self.init.full_support:
                raise InvalidDistribution("initial distribution must have full support")
        else:
            raise TypeError(f"init must be a string or Distribution, got {type(self.init)}")

    def initial(self, m: int) -> Distribution:
        if isinstance(self.init, Distribution):
            if self.init.m != m:
                raise DimensionMismatch(f"initial distribution has {self.init.m} entries, channel has {m} inputs")
            return self.init
        if self.init == "random":
            return Distribution.random_interior(m, np.random.default_rng(self.seed))
        return Distribution.uniform(m)


@dataclass(frozen=True)
class IterationRecord:
    """State at iteration ``t``.

    ``c_lower`` is the estimate produced while stepping from ``p`` (so it
    belongs to the transition t -> t+1, stored at index t); ``c_upper`` is
    ``max_i D(W^i || q)`` at ``p``.
    """

    t: int
    p: Distribution
    q: Distribution
    c_lower: float
    c_upper: float
    gap: float


class Trace(Sequence):
    """Array-backed sequence of :class:`IterationRecord`.

    Records are materialized on indexing; the raw arrays (``p``, ``q``,
    ``c_lower``, ``c_upper``) are available for vectorized analysis.
    """

    def __init__(self, t, p, q, c_lower, c_upper):
        self.t = np.asarray(t, dtype=np.int64)
        self.p = np.asarray(p, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.c_lower = np.asarray(c_lower, dtype=float)
        self.c_upper = np.asarray(c_upper, dtype=float)
        for arr in (self.t, self.p, self.q, self.c_lower, self.c_upper):
            arr.setflags(write=False)

    @property
    def gap(self) -> np.ndarray:
        return self.c_upper - self.c_lower

    def __len__(self) -> int:
        return self.t.size

    @overload
    def __getitem__(self, idx: int) -> IterationRecord: ...
    @overload
    def __getitem__(self, idx: slice) -> "Trace": ...

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Trace(self.t[idx], self.p[idx], self.q[idx], self.c_lower[idx], self.c_upper[idx])
        lo, hi = float(self.c_lower[idx]), float(self.c_upper[idx])
        return IterationRecord(
            t=int(self.t[idx]),
            p=Distribution._trusted(self.p[idx]),
            q=Distribution._trusted(self.q[idx]),
            c_lower=lo,
            c_upper=hi,
            gap=hi - lo,
        )


@dataclass(frozen=True)
class SolveReport:
    """Outcome of :func:`solve`.

    ``p_final`` is the last update (p^{T} after T iterations); its mutual
    information is at least ``capacity_estimate``.
    """

    p_final: Distribution
    capacity_estimate: float
    upper_bound: float
    iterations: int
    stop_reason: StopReason
    trace: Trace | None = None

    @property
    def gap(self) -> float:
        return self.upper_bound - self.capacity_estimate


def _check(p: np.ndarray, channel: Channel) -> None:
    if p.shape != (channel.m,):
        raise DimensionMismatch(f"input of size {p.size} for a channel with {channel.m} inputs")


def _exponents(p: np.ndarray, channel: Channel) -> tuple[np.ndarray, np.ndarray]:
    """Output law ``q = pW`` and ``D_i = D(W^i || q)`` (``inf`` off-support)."""
    q = p @ channel.w
    return q, rel_entr(channel.w, q[None, :]).sum(axis=1)


def _update(p: np.ndarray, channel: Channel):
    """One recurrence step; returns ``(p_next, c_lower, q, D)``."""
    q, d = _exponents(p, channel)
    support = p > 0
    log_r = np.log(p[support]) + d[support]
    # Max-shifted log-sum-exp; exp(D_i) alone overflows for near-deterministic rows.
    shift = log_r.max()
    r = np.exp(log_r - shift)
    total = r.sum()
    c_lower = float(shift + np.log(total))
    p_next = np.zeros_like(p)
    p_next[support] = r / total
    small = p_next < UNDERFLOW_FLOOR
    if small[support].any():
        p_next[small] = 0.0
        p_next /= p_next.sum()
    return p_next, c_lower, q, d


def ab_step(p: DistLike, channel: Channel) -> Distribution:
    """Apply the recurrence once."""
    p = np.asarray(p, dtype=float)
    _check(p, channel)
    return Distribution._trusted(_update(p, channel)[0])


def approx_capacity(p_prev: DistLike, channel: Channel) -> float:
    """``ln sum_i p_i exp(D(W^i || pW))``, the estimate after stepping from ``p_prev``."""
    p = np.asarray(p_prev, dtype=float)
    _check(p, channel)
    return _update(p, channel)[1]


def capacity_upper_bound(p: DistLike, channel: Channel) -> float:
    """``max_i D(W^i || pW)``; an upper bound on the capacity for every ``p``."""
    p = np.asarray(p, dtype=float)
    _check(p, channel)
    _, d = _exponents(p, channel)
    if np.isinf(d).any():
        bad = int(np.flatnonzero(np.isinf(d))[0])
        raise AbsoluteContinuityViolation(f"row {bad} reaches an output outside the support of pW")
    return float(d.max())


def solve(channel: Channel, cfg: SolverConfig | None = None) -> SolveReport:
    """Iterate from ``cfg.init`` until the bound gap is at most ``cfg.epsilon``.

    With ``long_horizon`` the gap test is ignored and exactly ``max_iters``
    iterations are run. Hitting ``max_iters`` is reported through
    ``stop_reason``, not raised.
    """
    cfg = cfg or SolverConfig()
    p = np.array(cfg.initial(channel.m).probs)
    rows_p, rows_q, lows, highs = [], [], [], []
    stop = StopReason.MAX_ITERS
    c_lower = c_upper = float("nan")
    t = -1
    for t in range(cfg.max_iters):
        p_next, c_lower, q, d = _update(p, channel)
        c_upper = float(d.max())
        if cfg.record_trace:
            rows_p.append(p)
            rows_q.append(q / q.sum())
            lows.append(c_lower)
            highs.append(c_upper)
        p = p_next
        if not cfg.long_horizon and c_upper - c_lower <= cfg.epsilon:
            stop = StopReason.GAP_BELOW_EPSILON
            break
    iterations = t + 1
    trace = None
    if cfg.record_trace:
        trace = Trace(np.arange(iterations), rows_p, rows_q, lows, highs)
    return SolveReport(
        p_final=Distribution._trusted(p),
        capacity_estimate=c_lower,
        upper_bound=c_upper,
        iterations=iterations,
        stop_reason=stop,
        trace=trace,
    )

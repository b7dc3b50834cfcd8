"""Ground-truth capacities: closed forms and brute-force lattice search.

Nothing here touches the iterative solver, so its results can be used to
check it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from .errors import DimensionGuard
from .info import Channel, Distribution

ANALYTIC_TOL = 1e-12
GRID_MAX_INPUTS = 4
_CHUNK = 1 << 16


class OracleMethod(str, enum.Enum):
    ANALYTIC_BSC = "analytic_bsc"
    ANALYTIC_IDENTITY = "analytic_identity"
    ANALYTIC_DEGENERATE = "analytic_degenerate"
    GRID_SEARCH = "grid_search"


@dataclass(frozen=True)
class OracleResult:
    c_star: float
    p_star: Distribution
    method: OracleMethod
    tolerance: float


def _close(a, b) -> bool:
    return bool(np.all(np.abs(np.asarray(a) - b) <= ANALYTIC_TOL))


def analytic_capacity(channel: Channel) -> OracleResult | None:
    """Closed-form capacity for structured channels, ``None`` if unrecognized.

    Recognized: all rows equal (capacity 0), permutation matrices (ln m) and
    binary symmetric channels (ln 2 - H_b(delta)).
    """
    w, m = channel.w, channel.m
    uniform = Distribution.uniform(m)
    if _close(w, w[0]):
        return OracleResult(0.0, uniform, OracleMethod.ANALYTIC_DEGENERATE, ANALYTIC_TOL)

    if m == channel.n:
        ones = np.abs(w - 1.0) <= ANALYTIC_TOL
        zeros = np.abs(w) <= ANALYTIC_TOL
        if np.all(ones | zeros) and np.all(ones.sum(axis=0) == 1) and np.all(ones.sum(axis=1) == 1):
            return OracleResult(math.log(m), uniform, OracleMethod.ANALYTIC_IDENTITY, ANALYTIC_TOL)

    if w.shape == (2, 2):
        delta = float(w[0, 1])
        if _close(w, np.array([[1 - delta, delta], [delta, 1 - delta]])):
            c = math.log(2.0) + delta * math.log(delta) + (1 - delta) * math.log1p(-delta)
            return OracleResult(c, uniform, OracleMethod.ANALYTIC_BSC, ANALYTIC_TOL)
    return None


def simplex_lattice(m: int, k: int) -> np.ndarray:
    """All compositions of ``k`` into ``m`` non-negative parts, in lexicographic order."""
    if m == 1:
        return np.array([[k]], dtype=np.int64)
    axes = np.meshgrid(*([np.arange(k + 1)] * (m - 1)), indexing="ij")
    head = np.stack([a.ravel() for a in axes], axis=1)
    head = head[head.sum(axis=1) <= k]
    return np.column_stack([head, k - head.sum(axis=1)])


def _mutual_information_rows(points: np.ndarray, channel: Channel) -> np.ndarray:
    # I = H(Y) - H(Y|X), evaluated per row of ``points``.
    out = np.empty(points.shape[0])
    h = channel.row_neg_entropy
    for lo in range(0, points.shape[0], _CHUNK):
        block = points[lo:lo + _CHUNK]
        out[lo:lo + _CHUNK] = entr(block @ channel.w).sum(axis=1) + block @ h
    return out


def _best(numerators: np.ndarray, denominator: int, channel: Channel) -> tuple[np.ndarray, float]:
    values = _mutual_information_rows(numerators / denominator, channel)
    k = int(np.argmax(values))  # first maximum = lexicographically smallest
    return numerators[k], float(values[k])


def lipschitz_bound(channel: Channel) -> float:
    """Crude gradient bound ``max |ln w_ij| + ln m`` over positive entries."""
    w = channel.w
    return float(np.max(np.abs(np.log(w[w > 0])))) + math.log(channel.m)


def grid_search_capacity(channel: Channel, resolution: float = 0.01, refine_rounds: int = 3) -> OracleResult:
    """Maximize mutual information over a simplex lattice, then refine locally.

    The lattice has spacing ``resolution``; each refinement round searches a
    box of +-1 old spacing around the incumbent at a tenth of the spacing.
    Reported tolerance is ``m * final_spacing * lipschitz_bound``.
    """
    m = channel.m
    if m > GRID_MAX_INPUTS:
        raise DimensionGuard(f"grid search limited to {GRID_MAX_INPUTS} inputs, channel has {m}")
    if not 0 < resolution <= 0.1:
        raise ValueError(f"resolution must lie in (0, 0.1], got {resolution}")
    if refine_rounds < 0:
        raise ValueError("refine_rounds must be non-negative")

    denom = int(round(1.0 / resolution))
    best, value = _best(simplex_lattice(m, denom), denom, channel)
    if m == 1:
        return OracleResult(value, Distribution([1.0]), OracleMethod.GRID_SEARCH, 0.0)

    span = np.arange(-10, 11)
    offsets = np.stack([a.ravel() for a in np.meshgrid(*([span] * (m - 1)), indexing="ij")], axis=1)
    for _ in range(refine_rounds):
        denom *= 10
        center = best * 10
        head = center[:-1] + offsets
        cand = np.column_stack([head, denom - head.sum(axis=1)])
        cand = cand[np.all(cand >= 0, axis=1)]
        best, value = _best(cand, denom, channel)

    tol = m * (1.0 / denom) * lipschitz_bound(channel)
    return OracleResult(value, Distribution(best / denom), OracleMethod.GRID_SEARCH, tol)

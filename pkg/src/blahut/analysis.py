"""Convergence diagnostics for solver traces.

Given a reference optimum ``p*`` (with ``q* = p*W`` and capacity ``C*``),
every step of the iteration satisfies

    D(p*||p^t) - D(p*||p^{t+1}) = f_t + D(q*||q^t),    f_t = C* - c_lower(t),

so the divergence to the optimum drops by more than ``f_t`` per step. This
module measures that identity along a trace, the data-processing ratio
``D(q*||q^t) / D(p*||p^t)``, the decay regime of ``f_t``, and the KKT type of
each input index.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import rel_entr

from .errors import AbsoluteContinuityViolation, InsufficientData, ReferenceUnavailable
from .info import Channel, Distribution, DistLike, mutual_information, output_distribution, row_divergences
from .oracle import OracleMethod, OracleResult, analytic_capacity
from .solver import DEFAULT_MAX_ITERS, SolverConfig, Trace, solve

MASS_THRESHOLD = 1e-8
DIVERGENCE_TOL = 1e-6
FIT_SKIP = 5
MIN_FIT_POINTS = 5
BOUND_CONSTANT = 10.0
# Below this D(p*||p^t) the ratio D(q*||q^t)/D(p*||p^t) is dominated by round-off.
RATIO_FLOOR = 1e-10


class ReferenceSource(str, enum.Enum):
    ANALYTIC = "analytic"
    GRID_ORACLE = "grid_oracle"
    LONG_RUN = "long_run"


@dataclass(frozen=True)
class ReferenceOptimum:
    """An (approximately) capacity-achieving input law and its capacity.

    ``residual`` is ``|I(p*, W) - c_star|``; the per-step identity can hold
    no better than this.
    """

    p_star: Distribution
    q_star: Distribution
    c_star: float
    source: ReferenceSource
    residual: float = 0.0

    @classmethod
    def from_distribution(
        cls,
        channel: Channel,
        p_star: DistLike,
        source: ReferenceSource = ReferenceSource.ANALYTIC,
        c_star: float | None = None,
    ) -> "ReferenceOptimum":
        p_star = p_star if isinstance(p_star, Distribution) else Distribution(p_star)
        info = mutual_information(p_star, channel)
        c = info if c_star is None else float(c_star)
        return cls(p_star, output_distribution(p_star, channel), c, source, abs(info - c))

    @classmethod
    def from_oracle(cls, channel: Channel, result: OracleResult) -> "ReferenceOptimum":
        source = ReferenceSource.GRID_ORACLE if result.method is OracleMethod.GRID_SEARCH else ReferenceSource.ANALYTIC
        return cls.from_distribution(channel, result.p_star, source, result.c_star)

    @classmethod
    def long_run(cls, channel: Channel, gap: float = 1e-12, max_iters: int = DEFAULT_MAX_ITERS) -> "ReferenceOptimum":
        """Run the solver to a bound gap of ``gap`` and use the result as ``p*``."""
        report = solve(channel, SolverConfig(epsilon=gap, max_iters=max_iters, record_trace=False))
        if report.gap > gap:
            raise ReferenceUnavailable(
                f"gap {report.gap:.3g} after {report.iterations} iterations, wanted {gap:.3g}"
            )
        return cls.from_distribution(channel, report.p_final, ReferenceSource.LONG_RUN)


def reference_optimum(channel: Channel, gap: float = 1e-12, max_iters: int = DEFAULT_MAX_ITERS) -> ReferenceOptimum:
    """Closed form when the channel is recognized, otherwise a long solver run."""
    exact = analytic_capacity(channel)
    if exact is not None:
        return ReferenceOptimum.from_oracle(channel, exact)
    return ReferenceOptimum.long_run(channel, gap, max_iters)


@dataclass(frozen=True)
class ConvergenceRecord:
    t: int
    f_t: float
    d_p: float
    d_q: float
    a_t: float
    identity_residual: float


class ConvergenceTable(Sequence):
    """Per-iteration diagnostics as parallel arrays; indexing yields records."""

    columns = ("t", "f", "d_p", "d_q", "a", "residual")

    def __init__(self, t, f, d_p, d_q, a, residual):
        self.t = np.asarray(t, dtype=np.int64)
        self.f = np.asarray(f, dtype=float)
        self.d_p = np.asarray(d_p, dtype=float)
        self.d_q = np.asarray(d_q, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.residual = np.asarray(residual, dtype=float)

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return ConvergenceTable(*(getattr(self, c)[idx] for c in self.columns))
        return ConvergenceRecord(
            int(self.t[idx]), float(self.f[idx]), float(self.d_p[idx]),
            float(self.d_q[idx]), float(self.a[idx]), float(self.residual[idx]),
        )

    def series(self) -> np.ndarray:
        """``(t, f_t)`` pairs, ready for :func:`fit_rate`."""
        return np.column_stack([self.t, self.f])


def _divergences_to(ref: np.ndarray, rows: np.ndarray, what: str) -> np.ndarray:
    terms = rel_entr(ref[None, :], rows)
    if np.isinf(terms).any():
        t, i = np.argwhere(np.isinf(terms))[0]
        raise AbsoluteContinuityViolation(f"{what}[{t}] has no mass on index {i} of the reference")
    return terms.sum(axis=1)


def _trace_arrays(trace) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(trace, Trace):
        return trace.t, trace.p, trace.q, trace.c_lower
    recs = list(trace)
    return (
        np.array([r.t for r in recs], dtype=np.int64),
        np.array([r.p.probs for r in recs]),
        np.array([r.q.probs for r in recs]),
        np.array([r.c_lower for r in recs]),
    )


def annotate_trace(trace, ref: ReferenceOptimum, p_next: DistLike | None = None) -> ConvergenceTable:
    """Compute ``f_t``, ``D(p*||p^t)``, ``D(q*||q^t)``, their ratio and the identity residual.

    Each row needs the following iterate, so a trace of length T yields T-1
    rows, or T rows when ``p_next`` (the update after the last record,
    ``SolveReport.p_final``) is supplied. ``a_t`` is NaN where
    ``D(p*||p^t) < RATIO_FLOOR``.
    """
    t, p, q, c_lower = _trace_arrays(trace)
    if p_next is not None:
        p = np.vstack([p, np.asarray(p_next, dtype=float)[None, :]])
    rows = p.shape[0] - 1
    if rows < 1:
        return ConvergenceTable(*([[]] * 6))
    d_p_all = _divergences_to(ref.p_star.probs, p, "p")
    d_p = d_p_all[:rows]
    d_q = _divergences_to(ref.q_star.probs, q[:rows], "q")
    f = ref.c_star - c_lower[:rows]
    residual = np.abs((d_p - d_p_all[1:rows + 1]) - (f + d_q))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(d_p >= RATIO_FLOOR, d_q / d_p, np.nan)
    return ConvergenceTable(t[:rows], f, d_p, d_q, a, residual)


class Regime(str, enum.Enum):
    EXPONENTIAL = "exponential"
    SUBLINEAR = "sublinear"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class RateFit:
    """Least-squares decay fits of ``f_t`` over a window.

    ``c_hat`` is the per-iteration factor from ``ln f`` against ``t``;
    ``power_exponent`` is ``k`` in ``f ~ t^-k`` from ``ln f`` against
    ``ln(t+1)``.
    """

    c_hat: float
    log_linear_r2: float
    power_law_r2: float
    power_exponent: float
    fit_window: tuple[int, int]
    n_points: int
    regime: Regime


def _line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if np.ptp(x) == 0:
        return 0.0, 0.0
    if np.ptp(y) == 0:
        return 0.0, 1.0
    res = stats.linregress(x, y)
    return float(res.slope), float(res.rvalue**2)


def _series(f_series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(f_series, ConvergenceTable):
        return f_series.t.astype(float), f_series.f
    arr = np.asarray(f_series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected a sequence of (t, f_t) pairs")
    return arr[:, 0], arr[:, 1]


def _fit(t: np.ndarray, f: np.ndarray, r2_min: float = 0.9) -> RateFit:
    if t.size < MIN_FIT_POINTS:
        raise InsufficientData(f"{t.size} usable points, need {MIN_FIT_POINTS}")
    log_f = np.log(f)
    slope, r2_exp = _line(t, log_f)
    pow_slope, r2_pow = _line(np.log1p(t), log_f)
    c_hat = math.exp(-slope)
    exponential_ok = c_hat >= 1 + 1e-6 and r2_exp >= r2_min
    sublinear_ok = r2_pow >= r2_min and pow_slope < 0
    if exponential_ok:
        regime = Regime.EXPONENTIAL
    elif sublinear_ok:
        regime = Regime.SUBLINEAR
    else:
        regime = Regime.UNDETERMINED
    return RateFit(c_hat, r2_exp, r2_pow, -pow_slope, (int(t[0]), int(t[-1])), int(t.size), regime)


def fit_rate(f_series, epsilon: float, skip: int = FIT_SKIP) -> RateFit:
    """Classify the decay of ``f_t`` while it is above ``epsilon``.

    The first ``skip`` entries are treated as transient and dropped, as are
    all entries with ``f_t <= epsilon``. Raises :class:`InsufficientData`
    when fewer than five points remain.
    """
    t, f = _series(f_series)
    t, f = t[skip:], f[skip:]
    keep = f > epsilon
    return _fit(t[keep], f[keep])


def fit_tail(f_series, epsilon: float, noise_floor: float = 1e-13) -> RateFit:
    """Same classification for the part of the series at or below ``epsilon``.

    Points at or below ``noise_floor`` are round-off and are ignored.
    """
    t, f = _series(f_series)
    keep = (f <= epsilon) & (f > noise_floor)
    return _fit(t[keep], f[keep])


class IndexType(str, enum.Enum):
    TYPE_I = "I"
    TYPE_II = "II"
    TYPE_III = "III"


@dataclass(frozen=True)
class IndexClassification:
    labels: tuple[IndexType, ...]
    tolerance: float
    mass_threshold: float
    divergences: tuple[float, ...]

    def indexes(self, kind: IndexType) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab is kind]


def classify_indexes(
    channel: Channel,
    ref: ReferenceOptimum,
    tolerance: float = DIVERGENCE_TOL,
    mass_threshold: float = MASS_THRESHOLD,
) -> IndexClassification:
    """Label each input by its mass under ``p*`` and ``D(W^i||q*)`` versus ``C*``.

    Type I: positive mass and tight; Type II: no mass, tight; Type III: no
    mass, slack. A reference that breaks the optimality conditions raises
    ``ValueError``.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    div = row_divergences(channel, ref.q_star.probs)
    labels = []
    for i, (mass, d) in enumerate(zip(ref.p_star.probs, div)):
        tight = abs(d - ref.c_star) <= tolerance
        if mass > mass_threshold and tight:
            labels.append(IndexType.TYPE_I)
        elif mass <= mass_threshold and tight:
            labels.append(IndexType.TYPE_II)
        elif mass <= mass_threshold and d < ref.c_star - tolerance:
            labels.append(IndexType.TYPE_III)
        else:
            raise ValueError(
                f"index {i} violates the optimality conditions: mass {mass:.3g}, "
                f"D(W^i||q*) - C* = {d - ref.c_star:.3g}"
            )
    return IndexClassification(tuple(labels), tolerance, mass_threshold, tuple(float(d) for d in div))


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    iterations: int
    loglog_bound: float
    linear_bound: float


def iteration_bound_check(
    m: int, epsilon: float, iterations: int, c_hat: float, constant: float = BOUND_CONSTANT
) -> BoundCheck:
    """Compare an iteration count with ``K ln(ln(m)/eps) / ln(c_hat)`` and ``ln(m)/eps``.

    Both ceilings must hold. Without a decay factor above one the first
    ceiling is undefined and the check fails.
    """
    linear = math.log(m) / epsilon
    if c_hat > 1 and m > 1:
        loglog = constant * math.log(math.log(m) / epsilon) / math.log(c_hat)
    else:
        loglog = math.nan
    passed = (not math.isnan(loglog)) and iterations <= loglog and iterations <= linear
    return BoundCheck(bool(passed), int(iterations), loglog, linear)

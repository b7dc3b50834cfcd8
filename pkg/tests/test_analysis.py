import math

import numpy as np
import pytest

from blahut import channels
from blahut.analysis import (
    RATIO_FLOOR,
    IndexType,
    ReferenceOptimum,
    ReferenceSource,
    Regime,
    annotate_trace,
    classify_indexes,
    fit_rate,
    fit_tail,
    iteration_bound_check,
    reference_optimum,
)
from blahut.errors import AbsoluteContinuityViolation, InsufficientData, ReferenceUnavailable
from blahut.info import Channel, Distribution
from blahut.solver import SolverConfig, solve

I, II, III = IndexType.TYPE_I, IndexType.TYPE_II, IndexType.TYPE_III
# Regression baseline: BSC(0.1) from (1e-4, 1 - 1e-4), window f_t > 1e-6.
BSC01_C_HAT = 7.550792188358121


def _series(f):
    t = np.arange(len(f))
    return np.column_stack([t, f])


class TestReference:
    def test_analytic_source(self):
        ref = reference_optimum(channels.bsc(0.1))
        assert ref.source is ReferenceSource.ANALYTIC and ref.residual == pytest.approx(0.0, abs=1e-15)
        assert ref.q_star.probs.tolist() == [0.5, 0.5]

    def test_long_run_source(self):
        ref = reference_optimum(channels.random_channel(3, 4, 1))
        assert ref.source is ReferenceSource.LONG_RUN and ref.residual == 0.0

    def test_long_run_unavailable(self):
        with pytest.raises(ReferenceUnavailable):
            ReferenceOptimum.long_run(channels.random_channel(4, 4, 1), gap=1e-14, max_iters=5)


class TestAnnotate:
    def test_converged_identity(self):
        ch = channels.identity(2)
        rep = solve(ch, SolverConfig(max_iters=4, long_horizon=True))
        table = annotate_trace(rep.trace, reference_optimum(ch), rep.p_final)
        assert len(table) == 4
        for col in (table.f, table.d_p, table.d_q, table.residual):
            assert np.all(np.abs(col) <= 1e-15)

    def test_bsc_identity_residual(self):
        ch = channels.bsc(0.1)
        rep = solve(ch, SolverConfig(epsilon=1e-12, init=Distribution([0.3, 0.7])))
        table = annotate_trace(rep.trace, reference_optimum(ch), rep.p_final)
        assert table.residual.max() <= 1e-9
        finite = table.a[np.isfinite(table.a)]
        assert finite.size and np.all((finite >= 0) & (finite <= 1 + 1e-9))

    def test_rows_without_p_next(self):
        ch = channels.random_channel(3, 3, 4)
        rep = solve(ch, SolverConfig(epsilon=1e-6))
        assert len(annotate_trace(rep.trace, reference_optimum(ch))) == rep.iterations - 1

    def test_accepts_record_sequences(self):
        ch = channels.random_channel(3, 3, 4)
        rep = solve(ch, SolverConfig(epsilon=1e-6))
        ref = reference_optimum(ch)
        a = annotate_trace(rep.trace, ref, rep.p_final)
        b = annotate_trace(list(rep.trace), ref, rep.p_final)
        assert np.array_equal(a.residual, b.residual)
        rec = a[3]
        assert rec.t == 3 and rec.f_t == a.f[3]

    def test_ratio_is_nan_below_floor(self):
        ch = channels.bsc(0.1)
        rep = solve(ch, SolverConfig(epsilon=1e-15, init=Distribution([0.3, 0.7])))
        table = annotate_trace(rep.trace, reference_optimum(ch), rep.p_final)
        assert np.all(np.isnan(table.a[table.d_p < RATIO_FLOOR]))

    def test_boundary_iterate_rejected(self):
        ch = Channel([[1.0, 0.0], [0.0, 1.0]])
        rep = solve(ch, SolverConfig(max_iters=2, long_horizon=True))
        trace = [r for r in rep.trace]
        ref = reference_optimum(ch)
        object.__setattr__(trace[0], "p", Distribution([1.0, 0.0]))
        with pytest.raises(AbsoluteContinuityViolation):
            annotate_trace(trace, ref)


class TestFit:
    def test_geometric(self):
        fit = fit_rate(_series(2 * (1 / 3) ** np.arange(40.0)), 1e-12)
        assert fit.c_hat == pytest.approx(3.0, abs=1e-6)
        assert fit.regime is Regime.EXPONENTIAL and fit.fit_window[0] == 5

    def test_harmonic(self):
        t = np.arange(2000.0)
        fit = fit_rate(_series(1 / (t + 1)), 1e-6)
        assert fit.regime is Regime.SUBLINEAR
        assert fit.power_exponent == pytest.approx(1.0, abs=1e-9)

    def test_noise_is_undetermined(self):
        rng = np.random.default_rng(0)
        fit = fit_rate(_series(np.exp(rng.normal(size=200))), 1e-6)
        assert fit.regime is Regime.UNDETERMINED

    def test_window_drops_points_at_or_below_eps(self):
        fit = fit_rate(_series(2.0 ** -np.arange(40.0)), 1e-6)
        assert fit.fit_window == (5, 19)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            fit_rate(_series(np.zeros(30)), 1e-6)
        with pytest.raises(InsufficientData):
            fit_rate(_series(2.0 ** -np.arange(8.0)), 1e-6)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            fit_rate(np.ones(5), 1e-6)

    def test_tail(self):
        t = np.arange(1, 5000.0)
        f = np.where(t < 30, 10.0 ** -(t / 5), 1e-3 / (t + 1) ** 2)
        fit = fit_tail(np.column_stack([t, f]), 1e-6)
        assert fit.regime is Regime.SUBLINEAR and fit.power_exponent == pytest.approx(2.0, abs=1e-9)

    def test_bsc_regression_baseline(self):
        ch = channels.bsc(0.1)
        rep = solve(ch, SolverConfig(epsilon=1e-6, init=Distribution([1e-4, 1 - 1e-4])))
        fit = fit_rate(annotate_trace(rep.trace, reference_optimum(ch), rep.p_final), 1e-6)
        assert fit.regime is Regime.EXPONENTIAL and fit.c_hat > 1
        assert fit.c_hat == pytest.approx(BSC01_C_HAT, rel=1e-9)
        assert iteration_bound_check(2, 1e-6, rep.iterations, fit.c_hat).passed


class TestClassify:
    def test_identity(self):
        ch = channels.identity(2)
        assert classify_indexes(ch, reference_optimum(ch)).labels == (I, I)

    def test_type_three(self):
        ch = Channel([[1, 0], [0, 1], [0.5, 0.5]])
        cls = classify_indexes(ch, ReferenceOptimum.from_distribution(ch, [0.5, 0.5, 0]))
        assert cls.labels == (I, I, III)
        assert cls.divergences[2] == pytest.approx(0.0, abs=1e-15)
        assert cls.indexes(III) == [2]

    def test_type_two_duplicate(self):
        ch = Channel([[1, 0], [0, 1], [1, 0]])
        cls = classify_indexes(ch, ReferenceOptimum.from_distribution(ch, [0.5, 0.5, 0]))
        assert cls.labels == (I, I, II)

    def test_dup_row_channel(self):
        ch, p_star, c_star = channels.dup_row_channel()
        ref = ReferenceOptimum.from_distribution(ch, p_star, ReferenceSource.ANALYTIC, c_star)
        assert classify_indexes(ch, ref).labels == (I, I, II, II)

    def test_non_optimal_reference_raises(self):
        ch = channels.bsc(0.1)
        with pytest.raises(ValueError, match="optimality"):
            classify_indexes(ch, ReferenceOptimum.from_distribution(ch, [0.9, 0.1]))

    def test_tolerance_must_be_positive(self):
        ch = channels.identity(2)
        with pytest.raises(ValueError):
            classify_indexes(ch, reference_optimum(ch), tolerance=0)


class TestBoundCheck:
    def test_within(self):
        res = iteration_bound_check(4, 1e-6, 30, 2.0)
        assert res.passed and res.loglog_bound == pytest.approx(204.028, abs=1e-3)

    def test_exceeds(self):
        res = iteration_bound_check(4, 1e-6, 10**6, 2.0)
        assert not res.passed and res.iterations > res.loglog_bound

    def test_linear_ceiling(self):
        res = iteration_bound_check(4, 1e-6, 1_400_000, 1.00001)
        assert not res.passed and res.iterations > res.linear_bound
        assert res.linear_bound == pytest.approx(math.log(4) / 1e-6)

    def test_no_decay_factor(self):
        res = iteration_bound_check(4, 1e-6, 3, 1.0)
        assert not res.passed and math.isnan(res.loglog_bound)


def test_plain_duplication_keeps_geometric_tail():
    # A copied row keeps its mass ratio to the original, so there is no slow mode.
    ch = channels.duplicate_rows(channels.random_channel(3, 3, 0), [0])
    rep = solve(ch, SolverConfig(max_iters=3000, long_horizon=True))
    table = annotate_trace(rep.trace, ReferenceOptimum.long_run(ch), rep.p_final)
    assert fit_tail(table, 1e-6).regime is Regime.EXPONENTIAL
    assert np.flatnonzero(table.f < 1e-13)[0] < 200

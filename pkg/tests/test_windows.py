"""Window representations: moving averages, K-S fitted lengths, stacking,
scaling, and prediction-range label handling."""
import warnings

import numpy as np
import pytest

from eventcast.stats import ks_two_sample
from eventcast.windows import (
    FittedWindows,
    MinMaxScaler,
    WindowSpec,
    aggregate_dates,
    ks_fit,
    ks_transform,
    minmax_apply,
    minmax_fit,
    moving_average,
    moving_average_matrix,
    propagate_labels,
    stack,
)


def brute_ks_fit(X, y, max_window, rows=None):
    """Direct per-feature scan; must agree with ks_fit float for float."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n, m = X.shape
    if rows is None:
        rows = np.arange(n)
    best_t = np.ones(m, dtype=np.int64)
    best_p = np.ones(m)
    for j in range(m):
        for t in range(1, max_window + 1):
            ma = moving_average(X[:, j], t)
            sel = rows[rows >= t]
            pos = sel[y[sel] == 1]
            neg = sel[y[sel] == 0]
            if pos.size == 0 or neg.size == 0:
                continue
            p = ks_two_sample(ma[neg], ma[pos]).p
            if p < best_p[j]:
                best_p[j] = p
                best_t[j] = t
    return best_t, best_p


class TestMovingAverage:
    def test_hand_example(self):
        out = moving_average([1.0, 2.0, 3.0, 4.0], 2)
        assert np.isnan(out[0]) and np.isnan(out[1])
        assert out[2] == 1.5 and out[3] == 2.5

    def test_dt_one_is_previous_day(self):
        x = np.array([7.0, -1.0, 4.0, 9.0])
        out = moving_average(x, 1)
        assert np.isnan(out[0])
        assert np.array_equal(out[1:], x[:-1])

    def test_scaling_commutes(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=40)
        # halving-friendly constant keeps the identity exact in floats
        assert np.array_equal(moving_average(2.0 * x, 5)[5:],
                              2.0 * moving_average(x, 5)[5:])
        c = rng.normal()
        assert np.allclose(moving_average(c * x, 5)[5:],
                           c * moving_average(x, 5)[5:])

    def test_window_too_long_errors(self):
        with pytest.raises(ValueError):
            moving_average([1.0, 2.0, 3.0], 3)
        with pytest.raises(ValueError):
            moving_average([1.0, 2.0], 0)

    def test_matrix_matches_columns(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 4))
        M = moving_average_matrix(X, 6)
        for j in range(4):
            col = moving_average(X[:, j], 6)
            assert np.array_equal(M[6:, j], col[6:])
            assert np.all(np.isnan(M[:6, j]))


class TestKsFit:
    def test_matches_brute_oracle_exactly(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 5))
        y = (rng.random(60) < 0.25).astype(np.int64)
        y[:3] = [1, 0, 1]  # both classes guaranteed
        fitted = ks_fit(X, y, max_window=8)
        bt, bp = brute_ks_fit(X, y, max_window=8)
        assert np.array_equal(fitted.windows, bt)
        assert np.array_equal(fitted.p_values, bp)

    def test_row_restriction_matches_brute(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(50, 3))
        y = (rng.random(50) < 0.3).astype(np.int64)
        rows = np.arange(10, 45)
        fitted = ks_fit(X, y, max_window=6, rows=rows)
        bt, bp = brute_ks_fit(X, y, max_window=6, rows=rows)
        assert np.array_equal(fitted.windows, bt)
        assert np.array_equal(fitted.p_values, bp)

    def test_max_window_one_forces_unit_windows(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(20, 3))
        y = np.array([0, 1] * 10)
        fitted = ks_fit(X, y, max_window=1)
        assert np.array_equal(fitted.windows, np.ones(3, dtype=np.int64))
        assert fitted.valid_from == 1

    def test_recovers_planted_window(self):
        # feature 0 separates the classes only after 5-day smoothing:
        # events sit at the end of 5-day runs of elevated mean
        rng = np.random.default_rng(8)
        n = 400
        y = np.zeros(n, dtype=np.int64)
        event_rows = np.arange(20, n, 25)
        y[event_rows] = 1
        X = rng.normal(size=(n, 2))
        for r in event_rows:
            X[r - 5:r, 0] += 1.2  # raises the 5-day pre-event average
        fitted = ks_fit(X, y, max_window=10)
        assert 4 <= fitted.windows[0] <= 6
        assert fitted.p_values[0] < 1e-6

    def test_one_class_warns_and_falls_back(self):
        X = np.random.default_rng(9).normal(size=(15, 2))
        y = np.zeros(15, dtype=np.int64)
        with pytest.warns(RuntimeWarning):
            fitted = ks_fit(X, y, max_window=4)
        assert np.array_equal(fitted.windows, [1, 1])
        assert np.array_equal(fitted.p_values, [1.0, 1.0])

    def test_bad_shapes(self):
        X = np.zeros((10, 2))
        with pytest.raises(ValueError):
            ks_fit(X, np.zeros(9), max_window=2)
        with pytest.raises(ValueError):
            ks_fit(X, np.zeros(10), max_window=10)


class TestKsTransform:
    def test_validity_follows_largest_window(self):
        X = np.arange(20.0).reshape(10, 2)
        fitted = FittedWindows(windows=np.array([2, 3]),
                               p_values=np.array([0.5, 0.5]), max_window=3)
        out = ks_transform(X, fitted)
        assert np.all(np.isnan(out[:3]))
        assert not np.any(np.isnan(out[3:]))
        # column 0 still averages its own 2-day window
        assert out[3, 0] == (X[1, 0] + X[2, 0]) / 2
        assert out[3, 1] == (X[0, 1] + X[1, 1] + X[2, 1]) / 3

    def test_feature_count_mismatch(self):
        fitted = FittedWindows(windows=np.array([1]),
                               p_values=np.array([1.0]), max_window=1)
        with pytest.raises(ValueError):
            ks_transform(np.zeros((5, 2)), fitted)


class TestFittedWindowsCsv:
    def test_round_trip(self, tmp_path):
        fitted = FittedWindows(windows=np.array([3, 1, 7]),
                               p_values=np.array([0.125, 1.0, 1e-9]),
                               max_window=7)
        path = tmp_path / "w.csv"
        fitted.write_csv(path)
        back, fids = FittedWindows.read_csv(path)
        assert np.array_equal(back.windows, fitted.windows)
        assert np.array_equal(back.p_values, fitted.p_values)
        assert fids == ["0", "1", "2"]

    def test_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            FittedWindows.read_csv(path)

    def test_out_of_range_windows_rejected(self):
        with pytest.raises(ValueError):
            FittedWindows(windows=np.array([0]),
                          p_values=np.array([1.0]), max_window=3)
        with pytest.raises(ValueError):
            FittedWindows(windows=np.array([4]),
                          p_values=np.array([1.0]), max_window=3)


class TestStack:
    def test_shapes_and_alignment(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(10, 3))
        out = stack(X, 7)
        assert out.shape == (10, 7, 3)
        assert np.all(np.isnan(out[:7]))
        valid = out[7:]
        assert valid.shape[0] == 3 and not np.any(np.isnan(valid))
        for i in range(7, 10):
            assert np.array_equal(out[i], X[i - 7:i])

    def test_mean_over_steps_is_moving_average(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(25, 2))
        out = stack(X, 4)
        ma = moving_average_matrix(X, 4)
        assert np.allclose(out[4:].mean(axis=1), ma[4:])

    def test_window_too_long(self):
        with pytest.raises(ValueError):
            stack(np.zeros((5, 1)), 5)


class TestMinMax:
    def test_hand_example(self):
        scaler = minmax_fit(np.array([[2.0], [4.0], [6.0]]))
        out = minmax_apply(np.array([[2.0], [4.0], [6.0], [8.0]]), scaler)
        assert np.array_equal(out[:, 0], [0.0, 0.5, 1.0, 1.5])

    def test_constant_column_maps_to_zero(self):
        scaler = minmax_fit(np.array([[3.0, 1.0], [3.0, 2.0]]))
        out = minmax_apply(np.array([[3.0, 1.5], [99.0, 2.0]]), scaler)
        assert out[0, 0] == 0.0 and out[1, 0] == 0.0
        assert out[0, 1] == 0.5 and out[1, 1] == 1.0

    def test_nan_rows_stay_nan(self):
        scaler = minmax_fit(np.array([[0.0], [2.0]]))
        out = minmax_apply(np.array([[np.nan], [1.0]]), scaler)
        assert np.isnan(out[0, 0]) and out[1, 0] == 0.5

    def test_fit_ignores_nan_history_rows(self):
        X = np.array([[np.nan], [2.0], [6.0]])
        scaler = minmax_fit(X)
        assert scaler.mins[0] == 2.0 and scaler.maxs[0] == 6.0

    def test_sequence_tensor_scales_per_feature(self):
        seq = np.array([[[0.0, 10.0], [2.0, 30.0]],
                        [[4.0, 20.0], [6.0, 40.0]]])
        scaler = minmax_fit(seq)
        assert np.array_equal(scaler.mins, [0.0, 10.0])
        assert np.array_equal(scaler.maxs, [6.0, 40.0])
        out = minmax_apply(seq, scaler)
        assert out.min() == 0.0 and out.max() == 1.0

    def test_empty_fit_and_bad_scaler(self):
        with pytest.raises(ValueError):
            minmax_fit(np.zeros((0, 2)))
        with pytest.raises(ValueError):
            MinMaxScaler(mins=np.array([1.0]), maxs=np.array([0.0]))


class TestPropagateLabels:
    def test_three_day_lookahead(self):
        y = np.array([0, 0, 1, 0, 0, 0])
        out = propagate_labels(y, 3)
        assert np.array_equal(out, [1, 1, 1, 0, 0, 0])

    def test_dp_one_is_identity(self):
        y = np.array([0, 1, 0, 1, 1, 0])
        assert np.array_equal(propagate_labels(y, 1), y)

    def test_superset_and_mass_bound(self):
        rng = np.random.default_rng(12)
        y = (rng.random(200) < 0.05).astype(np.int64)
        for dp in (2, 5, 9):
            out = propagate_labels(y, dp)
            assert np.all(out >= y)
            assert out.sum() <= dp * y.sum()

    def test_bad_dp(self):
        with pytest.raises(ValueError):
            propagate_labels(np.zeros(5, dtype=np.int64), 0)


class TestAggregateDates:
    def test_dp_one_is_identity(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(8, 2))
        y = (rng.random(8) < 0.5).astype(np.int64)
        Xb, yb = aggregate_dates(X, y, 1)
        assert np.array_equal(Xb, X) and np.array_equal(yb, y)

    def test_three_day_blocks(self):
        X = np.arange(20.0).reshape(10, 2)
        y = np.array([0, 0, 1, 0, 0, 0, 0, 0, 0, 1])
        Xb, yb = aggregate_dates(X, y, 3)
        assert Xb.shape == (3, 2)
        # block means, then the labels OR within each block; row 9 is
        # dropped with the partial trailing block
        assert np.array_equal(Xb[0], X[:3].mean(axis=0))
        assert np.array_equal(yb, [1, 0, 0])

    def test_block_mean_identity(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(12, 3))
        Xb, _ = aggregate_dates(X, np.zeros(12, dtype=np.int64), 4)
        assert np.allclose(Xb.mean(axis=0), X.mean(axis=0))

    def test_dp_exceeds_rows(self):
        with pytest.raises(ValueError):
            aggregate_dates(np.zeros((3, 1)), np.zeros(3, dtype=np.int64), 4)


class TestWindowSpec:
    def test_parse_and_label(self):
        spec = WindowSpec.parse("ks:14")
        assert spec.kind == "ks" and spec.dt == 14
        assert spec.label == "ks:14" and spec.effective == 14
        assert WindowSpec.parse("stacked:7").kind == "stacked"

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            WindowSpec.parse("fixed")
        with pytest.raises(ValueError):
            WindowSpec(kind="rolling", dt=3)
        with pytest.raises(ValueError):
            WindowSpec(kind="fixed", dt=0)

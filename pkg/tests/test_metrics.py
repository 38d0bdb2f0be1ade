import json

import numpy as np
import pytest

from perimid.errors import MetricsError, ShapeError
from perimid.metrics import (
    MetricReport,
    accuracy,
    mse_mae,
    point_adjust,
    point_adjust_f1,
    precision_recall_f1,
    seasonal_naive,
    smape_mape_mase_owa,
)

INSAMPLE = np.array([1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 5.0])
TRUTH = np.array([1.0, 2.0, 3.0, 4.0])


class TestPointMetrics:
    def test_mse_mae(self):
        mse, mae = mse_mae(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 5.0]))
        assert mse == pytest.approx(4 / 3)
        assert mae == pytest.approx(2 / 3)

    def test_perfect(self, rng):
        x = rng.normal(size=(5, 3))
        assert mse_mae(x, x) == (0.0, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_mae(np.zeros(3), np.zeros(4))

    def test_empty(self):
        with pytest.raises(MetricsError):
            mse_mae(np.zeros(0), np.zeros(0))


class TestShortTermForecasting:
    def test_smape_and_mape(self):
        out = smape_mape_mase_owa(
            np.array([10.0]), np.array([30.0]), np.array([1.0, 2.0, 4.0]), q=1
        )
        assert out["smape"] == pytest.approx(100.0)
        assert out["mape"] == pytest.approx(200.0)

    def test_perfect_forecast(self):
        out = smape_mape_mase_owa(TRUTH, TRUTH.copy(), INSAMPLE, q=4)
        assert out == {"smape": 0.0, "mape": 0.0, "mase": 0.0, "owa": 0.0}

    def test_seasonal_naive_scores_owa_one(self):
        baseline = seasonal_naive(INSAMPLE, 4, 4)
        np.testing.assert_array_equal(baseline, [1.0, 2.0, 3.0, 5.0])
        out = smape_mape_mase_owa(TRUTH, baseline, INSAMPLE, q=4)
        assert out["mase"] == pytest.approx(1.0)
        assert out["owa"] == pytest.approx(1.0)

    def test_zero_pairs_contribute_nothing(self):
        out = smape_mape_mase_owa(
            np.array([0.0, 10.0]), np.array([0.0, 30.0]), np.array([1.0, 2.0, 4.0]), q=1
        )
        assert out["smape"] == pytest.approx(50.0)
        assert out["mape"] == pytest.approx(100.0)

    def test_mase_undefined_for_constant_history(self):
        with pytest.raises(MetricsError):
            smape_mape_mase_owa(TRUTH, TRUTH + 1, np.full(8, 2.0), q=4)

    def test_owa_undefined_for_perfect_baseline(self):
        with pytest.raises(MetricsError):
            smape_mape_mase_owa(TRUTH, TRUTH + 1, INSAMPLE, q=4, naive2=TRUTH.copy())

    def test_history_must_exceed_seasonality(self):
        with pytest.raises(MetricsError):
            smape_mape_mase_owa(TRUTH, TRUTH, INSAMPLE[:4], q=4)

    def test_scale_invariant(self, rng):
        insample = rng.normal(size=24)
        truth = rng.normal(size=6)
        pred = truth + rng.normal(scale=0.3, size=6)
        base = smape_mape_mase_owa(truth, pred, insample, q=4)
        for scale in (1e-3, 0.5, 7.0, 1e4):
            scaled = smape_mape_mase_owa(truth * scale, pred * scale, insample * scale, q=4)
            assert scaled == pytest.approx(base, rel=1e-9)

    def test_owa_ignores_channel_order(self, rng):
        insample = rng.normal(size=(24, 4))
        truth = rng.normal(size=(6, 4))
        pred = truth + rng.normal(scale=0.3, size=(6, 4))
        base = smape_mape_mase_owa(truth, pred, insample, q=4)
        for _ in range(10):
            perm = rng.permutation(4)
            shuffled = smape_mape_mase_owa(truth[:, perm], pred[:, perm], insample[:, perm], q=4)
            assert shuffled["owa"] == pytest.approx(base["owa"], rel=1e-12)
            assert shuffled == pytest.approx(base, rel=1e-12)

    def test_multichannel(self, rng):
        insample = rng.normal(size=(24, 3))
        truth = rng.normal(size=(6, 3))
        out = smape_mape_mase_owa(truth, truth + 0.1, insample, q=12)
        assert set(out) == {"smape", "mape", "mase", "owa"}
        assert all(np.isfinite(v) and v > 0 for v in out.values())


class TestAnomalyMetrics:
    def test_point_adjust_fills_detected_segment(self):
        truth = np.array([0, 0, 0, 1, 1, 1, 0, 0, 0], dtype=bool)
        raw = np.array([0, 0, 0, 0, 1, 0, 0, 0, 0], dtype=bool)
        np.testing.assert_array_equal(point_adjust(truth, raw), truth)
        assert point_adjust_f1(truth, raw) == (1.0, 1.0, 1.0)

    def test_missed_segment_is_left_alone(self):
        truth = np.array([1, 1, 0, 0, 1, 1], dtype=bool)
        raw = np.array([0, 1, 0, 1, 0, 0], dtype=bool)
        adjusted = point_adjust(truth, raw)
        np.testing.assert_array_equal(adjusted, [1, 1, 0, 1, 0, 0])

    def test_no_detections(self):
        truth = np.array([0, 1, 1, 0], dtype=bool)
        assert point_adjust_f1(truth, np.zeros(4, dtype=bool)) == (0.0, 0.0, 0.0)

    def test_precision_recall(self):
        precision, recall, f1 = precision_recall_f1(
            np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0])
        )
        assert (precision, recall, f1) == (0.5, 0.5, 0.5)

    def test_adjustment_never_lowers_recall(self, rng):
        for _ in range(1000):
            truth = rng.random(40) < 0.3
            truth[rng.integers(40)] = True
            raw = rng.random(40) < 0.2
            adjusted = point_adjust(truth, raw)
            assert (adjusted >= raw).all()
            assert precision_recall_f1(truth, adjusted)[1] >= precision_recall_f1(truth, raw)[1]

    def test_point_adjust_shapes(self):
        with pytest.raises(ShapeError):
            point_adjust(np.zeros(3, dtype=bool), np.zeros(4, dtype=bool))


def test_accuracy():
    assert accuracy(np.array([0, 1, 1]), np.array([0, 1, 0])) == pytest.approx(2 / 3)
    with pytest.raises(ShapeError):
        accuracy(np.array([0, 1]), np.array([0]))


class TestMetricReport:
    def test_json(self):
        report = MetricReport("forecast", {"mse": 0.5, "mae": 0.25}, {"windows": 3})
        data = json.loads(report.to_json())
        assert data == {
            "task": "forecast",
            "metrics": {"mse": 0.5, "mae": 0.25},
            "counts": {"windows": 3},
        }
        assert MetricReport.from_dict(data) == report
        assert report["mae"] == 0.25

    def test_non_finite_rejected(self):
        with pytest.raises(MetricsError):
            MetricReport("forecast", {"mse": float("nan")})

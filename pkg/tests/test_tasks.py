import numpy as np
import pytest

from perimid import preprocessing
from perimid.config.store import load_run_config
from perimid.data.manifest import DatasetManifest
from perimid.data.windowing import WindowSet, window_set
from perimid.errors import ConfigurationError, DataError, ShapeError
from perimid.metrics import mse_mae
from perimid.model import network
from perimid.preprocessing import NormStats
from perimid.tasks.anomaly import AnomalyTask, anomaly_scores, detect_anomalies, flag_anomalies
from perimid.tasks.base import TaskSpec, map_windows, thread_limit
from perimid.tasks.classify import ClassifyTask, classify
from perimid.tasks.forecast import ForecastTask, forecast
from perimid.tasks.impute import ImputeTask, impute
from perimid.tasks.registry import get_task, list_tasks


class ZeroReconstruction:
    """Stands in for a model whose reconstruction is all zeros."""

    def predict(self, batch):
        return np.zeros_like(np.asarray(batch, dtype=np.float64))


class MeanSignClassifier:
    """Class 1 when a window's mean is positive."""

    def predict(self, batch):
        positive = np.asarray(batch).mean(axis=(1, 2)) > 0
        return np.stack([~positive, positive], axis=1).astype(float)


class TestSpecAndRegistry:
    def test_registry(self):
        assert list_tasks() == ["forecast", "impute", "anomaly", "classify"]
        assert isinstance(get_task(TaskSpec(kind="impute")), ImputeTask)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match="Available"):
            TaskSpec(kind="segment")

    def test_task_rejects_other_kind(self):
        with pytest.raises(ConfigurationError):
            ForecastTask(TaskSpec(kind="impute"))

    def test_output_len(self):
        assert TaskSpec(kind="forecast", input_len=32, target_len=8).output_len == 8
        assert TaskSpec(kind="impute", input_len=32, target_len=8).output_len == 32

    @pytest.mark.parametrize(
        "overrides",
        [
            {"input_len": 3},
            {"kind": "impute", "mask_ratio": 0.0},
            {"threshold_quantile": 0.0},
            {"score_agg": "median"},
            {"seasonality": 0},
            {"kind": "classify", "num_classes": 1},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigurationError):
            TaskSpec(**overrides)

    def test_model_shape(self):
        shape = ClassifyTask(TaskSpec(kind="classify", input_len=32, num_classes=3)).model_shape(1)
        assert (shape.kind, shape.num_classes) == ("classify", 3)


class TestThreads:
    def test_thread_limit_from_env(self, monkeypatch):
        monkeypatch.setenv("PERIMID_THREADS", "3")
        assert thread_limit() == 3

    @pytest.mark.parametrize("raw", ["x", "0"])
    def test_bad_thread_limit(self, monkeypatch, raw):
        monkeypatch.setenv("PERIMID_THREADS", raw)
        with pytest.raises(ConfigurationError):
            thread_limit()

    def test_map_windows_keeps_order(self, monkeypatch):
        monkeypatch.setenv("PERIMID_THREADS", "4")
        inputs = np.arange(100.0 * 3).reshape(100, 3, 1)
        out = map_windows(lambda chunk: chunk * 2, inputs)
        np.testing.assert_array_equal(out, inputs * 2)


REJECTED_LOSSES = [
    ("forecast", "cross_entropy"),
    ("impute", "smape"),
    ("impute", "cross_entropy"),
    ("anomaly", "smape"),
    ("anomaly", "cross_entropy"),
    ("classify", "mse"),
    ("classify", "smape"),
]


class TestLossChoice:
    def test_defaults_and_allowed(self):
        forecast_task = ForecastTask(TaskSpec(kind="forecast", input_len=32))
        assert forecast_task.resolve_loss(None) == "mse"
        assert forecast_task.resolve_loss("smape") == "smape"
        assert ClassifyTask(TaskSpec(kind="classify", input_len=32)).resolve_loss(None) == (
            "cross_entropy"
        )
        assert ImputeTask(TaskSpec(kind="impute", input_len=32)).allowed_losses == ("mse",)

    @pytest.mark.parametrize("kind, loss_name", REJECTED_LOSSES)
    def test_mismatch_rejected_by_task(self, kind, loss_name, tiny_model_config):
        task = get_task(TaskSpec(kind=kind, input_len=32))
        model = task.build_model(tiny_model_config, 1)
        inputs = np.zeros((2, 32, 1))
        with pytest.raises(ConfigurationError, match="cannot train with loss"):
            task.loss(model, inputs, np.zeros_like(inputs), None, loss_name)

    @pytest.mark.parametrize("kind, loss_name", REJECTED_LOSSES)
    def test_mismatch_rejected_by_config(self, kind, loss_name):
        with pytest.raises(ConfigurationError, match=f"{kind} cannot train with loss"):
            load_run_config(overrides={"task": {"kind": kind}, "train": {"loss": loss_name}})


class TestForecast:
    def test_evaluate_matches_predictions(self, two_tone, tiny_model_config):
        task = ForecastTask(TaskSpec(kind="forecast", input_len=32, target_len=8))
        model = task.build_model(tiny_model_config, 2)
        windows = window_set(two_tone, 32, 8, stride=40)
        report = task.evaluate(model, windows)
        mse, mae = mse_mae(windows.targets, model.predict(windows.inputs))
        assert report["mse"] == pytest.approx(mse)
        assert report["mae"] == pytest.approx(mae)
        assert report.counts == {"windows": len(windows), "points": windows.targets.size}

    def test_seasonality_adds_short_term_metrics(self, two_tone, tiny_model_config):
        spec = TaskSpec(kind="forecast", input_len=32, target_len=8, seasonality=8)
        task = ForecastTask(spec)
        report = task.evaluate(
            task.build_model(tiny_model_config, 2), window_set(two_tone, 32, 8, stride=80)
        )
        assert {"smape", "mape", "mase", "owa"} <= set(report.metrics)

    def test_single_window(self, two_tone, tiny_model_config):
        spec = TaskSpec(kind="forecast", input_len=32, target_len=8)
        model = ForecastTask(spec).build_model(tiny_model_config, 2)
        assert forecast(two_tone[:32], spec, model).shape == (8, 2)
        with pytest.raises(ShapeError):
            forecast(two_tone[:30], spec, model)

    def test_plot_frame(self, two_tone, tiny_model_config):
        task = ForecastTask(TaskSpec(kind="forecast", input_len=32, target_len=8))
        frame = task.plot_frame(
            task.build_model(tiny_model_config, 2), window_set(two_tone, 32, 8, stride=40)
        )
        assert list(frame.columns) == ["t", "truth_0", "truth_1", "pred_0", "pred_1"]
        assert len(frame) == 8


class TestImpute:
    SPEC = TaskSpec(kind="impute", input_len=32, mask_ratio=0.25)

    def test_nothing_masked_returns_input(self, two_tone, tiny_model_config):
        model = ImputeTask(self.SPEC).build_model(tiny_model_config, 2)
        x = two_tone[:32]
        out = impute(x, np.zeros_like(x, dtype=bool), self.SPEC, model)
        np.testing.assert_array_equal(out, x)

    def test_observed_points_kept(self, two_tone, tiny_model_config, rng):
        model = ImputeTask(self.SPEC).build_model(tiny_model_config, 2)
        x = two_tone[:32]
        mask = rng.random(x.shape) < 0.25
        mask[0] = False
        out = impute(np.where(mask, 0.0, x), mask, self.SPEC, model)
        np.testing.assert_array_equal(out[~mask], x[~mask])

    def test_mask_shape(self, two_tone, tiny_model_config):
        model = ImputeTask(self.SPEC).build_model(tiny_model_config, 2)
        with pytest.raises(ShapeError):
            impute(two_tone[:32], np.zeros((32, 1), dtype=bool), self.SPEC, model)

    def test_evaluate_reports_baseline(self, two_tone, tiny_model_config):
        task = ImputeTask(self.SPEC)
        windows = window_set(two_tone, 32, 0, stride=32)
        windows = WindowSet(windows.inputs, windows.inputs.copy(), windows.starts)
        report = task.evaluate(task.build_model(tiny_model_config, 2), windows)
        assert set(report.metrics) == {"mse", "mae", "baseline_mse", "baseline_mae"}
        assert report.counts["masked_points"] == len(windows) * 8 * 2

    def test_datasets_reconstruct_inputs(self):
        manifest = DatasetManifest(length=400, channels=2, input_len=32, stride=16)
        parts = ImputeTask(self.SPEC).datasets(manifest)
        np.testing.assert_array_equal(parts["train"].targets, parts["train"].inputs)


class TestAnomaly:
    SPEC = TaskSpec(kind="anomaly", input_len=8, threshold_quantile=0.99)

    def test_hand_case(self):
        train = np.full((2, 8, 1), 0.1)
        test = np.full((1, 8, 1), 0.1)
        test[0, 4, 0] = 1.0
        labels = np.zeros((1, 8), dtype=bool)
        labels[0, 3:6] = True
        report = detect_anomalies(train, test, labels, self.SPEC, ZeroReconstruction())
        assert report["threshold"] == pytest.approx(0.01)
        assert (report["precision"], report["recall"], report["f1"]) == (1.0, 1.0, 1.0)
        assert report["raw_recall"] == pytest.approx(1 / 3)
        assert report.counts == {"windows": 1, "points": 8, "anomalies": 3}

    def test_max_aggregation(self):
        windows = np.zeros((1, 2, 2))
        windows[0, 0] = [1.0, 3.0]
        model = ZeroReconstruction()
        np.testing.assert_array_equal(anomaly_scores(model, windows, "max")[0], [9.0, 0.0])
        np.testing.assert_array_equal(anomaly_scores(model, windows, "mean")[0], [5.0, 0.0])

    def test_flags_grow_as_quantile_drops(self, rng):
        train = rng.normal(size=(6, 8, 1))
        test = rng.normal(size=(3, 8, 1))
        previous = np.zeros((3, 8), dtype=bool)
        last_threshold = np.inf
        for q in (1.0, 0.99, 0.9, 0.75, 0.5, 0.25, 0.05):
            spec = TaskSpec(kind="anomaly", input_len=8, threshold_quantile=q)
            flags, threshold = flag_anomalies(train, test, spec, ZeroReconstruction())
            assert (flags >= previous).all()
            assert threshold <= last_threshold
            previous, last_threshold = flags, threshold
        assert previous.any()

    def test_label_shape(self):
        with pytest.raises(ShapeError):
            detect_anomalies(
                np.zeros((1, 8, 1)),
                np.zeros((2, 8, 1)),
                np.zeros((1, 8), dtype=bool),
                self.SPEC,
                ZeroReconstruction(),
            )

    def test_datasets(self):
        task = AnomalyTask(TaskSpec(kind="anomaly", input_len=32))
        manifest = DatasetManifest(length=1000, anomalies=3, noise_sigma=0.0, stride=8)
        parts = task.datasets(manifest)
        test = parts["test"]
        assert test.targets.shape == (6, 32)
        np.testing.assert_array_equal(test.starts, 800 + 32 * np.arange(6))
        assert test.targets.any()
        assert parts["train"].inputs.shape[1:] == (32, 1)

    def test_datasets_need_labels(self):
        task = AnomalyTask(TaskSpec(kind="anomaly", input_len=32))
        with pytest.raises(DataError):
            task.datasets(DatasetManifest(length=500))

    def test_evaluate_needs_reference(self):
        task = AnomalyTask(self.SPEC)
        windows = WindowSet(np.zeros((1, 8, 1)), np.zeros((1, 8), dtype=bool), np.zeros(1))
        with pytest.raises(DataError):
            task.evaluate(ZeroReconstruction(), windows)


class TestClassify:
    SPEC = TaskSpec(kind="classify", input_len=32, num_classes=2)

    def test_accuracy(self):
        x = np.stack([np.full((32, 1), v) for v in (-1.0, 2.0, 3.0, -4.0)])
        report = classify(x, np.array([0, 1, 0, 0]), self.SPEC, MeanSignClassifier())
        assert report["accuracy"] == pytest.approx(0.75)
        assert report.counts == {"samples": 4, "classes": 2}

    def test_labels_out_of_range(self):
        x = np.zeros((2, 32, 1))
        with pytest.raises(DataError):
            classify(x, np.array([0, 2]), self.SPEC, MeanSignClassifier())

    def test_datasets(self):
        parts = ClassifyTask(self.SPEC).datasets(DatasetManifest(length=2000, input_len=32))
        total = sum(len(part) for part in parts.values())
        assert total == 62
        assert parts["train"].inputs.shape[1:] == (32, 1)
        assert set(np.unique(parts["train"].targets)) == {0, 1}

    def test_datasets_reject_csv(self, csv_file):
        manifest = DatasetManifest(csv=str(csv_file("a\n1\n")))
        with pytest.raises(DataError):
            ClassifyTask(self.SPEC).datasets(manifest)

    def test_loss_uses_logits(self, tiny_model_config):
        task = ClassifyTask(self.SPEC)
        model = task.build_model(tiny_model_config, 1)
        inputs = np.random.default_rng(0).normal(size=(3, 32, 1))
        loss = task.loss(model, inputs, np.array([0, 1, 1]), None, task.default_loss)
        assert loss.shape == ()
        assert task.default_loss == "cross_entropy"

    def test_never_decomposes_or_denormalizes(self, monkeypatch, tiny_model_config):
        def refuse(*args, **kwargs):
            raise AssertionError("classification reached the reconstruction path")

        normalize = network.normalize

        def without_stats(x):
            normed, stats = normalize(x)
            blank = NormStats(np.full_like(stats.mu, np.nan), np.full_like(stats.sigma, np.nan))
            return normed, blank

        monkeypatch.setattr(network, "decompose", refuse)
        monkeypatch.setattr(preprocessing, "decompose", refuse)
        monkeypatch.setattr(preprocessing, "denormalize", refuse)
        monkeypatch.setattr(network, "normalize", without_stats)

        task = ClassifyTask(self.SPEC)
        model = task.build_model(tiny_model_config, 1)
        parts = task.datasets(DatasetManifest(length=2000, input_len=32))
        train = parts["train"]
        loss = task.loss(model, train.inputs[:4], train.targets[:4], None, "cross_entropy")
        assert np.isfinite(loss.item())
        assert np.isfinite(model.predict(parts["test"].inputs)).all()
        report = task.evaluate(model, parts["test"])
        assert 0.0 <= report["accuracy"] <= 1.0

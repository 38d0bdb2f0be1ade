import numpy as np
import pandas as pd

from ..data.manifest import DatasetManifest
from ..data.synthetic import gen_period_classes
from ..data.windowing import WindowSet, split_bounds
from ..errors import DataError
from ..metrics import MetricReport, accuracy
from ..model.network import PyramidTransformer
from ..numerics.tensor import Tensor
from ..training import losses
from .base import Task, TaskSpec, map_windows


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataError(f"labels must lie in [0, {num_classes - 1}]")
    return labels.astype(np.intp)


def classify(
    x: np.ndarray, labels: np.ndarray, spec: TaskSpec, model: PyramidTransformer
) -> MetricReport:
    """Accuracy of the model's arg-max class on windows ``x`` of shape (n, L, C)."""
    labels = _check_labels(labels, spec.num_classes)
    x = np.asarray(x, dtype=np.float64)
    if len(x) != len(labels):
        raise DataError(f"{len(x)} windows but {len(labels)} labels")
    logits = map_windows(model.predict, x)
    predicted = logits.argmax(axis=1)
    return MetricReport(
        task="classify",
        metrics={"accuracy": accuracy(labels, predicted)},
        counts={"samples": len(labels), "classes": spec.num_classes},
    )


class ClassifyTask(Task):
    """Whole-window labels; the model never decomposes or de-normalizes."""

    @property
    def name(self) -> str:
        return "classify"

    @property
    def default_loss(self) -> str:
        return "cross_entropy"

    def datasets(self, manifest: DatasetManifest) -> dict[str, WindowSet]:
        """
        Period-discrimination windows: class i is a sine of period
        input_len / 2**(i + 2), with random amplitude and phase.
        """
        if manifest.csv:
            raise DataError("classification datasets are generated, not read from CSV")
        periods = [self.spec.input_len / 2 ** (i + 2) for i in range(self.spec.num_classes)]
        if periods[-1] < 2:
            raise DataError(
                f"input_len {self.spec.input_len} is too short for {len(periods)} classes"
            )
        per_class = max(1, manifest.length // (self.spec.input_len * self.spec.num_classes))
        inputs, labels = gen_period_classes(
            per_class, self.spec.input_len, periods, manifest.noise_sigma, manifest.seed
        )
        parts = {}
        bounds = split_bounds(len(labels), manifest.fractions)
        for name, (start, end) in zip(("train", "val", "test"), bounds):
            if end > start:
                parts[name] = WindowSet.labelled(inputs[start:end], labels[start:end])
        return parts

    def loss(self, model, inputs, targets, rng, loss_name) -> Tensor:
        self.resolve_loss(loss_name)
        labels = _check_labels(targets, self.spec.num_classes)
        return losses.cross_entropy(model.logits(inputs, rng), labels)

    def evaluate(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> MetricReport:
        self.prepare(model, windows)
        return classify(windows.inputs, windows.targets, self.spec, model)

    def plot_frame(
        self, model: PyramidTransformer, windows: WindowSet, reference: WindowSet | None = None
    ) -> pd.DataFrame:
        logits = map_windows(model.predict, windows.inputs)
        frame = pd.DataFrame({"sample": np.arange(len(windows)), "label": windows.targets})
        frame["predicted"] = logits.argmax(axis=1)
        for c in range(logits.shape[1]):
            frame[f"logit_{c}"] = logits[:, c]
        return frame

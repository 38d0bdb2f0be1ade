import logging
from typing import Any

import numpy as np

from ..data.synthetic import Tone, gen_multiperiod
from ..errors import PerimidError
from ..model.network import ModelConfig, ModelShape, PyramidTransformer
from ..numerics.gradcheck import gradient_errors
from ..training import losses

logger = logging.getLogger(__name__)

TOLERANCE = 1e-3


def check_model(
    input_len: int = 16,
    target_len: int = 8,
    channels: int = 2,
    k: int = 3,
    d_model: int = 8,
    seed: int = 0,
) -> tuple[PyramidTransformer, np.ndarray, np.ndarray]:
    """A small forecasting model with a two-window batch of multi-periodic inputs."""
    config = ModelConfig(k=k, d_model=d_model, layers=1, heads=2, dropout=0.0, kernel=5)
    model = PyramidTransformer(
        config, ModelShape("forecast", input_len, target_len, channels), seed=seed
    )
    total = 2 * input_len + target_len
    tones = (Tone(total / 2, 1.0), Tone(total / 4, 0.5), Tone(total / 8, 0.25))
    series = gen_multiperiod(total, channels, tones, 0.01, 0.05, seed).values
    inputs = np.stack([series[:input_len], series[input_len : 2 * input_len]])
    targets = np.random.default_rng(seed).normal(size=(2, target_len, channels))
    return model, inputs, targets


def gradcheck(seed: int = 0, eps: float = 1e-6, tolerance: float = TOLERANCE) -> dict[str, Any]:
    """
    Finite-difference check of every parameter block of a full forecasting model.

    Returns:
        Dict with the maximum relative error, per-block errors and pass/fail
    """
    try:
        model, inputs, targets = check_model(seed=seed)
        params = model.named_parameters()
        errors = gradient_errors(lambda: losses.mse(model.forward(inputs), targets), params, eps)
    except PerimidError as e:
        return {"success": False, "error": str(e)}

    worst = max(errors.values(), default=0.0)
    logger.info(f"max relative gradient error {worst:.3e} over {len(errors)} blocks")
    result = {
        "success": worst <= tolerance,
        "max_error": worst,
        "tolerance": tolerance,
        "errors": errors,
    }
    if worst > tolerance:
        result["error"] = f"max relative gradient error {worst:.3e} exceeds {tolerance}"
    return result

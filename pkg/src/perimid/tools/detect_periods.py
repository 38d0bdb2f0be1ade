from typing import Any

from .. import spectral
from ..config.store import RunConfig
from ..errors import DataError, PerimidError


def detect_periods(config: RunConfig, start: int | None = None) -> dict[str, Any]:
    """
    Detect the k dominant periods of a series.

    Args:
        config: Supplies the data source, k and the moving-average kernel.
        start: First index of an input_len window; None uses the whole series.

    Returns:
        Dict with the PeriodSet (frequencies, periods, amplitudes)
    """
    try:
        series = config.data.load()
        if start is not None:
            end = start + config.task.input_len
            if start < 0 or end > len(series):
                raise DataError(
                    f"window [{start}, {end}) lies outside the {len(series)}-point series"
                )
            series = series[start:end]
        periods = spectral.detect_periods(series, config.model.k, config.model.kernel)
    except PerimidError as e:
        return {"success": False, "error": str(e)}

    return {
        "success": True,
        "length": int(series.shape[0]),
        "channels": int(series.shape[1]),
        "periods": periods.to_dict(),
    }

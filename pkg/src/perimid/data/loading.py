"""CSV ingestion."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError

logger = logging.getLogger(__name__)


def _read_frame(path: Path, has_header: bool) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            header=0 if has_header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except FileNotFoundError as e:
        raise DataError(f"CSV file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: ragged rows ({e})") from e


def load_csv(
    path: str | Path, has_header: bool = True, time_column: str | None = None
) -> np.ndarray:
    """
    Read a rectangular numeric CSV into a (T_total, C) float array.

    Args:
        path: CSV file.
        has_header: Whether the first line holds column names.
        time_column: Column to drop (by name, or by 0-based position when
            there is no header).

    Raises:
        DataError: missing file, ragged rows or a non-numeric cell. Cell
            positions are reported as 1-based data row (header excluded) and
            1-based column after the time column is removed.
    """
    path = Path(path)
    frame = _read_frame(path, has_header)

    if time_column is not None:
        key: str | int = time_column
        if not has_header:
            if not str(time_column).isdigit():
                raise DataError(
                    f"without a header, time_column must be a position, got {time_column!r}"
                )
            key = int(time_column)
        if key not in frame.columns:
            raise DataError(f"time column {time_column!r} not found in {path}")
        frame = frame.drop(columns=[key])

    if frame.shape[1] == 0 or frame.shape[0] == 0:
        raise DataError(f"{path} has no numeric data")

    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        row = int(np.flatnonzero(short)[0]) + 1
        raise DataError(f"{path}: ragged rows (row {row} has too few fields)")

    numeric = frame.apply(lambda column: pd.to_numeric(column, errors="coerce"))
    bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64))
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        cell = frame.iat[row, col]
        raise DataError(f"{path}: non-numeric value {cell!r} at row {row + 1} col {col + 1}")

    values = numeric.to_numpy(dtype=np.float64)
    logger.debug(f"loaded {path}: {values.shape[0]} rows x {values.shape[1]} channels")
    return values


def load_labelled_csv(
    path: str | Path,
    label_column: str,
    has_header: bool = True,
    time_column: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Like ``load_csv`` but split off a 0/1 anomaly label column.

    Returns:
        The (T_total, C) channels without the label column and a boolean
        label timeline of length T_total.
    """
    if not has_header:
        raise DataError("a label column needs a header row")
    values = load_csv(path, has_header, time_column)
    names = [c for c in pd.read_csv(path, nrows=0).columns if c != time_column]
    if label_column not in names:
        raise DataError(f"label column {label_column!r} not found in {path}")
    index = names.index(label_column)
    labels = values[:, index]
    if not np.isin(labels, (0.0, 1.0)).all():
        raise DataError(f"label column {label_column!r} must hold only 0 and 1")
    return np.delete(values, index, axis=1), labels.astype(bool)

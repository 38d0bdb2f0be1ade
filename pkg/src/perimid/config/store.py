"""Run configuration and the on-disk state directory (run history)."""

import configparser
import dataclasses
import json
import os
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from ..data.manifest import DatasetManifest, coerce_setting
from ..errors import ConfigurationError
from ..model.network import ModelConfig
from ..tasks.base import TaskSpec
from ..tasks.registry import get_task
from ..training.config import TrainConfig

HISTORY_LIMIT = 100
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def config_dir() -> Path:
    """The state directory: $PERIMID_HOME, else ~/.perimid."""
    home = os.environ.get("PERIMID_HOME")
    return Path(home) if home else Path.home() / ".perimid"


def run_history_file() -> Path:
    return config_dir() / "run-history.json"


def _ensure_config_dir() -> None:
    """Ensure config directory exists with proper permissions."""
    config_dir().mkdir(mode=0o700, parents=True, exist_ok=True)


def _read_json(path: Path) -> dict[str, Any]:
    """Read a JSON file, returning empty dict if not found."""
    if not path.exists():
        return {}
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}") from e


def _write_json(path: Path, data: dict[str, Any]) -> None:
    """Write data to JSON file with restricted permissions."""
    _ensure_config_dir()
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
    os.chmod(path, 0o600)


def get_run_history() -> list[dict[str, Any]]:
    """Get the history of runs that wrote a report."""
    return _read_json(run_history_file()).get("runs", [])


def add_run_to_history(run: dict[str, Any]) -> None:
    """Append a run, keeping the newest HISTORY_LIMIT entries."""
    path = run_history_file()
    data = _read_json(path)
    runs = data.get("runs", [])
    runs.append({**run, "finished_at": datetime.now(timezone.utc).isoformat()})
    data["runs"] = runs[-HISTORY_LIMIT:]
    _write_json(path, data)


def log_level(verbose: bool = False) -> str:
    """PERIMID_LOG_LEVEL if set, else DEBUG with ``verbose``, else WARNING."""
    raw = os.environ.get("PERIMID_LOG_LEVEL")
    if raw:
        level = raw.strip().upper()
        if level not in LOG_LEVELS:
            raise ConfigurationError(f"PERIMID_LOG_LEVEL must be one of {LOG_LEVELS}, got {raw!r}")
        return level
    return "DEBUG" if verbose else "WARNING"


@dataclass(frozen=True)
class OutputConfig:
    """Where a run writes its artifacts; unset paths are skipped."""

    out: str | None = None
    checkpoint: str | None = None
    loss_curve: str | None = None
    plot: str | None = None


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    task: TaskSpec = field(default_factory=TaskSpec)
    data: DatasetManifest = field(default_factory=DatasetManifest)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


SECTIONS = tuple(f.name for f in fields(RunConfig))


def _field_kind(f: dataclasses.Field) -> type:
    text = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    for kind in (bool, int, float):
        if kind.__name__ in text:
            return kind
    return str


def _overlay(section: str, current: Any, values: Mapping[str, Any]) -> Any:
    known = {f.name: f for f in fields(current)}
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigurationError(f"unknown key {key!r} in [{section}]")
        changes[key] = coerce_setting(key, raw, _field_kind(known[key]))
    try:
        return replace(current, **changes)
    except TypeError as e:
        raise ConfigurationError(f"[{section}]: {e}") from e


def load_run_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> RunConfig:
    """
    Merge defaults, then the INI file at ``path``, then ``overrides``.

    Args:
        path: Optional INI file with [model] [train] [task] [data] [output] sections.
        overrides: Per-section values that win over the file (typically CLI flags).
            ``None`` values are ignored.

    Raises:
        ConfigurationError: Missing file, unknown section or key, invalid values, or a
            loss the task cannot train with.
    """
    layers: list[Mapping[str, Mapping[str, Any]]] = []
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            found = parser.read(path)
        except configparser.Error as e:
            raise ConfigurationError(f"{path}: {e}") from e
        if not found:
            raise ConfigurationError(f"config file not found: {path}")
        layers.append({name: dict(parser[name]) for name in parser.sections()})
    if overrides:
        layers.append(
            {
                section: {k: v for k, v in values.items() if v is not None}
                for section, values in overrides.items()
            }
        )

    parts = {name: getattr(RunConfig(), name) for name in SECTIONS}
    for layer in layers:
        for section, values in layer.items():
            if section not in parts:
                raise ConfigurationError(
                    f"unknown config section [{section}]. Available: {', '.join(SECTIONS)}"
                )
            if values:
                parts[section] = _overlay(section, parts[section], values)

    # window geometry lives on the task; keep the manifest in step
    parts["data"] = replace(
        parts["data"], input_len=parts["task"].input_len, target_len=parts["task"].target_len
    )
    get_task(parts["task"]).resolve_loss(parts["train"].loss)
    return RunConfig(**parts)

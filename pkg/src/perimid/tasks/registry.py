from typing import Type

from ..errors import ConfigurationError
from .anomaly import AnomalyTask
from .base import Task, TaskSpec
from .classify import ClassifyTask
from .forecast import ForecastTask
from .impute import ImputeTask

# Registry of available tasks
TASKS: dict[str, Type[Task]] = {
    "forecast": ForecastTask,
    "impute": ImputeTask,
    "anomaly": AnomalyTask,
    "classify": ClassifyTask,
}


def get_task(spec: TaskSpec) -> Task:
    """Get a task instance for a spec."""
    if spec.kind not in TASKS:
        available = ", ".join(TASKS.keys())
        raise ConfigurationError(f"Unknown task: {spec.kind}. Available: {available}")
    return TASKS[spec.kind](spec)


def list_tasks() -> list[str]:
    """List all available task names."""
    return list(TASKS.keys())

import numpy as np
import pytest

from perimid.data.synthetic import Tone, gen_multiperiod
from perimid.model.network import ModelConfig


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep run history and thread settings out of the developer's environment."""
    home = tmp_path / "perimid-home"
    monkeypatch.setenv("PERIMID_HOME", str(home))
    monkeypatch.setenv("PERIMID_THREADS", "1")
    monkeypatch.delenv("PERIMID_LOG_LEVEL", raising=False)
    return home


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def two_tone():
    """Noiseless 2-channel series: 20 and 50 cycles over 400 steps."""
    return gen_multiperiod(400, 2, (Tone(20, 1.0), Tone(50, 0.5)), 0.0, 0.0, seed=0).values


@pytest.fixture
def tiny_model_config():
    return ModelConfig(k=3, d_model=8, layers=1, heads=2, dropout=0.0, kernel=5)


@pytest.fixture
def csv_file(tmp_path):
    def write(text: str, name: str = "series.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write

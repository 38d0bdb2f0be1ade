import json
import stat

import pytest

from perimid.config.store import (
    HISTORY_LIMIT,
    RunConfig,
    add_run_to_history,
    get_run_history,
    load_run_config,
    log_level,
    run_history_file,
)
from perimid.errors import ConfigurationError


class TestHistory:
    def test_empty_without_file(self):
        assert get_run_history() == []

    def test_append(self, isolated_home):
        add_run_to_history({"command": "forecast", "out": "a.json"})
        runs = get_run_history()
        assert len(runs) == 1
        assert runs[0]["command"] == "forecast"
        assert "finished_at" in runs[0]
        assert run_history_file().parent == isolated_home

    def test_limit(self):
        for i in range(HISTORY_LIMIT + 5):
            add_run_to_history({"n": i})
        runs = get_run_history()
        assert len(runs) == HISTORY_LIMIT
        assert runs[0]["n"] == 5

    def test_file_is_private(self):
        add_run_to_history({"n": 1})
        assert stat.S_IMODE(run_history_file().stat().st_mode) == 0o600

    def test_bad_json(self):
        run_history_file().parent.mkdir(parents=True)
        run_history_file().write_text("{not json")
        with pytest.raises(ConfigurationError):
            get_run_history()


class TestLogLevel:
    def test_default_and_verbose(self):
        assert log_level() == "WARNING"
        assert log_level(verbose=True) == "DEBUG"

    def test_env_wins(self, monkeypatch):
        monkeypatch.setenv("PERIMID_LOG_LEVEL", "info")
        assert log_level(verbose=True) == "INFO"

    def test_invalid_env(self, monkeypatch):
        monkeypatch.setenv("PERIMID_LOG_LEVEL", "LOUD")
        with pytest.raises(ConfigurationError):
            log_level()


class TestLoadRunConfig:
    def test_defaults(self):
        config = load_run_config()
        assert config == RunConfig()
        assert config.data.input_len == config.task.input_len

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            "[model]\nk = 4\nd_model = 8\nheads = 2\nlayer_norm = no\n\n"
            "[task]\nkind = impute\ninput_len = 48\n\n"
            "[train]\nlr = 0.01\nmax_steps = 3\n"
        )
        config = load_run_config(path, {"model": {"k": 2}, "train": {"lr": None}})
        assert config.model.k == 2
        assert config.model.d_model == 8
        assert config.model.layer_norm is False
        assert config.task.kind == "impute"
        assert config.train.lr == 0.01
        assert config.train.max_steps == 3

    def test_geometry_follows_task(self):
        config = load_run_config(overrides={"task": {"input_len": 32, "target_len": 8}})
        assert (config.data.input_len, config.data.target_len) == (32, 8)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_run_config(tmp_path / "absent.ini")

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[optimizer]\nlr = 0.1\n")
        with pytest.raises(ConfigurationError, match="Available"):
            load_run_config(path)

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="dmodel"):
            load_run_config(overrides={"model": {"dmodel": 8}})

    @pytest.mark.parametrize(
        "overrides",
        [
            {"model": {"k": "two"}},
            {"model": {"layer_norm": "maybe"}},
            {"model": {"k": 1}},
            {"task": {"kind": "segment"}},
        ],
    )
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigurationError):
            load_run_config(overrides=overrides)

    def test_to_dict_is_json(self):
        data = json.loads(json.dumps(RunConfig().to_dict()))
        assert set(data) == {"model", "train", "task", "data", "output"}

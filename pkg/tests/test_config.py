from pathlib import Path

import pytest
from pydantic import ValidationError

from app.config import Settings


def test_defaults(monkeypatch):
    monkeypatch.delenv("USDN_SIM_WORKERS", raising=False)
    settings = Settings(_env_file=None)
    assert settings.default_seeds == 10
    assert settings.workers == 1
    assert settings.output_dir == Path("./runs")
    assert settings.log_level == "INFO"


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("USDN_SIM_WORKERS", "4")
    monkeypatch.setenv("USDN_SIM_LOG_LEVEL", "debug")
    monkeypatch.setenv("USDN_SIM_OUTPUT_DIR", "")
    settings = Settings(_env_file=None)
    assert settings.workers == 4
    assert settings.log_level == "DEBUG"
    assert settings.output_dir == Path("./runs")


def test_invalid_values_are_rejected(monkeypatch):
    monkeypatch.setenv("USDN_SIM_LOG_LEVEL", "chatty")
    with pytest.raises(ValidationError):
        Settings(_env_file=None)
    monkeypatch.setenv("USDN_SIM_LOG_LEVEL", "INFO")
    monkeypatch.setenv("USDN_SIM_WORKERS", "0")
    with pytest.raises(ValidationError):
        Settings(_env_file=None)

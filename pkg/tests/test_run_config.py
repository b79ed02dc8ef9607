import pytest
from pydantic import ValidationError

from app.config import Settings
from app.core.errors import InvalidModelParamsError
from app.core.gluing import ModelKind
from app.core.run_config import RunConfig, load_run_defaults


def test_defaults_come_from_settings():
    defaults = load_run_defaults()
    config = RunConfig(command="verify")
    assert config.seed == defaults.seed
    assert config.samples == defaults.samples
    assert config.threads == defaults.threads


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("DEFAULT_SAMPLES", "77")
    monkeypatch.setenv("FLOAT_DIGITS", "9")
    settings = Settings()
    assert settings.DEFAULT_SAMPLES == 77
    assert settings.FLOAT_DIGITS == 9


def test_model_run_params():
    config = RunConfig(command="sample", model="tprime", n=4, m=2, t=5)
    params = config.params()
    assert params.kind is ModelKind.TPRIME and params.N == 20
    assert config.ledger_fields()["model"] == "tprime"


def test_invalid_model_params_are_validation_errors():
    with pytest.raises(ValidationError, match="even edge count"):
        RunConfig(command="oracle", model="s", n=5)
    assert issubclass(InvalidModelParamsError, ValueError)


@pytest.mark.parametrize(
    "fields",
    [
        {"command": "sample", "n": 4},
        {"command": "sample", "model": "s", "n": 4, "seed": -1},
        {"command": "sample", "model": "s", "n": 4, "seed": 2 ** 64},
        {"command": "dist", "model": "s", "n": 4, "samples": 1},
        {"command": "verify", "only": "nonsense"},
        {"command": "verify", "threads": "-3"},
        {"command": "plot"},
    ],
)
def test_rejected_configs(fields):
    with pytest.raises(ValidationError):
        RunConfig(**fields)


def test_threads_parsing():
    assert RunConfig(command="verify", threads="auto").threads == "auto"
    assert RunConfig(command="verify", threads="4").threads == 4

import pytest
import yaml

from app.core.config import DEFAULT_CONFIG, AppConfig
from app.core.errors import (
    BudgetExceeded,
    NotPositive,
    SchemaError,
    ShiftKrausError,
    ToleranceUnmet,
    WindowOverflow,
)
from app.core.utils import coerce_bool, parse_dims


def test_load_writes_defaults(tmp_path):
    cfg = AppConfig.load(str(tmp_path))

    assert cfg.raw == DEFAULT_CONFIG
    with open(tmp_path / "config.yaml", "r", encoding="utf-8") as handle:
        assert yaml.safe_load(handle) == DEFAULT_CONFIG


def test_load_merges_partial_file(tmp_path):
    (tmp_path / "config.yaml").write_text(
        "limits:\n  window_cap: 64\ncustom:\n  note: kept\n", encoding="utf-8"
    )

    cfg = AppConfig.load(str(tmp_path))

    assert cfg.limit("window_cap") == 64
    assert cfg.limit("program_cap") == 1_000_000
    assert cfg.get("custom", "note") == "kept"
    assert cfg.get("reports", "wall_time") is False
    with open(tmp_path / "config.yaml", "r", encoding="utf-8") as handle:
        persisted = yaml.safe_load(handle)
    assert persisted["limits"] == {**DEFAULT_CONFIG["limits"], "window_cap": 64}
    assert persisted["custom"] == {"note": "kept"}


def test_get_returns_default_for_missing_keys():
    cfg = AppConfig()

    assert cfg.get("limits", "unknown", default=7) == 7
    assert cfg.get("limits", "window_cap", "deeper", default=None) is None
    assert cfg.tolerance("structural") == 1e-10


def test_default_config_is_not_shared():
    cfg = AppConfig()

    cfg.raw["limits"]["window_cap"] = 1

    assert AppConfig().limit("window_cap") == 4096
    assert DEFAULT_CONFIG["limits"]["window_cap"] == 4096


@pytest.mark.parametrize(
    "value, expected",
    [("true", True), ("Off", False), ("1", True), (None, False), (0, False), ("maybe", False)],
)
def test_coerce_bool(value, expected):
    assert coerce_bool(value, False) is expected


@pytest.mark.parametrize(
    "text, dims",
    [("2,4,8", [2, 4, 8]), ("2:5", [2, 3, 4, 5]), (" 3 ", [3]), ("4,", [4])],
)
def test_parse_dims(text, dims):
    assert parse_dims(text) == dims


@pytest.mark.parametrize("text", ["", "5:2", "0,2", "a", "2:b"])
def test_parse_dims_rejects_bad_text(text):
    with pytest.raises(ValueError):
        parse_dims(text)


def test_errors_carry_code_residual_and_exit_code():
    exc = NotPositive("minimum eigenvalue -0.1 below -1e-10", residual=0.1)

    assert isinstance(exc, ShiftKrausError)
    assert isinstance(exc, ValueError)
    assert exc.code == "NotPositive"
    assert str(exc) == "NotPositive: minimum eigenvalue -0.1 below -1e-10 (residual 1.000e-01)"
    assert exc.exit_code == 2
    assert WindowOverflow().exit_code == BudgetExceeded().exit_code == 4
    assert ToleranceUnmet().exit_code == 3


def test_schema_error_keeps_path():
    exc = SchemaError("amplitudes[2]", "expected a list")

    assert exc.path == "amplitudes[2]"
    assert str(exc) == "SchemaError: amplitudes[2]: expected a list"

import pytest

from curvecast.config import (
    DEFAULTS,
    ConfigError,
    forecast_config,
    load_config,
    parse_override,
    protocol_config,
)


def test_defaults_unchanged_by_load():
    cfg = load_config(None, ["model.p=3"])
    assert cfg["model"]["p"] == 3
    assert DEFAULTS["model"]["p"] is None


def test_yaml_file_and_override(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 4\nmodel:\n  method: blup\n  p: 2\n", encoding="utf-8")
    cfg = load_config(path, ["model.p=5", "protocol.cuts=[\"11:00\"]"])
    assert cfg["seed"] == 4 and cfg["model"]["method"] == "blup"
    assert cfg["model"]["p"] == 5
    assert cfg["protocol"]["cuts"] == ["11:00"]


def test_parse_override_types():
    assert parse_override("a.b=0.5") == (["a", "b"], 0.5)
    assert parse_override("x=null") == (["x"], None)
    with pytest.raises(ConfigError):
        parse_override("novalue")


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError):
        load_config(None, ["model.nope=1"])
    path = tmp_path / "c.yaml"
    path.write_text("- a\n- b\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_section_must_be_mapping():
    with pytest.raises(ConfigError):
        load_config(None, ["model=3"])


def test_typed_configs():
    cfg = load_config(None, ["model.method=blup", "seed=9"])
    assert forecast_config(cfg).method == "blup"
    pc = protocol_config(cfg, "12:00")
    assert pc.cut_time == "12:00" and pc.seed == 9


def test_bad_method_is_config_error():
    with pytest.raises(ConfigError):
        forecast_config(load_config(None, ["model.method=magic"]))

import json
from fractions import Fraction

import pytest

from subres import config
from subres.config import ConfigError, ConfigParseError


def base(task="lyapunov", **kw):
    d = {"task": task, "system": {"builtin": "cat"}}
    d.update(kw)
    return d


def test_defaults_filled():
    cfg = config.validate(base())
    assert cfg.precision == "double" and cfg.seed == 0
    assert cfg.params["horizon"] == 10000 and cfg.system.builtin == "cat"
    assert config.validate({"task": "algebra_suite"}).precision == "rational"


def test_holonomy_defaults_to_twisted_system():
    cfg = config.validate({"task": "holonomy"})
    assert cfg.system.builtin == "twisted_cat"


@pytest.mark.parametrize("data,field", [
    ({"task": "nope"}, "task"),
    (base(seed=-1), "seed"),
    (base(precision="rational"), "precision"),
    (base(bogus=1), "bogus"),
    (base(params={"horizon": "many"}), "params.horizon"),
    (base(params={"unknown": 1}), "params.unknown"),
    ({"task": "algebra_suite", "params": {"profiles": [[1], [2, 0]]}}, "params.profiles[1][1]"),
    ({"task": "algebra_suite", "params": {"profiles": [[1, 2]]}}, "params.profiles[0][1]"),
])
def test_field_level_errors(data, field):
    with pytest.raises(ConfigError) as info:
        config.validate(data)
    assert info.value.field == field
    assert str(info.value).startswith(field + ":")


def test_nonpositive_weight_message():
    with pytest.raises(ConfigError) as info:
        config.validate({"task": "algebra_suite", "params": {"profiles": [[3, -1]]}})
    assert "positive rational" in str(info.value) and "params.profiles[0][1]" in str(info.value)


def test_rational_parsing():
    assert config.rational("3/2", "w") == Fraction(3, 2)
    assert config.rational(2, "w", positive=True) == 2
    with pytest.raises(ConfigError):
        config.rational("x/2", "w")
    with pytest.raises(ConfigError):
        config.rational(0, "w", positive=True)


def test_parse_file_formats(tmp_path):
    t = tmp_path / "a.toml"
    t.write_text('task = "lyapunov"\n[system]\nbuiltin = "cat"\n')
    j = tmp_path / "b.json"
    j.write_text(json.dumps(base()))
    assert config.load(t).params == config.load(j).params
    assert config.load(t).name == "a"
    bad = tmp_path / "c.toml"
    bad.write_text("task = \n")
    with pytest.raises(ConfigParseError):
        config.parse_file(bad)


def test_echo_omits_output():
    cfg = config.validate(base(output={"dir": "/tmp/x", "csv": True}))
    assert "output" not in cfg.echo()

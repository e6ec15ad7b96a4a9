import json
import math
from pathlib import Path

import pytest

from spdecohere.config import (
    ExperimentConfig,
    SweepSpec,
    load_config,
    load_sweep,
    parse_angle,
    parse_config_text,
    parse_length,
    parse_sweep_text,
)
from spdecohere.decoherence import E2_PRESETS
from spdecohere.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """
grating.n_grooves = 100
grating.d = 20 um
grating.xi = 1 um
grating.theta = 30 deg
beam.v_y = 0.1
beam.R = 5 um
beam.z0 = 3 um
beam.epsilon = -1
beam.e2_preset = gaussian
"""


def _cfg(extra="", drop=()):
    lines = [ln for ln in BASE.strip().splitlines() if ln.split("=")[0].strip() not in drop]
    return parse_config_text("\n".join(lines) + "\n" + extra)


@pytest.mark.parametrize("text, value", [
    ("1 um", 1.0), ("1µm", 1.0), ("250 nm", 0.25), ("2 mm", 2000.0), ("1e-6 m", 1.0), ("-3 um", -3.0),
])
def test_lengths(text, value):
    assert parse_length(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["1", "1 furlong", "um", ""])
def test_bad_lengths(text):
    with pytest.raises(ConfigError):
        parse_length(text)


def test_angles():
    assert parse_angle("0.5") == 0.5
    assert parse_angle("0.5 rad") == 0.5
    assert parse_angle("90 deg") == pytest.approx(math.pi / 2)
    with pytest.raises(ConfigError):
        parse_angle("1 grad")


def test_basic_parse():
    c = _cfg()
    assert c.n_grooves == 100 and c.d == 20.0 and c.theta == pytest.approx(math.pi / 6)
    assert c.e2 == E2_PRESETS["gaussian"] and c.e2_preset == "gaussian"
    assert c.mode == "approximate" and c.seed == 0
    assert c.T_z == pytest.approx(200.0)
    assert c.tau_z == pytest.approx(1.0 / (0.1 * math.tan(math.pi / 6)))


def test_tan_theta():
    c = _cfg("grating.tan_theta = 3.1622776601683795", drop=("grating.theta",))
    assert math.tan(c.theta) == pytest.approx(math.sqrt(10.0), rel=1e-14)
    with pytest.raises(ConfigError, match="exactly one"):
        _cfg("grating.tan_theta = 1")
    with pytest.raises(ConfigError):
        _cfg("grating.tan_theta = -1", drop=("grating.theta",))


def test_comments_and_blank_lines():
    c = _cfg("# a comment\n\n  model.w_plane = 0.5  # inline\n")
    assert c.w_plane == 0.5


@pytest.mark.parametrize("extra, match", [
    ("grating.colour = red", "unknown key"),
    ("beam.R = 6 um", "duplicate"),
    ("beam.e2 = 0.1", "exactly one"),
    ("model.mode = exact", "mode"),
    ("model.w_plane = -1", "w_plane"),
    ("mc.samples = 10", "samples"),
    ("mc.seed = -1", "seed"),
    ("no equals sign here", "expected"),
    ("model.attenuate = maybe", "boolean"),
])
def test_rejections(extra, match):
    with pytest.raises(ConfigError, match=match):
        _cfg(extra)


def test_missing_keys():
    with pytest.raises(ConfigError, match="missing"):
        _cfg(drop=("beam.z0",))
    with pytest.raises(ConfigError, match="exactly one"):
        _cfg(drop=("beam.e2_preset",))


def test_unknown_preset():
    with pytest.raises(ConfigError):
        _cfg("beam.e2_preset = cgs", drop=("beam.e2_preset",))


def test_physical_validation_becomes_config_error():
    with pytest.raises(ConfigError):
        _cfg("beam.epsilon = 2", drop=("beam.epsilon",))
    with pytest.raises(ConfigError):
        _cfg("beam.v_y = 1.5", drop=("beam.v_y",))
    with pytest.raises(ConfigError):
        _cfg("grating.xi = 30 um", drop=("grating.xi",))


def test_explicit_e2():
    c = _cfg("beam.e2 = 0.25", drop=("beam.e2_preset",))
    assert c.e2 == 0.25 and c.e2_preset is None


def test_overrides_and_roundtrip():
    c = _cfg()
    d = c.with_overrides(e2_preset="heaviside", seed=7, mode="full")
    assert d.e2 == E2_PRESETS["heaviside"] and d.seed == 7 and d.mode == "full"
    again = ExperimentConfig.from_dict(json.loads(json.dumps(d.to_dict())))
    assert again == d
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**d.to_dict(), "bogus": 1})


def test_shipped_configs_load():
    c = load_config(CONFIGS / "worked_example.cfg")
    assert c.n_grooves == 1000 and c.e2_preset == "heaviside"
    assert (0.1 * math.tan(c.theta)) ** 2 == pytest.approx(0.1, rel=1e-13)
    assert load_config(CONFIGS / "flat.cfg").theta == 0.0
    s = load_sweep(CONFIGS / "separation_sweep.cfg")
    assert s.param == "R_over_tau" and s.count == 51 and s.epsilons == (-1, 0, 1)
    with pytest.raises(ConfigError):
        load_config(CONFIGS / "does_not_exist.cfg")


def test_sweep_grid():
    s = parse_sweep_text("sweep.param = Tz_over_tau\nsweep.min = 10\nsweep.max = 1000\nsweep.count = 3\nsweep.scale = log\n")
    assert list(s.grid()) == pytest.approx([10.0, 100.0, 1000.0])
    n = SweepSpec("N", 1, 10, 4)
    assert list(n.grid()) == [1.0, 4.0, 7.0, 10.0]
    t = parse_sweep_text("sweep.param = theta\nsweep.min = 0 deg\nsweep.max = 45 deg\nsweep.count = 2\n")
    assert t.max == pytest.approx(math.pi / 4)


@pytest.mark.parametrize("kwargs", [
    dict(param="R", min=0, max=1, count=3),
    dict(param="N", min=1, max=10, count=1),
    dict(param="N", min=10, max=1, count=3),
    dict(param="N", min=1, max=10, count=3, scale="cubic"),
    dict(param="R_over_tau", min=0, max=1, count=3, scale="log"),
    dict(param="N", min=1, max=10, count=3, epsilons=(2,)),
])
def test_sweep_validation(kwargs):
    with pytest.raises(ConfigError):
        SweepSpec(**kwargs)


def test_sweep_text_errors():
    with pytest.raises(ConfigError, match="missing"):
        parse_sweep_text("sweep.param = N\nsweep.min = 1\nsweep.max = 2\n")
    with pytest.raises(ConfigError, match="unknown"):
        parse_sweep_text("sweep.param = N\nsweep.min = 1\nsweep.max = 2\nsweep.count = 2\nsweep.step = 1\n")

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loss_sim.config import SCHEMA, Config, dump_config, load_config, parse_config
from loss_sim.errors import ConfigError

MINIMAL = "scenario.kind = acoustic2d\ntime.dt = 0.001\ntime.T = 0.1\n"


def test_defaults_and_values():
    cfg = parse_config(MINIMAL + "grid.nx = 128 # comment\n\n# whole-line comment\noutput.times = 0.02, 0.04\n")
    assert cfg["grid.nx"] == 128 and cfg["grid.nz"] == 64
    assert cfg["output.times"] == (0.02, 0.04)
    assert cfg.kind == "acoustic2d"


def test_boxes_in_numeric_order():
    text = MINIMAL + "material.box10 = 1, 2\nmaterial.box2 = 3, 4\n"
    assert parse_config(text).boxes() == [(3.0, 4.0), (1.0, 2.0)]


@pytest.mark.parametrize(
    "text, line",
    [
        (MINIMAL + "grid.nx = twelve\n", 4),
        (MINIMAL + "bogus.key = 1\n", 4),
        (MINIMAL + "just words\n", 4),
        ("scenario.kind = acoustic2d\ngrid.nx = 1\ngrid.nx = 2\n", 3),
        ("scenario.kind = sonar\n", 1),
        (MINIMAL + "time.T =\n", 4),
    ],
)
def test_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_kind_and_required():
    with pytest.raises(ConfigError):
        parse_config("grid.nx = 4\n")
    with pytest.raises(ConfigError):
        parse_config("scenario.kind = elastic3d\n")["time.dt"]


def test_with_values_and_set():
    cfg = parse_config(MINIMAL)
    other = cfg.with_values(grid__nx=32, output__times="0.1, 0.2")
    assert other["grid.nx"] == 32 and other["output.times"] == (0.1, 0.2)
    assert cfg["grid.nx"] == 64
    with pytest.raises(ConfigError):
        cfg.with_values(grid__nq=3)


def test_load(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text(MINIMAL)
    assert load_config(p).values == parse_config(MINIMAL).values


VALUE = {
    "int": st.integers(-10**6, 10**6),
    "float": st.floats(allow_nan=False, allow_infinity=False),
    "str": st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True),
    "floats": st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=4).map(tuple),
    "ints": st.lists(st.integers(-100, 100), max_size=4).map(tuple),
    "strs": st.lists(st.from_regex(r"[a-z][a-z0-9]{0,5}", fullmatch=True), max_size=3).map(tuple),
}
KEYS = sorted(k for k in SCHEMA if k != "scenario.kind")


@st.composite
def configs(draw):
    cfg = Config({"scenario.kind": draw(st.sampled_from(["acoustic2d", "elastic3d"]))})
    for key in draw(st.lists(st.sampled_from(KEYS), unique=True, max_size=12)):
        cfg.values[key] = draw(VALUE[SCHEMA[key][0]])
    return cfg


@given(configs())
def test_dump_is_fixed_point(cfg):
    text = dump_config(cfg)
    again = parse_config(text)
    assert again.values == cfg.values
    assert dump_config(again) == text

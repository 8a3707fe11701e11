import csv

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexflow.config import (
    DIAGNOSTICS,
    ConfigError,
    RunConfig,
    emit_config,
    format_float,
    parse_config,
    write_csv,
)

MINIMAL = """\
scenario = paraboloid
rho = 1.0
n = 1
L = 2.0
dx = 0.01
t_end = 0.05
"""


def test_minimal_config_parses_with_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg == RunConfig("paraboloid", 1.0, 1, 2.0, 0.01, 0.05)
    assert cfg.diagnostics == () and cfg.boundary == "extrapolate" and cfg.dt is None


def test_comments_blank_lines_and_lists():
    cfg = parse_config(MINIMAL + "\n# comment\ndiagnostics = fields, steps  # trailing\nsnapshot_times = 0.01,0.02\n")
    assert cfg.diagnostics == ("fields", "steps")
    assert cfg.snapshot_times == (0.01, 0.02)


def test_negative_rho_is_reported_at_its_line():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("rho = 1.0", "rho = -1"))
    assert info.value.errors == [(2, "rho must be > 0")]


def test_every_problem_is_reported():
    text = "scenario = torus\nrho = x\nfoo = 1\nn = 1\nn = 2\nL = 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msgs = dict(info.value.errors)
    assert "scenario must be one of" in msgs[1]
    assert msgs[2] == "rho has the wrong type: 'x'"
    assert msgs[3] == "unknown key 'foo'"
    assert msgs[5] == "n already set on line 4"
    missing = [m for line, m in info.value.errors if line == 7]
    assert missing == ["missing required key 'dx'", "missing required key 't_end'"]


@pytest.mark.parametrize(
    "extra, fragment",
    [
        ("dx = 0.03\n", "integer multiple"),
        ("boundary = barrier\n", "hemisphere"),
        ("snapshot_times = 1.0\n", "exceed t_end"),
        ("diagnostics = harnack\nharnack_p = 0, 0, -1\n", "harnack_p needs 2"),
        ("diagnostics = c2_monitor\n", "c2_seed"),
        ("diagnostics = velocity_floor\nfloor_x = 0\n", "floor_t"),
        ("diagnostics = disjointness\ndisjoint_R = 3\n", "disjoint_R < L"),
        ("diagnostics = nested_domains\n", "nested_L"),
    ],
)
def test_cross_key_checks(extra, fragment):
    text = MINIMAL.replace("dx = 0.01\n", "") if extra.startswith("dx") else MINIMAL
    with pytest.raises(ConfigError) as info:
        parse_config(text + extra)
    assert any(fragment in m for _, m in info.value.errors)


def test_hemisphere_must_fit_inside_the_sphere():
    text = MINIMAL.replace("paraboloid", "hemisphere") + "r0 = 1.5\n"
    with pytest.raises(ConfigError, match="r0"):
        parse_config(text)


def test_error_message_lists_lines():
    with pytest.raises(ConfigError) as info:
        parse_config("rho = 0\n")
    assert "line 1: rho must be > 0" in str(info.value)


finite = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def configs(draw):
    n = draw(st.sampled_from([1, 2]))
    dx = draw(st.sampled_from([0.005, 0.01, 0.02, 0.05, 0.1]))
    L = dx * draw(st.integers(10, 400))
    t_end = draw(st.floats(0.0, 10.0))
    snaps = tuple(sorted(draw(st.lists(st.floats(1e-6, 1.0), max_size=4))))
    snaps = tuple(s * t_end for s in snaps if s * t_end > 0)
    return RunConfig(
        scenario=draw(st.sampled_from(["paraboloid", "scaled_paraboloid", "smoothed_cone"])),
        rho=draw(finite), n=n, L=L, dx=dx, t_end=t_end,
        a=draw(finite), mu=draw(finite),
        cfl=draw(st.floats(1e-3, 1.0)),
        dt=draw(st.none() | finite),
        c_H=draw(st.none() | finite),
        snapshot_times=snaps,
        snapshot_every=draw(st.integers(0, 100)),
        diagnostics=tuple(draw(st.lists(st.sampled_from(["steps", "fields", "nu_profile", "dual_concavity"]), unique=True))),
        plots=draw(st.booleans()),
        seed=draw(st.integers(0, 2**63)),
        out=draw(st.text("abcdefgh_-/0123456789", min_size=1, max_size=12)),
        nu_radii=tuple(sorted(set(draw(st.lists(st.floats(0.0, 50.0), min_size=1, max_size=4))))),
        nu_pair_distance=draw(finite),
        dual_rho=tuple(draw(st.lists(finite, min_size=1, max_size=4))),
        c2_beta=draw(st.floats(1.001, 10.0)),
    )


@settings(max_examples=100, deadline=None)
@given(configs())
def test_emit_then_parse_is_the_identity(cfg):
    assert parse_config(emit_config(cfg)) == cfg


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_write_csv_formats_cells(tmp_path):
    import numpy as np

    path = write_csv(tmp_path / "t.csv", ["a", "b", "c", "d"], [(1, 0.1, np.True_, "x"), (np.int64(2), np.float64(1 / 3), False, "y")])
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows == [["a", "b", "c", "d"], ["1", "0.10000000000000001", "true", "x"], ["2", "0.33333333333333331", "false", "y"]]


def test_diagnostic_names_are_unique():
    assert len(set(DIAGNOSTICS)) == len(DIAGNOSTICS)

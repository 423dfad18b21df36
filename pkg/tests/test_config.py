import math
from dataclasses import fields, replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isac_uav.config import (
    ScenarioConfig,
    config_fields,
    format_config,
    parse_config,
    parse_config_text,
    write_config,
)
from isac_uav.exceptions import ConfigError
from isac_uav.iff_protocol import TimingBudget
from isac_uav.kinematics import Maneuver

ANGLES = {"observer_angular_speed", "target_angular_speed", "observer_heading", "target_heading", "bearing"}


def assert_same(a, b):
    for f in fields(ScenarioConfig):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if f.name in ANGLES:
            assert va == pytest.approx(vb, rel=1e-14, abs=1e-15), f.name
        else:
            assert va == vb, f.name


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    cfg = parse_config(p)
    assert cfg == ScenarioConfig()
    assert cfg.measurement_var == (10.0, 0.01)
    assert cfg.process_var == (10.0, 10.0, 1.0, 1.0, 0.1, 0.1)
    assert cfg.observer_angular_speed == pytest.approx(math.radians(150))
    assert (cfg.timing.t3, cfg.timing.t5, cfg.timing.t7) == (10.0, 10.0, 0.0)


def test_zero_trials_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[monte_carlo]\ntrials = 0\n")
    assert exc.value.field == "monte_carlo.trials"
    assert "monte_carlo.trials" in str(exc.value)


def test_round_trip_defaults(tmp_path):
    cfg = ScenarioConfig()
    assert_same(parse_config(write_config(cfg, tmp_path / "c.ini")), cfg)


def test_round_trip_every_field_changed(tmp_path):
    cfg = ScenarioConfig(
        observer_speed=30.0,
        target_acceleration=2.5,
        target_angular_speed=math.radians(45),
        observer_heading=math.radians(-20),
        target_schedule=(Maneuver(0, 5, "left"), Maneuver(5, 9, "right")),
        separation=750.0,
        bearing=math.radians(10),
        dt=0.25,
        k_max=40,
        k_eval=25,
        measurement_var=(4.0, 0.02),
        process_var=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
        truth_noise=False,
        init="truth",
        joseph=True,
        literal_observation=True,
        dr_com_grid=(0.5, 10.0),
        t5_grid=(1.0, 2.0),
        t7_grid=(3.0,),
        timing=TimingBudget(1, 2, 3, 4, 5, 6, 7),
        timeout_ms=12.0,
        interactions=3,
        allegiance="foe",
        credential="B",
        expected_credential="C",
        trials=9,
        seed=77,
        workers=2,
    )
    assert_same(parse_config(write_config(cfg, tmp_path / "c.ini")), cfg)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.01, 5.0),
    st.integers(1, 200),
    st.lists(st.floats(0.0, 1e4), min_size=1, max_size=6),
    st.floats(-179.0, 179.0),
)
def test_round_trip_property(dt, k_max, grid, bearing_deg):
    cfg = ScenarioConfig(dt=dt, k_max=k_max, k_eval=1, dr_com_grid=tuple(grid), bearing=math.radians(bearing_deg))
    assert_same(parse_config_text(format_config(cfg)), cfg)


def test_degrees_are_converted():
    cfg = parse_config_text("[geometry]\nbearing_deg = 90\n[target]\nangular_speed_deg = 180\n")
    assert cfg.bearing == pytest.approx(math.pi / 2)
    assert cfg.target_angular_speed == pytest.approx(math.pi)


def test_ranges_and_schedule_syntax():
    cfg = parse_config_text("[iff]\nt5_grid = 0..3, 7\n[target]\nschedule = 0-4:left, 4-10:straight\n")
    assert cfg.t5_grid == (0.0, 1.0, 2.0, 3.0, 7.0)
    assert cfg.target_schedule == (Maneuver(0, 4, "left"), Maneuver(4, 10, "straight"))


@pytest.mark.parametrize(
    "text, field",
    [
        ("[filter]\nwobble = 1\n", "filter.wobble"),
        ("[plotting]\ndpi = 300\n", "plotting"),
        ("[filter]\ndt = fast\n", "filter.dt"),
        ("[filter]\ndt = -1\n", "filter.dt"),
        ("[filter]\nk_eval = 99\n", "filter.k_eval"),
        ("[filter]\nprocess_var = 1, 2\n", "filter.process_var"),
        ("[filter]\ninit = psychic\n", "filter.init"),
        ("[iff]\nt3 = -2\n", "iff"),
        ("[iff]\nt5_grid = 5..1\n", "iff.t5_grid"),
        ("[encounter]\nallegiance = neutral\n", "encounter.allegiance"),
        ("[target]\nschedule = 4-2:left\n", "target.schedule"),
        ("[sweep]\ndr_com_grid =\n", "sweep.dr_com_grid"),
    ],
)
def test_rejections_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.field == field


def test_malformed_syntax():
    with pytest.raises(ConfigError):
        parse_config_text("this is not ini\n")
    with pytest.raises(ConfigError):
        parse_config_text("[filter]\ndt = 1\ndt = 2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.ini")


def test_with_dr_com_only_touches_position_terms():
    cfg = ScenarioConfig().with_dr_com(3.0)
    assert cfg.process_var == (3.0, 3.0, 1.0, 1.0, 0.1, 0.1)


def test_config_fields_complete():
    assert set(config_fields()) == {f.name for f in fields(ScenarioConfig)}


def test_direct_construction_validates():
    with pytest.raises(ConfigError):
        replace(ScenarioConfig(), workers=0)


def test_profile_errors_name_the_key():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[observer]\nspeed = -3\n")
    assert exc.value.field == "observer.speed"


def test_inline_comments_allowed():
    cfg = parse_config_text("[filter]\ndt = 0.5   ; seconds\n[iff]\ntimeout_ms = auto ; default\n")
    assert cfg.dt == 0.5 and cfg.timeout_ms is None

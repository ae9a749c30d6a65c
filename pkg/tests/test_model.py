"""Config parsing, validation, and domain type tests."""

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavtc.model import (
    AntennaPattern,
    ConfigError,
    FixedSpeed,
    TabulatedSpeed,
    UniformSpeed,
    config_from_dict,
    db_to_linear,
    gain_at,
    linear_to_db,
    scenario_from_json,
    scenario_to_dict,
    scenario_to_json,
    speed_from_dict,
    validate,
)

from helpers import BASELINE_CONFIG, baseline_scenario


def raw(**overrides):
    cfg = dict(BASELINE_CONFIG)
    cfg.update(overrides)
    return cfg


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_collects_every_violation():
    bad = raw(**{"lambda": -1.0}, p_mobile=2.0, alpha=1.5, r_in=30.0)
    with pytest.raises(ConfigError) as exc_info:
        validate(config_from_dict(bad))
    messages = exc_info.value.violations
    assert any("lambda" in m for m in messages)
    assert any("p_mobile must lie in [0, 1]" in m for m in messages)
    assert any("alpha must exceed 2" in m for m in messages)
    assert any("r_in must be < r_out" in m for m in messages)
    assert len(messages) >= 4


def test_non_integer_k_rejected():
    with pytest.raises(ConfigError, match="k must be an integer"):
        validate(config_from_dict(raw(k=2.5)))


@pytest.mark.parametrize("k", [0, 9, -1])
def test_k_out_of_range_rejected(k):
    with pytest.raises(ConfigError):
        validate(config_from_dict(raw(k=k)))


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict(raw(rout=25.0))


def test_missing_required_key_reported():
    cfg = raw()
    del cfg["height"]
    with pytest.raises(ConfigError, match="height is required"):
        validate(config_from_dict(cfg))


def test_validate_is_idempotent():
    scenario = baseline_scenario()
    again = validate(scenario)
    assert scenario_to_dict(again) == scenario_to_dict(scenario)


def test_threshold_converted_once():
    scenario = baseline_scenario(threshold_db=-10.0)
    assert scenario.threshold == pytest.approx(0.1, rel=1e-15)
    assert baseline_scenario(threshold_db=0.0).threshold == 1.0


def test_negative_time_gap_rejected():
    with pytest.raises(ConfigError):
        validate(config_from_dict(raw(t_gap=-1.0)))


# ---------------------------------------------------------------------------
# footprint radii vs beam angles
# ---------------------------------------------------------------------------


def test_angles_produce_radii():
    cfg = raw()
    del cfg["r_in"], cfg["r_out"]
    theta_m = math.degrees(math.atan(15.0 / 50.0))
    theta_s = math.degrees(math.atan(25.0 / 50.0))
    scenario = validate(config_from_dict(raw(theta_m_deg=theta_m, theta_s_deg=theta_s,
                                             r_in=None, r_out=None)))
    assert scenario.params.antenna.r_in == pytest.approx(15.0, rel=1e-12)
    assert scenario.params.antenna.r_out == pytest.approx(25.0, rel=1e-12)


def test_consistent_radii_and_angles_accepted():
    theta_m = math.degrees(math.atan(15.0 / 50.0))
    theta_s = math.degrees(math.atan(25.0 / 50.0))
    scenario = validate(config_from_dict(raw(theta_m_deg=theta_m, theta_s_deg=theta_s)))
    assert scenario.params.antenna.r_out == pytest.approx(25.0)


def test_inconsistent_radii_and_angles_rejected():
    with pytest.raises(ConfigError):
        validate(config_from_dict(raw(theta_m_deg=10.0, theta_s_deg=20.0)))


def test_angle_ordering_enforced():
    with pytest.raises(ConfigError, match="theta"):
        validate(config_from_dict(raw(theta_m_deg=30.0, theta_s_deg=20.0,
                                      r_in=None, r_out=None)))


def test_neither_radii_nor_angles_rejected():
    with pytest.raises(ConfigError):
        validate(config_from_dict(raw(r_in=None, r_out=None)))


# ---------------------------------------------------------------------------
# serialization round trip
# ---------------------------------------------------------------------------


def test_round_trip_is_bit_exact():
    scenario = baseline_scenario(threshold_db=-9.7, t_gap=1.37)
    clone = scenario_from_json(scenario_to_json(scenario))
    assert clone.threshold == scenario.threshold
    assert clone.t_gap == scenario.t_gap
    assert clone.params == scenario.params
    assert clone.speed == scenario.speed
    assert clone.seed == scenario.seed
    assert clone.replications == scenario.replications
    assert clone.m_initial == scenario.m_initial


def test_round_trip_tabulated_speed():
    scenario = baseline_scenario(
        speed={"kind": "tabulated", "table": [[0.0, 0.0], [5.0, 0.15], [10.0, 0.05]]})
    clone = scenario_from_json(scenario_to_json(scenario))
    assert clone.speed == scenario.speed


def test_serialized_form_rejects_unknown_keys():
    payload = json.loads(scenario_to_json(baseline_scenario()))
    payload["bogus"] = 1
    with pytest.raises(ConfigError):
        scenario_from_json(json.dumps(payload))


# ---------------------------------------------------------------------------
# speed distributions
# ---------------------------------------------------------------------------


def test_fixed_speed_atom():
    s = FixedSpeed(10.0)
    assert s.atom == 10.0
    assert s.support_min == s.support_max == 10.0
    assert s.cdf(9.99) == 0.0 and s.cdf(10.0) == 1.0
    with pytest.raises(TypeError):
        s.pdf(10.0)


def test_uniform_speed_density():
    s = UniformSpeed(5.0, 15.0)
    assert s.atom is None
    assert s.pdf(10.0) == pytest.approx(0.1)
    assert s.pdf(4.0) == 0.0 and s.pdf(16.0) == 0.0
    assert s.cdf(5.0) == 0.0 and s.cdf(15.0) == 1.0 and s.cdf(10.0) == pytest.approx(0.5)


def test_uniform_speed_invalid_range():
    with pytest.raises(ConfigError):
        speed_from_dict({"kind": "uniform", "v_min": 10.0, "v_max": 10.0})
    with pytest.raises(ConfigError):
        speed_from_dict({"kind": "uniform", "v_min": -1.0, "v_max": 5.0})


def test_tabulated_speed_renormalizes_and_logs(caplog):
    with caplog.at_level("WARNING"):
        s = TabulatedSpeed([[0.0, 0.3], [10.0, 0.3]])
    assert "renormalized" in caplog.text
    assert s.cdf(10.0) == pytest.approx(1.0)
    assert s.cdf(5.0) == pytest.approx(0.5)


def test_tabulated_speed_requires_increasing_grid():
    with pytest.raises(ConfigError):
        TabulatedSpeed([[0.0, 0.1], [0.0, 0.1], [10.0, 0.1]])
    with pytest.raises(ConfigError):
        TabulatedSpeed([[5.0, 0.5], [4.0, 0.5]])
    with pytest.raises(ConfigError):
        TabulatedSpeed([[0.0, -0.5], [1.0, 2.5]])
    with pytest.raises(ConfigError):
        TabulatedSpeed([[0.0, 0.0], [1.0, 0.0]])


def test_tabulated_speed_cdf_is_exact_piecewise_quadratic():
    # mass on [0,2] = 0.25 (triangle), on [2,4] = 0.5 -> renormalized by 0.75
    s = TabulatedSpeed([[0.0, 0.0], [2.0, 0.25], [4.0, 0.25]])
    with np.errstate(all="raise"):
        assert s.cdf(2.0) == pytest.approx(0.25 / 0.75)
        assert s.cdf(4.0) == pytest.approx(1.0)
    assert s.support_min == 0.0 and s.support_max == 4.0
    assert s.pdf_breakpoints == (0.0, 2.0, 4.0)


@given(st.floats(0.0, 1.0))
def test_tabulated_sampling_inverts_cdf(u):
    s = TabulatedSpeed([[1.0, 0.2], [3.0, 0.2], [6.0, 0.2]])

    class _FakeRng:
        def random(self, size=None):
            return np.full(size, u) if size is not None else u

    draw = float(s.sample(_FakeRng(), 1)[0])
    assert 1.0 <= draw <= 6.0
    assert s.cdf(draw) == pytest.approx(u, abs=1e-9)


def test_speed_from_dict_rejects_bad_kinds():
    with pytest.raises(ConfigError):
        speed_from_dict({"kind": "gaussian", "v": 1.0})
    with pytest.raises(ConfigError):
        speed_from_dict({"kind": "fixed"})
    with pytest.raises(ConfigError):
        speed_from_dict({"kind": "fixed", "v": 1.0, "extra": 2})


# ---------------------------------------------------------------------------
# antenna gain
# ---------------------------------------------------------------------------


def test_gain_boundaries_are_right_continuous():
    ant = AntennaPattern(2.0, 0.5, 15.0, 25.0)
    assert ant.gain_at(15.0) == 2.0
    assert ant.gain_at(15.0 + 1e-9) == 0.5
    assert ant.gain_at(25.0) == 0.5
    assert ant.gain_at(25.0 + 1e-9) == 0.0
    assert gain_at(ant, np.array([0.0, 20.0, 30.0])).tolist() == [2.0, 0.5, 0.0]


@given(st.floats(0.0, 60.0), st.floats(0.0, 60.0))
def test_gain_monotone_non_increasing(d1, d2):
    ant = AntennaPattern(2.0, 0.5, 15.0, 25.0)
    lo, hi = sorted((d1, d2))
    assert ant.gain_at(lo) >= ant.gain_at(hi)


def test_side_gain_above_main_rejected():
    with pytest.raises(ConfigError, match="g_side must not exceed g_main"):
        validate(config_from_dict(raw(g_main=0.5, g_side=2.0)))


# ---------------------------------------------------------------------------
# unit helpers
# ---------------------------------------------------------------------------


@given(st.floats(-60.0, 60.0))
def test_db_round_trip(db):
    assert linear_to_db(db_to_linear(db)) == pytest.approx(db, abs=1e-12)


def test_db_reference_points():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(-10.0) == pytest.approx(0.1, rel=1e-15)
    assert db_to_linear(20.0) == pytest.approx(100.0, rel=1e-15)

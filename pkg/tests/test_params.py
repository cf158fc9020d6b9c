import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helictl.errors import ConfigParseError, ValidationError
from helictl.params import (CONFIG_DIR_ENV, ControllerParams, HelicopterParams,
                            derived_constants, dump_params, load_params, params_from_text,
                            replace)


def test_table_values_are_loaded_exactly(tmp_path):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("m = 7.6\nJx = 0.19\nJy = 0.46\nJz = 0.31  # kg m^2\n")
    heli, _ = load_params(cfg)
    assert (heli.m, heli.Jx, heli.Jy, heli.Jz) == (7.6, 0.19, 0.46, 0.31)


def test_missing_density_is_defaulted_and_reported():
    heli, ctrl, prov = params_from_text("m = 7.6\n")
    assert heli.rho == 1.225
    assert prov.status("rho") == "defaulted"
    assert prov.status("m") == "file"
    report = prov.report(heli, ctrl)
    assert "rho = 1.225  [defaulted]" in report


def test_hinge_offset_at_radius_is_rejected():
    with pytest.raises(ValidationError, match="3R/8"):
        params_from_text("e_hinge = 0.82\n")


@pytest.mark.parametrize("text, fragment", [
    ("m 7.6\n", "key = value"),
    ("mass = 7.6\n", "unknown key"),
    ("m = heavy\n", "bad value"),
    ("m = 1\nm = 2\n", "duplicate"),
])
def test_malformed_config(text, fragment):
    with pytest.raises(ConfigParseError, match=fragment):
        params_from_text(text)


@pytest.mark.parametrize("text", ["m = -1\n", "Jy = 0\n", "rho = 0\n", "S_fus_x = -0.1\n"])
def test_invariants(text):
    with pytest.raises(ValidationError):
        params_from_text(text)


def test_controller_invariants():
    with pytest.raises(ValidationError, match="m_x > c_x"):
        replace(ControllerParams(), c_x=2.0)
    with pytest.raises(ValidationError, match="tau0_z"):
        replace(ControllerParams(), tau0_z=0.5)
    with pytest.raises(ValidationError, match="singular"):
        replace(ControllerParams(), hinf_input_weights=(1.0, 0.0, 1.0))


def test_shipped_config_matches_defaults_and_sets_every_key():
    heli, ctrl, prov = load_params(with_provenance=True)
    assert heli == HelicopterParams() and ctrl == ControllerParams()
    assert "[defaulted]" not in prov.report(heli, ctrl)


def test_config_dir_environment(tmp_path, monkeypatch):
    (tmp_path / "default.cfg").write_text("m = 8.0\n")
    monkeypatch.setenv(CONFIG_DIR_ENV, str(tmp_path))
    assert load_params()[0].m == 8.0


def test_missing_file():
    with pytest.raises(ConfigParseError, match="cannot read"):
        load_params("/nonexistent/params.cfg")


def test_round_trip_is_bitwise():
    heli = replace(HelicopterParams(), m=7.6 + 1e-13, k_beta=math.pi)
    ctrl = replace(ControllerParams(), tau0_auto=True, hinf_state_weights=(0.1,) * 9)
    h2, c2, _ = params_from_text(dump_params(heli, ctrl))
    assert h2 == heli and c2 == ctrl


def test_flapping_time_constant_table_values():
    tau, _ = derived_constants(HelicopterParams())
    assert tau == pytest.approx(48 * 0.82 / (1.131 * 175.2 * 3 * 0.82), rel=1e-15)
    assert tau == pytest.approx(0.0807, abs=5e-5)


def test_zero_spring_removes_coupling():
    assert derived_constants(replace(HelicopterParams(), k_beta=0.0))[1] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_tau_increases_with_hinge_offset(e1, e2):
    lo, hi = sorted((e1, e2))
    limit = 3 * 0.82 / 8
    if hi >= limit or lo == hi:
        return
    t_lo = derived_constants(HelicopterParams(e_hinge=lo))[0]
    t_hi = derived_constants(HelicopterParams(e_hinge=hi))[0]
    assert t_hi > t_lo


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 100.0, allow_nan=False), st.floats(0.01, 10.0), st.floats(1.0, 500.0))
def test_round_trip_property(m, Jz, omega):
    heli = HelicopterParams(m=m, Jz=Jz, omega=omega)
    h2, _, _ = params_from_text(dump_params(heli, ControllerParams()))
    assert h2 == heli

import dataclasses
import math

import numpy as np
import pytest

from helictl import dynamics as dyn
from helictl.scenario import (COLUMN_NAMES, MISSION_HEADING, FlightLog, Reference, Scenario,
                              Waypoint, WindSegment, _trapezoid, flight_metrics, hover_hold,
                              paper_hover, run_batch, run_scenario, wind_at)


# ---------------------------------------------------------------- wind

def test_wind_zero_before_first_segment():
    prof = (WindSegment(5.0, (1, 0, 0), 3.0, 1.0),)
    assert np.array_equal(wind_at(prof, 4.999), np.zeros(3))
    assert np.array_equal(wind_at((), 100.0), np.zeros(3))


def test_steady_north_wind_in_body_axes():
    prof = (WindSegment(0.0, (1, 0, 0), 3.0),)
    euler = np.array([0.1, -0.2, 1.3])
    assert np.array_equal(wind_at(prof, 2.0), [3.0, 0.0, 0.0])
    c = [math.cos(a) for a in euler]
    s = [math.sin(a) for a in euler]
    # first column of the NED-to-body rotation, written out
    col = np.array([c[1] * c[2], s[0] * s[1] * c[2] - c[0] * s[2],
                    c[0] * s[1] * c[2] + s[0] * s[2]])
    assert np.allclose(wind_at(prof, 2.0, euler), 3.0 * col, atol=1e-14)


def test_wind_half_amplitude_mid_ramp():
    prof = (WindSegment(10.0, (0, 2, 0), 3.0, 1.0), WindSegment(20.0, (0, 1, 0), 0.0, 2.0))
    assert np.allclose(wind_at(prof, 10.5), [0, 1.5, 0])
    assert np.allclose(wind_at(prof, 15.0), [0, 3.0, 0])
    assert np.allclose(wind_at(prof, 21.0), [0, 1.5, 0])
    assert np.allclose(wind_at(prof, 30.0), [0, 0, 0])


def test_mission_gust_is_normal_to_heading():
    sc = paper_hover()
    d = np.array(sc.wind[0].direction)
    heading = np.array([math.cos(MISSION_HEADING), math.sin(MISSION_HEADING), 0.0])
    assert abs(d @ heading) < 1e-12
    assert sc.wind[0].speed == 3.0
    hover_start = next(s[0] for s in Reference(sc).segments if s[3] == "hover")
    assert sc.wind[0].start == pytest.approx(hover_start + 20.0)


# ---------------------------------------------------------------- reference

@pytest.mark.parametrize("dist", [0.05, 0.45, 3.0])
def test_trapezoid_rest_to_rest(dist):
    T, f = _trapezoid(dist, 0.25, 0.25)
    assert f(0.0) == (0.0, 0.0, 0.0)
    assert f(1e-3)[2] == 0.25
    s, v, _ = f(T)
    assert s == pytest.approx(dist, abs=1e-12) and v == pytest.approx(0.0, abs=1e-12)
    ts = np.linspace(0, T, 400)
    samples = np.array([f(t) for t in ts])
    assert np.all(np.diff(samples[:, 0]) >= -1e-15)
    assert samples[:, 1].max() <= 0.25 + 1e-12
    # velocity is the derivative of position
    fd = np.gradient(samples[:, 0], ts)
    assert np.abs(fd - samples[:, 1])[1:-1].max() < 1e-2


def test_mission_reference_geometry():
    ref = Reference(paper_hover())
    assert ref.phase_labels() == ["climb-transit", "climb", "hover-transit", "hover",
                                  "land-transit", "land"]
    assert np.allclose(ref.at(0.0).pos, [0, 0, -0.20])
    hover = next(s for s in ref.segments if s[3] == "hover")
    mid = ref.at(0.5 * (hover[0] + hover[1]))
    assert np.allclose(mid.pos, [0, 0, -0.65])
    assert dyn.wrap_angle(mid.psi - MISSION_HEADING) == pytest.approx(0.0, abs=1e-12)
    assert hover[1] - hover[0] == 60.0
    assert ref.at(ref.end + 5).pos[2] == pytest.approx(-0.10)


def test_reference_is_continuous():
    ref = Reference(paper_hover())
    ts = np.arange(0.0, ref.end, 0.01)
    pos = np.array([ref.at(t).pos for t in ts])
    psi = np.array([ref.at(t).psi for t in ts])
    assert np.abs(np.diff(pos, axis=0)).max() < 0.01 * 0.25 + 1e-9
    assert np.abs(np.diff(psi)).max() < 0.01 * 0.5 + 1e-9


def test_scenario_validation():
    p = (0.0, 0.0, -0.5)
    with pytest.raises(ValueError):
        Scenario("s", p, 0.0, (Waypoint(p, 0.0, 1.0),), dt=0.003).validate()
    with pytest.raises(ValueError):
        Scenario("s", p, 0.0, (Waypoint((0, math.nan, 0), 0.0, 1.0),)).validate()
    with pytest.raises(ValueError):
        Scenario("s", p, 0.0, (Waypoint(p, 0.0, 1.0),),
                 wind=(WindSegment(0, (1, 0, 0), -1.0),)).validate()


# ---------------------------------------------------------------- runs

@pytest.fixture(scope="module")
def hover_log(heli, ctrl, design):
    trim, _, gains = design
    return run_scenario(hover_hold(seed=1), heli, ctrl, gains, trim)


def test_hover_hold_is_noise_limited(hover_log, ctrl):
    assert hover_log.completed
    assert len(hover_log) == round(10.0 / 0.002) + 1
    m = flight_metrics(hover_log, ctrl=ctrl)
    assert m.hover_rms < 0.05


def test_log_time_strictly_increasing(hover_log):
    t = hover_log["t"]
    assert np.all(np.diff(t) > 0)
    assert np.allclose(np.diff(t), 0.002)


def test_csv_round_trip(hover_log, tmp_path):
    path = tmp_path / "log.csv"
    hover_log.to_csv(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        first = fh.readline().strip().split(",")
    assert header[0] == "t [s]" and header[3] == "z [m]"
    assert len(header) == len(COLUMN_NAMES)
    assert all("[" in h and h.endswith("]") for h in header)
    assert all(len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) <= 9
               for v in first)
    back = FlightLog.from_csv(path)
    assert back.data.shape == hover_log.data.shape
    assert np.allclose(back.data, hover_log.data, rtol=1e-8, atol=1e-300)


def test_figure_bundles(hover_log, tmp_path):
    names = hover_log.write_figure_bundles(tmp_path / "fig")
    assert names == ["attitude.csv", "controller_outputs.csv", "path3d.csv", "rates.csv"]
    data = np.loadtxt(tmp_path / "fig" / "rates.csv", delimiter=",", skiprows=1)
    assert data.shape == (len(hover_log), 4)
    head = (tmp_path / "fig" / "path3d.csv").read_text().splitlines()[0]
    assert head.startswith("t [s],x [m],y [m],z [m]")


def test_short_gust_run_is_bitwise_deterministic(heli, ctrl, design):
    trim, _, gains = design
    sc = dataclasses.replace(hover_hold(seed=5, duration=4.0),
                             wind=(WindSegment(1.0, (0, 1, 0), 2.0, 0.5),))
    a = run_scenario(sc, heli, ctrl, gains, trim)
    b = run_scenario(sc, heli, ctrl, gains, trim)
    assert a.data.tobytes() == b.data.tobytes()
    c = run_scenario(dataclasses.replace(sc, seed=6), heli, ctrl, gains, trim)
    assert c.data.tobytes() != a.data.tobytes()


def test_batch_matches_sequential(heli, ctrl, design):
    trim, _, gains = design
    scs = [hover_hold(seed=s, duration=1.0) for s in (11, 12)]
    seq = [run_scenario(s, heli, ctrl, gains, trim) for s in scs]
    par = run_batch(scs, heli, ctrl, gains, trim, jobs=2)
    for a, b in zip(seq, par):
        assert a.data.tobytes() == b.data.tobytes()


def test_violation_aborts_with_flushed_log(heli, ctrl, design):
    trim, _, gains = design
    tight = dataclasses.replace(ctrl, tau0_x=0.06, tau0_y=0.06, tau0_z=0.06,
                                tauinf_x=0.05, tauinf_y=0.05, tauinf_z=0.05)
    log = run_scenario(hover_hold(seed=2, duration=5.0), heli, tight, gains, trim)
    assert log.status == "aborted"
    assert "EnvelopeViolationError" in log.error
    assert 0 < len(log) < round(5.0 / 0.002) + 1
    assert log["flag_violation"][-1] == 1
    assert not log["flag_violation"][:-1].any()
    assert np.all(np.diff(log["t"]) > 0)


# ---------------------------------------------------------------- mission flight

def test_mission_flight_completes(mission_log):
    assert mission_log.completed, mission_log.error
    sc = paper_hover()
    duration = Reference(sc).end + sc.settle
    assert len(mission_log) == round(duration / sc.dt) + 1


def test_mission_flight_margins_never_negative(mission_log):
    flying = mission_log["flag_touchdown"] == 0
    margins = np.column_stack([mission_log[f"margin_{a}"] for a in "xyz"])[flying]
    assert margins.min() > 0
    assert not mission_log["flag_violation"].any()


def test_mission_flight_touches_down_and_freezes(mission_log):
    landed = mission_log["flag_touchdown"] == 1
    assert landed.any()
    first = np.argmax(landed)
    assert -mission_log["z"][first] <= 0.20
    for name in dyn.STATE_NAMES:
        assert np.all(mission_log[name][landed] == mission_log[name][first])


def test_mission_flight_metrics(mission_log, ctrl):
    m = flight_metrics(mission_log, ctrl=ctrl)
    assert m.hover_rms < 0.15
    assert m.heading_error_deg < 2.0
    assert m.yaw_overshoot < 0.20
    assert m.completed


def test_gust_shows_up_in_log(mission_log):
    wind = np.linalg.norm(np.column_stack([mission_log[c] for c in ("wind_n", "wind_e")]), axis=1)
    assert wind.max() == pytest.approx(3.0)
    assert wind[0] == 0.0 and wind[-1] == 0.0

"""Closed-loop flight scenarios, wind profiles and flight logs.

A scenario is a list of waypoints (NED position, heading, hold time)
joined by trapezoidal-velocity transitions, a piecewise-linear wind
profile and a measurement-noise spec.  :func:`run_scenario` flies it with
the prescribed-performance outer loop at the control rate and the
H-infinity attitude law at the integration rate.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .errors import EnvelopeViolationError, HelictlError
from .hinf import attitude_control, synthesize
from .linearize import find_trim, jacobians
from .outer_loop import OuterLoop, PerformanceEnvelope, steady_state_admissible

MISSION_HEADING = math.radians(273.5)


@dataclass(frozen=True)
class Waypoint:
    position: tuple          # NED, m
    heading: float           # rad
    hold: float = 0.0        # s
    label: str = ""


@dataclass(frozen=True)
class WindSegment:
    """From ``start`` the wind ramps linearly over ``ramp`` seconds to ``speed * direction``."""

    start: float
    direction: tuple         # NED, normalized on use
    speed: float
    ramp: float = 0.0


@dataclass(frozen=True)
class NoiseSpec:
    """1-sigma additive Gaussian measurement noise."""

    position: float = 0.05               # m
    velocity: float = 0.05               # m/s
    attitude: float = math.radians(0.1)  # rad


@dataclass(frozen=True)
class Scenario:
    name: str
    initial_position: tuple
    initial_heading: float
    waypoints: tuple
    wind: tuple = ()
    noise: NoiseSpec = NoiseSpec()
    dt: float = 0.002
    control_dt: float = 0.01
    duration: float | None = None
    seed: int = 0
    speed: float = 0.25          # m/s, transition cruise speed
    accel: float = 0.25          # m/s^2
    yaw_rate: float = 0.5        # rad/s
    yaw_accel: float = 0.5       # rad/s^2
    platform_height: float | None = None
    settle: float = 2.0          # s flown after the last reference segment

    def validate(self):
        if not self.dt > 0 or not self.control_dt > 0:
            raise ValueError("dt and control_dt must be positive")
        ratio = self.control_dt / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control_dt must be an integer multiple of dt")
        for wp in self.waypoints:
            if not all(math.isfinite(v) for v in (*wp.position, wp.heading, wp.hold)):
                raise ValueError(f"non-finite waypoint {wp}")
        for seg in self.wind:
            if seg.speed < 0 or seg.ramp < 0:
                raise ValueError("wind speed and ramp must be >= 0")
        for v in (self.speed, self.accel, self.yaw_rate, self.yaw_accel):
            if not v > 0:
                raise ValueError("transition limits must be positive")
        return self


# ------------------------------------------------------------------ wind

def wind_at(profile, t, euler=None):
    """Wind vector at time ``t``: NED, or body axes when ``euler`` is given."""
    w = np.zeros(3)
    for seg in sorted(profile, key=lambda s: s.start):
        if t < seg.start:
            break
        d = np.asarray(seg.direction, float)
        n = np.linalg.norm(d)
        target = seg.speed * d / n if n > 0 else np.zeros(3)
        frac = 1.0 if seg.ramp <= 0 else min(1.0, (t - seg.start) / seg.ramp)
        w = w + (target - w) * frac
    if euler is not None:
        return dyn.rotation_matrix(euler) @ w
    return w


# ------------------------------------------------------------------ reference

def _trapezoid(dist, vmax, amax):
    """Duration and (s, v, a) sampler of a rest-to-rest trapezoidal profile."""
    dist = abs(dist)
    if dist == 0.0:
        return 0.0, lambda t: (0.0, 0.0, 0.0)
    if dist >= vmax * vmax / amax:
        ta = vmax / amax
        tc = (dist - vmax * vmax / amax) / vmax
    else:
        ta = math.sqrt(dist / amax)
        tc = 0.0
        vmax = amax * ta
    T = 2.0 * ta + tc

    def sample(t):
        if t <= 0.0:
            return 0.0, 0.0, 0.0
        if t < ta:
            return 0.5 * amax * t * t, amax * t, amax
        if t < ta + tc:
            return 0.5 * amax * ta * ta + vmax * (t - ta), vmax, 0.0
        if t < T:
            r = T - t
            return dist - 0.5 * amax * r * r, amax * r, -amax
        return dist, 0.0, 0.0

    return T, sample


@dataclass
class RefSample:
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    psi: float
    psi_rate: float
    phase: int
    label: str


class Reference:
    """Piecewise waypoint reference; phases alternate transition / hold."""

    def __init__(self, scenario):
        self.segments = []
        p0 = np.asarray(scenario.initial_position, float)
        psi0 = scenario.initial_heading
        t = 0.0
        for k, wp in enumerate(scenario.waypoints):
            p1 = np.asarray(wp.position, float)
            delta = p1 - p0
            dist = float(np.linalg.norm(delta))
            unit = delta / dist if dist > 0 else np.zeros(3)
            dpsi = dyn.wrap_angle(wp.heading - psi0)
            Tp, fp = _trapezoid(dist, scenario.speed, scenario.accel)
            Ty, fy = _trapezoid(dpsi, scenario.yaw_rate, scenario.yaw_accel)
            Tt = max(Tp, Ty)
            if Tt > 0:
                self.segments.append((t, t + Tt, "move", f"{wp.label or k}-transit",
                                      (p0, unit, fp, psi0, math.copysign(1.0, dpsi), fy)))
                t += Tt
            psi1 = psi0 + dpsi
            self.segments.append((t, t + wp.hold, "hold", wp.label or f"hold{k}", (p1, psi1)))
            t += wp.hold
            p0, psi0 = p1, psi1
        self.end = t

    def phase_labels(self):
        return [seg[3] for seg in self.segments]

    def at(self, t):
        for i, (t0, t1, kind, label, data) in enumerate(self.segments):
            if t < t1 or i == len(self.segments) - 1:
                break
        tau = t - t0
        if kind == "hold":
            p1, psi1 = data
            return RefSample(p1.copy(), np.zeros(3), np.zeros(3), psi1, 0.0, i, label)
        p0, unit, fp, psi0, sgn, fy = data
        s, v, a = fp(tau)
        ys, yv, _ = fy(tau)
        return RefSample(p0 + s * unit, v * unit, a * unit, psi0 + sgn * ys, sgn * yv, i, label)


# ------------------------------------------------------------------ presets

def paper_hover(seed=42, hold=60.0, gust_start=20.0, gust_length=20.0, gust_speed=3.0,
                land=True):
    """Takeoff from a 0.20 m platform, climb to 0.65 m, turn to 273.5 deg,
    hover under a 3 m/s gust normal to the heading, then land."""
    h0, h1 = 0.20, 0.65
    start = (0.0, 0.0, -h0)
    wps = [Waypoint((0.0, 0.0, -h1), 0.0, 1.0, "climb"),
           Waypoint((0.0, 0.0, -h1), MISSION_HEADING, hold, "hover")]
    if land:
        wps.append(Waypoint((0.0, 0.0, -(h0 - 0.10)), MISSION_HEADING, 0.0, "land"))
    ref = Reference(Scenario("tmp", start, 0.0, tuple(wps)))
    hover_start = next(seg[0] for seg in ref.segments if seg[3] == "hover" and seg[2] == "hold")
    gust_dir = (math.cos(MISSION_HEADING + math.pi / 2), math.sin(MISSION_HEADING + math.pi / 2), 0.0)
    wind = (WindSegment(hover_start + gust_start, gust_dir, gust_speed, 1.0),
            WindSegment(hover_start + gust_start + gust_length, gust_dir, 0.0, 1.0))
    return Scenario("paper_hover", start, 0.0, tuple(wps), wind, NoiseSpec(), seed=seed,
                    platform_height=h0 if land else None)


def hover_hold(seed=0, duration=10.0, height=0.65):
    """Start on the reference and hold, no wind."""
    p = (0.0, 0.0, -height)
    return Scenario("hover_hold", p, 0.0, (Waypoint(p, 0.0, duration, "hover"),),
                    seed=seed, settle=0.0)


PRESETS = {"paper_hover": paper_hover, "hover_hold": hover_hold}


# ------------------------------------------------------------------ log

_STATE_UNITS = ("m", "m", "m", "m/s", "m/s", "m/s", "rad", "rad", "rad",
                "rad/s", "rad/s", "rad/s", "rad", "rad", "1")

COLUMNS = (
    [("t", "s")]
    + [(n, u) for n, u in zip(dyn.STATE_NAMES, _STATE_UNITS)]
    + [("x_meas", "m"), ("y_meas", "m"), ("z_meas", "m"),
       ("vn_meas", "m/s"), ("ve_meas", "m/s"), ("vd_meas", "m/s"),
       ("phi_meas", "rad"), ("theta_meas", "rad"), ("psi_meas", "rad")]
    + [("x_ref", "m"), ("y_ref", "m"), ("z_ref", "m"), ("psi_ref", "rad")]
    + [("phi_out", "rad"), ("theta_out", "rad"), ("psi_out", "rad"), ("col_out", "1")]
    + [("d_lat", "1"), ("d_lon", "1"), ("d_ped", "1"), ("d_col", "1")]
    + [("eps_px", "m"), ("eps_py", "m"), ("eps_pz", "m"),
       ("eps_vx", "m/s"), ("eps_vy", "m/s"), ("eps_vz", "m/s")]
    + [("e_x", "1"), ("e_y", "1"), ("e_z", "1")]
    + [("margin_x", "m/s"), ("margin_y", "m/s"), ("margin_z", "m/s")]
    + [("wind_n", "m/s"), ("wind_e", "m/s"), ("wind_d", "m/s")]
    + [("flag_saturation", "1"), ("flag_clamp", "1"), ("flag_violation", "1"),
       ("flag_touchdown", "1"), ("phase", "1")]
)
COLUMN_NAMES = tuple(c[0] for c in COLUMNS)
_COL = {name: i for i, name in enumerate(COLUMN_NAMES)}


@dataclass
class FlightLog:
    scenario: str
    data: np.ndarray
    phases: list
    status: str = "completed"
    error: str = ""

    def __getitem__(self, name):
        return self.data[:, _COL[name]]

    def __len__(self):
        return self.data.shape[0]

    @property
    def completed(self):
        return self.status == "completed"

    def to_csv(self, path):
        header = ",".join(f"{n} [{u}]" for n, u in COLUMNS)
        np.savetxt(path, self.data, fmt="%.9g", delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path, scenario=""):
        with open(path) as fh:
            header = next(csv.reader(fh))
        names = tuple(h.split(" [")[0] for h in header)
        if names != COLUMN_NAMES:
            raise ValueError(f"{path}: unexpected column layout")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(scenario, data, [])

    def write_figure_bundles(self, directory):
        """Per-figure CSVs: attitudes, rates, controller outputs, 3-D path."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        bundles = {
            "attitude.csv": ["t", "phi", "theta", "psi", "phi_out", "theta_out", "psi_ref"],
            "rates.csv": ["t", "p", "q", "r"],
            "controller_outputs.csv": ["t", "phi_out", "theta_out", "psi_out", "col_out"],
            "path3d.csv": ["t", "x", "y", "z", "x_ref", "y_ref", "z_ref"],
        }
        for fname, cols in bundles.items():
            header = ",".join(f"{c} [{dict(COLUMNS)[c]}]" for c in cols)
            block = np.column_stack([self[c] for c in cols])
            np.savetxt(out / fname, block, fmt="%.9g", delimiter=",", header=header,
                       comments="")
        return sorted(bundles)

    def phase_mask(self, label):
        idx = [i for i, lab in enumerate(self.phases) if lab == label]
        return np.isin(self["phase"].astype(int), idx)


# ------------------------------------------------------------------ runner

def collective_scale(params, trim, ctrl):
    """Collective increment per unit of outer-loop z command."""
    h = 1e-6
    x = trim.x_trim
    Tp, _ = dyn.induced_velocity_and_thrust(x, trim.u_trim.col + h, (0, 0, 0), params)
    Tm, _ = dyn.induced_velocity_and_thrust(x, trim.u_trim.col - h, (0, 0, 0), params)
    dT = (Tp - Tm) / (2 * h)
    return ctrl.collective_gain * params.m * params.g / (ctrl.hover_bias * dT)


def initial_state(scenario, trim):
    x = np.array(trim.x_trim, dtype=float)
    x[dyn.POS] = scenario.initial_position
    x[dyn.IPSI] = scenario.initial_heading
    return x


def run_scenario(scenario, params, ctrl, gains, trim):
    """Fly ``scenario`` in closed loop and return its :class:`FlightLog`.

    Errors raised during the run (envelope violation, gimbal lock,
    integrator blow-up) end the run; the log is kept through the failing
    step and its ``status`` records the error.
    """
    sc = scenario.validate()
    ref = Reference(sc)
    duration = sc.duration if sc.duration is not None else ref.end + sc.settle
    n_steps = int(round(duration / sc.dt))
    ratio = int(round(sc.control_dt / sc.dt))
    rng = np.random.default_rng(sc.seed)
    noise = sc.noise
    kappa = collective_scale(params, trim, ctrl)
    bias = ctrl.hover_bias
    xt = np.asarray(trim.x_trim, float)
    lo, hi = params.input_min, params.input_max

    data = np.zeros((n_steps + 1, len(COLUMNS)))
    x = initial_state(sc, trim)
    loop = OuterLoop(ctrl)
    step_info = None
    landed = False
    u = trim.u_trim
    pos_m = vel_m = None
    status, error = "completed", ""
    k = 0
    for k in range(n_steps + 1):
        t = k * sc.dt
        r = ref.at(t)
        row = data[k]
        violation = False
        try:
            euler_m = x[dyn.EUL] + rng.normal(0.0, noise.attitude, 3)
            if not landed and k % ratio == 0:
                Rb = dyn.rotation_matrix(x[dyn.EUL])
                pos_m = x[dyn.POS] + rng.normal(0.0, noise.position, 3)
                vel_m = Rb.T @ x[dyn.VEL] + rng.normal(0.0, noise.velocity, 3)
                step_info = loop.update(t, pos_m, vel_m, r.pos, r.vel, r.psi, euler_m[2],
                                        sc.control_dt)
            elif pos_m is None:
                pos_m, vel_m = x[dyn.POS].copy(), np.zeros(3)
            if not landed:
                cmd = step_info.r_out
                x_dev = np.array([
                    euler_m[0] - xt[dyn.IPHI], euler_m[1] - xt[dyn.ITHETA],
                    x[dyn.IP], x[dyn.IQ],
                    x[dyn.IAS] - xt[dyn.IAS], x[dyn.IBS] - xt[dyn.IBS],
                    x[dyn.IR], x[dyn.GYRO] - xt[dyn.GYRO],
                    dyn.wrap_angle(euler_m[2] - cmd.psi)])
                r_dev = np.array([cmd.phi, cmd.theta, 0.0, kappa * (cmd.col + bias)])
                u = attitude_control(x_dev, r_dev, gains)
        except EnvelopeViolationError as exc:
            violation = True
            status, error = "aborted", f"{type(exc).__name__}: {exc}"
        except HelictlError as exc:
            status, error = "aborted", f"{type(exc).__name__}: {exc}"

        wind_ned = wind_at(sc.wind, t)
        row[0] = t
        row[1:16] = x
        row[16:19] = pos_m
        row[19:22] = vel_m
        row[22:25] = euler_m
        row[25:28] = r.pos
        row[28] = r.psi
        if step_info is not None:
            row[29:33] = step_info.r_out
            row[37:40] = step_info.eps_p
            row[40:43] = step_info.eps_v
            row[43:46] = step_info.e
            row[46:49] = step_info.margins
        row[33:37] = u
        row[49:52] = wind_ned
        row[52] = any(v <= lo or v >= hi for v in u)
        row[53] = bool(step_info is not None and step_info.clamped)
        row[54] = violation
        row[55] = landed
        row[56] = r.phase
        if status != "completed":
            break
        if k == n_steps:
            break

        if not landed:
            try:
                wind_b = dyn.rotation_matrix(x[dyn.EUL]) @ wind_ned
                x = dyn.step(x, u, wind_b, params, sc.dt)
            except HelictlError as exc:
                status, error = "aborted", f"{type(exc).__name__}: {exc}"
                data = data[:k + 1]
                break
            if (sc.platform_height is not None and r.label.startswith("land")
                    and -x[2] <= sc.platform_height and r.vel[2] >= 0.0):
                landed = True
    else:
        k = n_steps
    data = data[:k + 1]
    return FlightLog(sc.name, data, ref.phase_labels(), status, error)


def prepare(params, ctrl, psi=0.0):
    """Trim, linear model and gains for hover: ``(trim, model, gains)``."""
    trim = find_trim(params, psi=psi)
    model = jacobians(trim, params, ctrl)
    return trim, model, synthesize(model, ctrl)


def _run_one(args):
    return run_scenario(*args)


def run_batch(scenarios, params, ctrl, gains, trim, jobs=1):
    """Run independent scenarios, in worker processes when ``jobs > 1``.

    Each scenario carries its own seed, so results do not depend on
    scheduling; logs come back in input order.
    """
    tasks = [(sc, params, ctrl, gains, trim) for sc in scenarios]
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))


# ------------------------------------------------------------------ metrics

@dataclass
class FlightMetrics:
    hover_rms: float
    heading_error_deg: float
    yaw_overshoot: float
    min_margin: float
    completed: bool
    steady_state_fraction: float = float("nan")


def flight_metrics(log, target_heading=None, settle=3.0, ctrl=None):
    """Hover RMS position error, settled heading error and yaw overshoot.

    The hover window is the ``hover`` hold phase; heading error is taken
    from ``settle`` seconds into it, against ``target_heading`` (default:
    the hover reference heading).  Overshoot is measured over the heading
    transition and the hold that follows, relative to the step size.  With
    ``ctrl`` given, also the fraction of hover samples after ``5 / c`` that
    sit inside the asymptotic error bounds (informational only).
    """
    hover = log.phase_mask("hover")
    t = log["t"]
    pos = np.column_stack([log["x"], log["y"], log["z"]])
    pref = np.column_stack([log["x_ref"], log["y_ref"], log["z_ref"]])
    err = np.linalg.norm(pos - pref, axis=1)
    hover_rms = float(np.sqrt(np.mean(err[hover] ** 2))) if hover.any() else float("nan")

    psi = log["psi"]
    if target_heading is None:
        target_heading = log["psi_ref"][hover][-1] if hover.any() else log["psi_ref"][-1]
    if hover.any():
        t_h0 = t[hover][0]
        late = hover & (t >= t_h0 + settle)
        head = np.abs([dyn.wrap_angle(v - target_heading) for v in psi[late]])
        heading_err = float(np.degrees(head.max())) if head.size else float("nan")
    else:
        heading_err = float("nan")

    psi0 = psi[0]
    step = dyn.wrap_angle(target_heading - psi0)
    window = log.phase_mask("hover-transit") | hover
    if step != 0 and window.any():
        first = np.argmax(window)
        progress = np.array([dyn.wrap_angle(v - psi0) for v in psi[first:][window[first:]]])
        progress *= math.copysign(1.0, step)
        overshoot = float(max(0.0, (progress.max() - abs(step)) / abs(step)))
    else:
        overshoot = 0.0

    flying = log["flag_touchdown"] == 0
    margins = np.column_stack([log["margin_x"], log["margin_y"], log["margin_z"]])[flying]
    ss = float("nan")
    if ctrl is not None and hover.any():
        env = PerformanceEnvelope.from_params(ctrl)
        late = hover & flying & (t > 5.0 / env.c.max())
        eps_p = np.column_stack([log["eps_px"], log["eps_py"], log["eps_pz"]])[late]
        eps_v = np.column_stack([log["eps_vx"], log["eps_vy"], log["eps_vz"]])[late]
        if eps_p.size:
            ok = np.all(steady_state_admissible(eps_p, eps_v, env), axis=1)
            ss = float(ok.mean())
    return FlightMetrics(hover_rms, heading_err, overshoot,
                         float(margins.min()) if margins.size else float("nan"),
                         log.completed, ss)

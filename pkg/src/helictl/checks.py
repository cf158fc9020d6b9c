"""Property suite run by ``helictl check``.

Each suite returns :class:`CheckResult` rows.  The oracles here are
independent of the code they check: closed forms, the matrix
exponential and scipy's Riccati solver.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import dynamics as dyn
from . import hinf
from .linearize import ATTITUDE_STATES, analytic_blocks, find_trim, full_jacobians, jacobians
from .outer_loop import attitude_command, command_direction
from .scenario import flight_metrics, paper_hover, run_scenario


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}: {self.name}: {self.detail}"


class _Suite:
    def __init__(self, name):
        self.name = name
        self.rows = []
        self.t0 = time.perf_counter()

    def add(self, name, passed, detail):
        self.rows.append(CheckResult(self.name, name, bool(passed), detail))

    def finish(self, budget):
        dt = time.perf_counter() - self.t0
        self.add("runtime", dt < budget, f"{dt:.2f} s (budget {budget:g} s)")
        for r in self.rows:
            r.seconds = dt
        return self.rows


# ------------------------------------------------------------------ suites

def kinematics(n=10_000, seed=0):
    s = _Suite("kinematics")
    rng = np.random.default_rng(seed)
    eul = np.column_stack([rng.uniform(-math.pi, math.pi, n),
                           rng.uniform(-1.5, 1.5, n),
                           rng.uniform(-math.pi, math.pi, n)])
    orth = trip = 0.0
    I = np.eye(3)
    for e in eul:
        Rm = dyn.rotation_matrix(e)
        orth = max(orth, np.abs(Rm.T @ Rm - I).max())
        trip = max(trip, np.abs(dyn.euler_rate_matrix(e) @ dyn.body_rate_matrix(e) - I).max())
    s.add("orthonormality", orth < 1e-12, f"max |R'R - I| = {orth:.2e}")
    s.add("euler-rate round trip", trip < 1e-12, f"max error = {trip:.2e}")
    return s.finish(1.0)


def rotor(params):
    s = _Suite("rotor")
    x = np.zeros(dyn.NX)
    trim = find_trim(params)
    worst = 0.0
    for k in range(9):
        wind = (0.0, 0.0, 0.0) if k == 0 else (3 * math.cos(k * math.pi / 4),
                                               3 * math.sin(k * math.pi / 4), 0.0)
        T, v = dyn.induced_velocity_and_thrust(trim.x_trim, trim.u_trim.col, wind, params)
        Vb = np.asarray(trim.x_trim[dyn.VEL]) - wind
        res = dyn.rotor_residual(T, v, Vb, params)
        worst = max(worst, res)
    s.add("fixed-point residual (hover + 8 winds)", worst < 1e-9, f"max residual = {worst:.2e}")
    T, v = dyn.induced_velocity_and_thrust(x, trim.u_trim.col, (0, 0, 0), params)
    v_ref = math.sqrt(T / (2 * params.rho * params.disk_area))
    rel = abs(v - v_ref) / v_ref
    s.add("hover momentum theory", rel < 1e-6, f"v_im = {v:.9f}, closed form {v_ref:.9f}")
    return s.finish(1.0)


def trim_suite(params):
    s = _Suite("trim")
    tr = find_trim(params)
    s.add("residual", tr.residual < 1e-8, f"|f| = {tr.residual:.2e}")
    W = params.m * params.g / (math.cos(tr.x_trim[dyn.IAS]) * math.cos(tr.x_trim[dyn.IBS]))
    rel = abs(tr.thrust - W) / W
    s.add("thrust vs weight", rel < 0.01, f"T = {tr.thrust:.4f} N, target {W:.4f} N ({rel:.2%})")
    return s.finish(5.0), tr


def linearization(params, trim, seed=0):
    s = _Suite("linearize")
    A, B, _ = full_jacobians(params, trim.x_trim, trim.u_trim)
    idx = list(ATTITUDE_STATES)
    row_of = {"a_s": dyn.IAS, "b_s": dyn.IBS, "gyro": dyn.GYRO}
    worst = 0.0
    for name, (a_row, b_row) in analytic_blocks(params).items():
        fd_a = A[row_of[name], idx]
        fd_b = B[row_of[name]]
        scale = max(np.abs(a_row).max(), np.abs(b_row).max())
        worst = max(worst, np.abs(fd_a - a_row).max() / scale, np.abs(fd_b - b_row).max() / scale)
    s.add("analytic flapping/gyro blocks", worst < 1e-6, f"max relative error = {worst:.2e}")
    ratios = _prediction_ratios(params, trim, A, B, seed)
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    s.add("first-order error O(eps^2)", ok,
          "halving ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    return s.finish(10.0)


def _prediction_ratios(params, trim, A, B, seed=0, n_dirs=3, eps=2e-2):
    # perturbations span the attitude states and inputs: the printed rotor
    # torque has |.| terms in the vertical airspeed that are kinked at hover
    rng = np.random.default_rng(seed)
    x0 = trim.x_trim
    u0 = np.asarray(trim.u_trim, float)
    f0 = dyn.state_derivative(x0, u0, (0, 0, 0), params)
    ratios = []
    for _ in range(n_dirs):
        dx = np.zeros(dyn.NX)
        dx[list(ATTITUDE_STATES)] = rng.normal(size=9)
        du = rng.normal(size=4)
        nrm = math.sqrt(dx @ dx + du @ du)
        dx, du = dx / nrm, du / nrm
        errs = []
        for e in (eps, eps / 2):
            f = dyn.state_derivative(x0 + e * dx, u0 + e * du, (0, 0, 0), params)
            errs.append(np.linalg.norm(f - f0 - e * (A @ dx + B @ du)))
        ratios.append(errs[0] / errs[1])
    return ratios


def riccati(params, ctrl, trim, seed=0):
    s = _Suite("riccati")
    one = np.ones((1, 1))
    P = hinf.solve_game_riccati(-one, one, np.zeros((1, 1)), one, one, 1.0)
    F = -(one.T @ one + one.T @ P)
    err = max(abs(P[0, 0]), abs(F[0, 0] + 1), abs((-one + one @ F)[0, 0] + 2))
    s.add("scalar oracle", err <= 1e-12, f"P = {float(P[0, 0])!r}, F = {float(F[0, 0])!r}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        A, B, C, D = _random_system(rng)
        P_ours = hinf.solve_game_riccati(A, B, np.zeros((3, 1)), C, D, 1.0)
        P_ref = sla.solve_continuous_are(A, B, C.T @ C, D.T @ D, s=C.T @ D)
        worst = max(worst, np.abs(P_ours - P_ref).max() / (1 + np.abs(P_ref).max()))
    s.add("E=0 vs independent CARE solver", worst < 1e-8, f"max relative diff = {worst:.2e}")
    model = jacobians(trim, params, ctrl)
    g = hinf.select_gamma(model, ctrl.gamma_margin, ctrl.gamma_floor, ctrl.gamma_max)
    P = hinf.solve_game_riccati(model.A, model.B_fb, model.E, model.C, model.D, g)
    res = np.linalg.norm(hinf.riccati_residual(P, model.A, model.B_fb, model.E, model.C,
                                               model.D, g))
    bound = 1e-8 * (1 + np.linalg.norm(P))
    s.add("helicopter residual", res < bound, f"|res| = {res:.2e} < {bound:.2e}")
    return s.finish(5.0), model


def _random_system(rng, n=3, m=1):
    A = rng.normal(size=(n, n))
    A -= (np.abs(np.linalg.eigvals(A).real).max() + 0.5) * np.eye(n)
    B = rng.normal(size=(n, m))
    C = np.vstack([rng.normal(size=(n, n)), np.zeros((m, n))])
    D = np.vstack([np.zeros((n, m)), np.eye(m)])
    return A, B, C, D


def certificate(model, ctrl, seed=0):
    s = _Suite("hinf")
    gains = hinf.synthesize(model, ctrl)
    norm, cert = hinf.verify_hinf_norm(model, gains)
    s.add("frequency-sweep certificate", cert.passed, str(cert))
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(20):
        A, B, C, D = _random_system(rng)
        E = rng.normal(size=(3, 1))
        g_inf = hinf.gamma_infimum(A, B, E, C, D)
        for factor in (1.01, 1.5, 3.0, 10.0, 100.0):
            if not hinf.is_feasible(A, B, E, C, D, g_inf * factor):
                bad += 1
    s.add("bisection monotone feasibility", bad == 0, f"{bad} infeasible points above gamma*")
    return s.finish(30.0), gains


def outer_round_trip(n=10_000, seed=0):
    s = _Suite("outer_loop")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        u = rng.normal(size=3)
        u[2] = -abs(u[2]) - 0.1
        u[:2] *= 0.3
        nrm = np.linalg.norm(u)
        cmd, clamped = attitude_command(u, 0.0, limit=math.pi / 2)
        worst = max(worst, np.abs(command_direction(cmd.phi, cmd.theta) - u / nrm).max())
    s.add("attitude-command round trip", worst < 1e-10, f"max error = {worst:.2e}")
    return s.finish(5.0)


def scenario_suite(params, ctrl, gains, trim, seed=42):
    s = _Suite("scenario")
    sc = paper_hover(seed=seed)
    t0 = time.perf_counter()
    log = run_scenario(sc, params, ctrl, gains, trim)
    elapsed = time.perf_counter() - t0
    m = flight_metrics(log)
    s.add("run completes", log.completed, log.status + (f" ({log.error})" if log.error else ""))
    s.add("envelope never violated", m.min_margin > 0 and not log["flag_violation"].any(),
          f"min margin = {m.min_margin:.4f}")
    flying = log["flag_touchdown"] == 0
    e = np.column_stack([log["e_x"], log["e_y"], log["e_z"]])[flying]
    s.add("atanh domain", np.abs(e).max() < 1.0, f"max |e| = {np.abs(e).max():.4f}")
    s.add("hover RMS < 0.15 m", m.hover_rms < 0.15, f"{m.hover_rms:.4f} m")
    s.add("heading within 2 deg", m.heading_error_deg < 2.0, f"{m.heading_error_deg:.3f} deg")
    s.add("yaw overshoot < 20%", m.yaw_overshoot < 0.20, f"{m.yaw_overshoot:.2%}")
    s.add("single run < 60 s", elapsed < 60.0, f"{elapsed:.2f} s")
    log2 = run_scenario(sc, params, ctrl, gains, trim)
    same = log.data.shape == log2.data.shape and log.data.tobytes() == log2.data.tobytes()
    s.add("bitwise determinism", same, "identical" if same else "logs differ")
    return s.finish(120.0), log


def integrator(params, seed=0):
    s = _Suite("integrator")
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(6, 6))
    M -= 0.5 * np.trace(M) / 6 * np.eye(6)
    x0 = rng.normal(size=6)
    T = 1.0
    exact = sla.expm(M * T) @ x0
    errs = []
    for n in (20, 40, 80):
        x = x0.copy()
        for _ in range(n):
            x = dyn.rk4_step(lambda v: M @ v, x, T / n)
        errs.append(np.linalg.norm(x - exact))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    s.add("convergence order", all(3.7 <= r <= 4.3 for r in rates),
          "observed " + ", ".join(f"{r:.3f}" for r in rates))
    x = np.zeros(dyn.NX)
    x[dyn.VEL] = (1.0, -0.5, 0.3)
    x[dyn.RATE] = (2.0, 0.1, 0.1)
    e0 = dyn.kinetic_energy(x, params)
    for _ in range(5000):
        x = dyn.step(x, (0, 0, 0, 0), (0, 0, 0), params, 0.002, aero=False, gravity=False)
    drift = abs(dyn.kinetic_energy(x, params) - e0) / e0
    s.add("zero-force energy drift (10 s)", drift < 1e-9, f"{drift:.2e}")
    return s.finish(5.0)


def run_all(params, ctrl, scenario=True):
    """Run every suite; returns the list of results."""
    rows = []
    rows += kinematics()
    rows += rotor(params)
    r, trim = trim_suite(params)
    rows += r
    rows += linearization(params, trim)
    r, model = riccati(params, ctrl, trim)
    rows += r
    r, gains = certificate(model, ctrl)
    rows += r
    rows += outer_round_trip()
    if scenario:
        rows += scenario_suite(params, ctrl, gains, trim)[0]
    rows += integrator(params)
    return rows

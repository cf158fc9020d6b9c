"""Acceptance criteria, one test each.

Every test times the package computation, compares it with a reference
from ``oracles`` (or a closed form written out here) and records a
one-line verdict; the lines are printed at the end of the session.
"""

import math
import time

import numpy as np

from helictl import dynamics as dyn
from helictl import hinf
from helictl.linearize import ATTITUDE_STATES, analytic_blocks, find_trim
from helictl.outer_loop import attitude_command, command_direction
from helictl.scenario import Reference, paper_hover, run_scenario

from oracles import (euler_to_dcm, hamiltonian_care, hamiltonian_game_care,
                     hinf_norm_hamiltonian, lti_propagate, rotor_grid_bisect)

RESULTS = []


def record(number, title, checks, seconds, budget):
    """``checks`` is a list of ``(ok, detail)``; the runtime budget is appended."""
    checks = list(checks) + [(seconds < budget, f"runtime {seconds:.2f} s < {budget:g} s")]
    ok = all(c[0] for c in checks)
    line = (f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): "
            + "; ".join(d for _, d in checks))
    RESULTS.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1

def test_criterion_1_kinematics():
    rng = np.random.default_rng(101)
    n = 10_000
    eul = np.column_stack([rng.uniform(-math.pi, math.pi, n), rng.uniform(-1.55, 1.55, n),
                           rng.uniform(-math.pi, math.pi, n)])
    I = np.eye(3)
    t0 = time.perf_counter()
    Rs = [dyn.rotation_matrix(e) for e in eul]
    trip = max(np.abs(dyn.euler_rate_matrix(e) @ dyn.body_rate_matrix(e) - I).max() for e in eul)
    orth = max(np.abs(R.T @ R - I).max() for R in Rs)
    elapsed = time.perf_counter() - t0
    dcm = max(np.abs(R - euler_to_dcm(*e)).max() for R, e in zip(Rs[:1000], eul))
    record(1, "kinematics", [
        (orth < 1e-12, f"max |R'R - I| = {orth:.1e}"),
        (trip < 1e-12, f"euler-rate round trip {trip:.1e}"),
        (dcm < 1e-12, f"vs elementary-rotation oracle {dcm:.1e}"),
    ], elapsed, 1.0)


# ---------------------------------------------------------------- 2

def test_criterion_2_rotor(heli, trim):
    x, col = trim.x_trim, trim.u_trim.col
    # wind in body axes
    winds = [(0.0, 0.0, 0.0)] + [(3 * math.cos(k * math.pi / 4), 3 * math.sin(k * math.pi / 4), 0.0)
                                 for k in range(8)]
    t0 = time.perf_counter()
    solved = [dyn.induced_velocity_and_thrust(x, col, w, heli) for w in winds]
    elapsed = time.perf_counter() - t0
    # residual of the two fixed-point equations, written out independently
    K_T = heli.rho * heli.omega * heli.R**2 * heli.lift_slope * heli.n_blades * heli.chord / 4
    area = math.pi * heli.R**2
    worst = 0.0
    for (T, v), w in zip(solved, winds):
        ub, vb, wb = np.asarray(x[dyn.VEL]) - w
        w_blade = (wb + x[dyn.IAS] * ub - x[dyn.IBS] * vb
                   + 2 / 3 * heli.omega * heli.R * heli.k_col * col)
        vh2 = ub**2 + vb**2 + wb * (wb - 2 * v)
        v2 = math.sqrt(vh2**2 / 4 + (T / (2 * heli.rho * area))**2) - vh2 / 2
        worst = max(worst, abs(T - K_T * (w_blade - v)) / T, abs(v * v - v2) / v2)
    T0, v0 = dyn.induced_velocity_and_thrust(np.zeros(dyn.NX), col, (0, 0, 0), heli)
    mt = abs(v0 - math.sqrt(T0 / (2 * heli.rho * area))) / v0
    lateral = solved[3]
    Tg, vg = rotor_grid_bisect(heli, *(np.asarray(x[dyn.VEL]) - winds[3]), x[dyn.IAS],
                               x[dyn.IBS], col)
    grid = max(abs(lateral[0] - Tg) / Tg, abs(lateral[1] - vg) / vg)
    record(2, "rotor fixed point", [
        (worst < 1e-9, f"max residual over hover + 8 winds {worst:.1e}"),
        (mt < 1e-6, f"hover vs momentum theory {mt:.1e}"),
        (grid < 1e-6, f"3 m/s lateral wind vs grid-bisection oracle {grid:.1e}"),
    ], elapsed, 1.0)


# ---------------------------------------------------------------- 3

def test_criterion_3_trim(heli):
    t0 = time.perf_counter()
    tr = find_trim(heli)
    elapsed = time.perf_counter() - t0
    f = dyn.state_derivative(tr.x_trim, np.asarray(tr.u_trim, float), (0, 0, 0), heli)
    res = np.linalg.norm(f)
    weight = 7.6 * 9.81
    target = weight / (math.cos(tr.x_trim[dyn.IAS]) * math.cos(tr.x_trim[dyn.IBS]))
    rel = abs(tr.thrust - target) / target
    record(3, "trim", [
        (res < 1e-8, f"|f(x, u)| = {res:.1e}"),
        (abs(weight - 74.556) < 1e-9, f"weight {weight:.3f} N"),
        (rel < 0.01, f"thrust {tr.thrust:.3f} N vs {target:.3f} N ({rel:.2%})"),
    ], elapsed, 5.0)


# ---------------------------------------------------------------- 4

def _central_jacobian(heli, x0, u0, h=1e-6):
    f = lambda x, u: dyn.state_derivative(x, u, (0, 0, 0), heli)
    A = np.zeros((dyn.NX, dyn.NX))
    B = np.zeros((dyn.NX, 4))
    for j in range(dyn.NX):
        d = np.zeros(dyn.NX); d[j] = h
        A[:, j] = (f(x0 + d, u0) - f(x0 - d, u0)) / (2 * h)
    for j in range(4):
        d = np.zeros(4); d[j] = h
        B[:, j] = (f(x0, u0 + d) - f(x0, u0 - d)) / (2 * h)
    return A, B


def test_criterion_4_linearization(heli, ctrl, trim):
    from helictl.linearize import jacobians
    x0, u0 = np.asarray(trim.x_trim), np.asarray(trim.u_trim, float)
    t0 = time.perf_counter()
    blocks = analytic_blocks(heli)
    model = jacobians(trim, heli, ctrl)
    elapsed = time.perf_counter() - t0
    A_fd, B_fd = _central_jacobian(heli, x0, u0)
    idx = list(ATTITUDE_STATES)
    rows = {"a_s": dyn.IAS, "b_s": dyn.IBS, "gyro": dyn.GYRO}
    worst = 0.0
    for name, (a, b) in blocks.items():
        scale = max(np.abs(a).max(), np.abs(b).max())
        worst = max(worst, np.abs(A_fd[rows[name], idx] - a).max() / scale,
                    np.abs(B_fd[rows[name]] - b).max() / scale)
    # first-order prediction error of the full-state Jacobian under halving
    A, B = model.A_full, model.B_full
    f0 = dyn.state_derivative(x0, u0, (0, 0, 0), heli)
    rng = np.random.default_rng(5)
    ratios = []
    for _ in range(3):
        dx = np.zeros(dyn.NX)
        dx[idx] = rng.normal(size=len(idx))
        du = rng.normal(size=4)
        s = math.sqrt(dx @ dx + du @ du)
        dx, du = dx / s, du / s
        errs = [np.linalg.norm(dyn.state_derivative(x0 + e * dx, u0 + e * du, (0, 0, 0), heli)
                               - f0 - e * (A @ dx + B @ du)) for e in (2e-2, 1e-2)]
        ratios.append(errs[0] / errs[1])
    record(4, "linearization", [
        (worst < 1e-6, f"analytic blocks vs central differences {worst:.1e}"),
        (all(3.5 <= r <= 4.5 for r in ratios),
         "halving ratios " + ", ".join(f"{r:.3f}" for r in ratios)),
    ], elapsed, 10.0)


# ---------------------------------------------------------------- 5

def _random_plant(rng, n=3):
    A = rng.normal(size=(n, n))
    A -= (np.abs(np.linalg.eigvals(A).real).max() + 0.5) * np.eye(n)
    B = rng.normal(size=(n, 1))
    C = np.vstack([rng.normal(size=(n, n)), np.zeros((1, n))])
    D = np.vstack([np.zeros((n, 1)), np.eye(1)])
    return A, B, C, D


def test_criterion_5_riccati(model):
    one = np.ones((1, 1))
    rng = np.random.default_rng(2024)
    plants = [_random_plant(rng) for _ in range(20)]
    A, B_fb, E, C, D = model.A, model.B_fb, model.E, model.C, model.D
    t0 = time.perf_counter()
    P1 = hinf.solve_game_riccati(-one, one, np.zeros((1, 1)), one, one, 1.0)
    Ps = [hinf.solve_game_riccati(a, b, np.zeros((3, 1)), c, d, 1.0) for a, b, c, d in plants]
    g = hinf.select_gamma(model)
    P = hinf.solve_game_riccati(A, B_fb, E, C, D, g)
    elapsed = time.perf_counter() - t0
    F1 = -(one.T @ one + one.T @ P1)
    scalar = max(abs(P1[0, 0]), abs(F1[0, 0] + 1), abs(-1 + F1[0, 0] + 2))
    eq = 0.0
    for (a, b, c, d), Pk in zip(plants, Ps):
        ref = hamiltonian_care(a, b, c.T @ c, d.T @ d, c.T @ d)
        eq = max(eq, np.abs(Pk - ref).max() / (1 + np.abs(ref).max()))
    # residual written out: A'P + PA + C'C - (PB + C'D) R^-1 (B'P + D'C) + PEE'P/g^2
    R = D.T @ D
    K = P @ B_fb + C.T @ D
    res = np.linalg.norm(A.T @ P + P @ A + C.T @ C - K @ np.linalg.solve(R, K.T)
                         + P @ E @ E.T @ P / g**2)
    bound = 1e-8 * (1 + np.linalg.norm(P))
    record(5, "riccati", [
        (scalar <= 1e-12, f"scalar oracle error {scalar:.1e}"),
        (eq < 1e-8, f"E=0 vs Hamiltonian oracle on 20 systems {eq:.1e}"),
        (res < bound, f"helicopter residual {res:.1e} < {bound:.1e}"),
    ], elapsed, 5.0)


# ---------------------------------------------------------------- 6

def test_criterion_6_hinf_certificate(model, ctrl):
    rng = np.random.default_rng(77)
    plants = [(*_random_plant(rng), rng.normal(size=(3, 1))) for _ in range(20)]
    t0 = time.perf_counter()
    gains = hinf.synthesize(model, ctrl)
    stars, monotone = [], 0
    for A, B, C, D, E in plants:
        g = hinf.gamma_infimum(A, B, E, C, D)
        stars.append(g)
        for factor in (1.01, 1.5, 3.0, 10.0, 100.0):
            monotone += not hinf.is_feasible(A, B, E, C, D, g * factor)
    elapsed = time.perf_counter() - t0
    Acl = model.A + model.B @ gains.F
    Ch = model.C + model.D @ gains.F[model.fb]
    norm = hinf_norm_hamiltonian(Acl, model.E, Ch)
    # the Hamiltonian oracle brackets each gamma*: infeasible just below, feasible just above
    disagree = 0
    for (A, B, C, D, E), g in zip(plants, stars):
        below = hamiltonian_game_care(A, B, E, C, D, g / 1.01)
        above = hamiltonian_game_care(A, B, E, C, D, g * 1.01)
        ok_above = above is not None and np.linalg.eigvalsh(above).min() > -1e-9
        ok_below = below is None or np.linalg.eigvalsh(below).min() < -1e-9 or \
            np.linalg.eigvals(A + (E @ E.T / (g / 1.01)**2 - B @ B.T) @ below).real.max() >= 0
        disagree += not (ok_above and ok_below)
    record(6, "H-infinity certificate", [
        (norm <= gains.gamma * (1 + 1e-3),
         f"closed-loop norm {norm:.6g} (Hamiltonian oracle) vs gamma {gains.gamma:.6g}"),
        (monotone == 0, f"{monotone} infeasible points above gamma* on 20 systems"),
        (disagree == 0, f"{disagree} oracle disagreements at gamma*/1.01, gamma*x1.01"),
    ], elapsed, 30.0)


# ---------------------------------------------------------------- 7

def test_criterion_7_outer_loop(mission_log, ctrl):
    rng = np.random.default_rng(9)
    us = rng.normal(size=(10_000, 3))
    us[:, 2] = -np.abs(us[:, 2]) - 1e-3
    t0 = time.perf_counter()
    cmds = [attitude_command(u, 0.0, limit=math.pi / 2)[0] for u in us]
    dirs = np.array([command_direction(c.phi, c.theta) for c in cmds])
    elapsed = time.perf_counter() - t0
    trip = np.abs(dirs - us / np.linalg.norm(us, axis=1, keepdims=True)).max()
    # envelope recomputed from the logged errors
    log = mission_log
    flying = log["flag_touchdown"] == 0
    t = log["t"][flying]
    m = np.array([ctrl.m_x, ctrl.m_y, ctrl.m_z])
    tau0 = np.array([ctrl.tau0_x, ctrl.tau0_y, ctrl.tau0_z])
    tauinf = np.array([ctrl.tauinf_x, ctrl.tauinf_y, ctrl.tauinf_z])
    c = np.array([ctrl.c_x, ctrl.c_y, ctrl.c_z])
    tau = (tau0 - tauinf) * np.exp(-np.outer(t, c)) + tauinf
    s = (np.column_stack([log[f"eps_v{a}"] for a in "xyz"])
         + m * np.column_stack([log[f"eps_p{a}"] for a in "xyz"]))[flying]
    margin = (tau - np.abs(s)).min()
    e = np.abs(np.column_stack([log[f"e_{a}"] for a in "xyz"])[flying]).max()
    record(7, "outer loop", [
        (log.completed and margin > 0, f"min envelope margin {margin:.4f} m/s"),
        (e < 1, f"max |e| = {e:.4f}"),
        (trip < 1e-10, f"round trip over 1e4 commands {trip:.1e}"),
    ], elapsed, 5.0)


# ---------------------------------------------------------------- 8

def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def test_criterion_8_mission_flight(heli, ctrl, design, mission_log):
    trim, _, gains = design
    sc = paper_hover(seed=42)
    t0 = time.perf_counter()
    log = run_scenario(sc, heli, ctrl, gains, trim)
    elapsed = time.perf_counter() - t0
    labels = Reference(sc).phase_labels()
    phase = log["phase"].astype(int)
    hover = phase == labels.index("hover")
    turn = (phase == labels.index("hover-transit")) | hover
    t = log["t"]
    err = np.column_stack([log[k] - log[k + "_ref"] for k in "xyz"])
    rms = math.sqrt(np.mean(np.sum(err[hover] ** 2, axis=1)))
    target = math.radians(273.5)
    settled = hover & (t >= t[hover][0] + 3.0)
    heading = math.degrees(max(abs(_wrap(p - target)) for p in log["psi"][settled]))
    step = _wrap(target - log["psi"][0])
    progress = np.array([_wrap(p - log["psi"][0]) for p in log["psi"][turn]]) * np.sign(step)
    overshoot = max(0.0, progress.max() - abs(step)) / abs(step)
    same = log.data.tobytes() == mission_log.data.tobytes()
    start_ok = np.allclose(log.data[0, 1:4], [0, 0, -0.20])
    record(8, "mission flight", [
        (log.completed and start_ok, f"{log.status}, {len(log)} rows"),
        (rms < 0.15, f"hover RMS {rms:.4f} m < 0.15"),
        (heading < 2.0, f"heading error {heading:.3f} deg < 2"),
        (overshoot < 0.20, f"yaw overshoot {overshoot:.2%} < 20%"),
        (same, "identical seed reproduces the log bitwise" if same else "logs differ"),
    ], elapsed, 60.0)


# ---------------------------------------------------------------- 9

def test_criterion_9_integrator(heli):
    rng = np.random.default_rng(3)
    M = rng.normal(size=(6, 6))
    M -= np.trace(M) / 6 * np.eye(6)
    x0 = rng.normal(size=6)
    exact = lti_propagate(M, x0, 1.0)
    t0 = time.perf_counter()
    errs = []
    for n in (16, 32, 64):
        x = x0.copy()
        for _ in range(n):
            x = dyn.rk4_step(lambda v: M @ v, x, 1.0 / n)
        errs.append(np.linalg.norm(x - exact))
    s = np.zeros(dyn.NX)
    s[dyn.VEL] = (1.0, -0.5, 0.3)
    s[dyn.RATE] = (2.0, 0.1, 0.1)
    xs = [s]
    for _ in range(5000):
        xs.append(dyn.step(xs[-1], (0, 0, 0, 0), (0, 0, 0), heli, 0.002,
                           aero=False, gravity=False))
    elapsed = time.perf_counter() - t0
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    J = np.diag([heli.Jx, heli.Jy, heli.Jz])

    def energy(x):
        V, w = x[dyn.VEL], x[dyn.RATE]
        return 0.5 * heli.m * V @ V + 0.5 * w @ J @ w

    drift = abs(energy(xs[-1]) - energy(xs[0])) / energy(xs[0])
    record(9, "integrator", [
        (all(3.7 <= r <= 4.3 for r in rates),
         "convergence order " + ", ".join(f"{r:.3f}" for r in rates)),
        (drift < 1e-9, f"zero-force energy drift over 10 s {drift:.1e}"),
    ], elapsed, 5.0)

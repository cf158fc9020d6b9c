"""Nonlinear small-helicopter model and a fixed-step RK4 integrator.

The simulation state is a flat float array of length :data:`NX`::

    0-2    position (north, east, down) in the NED frame, m
    3-5    body velocity (u, v, w), m/s
    6-8    Euler angles (phi, theta, psi), rad, ZYX sequence
    9-11   body rates (p, q, r), rad/s
    12-13  tip-path-plane flapping (a_s, b_s), rad
    14     yaw-gyro integral path, in tail-rotor command units

The yaw gyro is a PI loop ``(k_p + k_i/s)(K_a*d_ped - r)``.  Its integral
path is carried as a state, so the tail-rotor command is
``d_ped' = k_p*(K_a*d_ped - r) + state[14]``; at trim the proportional
path vanishes and the state equals ``d_ped'``.

Wind is given along body axes and enters only through the relative air
velocity ``(u, v, w) - wind``.  Controls are ``(d_lat, d_lon, d_ped, d_col)``
and are clipped to ``[input_min, input_max]`` before use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import GimbalLockError, IntegrationBlowupError, RotorConvergenceError
from .params import derived_constants

NX = 15
POS = slice(0, 3)
VEL = slice(3, 6)
EUL = slice(6, 9)
RATE = slice(9, 12)
FLAP = slice(12, 14)
GYRO = 14
IPHI, ITHETA, IPSI = 6, 7, 8
IP, IQ, IR = 9, 10, 11
IAS, IBS = 12, 13

STATE_NAMES = ("x", "y", "z", "u", "v", "w", "phi", "theta", "psi",
               "p", "q", "r", "a_s", "b_s", "gyro")

GIMBAL_EPS = 1e-6
MAX_DT = 0.002

ROTOR_RELAX = 0.5
ROTOR_MAX_ITER = 200
ROTOR_TOL = 1e-14


class ControlInputs(NamedTuple):
    """Servo commands, dimensionless."""

    lat: float = 0.0
    lon: float = 0.0
    ped: float = 0.0
    col: float = 0.0

    def saturate(self, lo=-1.0, hi=1.0):
        return ControlInputs(*(min(max(v, lo), hi) for v in self))


@dataclass(frozen=True)
class VehicleState:
    """Structured view of the flat state vector."""

    p_ned: tuple = (0.0, 0.0, 0.0)
    V_b: tuple = (0.0, 0.0, 0.0)
    euler: tuple = (0.0, 0.0, 0.0)
    omega_b: tuple = (0.0, 0.0, 0.0)
    flap: tuple = (0.0, 0.0)
    gyro: float = 0.0

    def as_array(self):
        return np.array([*self.p_ned, *self.V_b, *self.euler, *self.omega_b,
                         *self.flap, self.gyro], dtype=float)

    @classmethod
    def from_array(cls, x):
        x = [float(v) for v in x]
        return cls(tuple(x[0:3]), tuple(x[3:6]), tuple(x[6:9]), tuple(x[9:12]),
                   tuple(x[12:14]), x[14])

    @property
    def altitude(self):
        return -self.p_ned[2]


# ------------------------------------------------------------------ kinematics

def rotation_matrix(euler):
    """NED-to-body direction cosine matrix for ZYX Euler angles."""
    phi, theta, psi = euler
    sf, cf = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(psi), math.cos(psi)
    return np.array([
        [ct * cp, ct * sp, -st],
        [sf * st * cp - cf * sp, sf * st * sp + cf * cp, sf * ct],
        [cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct],
    ])


def euler_rate_matrix(euler, eps=GIMBAL_EPS):
    """Matrix mapping body rates (p, q, r) to Euler-angle rates."""
    phi, theta = euler[0], euler[1]
    ct = math.cos(theta)
    if abs(ct) < eps:
        raise GimbalLockError(f"|cos(theta)| = {abs(ct):.3e} < {eps:g} at theta = {theta!r}")
    sf, cf = math.sin(phi), math.cos(phi)
    tt = math.tan(theta)
    return np.array([
        [1.0, tt * sf, tt * cf],
        [0.0, cf, -sf],
        [0.0, sf / ct, cf / ct],
    ])


def body_rate_matrix(euler):
    """Inverse of :func:`euler_rate_matrix`: Euler-angle rates to body rates."""
    phi, theta = euler[0], euler[1]
    sf, cf = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    return np.array([
        [1.0, 0.0, -st],
        [0.0, cf, sf * ct],
        [0.0, -sf, cf * ct],
    ])


def wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


# ------------------------------------------------------------------ main rotor

@lru_cache(maxsize=32)
def _coefficients(p):
    tau_mr, A_bs = derived_constants(p)
    return {
        "tau": tau_mr,
        "A_bs": A_bs,
        "K_T": p.rho * p.omega * p.R**2 * p.lift_slope * p.n_blades * p.chord / 4.0,
        "col": 2.0 / 3.0 * p.omega * p.R * p.k_col,
        "mom": 1.0 / (2.0 * p.rho * p.disk_area),
        "profile": p.cd0 * p.rho * p.R**2 * p.n_blades * p.chord / p.profile_divisor,
        "tip2": (p.omega * p.R) ** 2,
    }


def _induced_map(v, ub, vb, wb, w_blade, c):
    T = c["K_T"] * (w_blade - v)
    if T < 0.0:
        T = 0.0
    vhat2 = ub * ub + vb * vb + wb * (wb - 2.0 * v)
    tm = T * c["mom"]
    h = math.sqrt(max(0.25 * vhat2 * vhat2 + tm * tm, 0.0)) - 0.5 * vhat2
    return T, h


def rotor_residual(T, v_im, V_bar, params):
    """Relative residual of the induced-velocity equation at (T, v_im).

    The residual is ``v^2 - (sqrt(vhat^4/4 + (T/(2 rho pi R^2))^2) - vhat^2/2)``
    with ``vhat^2 = u^2 + v^2 + w(w - 2 v_im)``, scaled by the larger of the
    two sides.
    """
    ub, vb, wb = V_bar
    vhat2 = ub * ub + vb * vb + wb * (wb - 2.0 * v_im)
    tm = T / (2.0 * params.rho * params.disk_area)
    h = math.sqrt(max(0.25 * vhat2 * vhat2 + tm * tm, 0.0)) - 0.5 * vhat2
    scale = max(v_im * v_im, abs(h), 1e-300)
    return abs(v_im * v_im - h) / scale if (v_im or h) else 0.0


def _solve_rotor(ub, vb, wb, a_s, b_s, d_col, p, v_guess=None):
    c = _coefficients(p)
    w_blade = wb + a_s * ub - b_s * vb + c["col"] * d_col
    if w_blade <= 0.0:
        # no lift at zero induced flow, and v = 0 then solves both equations
        return 0.0, 0.0
    v = p.v_im0 if v_guess is None else v_guess
    if not v >= 0.0:
        v = 0.0
    for _ in range(ROTOR_MAX_ITER):
        _, h = _induced_map(v, ub, vb, wb, w_blade, c)
        v_new = (1.0 - ROTOR_RELAX) * v + ROTOR_RELAX * math.sqrt(max(h, 0.0))
        if abs(v_new - v) <= ROTOR_TOL * (1.0 + v_new):
            v = v_new
            break
        v = v_new
    else:
        v = _bisect_rotor(ub, vb, wb, w_blade, c)
    T, _ = _induced_map(v, ub, vb, wb, w_blade, c)
    return T, v


def _bisect_rotor(ub, vb, wb, w_blade, c):
    def g(v):
        return v - math.sqrt(max(_induced_map(v, ub, vb, wb, w_blade, c)[1], 0.0))

    hi = max(w_blade, 0.0) + 2.0 * abs(wb) + math.sqrt(ub * ub + vb * vb) + 10.0
    for _ in range(60):
        if g(hi) > 0:
            break
        hi *= 2.0
    else:
        raise RotorConvergenceError("no bracket for the induced velocity")
    if g(0.0) >= 0.0:
        return 0.0
    v, info = brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                     maxiter=500, full_output=True)
    if not info.converged:
        raise RotorConvergenceError(f"bisection stalled, last residual {g(v):.3e}")
    return v


def relative_air_velocity(state, wind):
    return (state[3] - wind[0], state[4] - wind[1], state[5] - wind[2])


def induced_velocity_and_thrust(state, d_col, wind, params, v_guess=None):
    """Main-rotor thrust (N) and induced velocity (m/s).

    Solves the coupled thrust / momentum-theory equations by damped
    fixed-point iteration, falling back to bracketed root finding.
    Thrust is clamped at zero.
    """
    ub, vb, wb = relative_air_velocity(state, wind)
    return _solve_rotor(ub, vb, wb, state[IAS], state[IBS], d_col, params, v_guess)


def climb_power(w_bar, params):
    """Power spent lifting the weight; nonzero only while climbing (w_bar < 0)."""
    return -params.m * params.g * w_bar if w_bar < 0.0 else 0.0


def fuselage_drag(V_b, v_im, wind, params):
    """Quadratic fuselage drag along body axes, including rotor downwash."""
    ub, vb, wb = (V_b[0] - wind[0], V_b[1] - wind[1], V_b[2] - wind[2])
    return np.array(_fuselage(ub, vb, wb, v_im, params))


def _fuselage(ub, vb, wb, v_im, p):
    k = -0.5 * p.rho
    av = abs(v_im)
    X = k * p.S_fus_x * ub * max(abs(ub), av)
    Y = k * p.S_fus_y * vb * max(abs(vb), av)
    Z = k * p.S_fus_z * wb * abs(wb - v_im)
    return X, Y, Z


def _main_rotor(ub, vb, wb, a_s, b_s, T, v_im, fus, p):
    c = _coefficients(p)
    sa, sb = math.sin(a_s), math.sin(b_s)
    X = -T * sa
    Y = T * sb
    Z = -T * math.cos(a_s) * math.cos(b_s)
    arm = p.k_beta + T * p.l_hg
    L = arm * sb
    M = arm * sa
    Xf, Yf, Zf = fus
    power = (T * v_im + abs(Xf * ub) + abs(Yf * vb) + abs(Zf * (wb - v_im))
             + (-p.m * p.g * wb if wb < 0.0 else 0.0))
    N = -(c["profile"] * (c["tip2"] + p.advance_factor * (ub * ub + vb * vb))
          + power / p.omega)
    return (X, Y, Z), (L, M, N)


def main_rotor_wrench(state, T, v_im, wind, params):
    """Main-rotor force and moment about the CG, body axes.

    The yaw torque is the profile-drag torque plus the induced, parasite
    and climb powers converted to torque by dividing by the rotor speed.
    """
    ub, vb, wb = relative_air_velocity(state, wind)
    fus = _fuselage(ub, vb, wb, v_im, params)
    F, M = _main_rotor(ub, vb, wb, state[IAS], state[IBS], T, v_im, fus, params)
    return np.array(F), np.array(M)


def tail_rotor_wrench(d_ped_tr, params):
    T_tr = params.k_tr * d_ped_tr
    return (np.array([0.0, -T_tr, 0.0]),
            np.array([T_tr * params.l_htr, 0.0, T_tr * params.l_dtr]))


def flapping_derivatives(state, d_lat, d_lon, params):
    """Rates of the longitudinal and lateral tip-path-plane angles."""
    c = _coefficients(params)
    tau, A_bs = c["tau"], c["A_bs"]
    a_s, b_s = state[IAS], state[IBS]
    a_dot = -state[IQ] - a_s / tau + A_bs * b_s + params.k_lon * d_lon / tau
    b_dot = -state[IP] - b_s / tau - A_bs * a_s + params.k_lat * d_lat / tau
    return a_dot, b_dot


def yaw_gyro_derivative(r, d_ped, gyro, params):
    """Return ``(gyro_dot, d_ped_tr)`` for the PI yaw-rate loop."""
    err = params.K_a * d_ped - r
    return params.k_i * err, params.k_p * err + gyro


# ------------------------------------------------------------------ assembly

def _saturate(u, p):
    lo, hi = p.input_min, p.input_max
    return [min(max(float(v), lo), hi) for v in u]


def state_derivative(x, u, wind, params, *, aero=True, gravity=True):
    """Time derivative of the full state.

    ``aero=False`` zeroes every rotor and fuselage wrench (the flapping and
    gyro states still evolve); ``gravity=False`` drops the weight.
    """
    p = params
    d_lat, d_lon, d_ped, d_col = _saturate(u, p)
    (_, _, _, uu, vv, ww, phi, theta, psi, pr, qr, rr, a_s, b_s, gyro) = (
        float(v) for v in x)

    ct = math.cos(theta)
    if abs(ct) < GIMBAL_EPS:
        raise GimbalLockError(f"|cos(theta)| = {abs(ct):.3e} at theta = {theta!r}")
    st = math.sin(theta)
    sf, cf = math.sin(phi), math.cos(phi)
    sp, cp = math.sin(psi), math.cos(psi)

    gyro_dot, d_tr = yaw_gyro_derivative(rr, d_ped, gyro, p)

    if aero:
        ub, vb, wb = uu - wind[0], vv - wind[1], ww - wind[2]
        T, v_im = _solve_rotor(ub, vb, wb, a_s, b_s, d_col, p)
        fus = _fuselage(ub, vb, wb, v_im, p)
        (Xm, Ym, Zm), (Lm, Mm, Nm) = _main_rotor(ub, vb, wb, a_s, b_s, T, v_im, fus, p)
        T_tr = p.k_tr * d_tr
        Fx = Xm + fus[0]
        Fy = Ym + fus[1] - T_tr
        Fz = Zm + fus[2]
        Mx = Lm + T_tr * p.l_htr
        My = Mm
        Mz = Nm + T_tr * p.l_dtr
    else:
        Fx = Fy = Fz = Mx = My = Mz = 0.0

    m = p.m
    if gravity:
        mg = m * p.g
        Fx += -mg * st
        Fy += mg * sf * ct
        Fz += mg * cf * ct

    # V_dot = -w x V + F/m
    du = -(qr * ww - rr * vv) + Fx / m
    dv = -(rr * uu - pr * ww) + Fy / m
    dw = -(pr * vv - qr * uu) + Fz / m

    Jx, Jy, Jz = p.Jx, p.Jy, p.Jz
    hx, hy, hz = Jx * pr, Jy * qr, Jz * rr
    dp = (Mx - (qr * hz - rr * hy)) / Jx
    dq = (My - (rr * hx - pr * hz)) / Jy
    dr = (Mz - (pr * hy - qr * hx)) / Jz

    # NED position rate: R_B^T V_b
    dn = ct * cp * uu + (sf * st * cp - cf * sp) * vv + (cf * st * cp + sf * sp) * ww
    de = ct * sp * uu + (sf * st * sp + cf * cp) * vv + (cf * st * sp - sf * cp) * ww
    dd = -st * uu + sf * ct * vv + cf * ct * ww

    tt = st / ct
    dphi = pr + tt * (sf * qr + cf * rr)
    dtheta = cf * qr - sf * rr
    dpsi = (sf * qr + cf * rr) / ct

    c = _coefficients(p)
    tau, A_bs = c["tau"], c["A_bs"]
    da = -qr - a_s / tau + A_bs * b_s + p.k_lon * d_lon / tau
    db = -pr - b_s / tau - A_bs * a_s + p.k_lat * d_lat / tau

    return np.array([dn, de, dd, du, dv, dw, dphi, dtheta, dpsi,
                     dp, dq, dr, da, db, gyro_dot])


def tail_command(x, u, params):
    """Tail-rotor servo command produced by the yaw gyro."""
    d_ped = min(max(float(u[2]), params.input_min), params.input_max)
    return yaw_gyro_derivative(float(x[IR]), d_ped, float(x[GYRO]), params)[1]


def kinetic_energy(x, params):
    V = np.asarray(x[VEL])
    w = np.asarray(x[RATE])
    return 0.5 * params.m * V @ V + 0.5 * w @ (params.J * w)


# ------------------------------------------------------------------ integrator

def rk4_step(f, x, dt):
    """One classical fourth-order Runge-Kutta step of ``x' = f(x)``."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(x, u, wind, params, dt, *, max_dt=MAX_DT, **flags):
    """Advance the full state by ``dt`` with inputs and wind held constant."""
    if not 0.0 < dt <= max_dt * (1.0 + 1e-12):
        raise ValueError(f"dt must lie in (0, {max_dt}] (got {dt!r})")
    x = np.asarray(x, dtype=float)
    u = _saturate(u, params)
    wind = tuple(float(w) for w in wind)
    try:
        x_next = rk4_step(lambda s: state_derivative(s, u, wind, params, **flags), x, dt)
    except (ValueError, OverflowError) as exc:
        raise IntegrationBlowupError(f"state derivative failed ({exc}); "
                                     f"state {x.tolist()}") from exc
    if not np.all(np.isfinite(x_next)):
        bad = [STATE_NAMES[i] for i in np.flatnonzero(~np.isfinite(x_next))]
        raise IntegrationBlowupError(
            f"non-finite state after step of {dt} s: {', '.join(bad)}; "
            f"previous state {x.tolist()}"
        )
    return x_next

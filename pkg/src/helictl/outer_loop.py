"""Model-free prescribed-performance position loop.

Per NED axis the combined error ``eps_v + m * eps_p`` is normalized by an
exponentially shrinking envelope ``tau(t)``; ``atanh`` of the normalized
error acts as a barrier so the control effort grows without bound as the
error approaches the envelope.  Errors are reference minus measurement.

The output ``u_m`` is a command vector expressed in the heading frame; at
zero error it equals ``(0, 0, -hover_bias)``.  Its horizontal part points
opposite to the horizontal tilt of the thrust it asks for.  It is converted
to roll/pitch/heading commands and a collective command by
:func:`attitude_command`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import dynamics as dyn
from .errors import EnvelopeViolationError

AXES = "xyz"


@dataclass(frozen=True)
class PerformanceEnvelope:
    tau0: np.ndarray
    tauinf: np.ndarray
    c: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        for name in ("tau0", "tauinf", "c", "m"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.tauinf <= 0) or np.any(self.tau0 <= self.tauinf):
            raise ValueError("envelope needs tau0 > tauinf > 0 on every axis")
        if np.any(self.m <= self.c):
            raise ValueError("envelope needs m > c on every axis")

    @classmethod
    def from_params(cls, ctrl, initial_error=None):
        tau0 = np.array([getattr(ctrl, "tau0_" + a) for a in AXES])
        tauinf = np.array([getattr(ctrl, "tauinf_" + a) for a in AXES])
        if ctrl.tau0_auto and initial_error is not None:
            tau0 = np.maximum(2.0 * np.abs(initial_error) + ctrl.tau0_floor, tauinf * (1 + 1e-9))
        return cls(tau0, tauinf,
                   np.array([getattr(ctrl, "c_" + a) for a in AXES]),
                   np.array([getattr(ctrl, "m_" + a) for a in AXES]))

    def tau(self, t):
        return (self.tau0 - self.tauinf) * np.exp(-self.c * t) + self.tauinf


def performance_function(t, envelope, axis):
    """Envelope value of one axis (0, 1, 2 or 'x', 'y', 'z') at time ``t``."""
    i = AXES.index(axis) if isinstance(axis, str) else int(axis)
    return float((envelope.tau0[i] - envelope.tauinf[i]) * math.exp(-envelope.c[i] * t)
                 + envelope.tauinf[i])


def tracking_errors(pos, vel, ref_pos, ref_vel):
    """Position and velocity errors, reference minus measurement (NED)."""
    return (np.asarray(ref_pos, float) - np.asarray(pos, float),
            np.asarray(ref_vel, float) - np.asarray(vel, float))


def combined_error(eps_p, eps_v, envelope):
    return np.asarray(eps_v, float) + envelope.m * np.asarray(eps_p, float)


def normalized_errors(eps_p, eps_v, envelope, t, guard=1e-9):
    """``(eps_v + m eps_p) / tau(t)`` per axis.

    Raises
    ------
    EnvelopeViolationError
        If any component reaches ``1 - guard`` in magnitude.
    """
    tau = envelope.tau(t)
    s = combined_error(eps_p, eps_v, envelope)
    e = s / tau
    bad = np.flatnonzero(np.abs(e) >= 1.0 - guard)
    if bad.size:
        i = int(bad[0])
        raise EnvelopeViolationError(
            f"envelope violated on axis {AXES[i]} at t = {t:.4f} s: "
            f"|e| = {abs(e[i]):.6f}, margin = {tau[i] - abs(s[i]):.3e}",
            axis=AXES[i], margins=tau - np.abs(s))
    return e


@dataclass
class OuterLoopState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0
    e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_atanh: np.ndarray | None = None
    hold: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=bool))

    def snapshot(self):
        return OuterLoopState(self.integral.copy(), self.t, self.e.copy(),
                              None if self.last_atanh is None else self.last_atanh.copy(),
                              self.hold.copy())


def heading_rotation(psi):
    """Rotation taking NED horizontal components into the heading frame."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def error_controller(e, envelope, ctrl, state, dt, psi=0.0, t=None):
    """Barrier error controller; advances the integral state in place.

    ``u_m = R(psi) (-K [atanh(e) + p * integral(atanh(e))]) + (0, 0, -bias)``
    with ``K = diag(k_i / ((1 - e_i^2) tau_i(t)))``.  The integral uses the
    trapezoidal rule and is clamped to ``+-integral_limit``; axes flagged in
    ``state.hold`` are not integrated.
    """
    e = np.asarray(e, float)
    if np.any(np.abs(e) >= 1.0):
        raise ValueError("normalized error outside (-1, 1)")
    t = state.t if t is None else t
    a = np.arctanh(e)
    prev = a if state.last_atanh is None else state.last_atanh
    incr = 0.5 * dt * (a + prev)
    incr[state.hold] = 0.0
    lim = ctrl.integral_limit
    state.integral = np.clip(state.integral + incr, -lim, lim)
    state.last_atanh = a
    state.e = e
    state.t = t
    k = np.array([ctrl.k_x, ctrl.k_y, ctrl.k_z])
    pg = np.array([ctrl.p_x, ctrl.p_y, ctrl.p_z])
    K = k / ((1.0 - e * e) * envelope.tau(t))
    corr = -K * (a + pg * state.integral)
    u_m = heading_rotation(psi) @ corr
    u_m[2] -= ctrl.hover_bias
    return u_m


class AttitudeCommand(NamedTuple):
    phi: float
    theta: float
    psi: float
    col: float


def attitude_command(u_m, psi_ref, limit=0.35, previous=None, eps=1e-6):
    """Map the command vector to (phi, theta, psi, collective).

    Returns ``(command, clamped)`` where ``clamped`` reports whether either
    tilt angle hit ``+-limit``.  A degenerate ``|u_m| < eps`` returns the
    previous command (or a level, zero-collective one).
    """
    ux, uy, uz = (float(v) for v in u_m)
    norm = math.sqrt(ux * ux + uy * uy + uz * uz)
    if norm < eps:
        if previous is not None:
            return AttitudeCommand(*previous), False
        return AttitudeCommand(0.0, 0.0, psi_ref, 0.0), False
    phi = -math.asin(max(-1.0, min(1.0, uy / norm)))
    if uz != 0.0:
        theta = -math.atan(ux / uz)
    else:
        theta = math.copysign(0.5 * math.pi, ux)
    clamped = abs(phi) > limit or abs(theta) > limit
    phi = max(-limit, min(limit, phi))
    theta = max(-limit, min(limit, theta))
    return AttitudeCommand(phi, theta, psi_ref, -norm), clamped


def command_direction(phi, theta):
    """Unit command vector that :func:`attitude_command` maps to ``(phi, theta)``."""
    return np.array([math.cos(phi) * math.sin(theta), -math.sin(phi),
                     -math.cos(phi) * math.cos(theta)])


def position_error_dynamics(x, u, wind, params, reference_accel):
    """Rate of the NED velocity error (reference minus vehicle)."""
    xdot = dyn.state_derivative(x, u, wind, params)
    V = np.asarray(x[dyn.VEL], float)
    w = np.asarray(x[dyn.RATE], float)
    a_body = xdot[dyn.VEL] + np.cross(w, V)
    a_ned = dyn.rotation_matrix(x[dyn.EUL]).T @ a_body
    return np.asarray(reference_accel, float) - a_ned


def steady_state_admissible(eps_p, eps_v, envelope):
    """Per-axis check of the asymptotic position/velocity error bounds."""
    eps_p = np.abs(np.asarray(eps_p, float))
    eps_v = np.abs(np.asarray(eps_v, float))
    return (eps_p <= envelope.tauinf / envelope.m) & (eps_v <= 2.0 * envelope.tauinf)


@dataclass
class OuterStep:
    r_out: AttitudeCommand
    u_m: np.ndarray
    e: np.ndarray
    eps_p: np.ndarray
    eps_v: np.ndarray
    margins: np.ndarray
    clamped: bool


class OuterLoop:
    """Prescribed-performance loop with its envelope and integral state."""

    def __init__(self, ctrl, envelope=None):
        self.ctrl = ctrl
        self.envelope = envelope
        self.state = OuterLoopState()
        self.previous = None

    def update(self, t, pos, vel, ref_pos, ref_vel, psi_ref, psi_frame, dt):
        eps_p, eps_v = tracking_errors(pos, vel, ref_pos, ref_vel)
        if self.envelope is None:
            m = np.array([self.ctrl.m_x, self.ctrl.m_y, self.ctrl.m_z])
            self.envelope = PerformanceEnvelope.from_params(self.ctrl, eps_v + m * eps_p)
        e = normalized_errors(eps_p, eps_v, self.envelope, t, self.ctrl.e_guard)
        u_m = error_controller(e, self.envelope, self.ctrl, self.state, dt, psi_frame, t)
        cmd, clamped = attitude_command(u_m, psi_ref, self.ctrl.attitude_limit, self.previous)
        # horizontal integrators are frozen while the tilt command saturates
        self.state.hold[:2] = clamped
        self.previous = cmd
        margins = self.envelope.tau(t) - np.abs(combined_error(eps_p, eps_v, self.envelope))
        return OuterStep(cmd, u_m, e, eps_p, eps_v, margins, clamped)

"""Hover trim and finite-difference linearization.

The attitude model used for synthesis keeps nine states in the order
``(phi, theta, p, q, a_s, b_s, r, gyro, psi)`` and four inputs
``(d_lat, d_lon, d_ped, d_col)``.  The full 15-state Jacobians are kept
alongside it for validation against the nonlinear model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import dynamics as dyn
from .errors import ConfigParseError, TrimError
from .matrixio import read_matrices, write_matrices

ATTITUDE_STATES = (dyn.IPHI, dyn.ITHETA, dyn.IP, dyn.IQ, dyn.IAS, dyn.IBS,
                   dyn.IR, dyn.GYRO, dyn.IPSI)
ATTITUDE_NAMES = ("phi", "theta", "p", "q", "a_s", "b_s", "r", "gyro", "psi")
INPUT_NAMES = ("d_lat", "d_lon", "d_ped", "d_col")

# rows of the state derivative that must vanish at hover trim
_TRIM_ROWS = (3, 4, 5, 9, 10, 11, 12, 13, 14)
_TRIM_NAMES = ("phi", "theta", "a_s", "b_s", "d_lat", "d_lon", "d_ped", "d_col", "gyro")

# per-state perturbation steps: position, velocity, angles, rates, flapping, gyro
STATE_STEPS = np.array([1e-4] * 3 + [1e-4] * 3 + [1e-5] * 3 + [1e-5] * 3 + [1e-5] * 2 + [1e-5])
INPUT_STEP = 1e-5
WIND_STEP = 1e-4


@dataclass
class TrimPoint:
    x_trim: np.ndarray
    u_trim: dyn.ControlInputs
    residual: float
    thrust: float
    v_im: float
    history: list = field(default_factory=list)

    def summary(self):
        names = dict(zip(dyn.STATE_NAMES, self.x_trim))
        lines = [f"residual  = {self.residual:.3e}",
                 f"thrust    = {self.thrust:.6f} N",
                 f"v_im      = {self.v_im:.6f} m/s"]
        for key in ("phi", "theta", "psi", "a_s", "b_s", "gyro"):
            lines.append(f"{key:<9} = {names[key]: .9f}")
        for key, val in zip(INPUT_NAMES, self.u_trim):
            lines.append(f"{key:<9} = {val: .9f}")
        return "\n".join(lines)


def _hover_collective_guess(p):
    c = dyn._coefficients(p)
    W = p.m * p.g
    v_h = math.sqrt(W / (2.0 * p.rho * p.disk_area))
    return (W / c["K_T"] + v_h) / c["col"]


def find_trim(params, psi=0.0, position=(0.0, 0.0, 0.0), tol=1e-8, max_iter=200):
    """Hover trim with zero body velocity and rates at heading ``psi``.

    Unknowns are the roll and pitch angles, both flapping angles, all four
    controls and the gyro state; they are found by Levenberg-Marquardt on
    the nine non-trivial rows of the state derivative.
    """
    history = []

    def pack(z):
        x = np.zeros(dyn.NX)
        x[dyn.POS] = position
        x[dyn.IPHI], x[dyn.ITHETA], x[dyn.IPSI] = z[0], z[1], psi
        x[dyn.IAS], x[dyn.IBS] = z[2], z[3]
        x[dyn.GYRO] = z[8]
        return x, z[4:8]

    def residual(z):
        x, u = pack(z)
        r = dyn.state_derivative(x, u, (0.0, 0.0, 0.0), params)[list(_TRIM_ROWS)]
        history.append(float(np.linalg.norm(r)))
        return r

    z0 = np.zeros(9)
    z0[7] = _hover_collective_guess(params)
    sol = least_squares(residual, z0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_iter * 10)
    x, u = pack(sol.x)
    u = dyn.ControlInputs(*u)
    res = float(np.linalg.norm(dyn.state_derivative(x, u, (0.0, 0.0, 0.0), params)))
    if not res < tol:
        raise TrimError(f"trim residual {res:.3e} above {tol:g} after {sol.nfev} evaluations",
                        history)
    lo, hi = params.input_min, params.input_max
    if any(not lo <= v <= hi for v in u):
        raise TrimError(f"trim inputs {tuple(u)} outside [{lo}, {hi}]", history)
    T, v_im = dyn.induced_velocity_and_thrust(x, u.col, (0.0, 0.0, 0.0), params)
    return TrimPoint(x, u, res, T, v_im, history)


# ------------------------------------------------------------------ jacobians

@dataclass
class LinearModel:
    """Linear model ``x' = A x + B u + E w`` with performance and tracking outputs.

    ``C, D`` weight the performance output ``h = C x + D u_fb`` where
    ``u_fb`` are the inputs listed in ``feedback_inputs``.  ``C_out`` and
    ``D_out`` select the tracked outputs whose static gain the feedforward
    matrix inverts.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    C: np.ndarray
    D: np.ndarray
    C_out: np.ndarray
    D_out: np.ndarray | None = None
    feedback_inputs: tuple | None = None
    x_trim: np.ndarray | None = None
    u_trim: np.ndarray | None = None
    A_full: np.ndarray | None = None
    B_full: np.ndarray | None = None
    E_full: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    @property
    def fb(self):
        idx = self.feedback_inputs
        return list(range(self.B.shape[1])) if idx is None else list(idx)

    @property
    def B_fb(self):
        return self.B[:, self.fb]

    def check(self):
        n = self.A.shape[0]
        assert self.A.shape == (n, n)
        assert self.B.shape[0] == n and self.E.shape[0] == n
        assert self.C.shape[1] == n and self.D.shape == (self.C.shape[0], len(self.fb))
        for name in ("A", "B", "E"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        return self

    def to_file(self, path):
        blocks = {k: getattr(self, k) for k in ("A", "B", "E", "C", "D", "C_out", "D_out")}
        blocks["feedback_inputs"] = None if self.feedback_inputs is None else [self.feedback_inputs]
        blocks["x_trim"] = None if self.x_trim is None else [self.x_trim]
        blocks["u_trim"] = None if self.u_trim is None else [self.u_trim]
        write_matrices(path, blocks,
                       "states: " + " ".join(ATTITUDE_NAMES) + "\ninputs: " + " ".join(INPUT_NAMES))

    @classmethod
    def from_file(cls, path):
        b = read_matrices(path)
        missing = {"A", "B", "E", "C", "D", "C_out"} - set(b)
        if missing:
            raise ConfigParseError(f"{path}: missing blocks {sorted(missing)}")
        fb = b.get("feedback_inputs")
        return cls(b["A"], b["B"], b["E"], b["C"], b["D"], b["C_out"], b.get("D_out"),
                   None if fb is None else tuple(int(v) for v in fb.ravel()),
                   None if "x_trim" not in b else b["x_trim"].ravel(),
                   None if "u_trim" not in b else b["u_trim"].ravel()).check()


def _central(f, x0, steps):
    f0 = f(x0)
    J = np.empty((f0.size, x0.size))
    for j, h in enumerate(steps):
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (f(xp) - f(xm)) / (2.0 * h)
    return J


def _richardson(f, x0, steps, name, warnings, rtol=1e-4, atol=1e-7):
    J1 = _central(f, x0, steps)
    J2 = _central(f, x0, steps / 2.0)
    bad = np.abs(J1 - J2) > rtol * np.maximum(np.abs(J1), np.abs(J2)) + atol
    for i, j in zip(*np.nonzero(bad)):
        warnings.append((name, int(i), int(j), float(J1[i, j]), float(J2[i, j])))
    return (4.0 * J2 - J1) / 3.0


def full_jacobians(params, x_trim, u_trim, wind=(0.0, 0.0, 0.0), warnings=None):
    """Jacobians of the full state derivative w.r.t. state, inputs and body wind."""
    warnings = [] if warnings is None else warnings
    x0 = np.asarray(x_trim, float)
    u0 = np.asarray(u_trim, float)
    w0 = np.asarray(wind, float)
    A = _richardson(lambda x: dyn.state_derivative(x, u0, w0, params), x0,
                    STATE_STEPS, "A", warnings)
    B = _richardson(lambda u: dyn.state_derivative(x0, u, w0, params), u0,
                    np.full(4, INPUT_STEP), "B", warnings)
    E = _richardson(lambda w: dyn.state_derivative(x0, u0, w, params), w0,
                    np.full(3, WIND_STEP), "E", warnings)
    return A, B, E


def tracking_outputs():
    """Tracked outputs (phi, theta, psi) plus a collective pass-through channel."""
    C_out = np.zeros((4, 9))
    C_out[0, 0] = C_out[1, 1] = C_out[2, 8] = 1.0
    D_out = np.zeros((4, 4))
    D_out[3, 3] = 1.0
    return C_out, D_out


def jacobians(trim, params, ctrl):
    """Linear attitude model about a trim point."""
    warnings = []
    A_full, B_full, E_full = full_jacobians(params, trim.x_trim, trim.u_trim, warnings=warnings)
    idx = list(ATTITUDE_STATES)
    C_out, D_out = tracking_outputs()
    return LinearModel(
        A=A_full[np.ix_(idx, idx)], B=B_full[idx], E=E_full[idx],
        C=ctrl.C, D=ctrl.D, C_out=C_out, D_out=D_out, feedback_inputs=(0, 1, 2),
        x_trim=np.array(trim.x_trim), u_trim=np.array(trim.u_trim),
        A_full=A_full, B_full=B_full, E_full=E_full, warnings=warnings,
    ).check()


def analytic_blocks(params):
    """Rows of the attitude model that are linear in the nonlinear model.

    Returns ``{(row_name): (A_row, B_row)}`` for the flapping and gyro rows,
    in the attitude-state ordering.
    """
    c = dyn._coefficients(params)
    tau, A_bs = c["tau"], c["A_bs"]
    n = len(ATTITUDE_NAMES)
    pos = {name: i for i, name in enumerate(ATTITUDE_NAMES)}
    rows = {}
    a = np.zeros(n); b = np.zeros(4)
    a[pos["q"]] = -1.0; a[pos["a_s"]] = -1.0 / tau; a[pos["b_s"]] = A_bs
    b[1] = params.k_lon / tau
    rows["a_s"] = (a, b)
    a = np.zeros(n); b = np.zeros(4)
    a[pos["p"]] = -1.0; a[pos["b_s"]] = -1.0 / tau; a[pos["a_s"]] = -A_bs
    b[0] = params.k_lat / tau
    rows["b_s"] = (a, b)
    a = np.zeros(n); b = np.zeros(4)
    a[pos["r"]] = -params.k_i
    b[2] = params.k_i * params.K_a
    rows["gyro"] = (a, b)
    return rows

"""H-infinity state feedback from the game algebraic Riccati equation.

For a model ``x' = A x + B u + E w`` with performance output
``h = C x + D u`` the stabilizing solution ``P >= 0`` of ::

    P A + A'P + C'C + P E E' P / gamma^2
        - (P B + C'D)(D'D)^-1 (D'C + B'P) = 0

gives the feedback ``u = F x`` with ``F = -(D'D)^-1 (D'C + B'P)``, which
bounds the L2 gain from ``w`` to ``h`` by ``gamma``.  A feedforward matrix
``G`` makes the static gain from the command to the tracked outputs equal
to identity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlInputs
from .errors import CertificateError, DCGainError, GammaInfeasibleError, SynthesisError
from .matrixio import read_matrices, write_matrices

log = logging.getLogger(__name__)

NEWTON_MAX_ITER = 60
NEWTON_TOL = 1e-13
PSD_TOL = 1e-10


def lyap(A, Q):
    """Solve ``A X + X A' + Q = 0`` by a dense vectorized linear solve."""
    n = A.shape[0]
    I = np.eye(n)
    # column-major vec: vec(AX + XA') = (I kron A + A kron I) vec(X)
    K = (np.einsum("ij,kl->ikjl", I, A) + np.einsum("ij,kl->ikjl", A, I)).reshape(n * n, n * n)
    X = np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(n, n, order="F")
    return 0.5 * (X + X.T)


def riccati_residual(P, A, B, E, C, D, gamma):
    """Left-hand side of the game Riccati equation."""
    Rm = D.T @ D
    S = C.T @ D
    PB = P @ B + S
    res = P @ A + A.T @ P + C.T @ C - PB @ np.linalg.solve(Rm, PB.T)
    if E is not None and E.size and math.isfinite(gamma):
        res = res + P @ E @ E.T @ P / gamma**2
    return res


def _closed_loop(P, A, B, E, C, D, gamma):
    Rm = D.T @ D
    F = -np.linalg.solve(Rm, D.T @ C + B.T @ P)
    Ac = A + B @ F
    if E is not None and E.size and math.isfinite(gamma):
        Ac = Ac + E @ E.T @ P / gamma**2
    return F, Ac


def _bass_gain(A, B, Rm):
    # Bass' method: Z solves (A+bI)Z + Z(A+bI)' = 2BB'; K = B'Z^-1 stabilizes.
    n = A.shape[0]
    beta = max(np.abs(np.linalg.eigvals(A)).max(), 1.0) + 1.0
    Z = lyap(-(A + beta * np.eye(n)), 2.0 * B @ B.T)
    try:
        return B.T @ np.linalg.inv(Z)
    except np.linalg.LinAlgError:
        raise SynthesisError("(A, B) not controllable: cannot build a stabilizing gain") from None


def solve_care(A, B, C, D, max_iter=NEWTON_MAX_ITER):
    """Stabilizing solution of the standard (disturbance-free) Riccati equation.

    Kleinman's iteration started from a Bass stabilizing gain.
    """
    Rm = D.T @ D
    S = C.T @ D
    K = _bass_gain(A, B, Rm)
    if np.linalg.eigvals(A - B @ K).real.max() >= 0:
        raise SynthesisError("initial gain does not stabilize (A, B)")
    P_prev = None
    for _ in range(max_iter):
        Ak = A - B @ K
        Ck = C - D @ K
        P = lyap(Ak.T, Ck.T @ Ck)
        K = np.linalg.solve(Rm, S.T + B.T @ P)
        if P_prev is not None and np.linalg.norm(P - P_prev) <= NEWTON_TOL * (1.0 + np.linalg.norm(P)):
            break
        P_prev = P
    return P


def _newton(P, A, B, E, C, D, gamma, max_iter=NEWTON_MAX_ITER):
    """Newton iteration from ``P``; ``None`` on divergence or stagnation."""
    slow = 0
    prev = math.inf
    for it in range(max_iter):
        _, Ac = _closed_loop(P, A, B, E, C, D, gamma)
        R = riccati_residual(P, A, B, E, C, D, gamma)
        try:
            X = lyap(Ac.T, R)
        except np.linalg.LinAlgError:
            return None
        P = P + X
        P = 0.5 * (P + P.T)
        if not np.all(np.isfinite(P)):
            return None
        nX = np.linalg.norm(X)
        scale = 1.0 + np.linalg.norm(P)
        if nX <= NEWTON_TOL * scale:
            return P
        # a converging Newton sequence at least halves its step once it is close
        if nX > 0.5 * prev:
            if nX <= 1e-9 * scale:
                return P  # rounding floor; the caller checks the residual
            slow += 1
            if slow >= 4 and it >= 8:
                return None
        else:
            slow = 0
        prev = nX
    return None


def _accept(P, A, B, E, C, D, gamma):
    if P is None:
        return False
    scale = 1.0 + np.linalg.norm(P)
    if np.linalg.eigvalsh(P).min() < -PSD_TOL * scale:
        return False
    if np.linalg.norm(riccati_residual(P, A, B, E, C, D, gamma)) >= 1e-8 * scale:
        return False
    _, Ac = _closed_loop(P, A, B, E, C, D, gamma)
    return np.linalg.eigvals(Ac).real.max() < 0.0


def solve_game_riccati(A, B, E, C, D, gamma, min_step=1e-7):
    """Stabilizing PSD solution of the game Riccati equation.

    Newton's method is continued in ``theta = 1/gamma^2`` from the
    disturbance-free solution at ``theta = 0``.  The full step is tried
    first; a rejected step is halved and an accepted one doubled, so the
    iterate stays on the stabilizing branch close to the feasibility limit.

    Raises
    ------
    GammaInfeasibleError
        If no stabilizing positive semi-definite solution is found, i.e. the
        continuation step falls below ``min_step * theta``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    Rm = D.T @ D
    if np.linalg.matrix_rank(Rm) < Rm.shape[0]:
        raise SynthesisError("D'D is singular")
    P = solve_care(A, B, C, D)
    if E is None or not E.size or not np.any(E):
        return P
    target = 1.0 / gamma**2
    theta, h = 0.0, target
    while theta < target:
        h = min(h, target - theta)
        t_new = target if h == target - theta else theta + h
        P_new = _newton(P, A, B, E, C, D, 1.0 / math.sqrt(t_new))
        if P_new is not None and _accept(P_new, A, B, E, C, D, 1.0 / math.sqrt(t_new)):
            theta, P = t_new, P_new
            h *= 2.0
        else:
            h *= 0.5
            if h < min_step * target:
                raise GammaInfeasibleError(
                    f"no stabilizing PSD solution at gamma = {gamma:.6g} "
                    f"(continuation stalled at gamma = {1 / math.sqrt(theta) if theta else math.inf:.6g})")
    return P


def is_feasible(A, B, E, C, D, gamma):
    try:
        solve_game_riccati(A, B, E, C, D, gamma)
    except GammaInfeasibleError:
        return False
    return True


def _model_mats(model):
    return model.A, model.B_fb, model.E, model.C, model.D


def gamma_infimum(A, B, E, C, D, floor=1e-3, gamma_max=1e6, rtol=1e-3):
    """Bisect (in log scale) for the smallest feasible attenuation level.

    Returns the smallest gamma found feasible; the bracket width at exit
    is below ``rtol`` relative.
    """
    if not is_feasible(A, B, E, C, D, gamma_max):
        raise SynthesisError(f"infeasible even at gamma_max = {gamma_max:g}")
    if is_feasible(A, B, E, C, D, floor):
        return floor
    lo, hi = floor, gamma_max
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if is_feasible(A, B, E, C, D, mid):
            hi = mid
        else:
            lo = mid
    return hi


def select_gamma(model, margin=1.05, floor=1e-3, gamma_max=1e6, rtol=1e-3):
    """Attenuation level: ``margin`` times the bisected feasibility infimum."""
    return margin * gamma_infimum(*_model_mats(model), floor=floor, gamma_max=gamma_max,
                                  rtol=rtol)


def gamma_formula_report(model):
    """Closed-form attenuation estimate ``sqrt(lmax(L R^-1))``, when defined.

    ``L`` solves ``A'L + LA + C'C = 0`` (needs a Hurwitz ``A``) and ``R`` is
    the disturbance-free Riccati solution.  Returns ``None`` where either
    is undefined.
    """
    A, B, E, C, D = _model_mats(model)
    out = {"lyapunov": None, "gamma": None, "reason": ""}
    if np.linalg.eigvals(A).real.max() >= -1e-9:
        out["reason"] = "A is not Hurwitz; the Lyapunov solution is undefined"
        return out
    L = lyap(A.T, C.T @ C)
    out["lyapunov"] = L
    R = solve_care(A, B, C, D)
    if np.linalg.cond(R) > 1e12:
        out["reason"] = "Riccati solution is singular"
        return out
    lam = np.linalg.eigvals(L @ np.linalg.inv(R)).real.max()
    out["gamma"] = math.sqrt(max(lam, 0.0))
    return out


# ------------------------------------------------------------------ gains

@dataclass
class GainSet:
    P: np.ndarray
    gamma: float
    F: np.ndarray
    G: np.ndarray
    closed_loop_spectrum: np.ndarray
    u_trim: np.ndarray = field(default_factory=lambda: np.zeros(4))
    input_limits: tuple = (-1.0, 1.0)

    def to_file(self, path, comment=None):
        write_matrices(path, {
            "P": self.P, "gamma": [[self.gamma]], "F": self.F, "G": self.G,
            "u_trim": [self.u_trim], "input_limits": [self.input_limits],
            "spectrum_re": [self.closed_loop_spectrum.real],
            "spectrum_im": [self.closed_loop_spectrum.imag],
        }, comment)

    @classmethod
    def from_file(cls, path):
        b = read_matrices(path)
        spec = b["spectrum_re"].ravel() + 1j * b["spectrum_im"].ravel()
        return cls(b["P"], float(b["gamma"][0, 0]), b["F"], b["G"], spec,
                   b["u_trim"].ravel(), tuple(b["input_limits"].ravel()))


def synthesize_gains(model, P, gamma, input_limits=(-1.0, 1.0)):
    """Feedback and feedforward matrices from a Riccati solution.

    ``F`` acts on the feedback inputs of the model (zero rows elsewhere);
    ``G = -[(C_out + D_out F)(A + B F)^-1 B - D_out]^-1``, which reduces
    to ``-[C_out (A + B F)^-1 B]^-1`` without an output feedthrough.
    """
    A, B, C, D = model.A, model.B, model.C, model.D
    fb = model.fb
    F_fb = -np.linalg.solve(D.T @ D, D.T @ C + model.B_fb.T @ P)
    F = np.zeros((B.shape[1], A.shape[0]))
    F[fb] = F_fb
    Acl = A + B @ F
    spectrum = np.linalg.eigvals(Acl)
    if spectrum.real.max() >= 0:
        raise SynthesisError(f"closed loop unstable, max Re = {spectrum.real.max():.3e}")
    D_out = np.zeros((model.C_out.shape[0], B.shape[1])) if model.D_out is None else model.D_out
    M = (model.C_out + D_out @ F) @ np.linalg.solve(Acl, B) - D_out
    if M.shape[0] != M.shape[1] or np.linalg.cond(M) > 1e12:
        raise DCGainError("uncontrollable output at DC: static gain matrix is singular")
    G = -np.linalg.inv(M)
    u_trim = np.zeros(B.shape[1]) if model.u_trim is None else np.asarray(model.u_trim, float)
    return GainSet(P, float(gamma), F, G, spectrum, u_trim, tuple(input_limits))


def synthesize(model, ctrl):
    """Select gamma, solve the Riccati equation and build the gain set."""
    if ctrl.gamma_override > 0:
        gamma = ctrl.gamma_override
    else:
        gamma = select_gamma(model, ctrl.gamma_margin, ctrl.gamma_floor, ctrl.gamma_max)
    P = solve_game_riccati(*_model_mats(model), gamma)
    log.info("gamma = %.6g", gamma)
    return synthesize_gains(model, P, gamma)


def attitude_control(x, r_out, gains):
    """``u = u_trim + F x + G r_out`` saturated to the input limits."""
    u = gains.u_trim + gains.F @ np.asarray(x, float) + gains.G @ np.asarray(r_out, float)
    lo, hi = gains.input_limits
    return ControlInputs(*np.clip(u, lo, hi))


def static_gain(model, gains):
    """Closed-loop static gain from command to tracked outputs."""
    Acl = model.A + model.B @ gains.F
    X = -np.linalg.solve(Acl, model.B @ gains.G)
    D_out = 0.0 if model.D_out is None else model.D_out
    return (model.C_out + D_out @ gains.F) @ X + D_out @ gains.G


# ------------------------------------------------------------------ norm check

def _sigma_max(Acl, E, Ch, w):
    n = Acl.shape[0]
    T = Ch @ np.linalg.solve(1j * w * np.eye(n) - Acl, E)
    return np.linalg.svd(T, compute_uv=False)[0]


def _golden_max(f, a, b, tol=1e-10, max_iter=200):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def hinf_norm(Acl, E, Ch, w_min=1e-2, w_max=1e3, n_points=2000):
    """Peak singular value of ``Ch (jwI - Acl)^-1 E`` over frequency.

    Dense log-spaced sweep plus DC, refined by golden-section search around
    the best grid point.  Returns ``(peak, frequency)``.
    """
    if not np.any(E) or not np.any(Ch):
        return 0.0, 0.0
    grid = np.concatenate([[0.0], np.logspace(math.log10(w_min), math.log10(w_max), n_points)])
    vals = np.array([_sigma_max(Acl, E, Ch, w) for w in grid])
    k = int(np.argmax(vals))
    best_w, best = grid[k], vals[k]
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if hi > lo:
        w, v = _golden_max(lambda w: _sigma_max(Acl, E, Ch, w), lo, hi)
        if v > best:
            best_w, best = w, v
    return float(best), float(best_w)


@dataclass
class Certificate:
    norm: float
    gamma: float
    peak_frequency: float
    passed: bool

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict}: sweep norm {self.norm:.6g} at {self.peak_frequency:.4g} rad/s "
                f"vs gamma {self.gamma:.6g}")


def verify_hinf_norm(model, gains, rtol=1e-3, strict=False, **sweep):
    """Frequency-sweep estimate of the disturbance-to-performance gain."""
    fb = model.fb
    Acl = model.A + model.B @ gains.F
    Ch = model.C + model.D @ gains.F[fb]
    if np.linalg.eigvals(Acl).real.max() >= 0:
        raise SynthesisError("closed loop is not stable")
    norm, w = hinf_norm(Acl, model.E, Ch, **sweep)
    cert = Certificate(norm, gains.gamma, w, norm <= gains.gamma * (1.0 + rtol))
    if strict and not cert.passed:
        raise CertificateError(str(cert))
    return norm, cert

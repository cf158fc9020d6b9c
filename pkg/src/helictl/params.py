"""Vehicle and controller parameters, plain-text config loading and validation.

The config format is flat ``key = value`` lines, ``#`` starts a comment and
all quantities are SI.  Vector-valued keys take comma-separated numbers.
Every key has a default; :func:`load_params` records which values came from
the file and which were defaulted so a provenance report can be printed.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigParseError, ValidationError

CONFIG_DIR_ENV = "HELICTL_CONFIG_DIR"

# Keys whose default values are the measured vehicle values of the
# experimental platform; everything else is an engineering default.
MEASURED_KEYS = frozenset(
    ["m", "Jx", "Jy", "Jz", "g", "lock_number", "omega", "R", "k_lat", "k_lon",
     "k_col", "chord", "n_blades", "I_beta",
     "m_x", "m_y", "m_z", "c_x", "c_y", "c_z",
     "k_x", "k_y", "k_z", "p_x", "p_y", "p_z"]
)


@dataclass(frozen=True)
class HelicopterParams:
    """Physical and aerodynamic constants of the vehicle."""

    m: float = 7.6                    # kg
    Jx: float = 0.19                  # kg m^2
    Jy: float = 0.46                  # kg m^2
    Jz: float = 0.31                  # kg m^2
    g: float = 9.81                   # m/s^2
    R: float = 0.82                   # main rotor radius, m
    omega: float = 175.2              # main rotor speed, rad/s
    lock_number: float = 1.131        # blade Lock number
    I_beta: float = 0.0913            # blade flapping inertia, kg m^2
    n_blades: float = 2.0
    chord: float = 0.06               # m
    k_lat: float = 0.53
    k_lon: float = 0.54
    k_col: float = 3.77
    lift_slope: float = 5.5           # 1/rad
    rho: float = 1.225                # kg/m^3
    k_beta: float = 48.0              # rotor hub spring, N m/rad
    e_hinge: float = 0.0              # effective hinge offset, m
    l_hg: float = 0.235               # hub above CG, m
    l_htr: float = 0.08               # tail-rotor arm entering the roll moment, m
    l_dtr: float = 0.91               # tail-rotor arm entering the yaw moment, m
    S_fus_x: float = 0.10             # m^2
    S_fus_y: float = 0.22             # m^2
    S_fus_z: float = 0.15             # m^2
    k_tr: float = 20.0                # tail thrust per unit gyro command, N
    k_p: float = 0.5                  # yaw gyro proportional gain
    k_i: float = 1.0                  # yaw gyro integral gain, 1/s
    K_a: float = 2.0                  # yaw gyro amplifier, rad/s per unit pedal
    v_im0: float = 3.8                # induced velocity initial guess, m/s
    cd0: float = 0.024                # profile drag coefficient of the torque term
    profile_divisor: float = 14.0
    advance_factor: float = 4.6
    input_min: float = -1.0
    input_max: float = 1.0

    def validate(self):
        positive = ("m", "Jx", "Jy", "Jz", "R", "omega", "rho", "I_beta",
                    "lock_number", "profile_divisor")
        for name in positive:
            value = getattr(self, name)
            if not value > 0:
                raise ValidationError(f"{name} must be > 0 (got {value!r})")
        if not 0.0 <= self.e_hinge < 3.0 * self.R / 8.0:
            raise ValidationError(
                f"e_hinge must satisfy 0 <= e_hinge < 3R/8 = {3 * self.R / 8:.6g} "
                f"(got {self.e_hinge!r})"
            )
        for name in ("S_fus_x", "S_fus_y", "S_fus_z"):
            if getattr(self, name) < 0:
                raise ValidationError(f"drag area {name} must be >= 0")
        if not self.input_min < self.input_max:
            raise ValidationError("input_min must be < input_max")
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValidationError(f"{f.name} is not finite")
        return self

    @property
    def J(self):
        return np.array([self.Jx, self.Jy, self.Jz])

    @property
    def disk_area(self):
        return math.pi * self.R**2

    @property
    def weight(self):
        return self.m * self.g


@dataclass(frozen=True)
class ControllerParams:
    """Gains of the prescribed-performance outer loop and H-infinity weights."""

    m_x: float = 1.7
    m_y: float = 1.6
    m_z: float = 3.5
    c_x: float = 1.1
    c_y: float = 1.1
    c_z: float = 1.1
    k_x: float = 0.16
    k_y: float = 0.13
    k_z: float = 0.06
    p_x: float = 0.3
    p_y: float = 0.4
    p_z: float = 0.7
    tau0_x: float = 3.0
    tau0_y: float = 3.0
    tau0_z: float = 3.0
    tauinf_x: float = 0.9
    tauinf_y: float = 0.9
    tauinf_z: float = 1.1
    tau0_auto: bool = False
    tau0_floor: float = 0.5
    hover_bias: float = 1.0           # z bias of u_m at zero error
    collective_gain: float = 3.0      # specific-thrust gain of the z channel
    attitude_limit: float = 0.35      # rad
    integral_limit: float = 5.0
    e_guard: float = 1e-9
    hinf_state_weights: tuple = (2.0, 2.0, 0.1, 0.1, 0.0, 0.0, 0.2, 0.0, 1.5)
    hinf_input_weights: tuple = (1.0, 1.0, 1.0)
    gamma_override: float = 0.0       # 0 selects gamma by bisection
    gamma_margin: float = 1.05
    gamma_max: float = 1e6
    gamma_floor: float = 1e-3

    def validate(self):
        for axis in "xyz":
            m_i = getattr(self, "m_" + axis)
            c_i = getattr(self, "c_" + axis)
            if not m_i > c_i:
                raise ValidationError(f"m_{axis} > c_{axis} violated ({m_i!r} <= {c_i!r})")
            t0 = getattr(self, "tau0_" + axis)
            tinf = getattr(self, "tauinf_" + axis)
            if not t0 > tinf > 0:
                raise ValidationError(
                    f"tau0_{axis} > tauinf_{axis} > 0 violated ({t0!r}, {tinf!r})"
                )
        if len(self.hinf_state_weights) != 9:
            raise ValidationError("hinf_state_weights needs 9 entries")
        D = self.D
        if np.linalg.matrix_rank(D.T @ D) < D.shape[1]:
            raise ValidationError("D^T D is singular")
        if self.gamma_override < 0:
            raise ValidationError("gamma_override must be >= 0")
        return self

    @property
    def C(self):
        """Performance output weight on the 9 attitude states, padded with input rows."""
        n_u = len(self.hinf_input_weights)
        return np.vstack([np.diag(self.hinf_state_weights), np.zeros((n_u, 9))])

    @property
    def D(self):
        n_u = len(self.hinf_input_weights)
        return np.vstack([np.zeros((9, n_u)), np.diag(self.hinf_input_weights)])

    def axis(self, name):
        """Per-axis tuple (m, c, k, p, tau0, tauinf)."""
        return tuple(getattr(self, f"{k}_{name}")
                     for k in ("m", "c", "k", "p", "tau0", "tauinf"))


def derived_constants(p):
    """Flapping time constant and cross-coupling coefficient.

    Returns
    -------
    tau_mr : float
        Rotor flapping time constant in seconds.
    A_bs : float
        Longitudinal/lateral flapping coupling; the lateral one is ``-A_bs``.
    """
    denom = p.lock_number * p.omega * (3.0 * p.R - 8.0 * p.e_hinge)
    if denom <= 0:
        raise ValidationError("flapping time constant undefined for e_hinge >= 3R/8")
    tau_mr = 48.0 * p.R / denom
    A_bs = 8.0 * p.k_beta / (p.lock_number * p.omega**2 * p.I_beta)
    return tau_mr, A_bs


# ---------------------------------------------------------------- config io

_HELI_KEYS = {f.name: f for f in fields(HelicopterParams)}
_CTRL_KEYS = {f.name: f for f in fields(ControllerParams)}


def _parse_value(key, text, f):
    text = text.strip()
    try:
        if f.type in ("tuple", tuple):
            return tuple(float(v) for v in text.split(",") if v.strip())
        if f.type in ("bool", bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return float(text)
    except ValueError:
        raise ConfigParseError(f"bad value for {key!r}: {text!r}") from None


def parse_config(text, source="<string>"):
    """Parse ``key = value`` text into a dict of raw strings."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigParseError(f"{source}:{lineno}: empty key")
        if key not in _HELI_KEYS and key not in _CTRL_KEYS:
            raise ConfigParseError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigParseError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


@dataclass
class Provenance:
    """Which config keys were read from the file and which were defaulted."""

    source: str
    from_file: set = field(default_factory=set)

    def status(self, key):
        return "file" if key in self.from_file else "defaulted"

    def report(self, heli, ctrl):
        lines = [f"# parameter provenance for {self.source}",
                 "# key = value  [file|defaulted] [measured|engineering default]"]
        for obj in (heli, ctrl):
            for f in fields(obj):
                value = getattr(obj, f.name)
                if isinstance(value, tuple):
                    value = ", ".join(repr(v) for v in value)
                kind = "measured" if f.name in MEASURED_KEYS else "engineering default"
                lines.append(f"{f.name} = {value}  [{self.status(f.name)}] [{kind}]")
        return "\n".join(lines) + "\n"


def params_from_text(text, source="<string>"):
    entries = parse_config(text, source)
    heli_kw, ctrl_kw = {}, {}
    for key, value in entries.items():
        if key in _HELI_KEYS:
            heli_kw[key] = _parse_value(key, value, _HELI_KEYS[key])
        else:
            ctrl_kw[key] = _parse_value(key, value, _CTRL_KEYS[key])
    heli = HelicopterParams(**heli_kw).validate()
    ctrl = ControllerParams(**ctrl_kw).validate()
    return heli, ctrl, Provenance(source, set(entries))


def load_params(path=None, with_provenance=False):
    """Load vehicle and controller parameters from a config file.

    ``path=None`` loads ``default.cfg`` from ``$HELICTL_CONFIG_DIR`` if set,
    else the copy shipped with the package.
    """
    path = Path(path) if path is not None else default_config_path()
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    heli, ctrl, prov = params_from_text(text, str(path))
    if with_provenance:
        return heli, ctrl, prov
    return heli, ctrl


def default_config_path():
    env = os.environ.get(CONFIG_DIR_ENV)
    if env:
        return Path(env) / "default.cfg"
    return Path(__file__).parent / "data" / "default.cfg"


def dump_params(heli, ctrl):
    """Serialize both parameter sets; floats use ``repr`` so reloads are bit-exact."""
    lines = []
    for obj in (heli, ctrl):
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                text = ", ".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = repr(float(value))
            lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def replace(params, **changes):
    """``dataclasses.replace`` followed by validation."""
    return dataclasses.replace(params, **changes).validate()

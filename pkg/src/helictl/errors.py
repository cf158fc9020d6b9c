"""Exception hierarchy shared by every helictl module."""


class HelictlError(Exception):
    """Base class for all errors raised by helictl."""


class ConfigParseError(HelictlError):
    """A configuration or matrix file could not be parsed."""


class ValidationError(HelictlError):
    """A parameter set violates one of its invariants."""


class GimbalLockError(HelictlError):
    """Pitch angle too close to +/-90 deg for Euler-angle kinematics."""


class IntegrationBlowupError(HelictlError):
    """The integrator produced a non-finite state."""


class RotorConvergenceError(HelictlError):
    """The coupled thrust / induced-velocity equations did not converge."""


class TrimError(HelictlError):
    """The trim solver failed to reach the residual tolerance."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class GammaInfeasibleError(HelictlError):
    """No stabilizing positive semi-definite Riccati solution at this gamma."""


class SynthesisError(HelictlError):
    """Controller synthesis failed."""


class DCGainError(SynthesisError):
    """The closed loop has no invertible static gain to the tracked outputs."""


class CertificateError(HelictlError):
    """A frequency-sweep norm estimate exceeded the attenuation level."""


class EnvelopeViolationError(HelictlError):
    """A combined position error left its prescribed-performance envelope."""

    def __init__(self, message, axis=None, margins=None):
        super().__init__(message)
        self.axis = axis
        self.margins = margins

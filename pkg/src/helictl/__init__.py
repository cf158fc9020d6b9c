"""Small-helicopter hover simulation with an H-infinity attitude loop and a
prescribed-performance position loop."""

from .dynamics import ControlInputs, VehicleState, rotation_matrix, state_derivative, step
from .errors import HelictlError
from .hinf import GainSet, attitude_control, synthesize, verify_hinf_norm
from .linearize import LinearModel, TrimPoint, find_trim, jacobians
from .outer_loop import OuterLoop, PerformanceEnvelope
from .params import ControllerParams, HelicopterParams, load_params
from .scenario import FlightLog, Scenario, flight_metrics, paper_hover, prepare, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ControlInputs", "ControllerParams", "FlightLog", "GainSet", "HelicopterParams",
    "HelictlError", "LinearModel", "OuterLoop", "PerformanceEnvelope", "Scenario",
    "TrimPoint", "VehicleState", "attitude_control", "find_trim", "flight_metrics",
    "jacobians", "load_params", "paper_hover", "prepare", "rotation_matrix", "run_scenario",
    "state_derivative", "step", "synthesize", "verify_hinf_norm",
]

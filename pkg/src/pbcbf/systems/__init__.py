"""Built-in control-affine models and the shared system abstraction."""

from .base import AffineSystem, Box, InputBounds, NormBall, jacobian, linearize
from .acc import acc_system, polynomial_resistance
from .aircraft import (
    AircraftParams,
    aircraft_longitudinal,
    angle_of_attack,
    trim_solve,
    trim_state,
)
from .double_integrator import (
    accel_to_polar_input,
    cartesian_to_polar,
    double_integrator_polar,
    polar_to_cartesian,
)

__all__ = [
    "AffineSystem",
    "AircraftParams",
    "Box",
    "InputBounds",
    "NormBall",
    "acc_system",
    "accel_to_polar_input",
    "aircraft_longitudinal",
    "angle_of_attack",
    "cartesian_to_polar",
    "double_integrator_polar",
    "jacobian",
    "linearize",
    "polar_to_cartesian",
    "polynomial_resistance",
    "trim_solve",
    "trim_state",
]

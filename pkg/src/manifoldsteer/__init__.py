"""Leading-order stable/unstable manifold directions in nearly autonomous
planar flows, control fields that steer them, and FTLE-based checks."""
from .errors import ConfigError, ManifoldSteerError, NumericalError
from .flow_model import (
    BumpFunction,
    PlanarVelocityField,
    SaddleFrame,
    find_saddle,
    perp,
    rotate,
    superpose,
    taylor_green,
)
from .manifold import alpha_projections, hyperbolic_trajectory, manifold_state, tangent_angles
from .control import Anchor, ControlProgram, compile_control_field

__version__ = "0.1.0"

"""Exception hierarchy.

Every failure the library raises derives from :class:`ManifoldSteerError`.
Numerical failures (non-convergence, degenerate geometry) derive from
:class:`NumericalError`; the CLI maps them to exit code 1, and everything
else that is a bad input maps to exit code 2.
"""


class ManifoldSteerError(Exception):
    pass


class NumericalError(ManifoldSteerError):
    pass


class ConfigError(ManifoldSteerError):
    pass


class NoConvergence(NumericalError):
    pass


class NotSaddle(NumericalError):
    pass


class DegenerateFrame(NumericalError):
    pass


class EmptyGrid(ConfigError):
    pass


class NonUniformTimeGrid(ConfigError):
    pass


class NotNearlyAutonomous(NumericalError):
    pass


class DivergentWeight(ConfigError):
    pass


class ToleranceNotMet(NumericalError):
    pass


class OutOfDomain(ConfigError):
    pass


class LeftDomain(NumericalError):
    pass


class DegenerateHorizon(ConfigError):
    pass


class SingularFundamentalMatrix(NumericalError):
    pass


class AnchorsTooClose(ConfigError):
    pass


class EmptyWindow(NumericalError):
    pass


class NoRidge(NumericalError):
    pass


class DegeneratePoints(NumericalError):
    pass


class BelowResolutionFloor(NumericalError):
    pass


class InsufficientPoints(ConfigError):
    pass


class OutsideWindow(ConfigError):
    pass

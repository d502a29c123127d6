"""Exception hierarchy shared by all modules.

Every numerical error derives from ``NumericalFailure`` so that the command
line front end can map it to a single exit status; configuration problems
derive from ``ConfigError``.
"""


class NumericalFailure(Exception):
    """Base class for numerical errors raised by the library."""


class ConfigError(Exception):
    """Invalid run configuration."""


# special functions
class PoleAtNonpositiveInteger(NumericalFailure):
    pass


class NonPositiveArgument(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


# geometry
class BadPanelCount(NumericalFailure):
    pass


class SelfIntersecting(NumericalFailure):
    pass


class NonPositiveRadius(NumericalFailure):
    pass


class EmptyWindow(NumericalFailure):
    pass


class ArcVanishes(NumericalFailure):
    pass


class OutsideTube(NumericalFailure):
    pass


# Landau objects
class OnLandauLevel(NumericalFailure):
    pass


class CoincidentPoints(NumericalFailure):
    pass


class BadIndex(NumericalFailure):
    pass


# boundary operators
class TargetTooClose(NumericalFailure):
    pass


class SingularBS(NumericalFailure):
    pass


# spectral solver
class NoEigenvaluesFound(NumericalFailure):
    pass


class TooFewEigenvalues(NumericalFailure):
    pass


class TruncationMismatch(NumericalFailure):
    pass


# Toeplitz
class TooFewValues(NumericalFailure):
    pass


# capacity
class PointMassDiagonal(NumericalFailure):
    pass


class SolverStalled(NumericalFailure):
    pass


# squeezed potentials
class BadEpsilon(NumericalFailure):
    pass


class BasisTooSmall(NumericalFailure):
    pass


# plotting
class EmptySeries(NumericalFailure):
    pass


class InvariantViolation(NumericalFailure):
    pass

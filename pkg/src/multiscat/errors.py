"""Exception and warning types raised by the solver."""

from __future__ import annotations


class ScatteringError(Exception):
    """Base class for all solver errors."""


class ProfileError(ScatteringError):
    """The medium description is malformed or failed validation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateThresholds(ScatteringError):
    """Two eigenvalues of a tail (or local) eigenproblem coincide."""


class AtThreshold(ScatteringError):
    """The spectral parameter sits on (or too close to) a channel threshold."""

    def __init__(self, message, side=None, channel=None, threshold=None):
        super().__init__(message)
        self.side = side
        self.channel = channel
        self.threshold = threshold


class IntegratorStep(ScatteringError):
    """The step controller produced an unusable step."""


class SingularPhiPlus(ScatteringError):
    """det(Phi_+) is numerically zero, so t and r are undefined."""


class DegenerateSplit(ScatteringError):
    """Open/closed relations need open and closed channels that are not present."""


class TurningPoint(ScatteringError):
    """Lambda_s(z) - lambda changes sign on the grid."""


class NotPiecewiseConstant(ScatteringError):
    """The transfer-matrix solver only accepts constant layers."""


class LayerResonance(ScatteringError):
    """A local momentum inside a layer vanishes."""


class ScanTooCoarse(UserWarning):
    """Two roots of the bound-state determinant fell inside one scan cell."""

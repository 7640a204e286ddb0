"""Multichannel 1-D scattering: Jost solutions, transition and S-matrices, bound states."""

from .bound import BoundState, bound_state_scan, verify_bound_state
from .errors import (AtThreshold, DegenerateSplit, DegenerateThresholds, IntegratorStep, LayerResonance,
                     NotPiecewiseConstant, ProfileError, ScanTooCoarse, ScatteringError, SingularPhiPlus,
                     TurningPoint)
from .jost import GridSpec, JostField, integrate_jost, wronskian, wronskian_drift
from .medium import Layer, MediumProfile, diagonalize_ends, load_profile, save_profile, validate_profile
from .oracle import transfer_matrix_solve
from .smatrix import (ScatteringSet, closed_open_residuals, scattering_matrices, symmetry_residuals,
                      unitarity_residuals)
from .spectral import SpectralPoint, channel_momenta, classify_channels
from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .transition import (TransitionSet, bilinear_residuals, conjugation_residuals, monodromy_residual,
                         solve_transition, transition_matrices)

__all__ = [
    "AtThreshold", "BoundState", "DEFAULT_TOLERANCES", "DegenerateSplit", "DegenerateThresholds", "GridSpec",
    "IntegratorStep", "JostField", "Layer", "LayerResonance", "MediumProfile", "NotPiecewiseConstant",
    "ProfileError", "ScanTooCoarse", "ScatteringError", "ScatteringSet", "SingularPhiPlus", "SpectralPoint",
    "Tolerances", "TransitionSet", "TurningPoint", "bilinear_residuals", "bound_state_scan", "channel_momenta",
    "classify_channels", "closed_open_residuals", "conjugation_residuals", "diagonalize_ends", "integrate_jost",
    "load_profile", "monodromy_residual", "save_profile", "scattering_matrices", "solve_transition",
    "symmetry_residuals", "transfer_matrix_solve", "transition_matrices", "unitarity_residuals",
    "validate_profile", "verify_bound_state", "wronskian", "wronskian_drift",
]

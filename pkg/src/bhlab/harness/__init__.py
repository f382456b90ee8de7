"""Solution families and empirical boundary constants."""

from .estimators import (CSV_COLUMNS, NOISE_REL, ConstantEstimate, EstimateError, carleson_regime,
                         estimate_backward_harnack, estimate_boundary_harnack_elliptic, estimate_carleson,
                         estimate_global_comparison, estimate_holder_decay, estimate_interior_harnack,
                         estimate_linear_rate, estimate_local_comparison)
from .family import DEFAULT_P_LIST, FamilyError, Member, SolutionFamily, build_family
from .refinement import StabilityReport, refinement_study

__all__ = [
    "CSV_COLUMNS", "NOISE_REL", "ConstantEstimate", "EstimateError", "carleson_regime",
    "estimate_backward_harnack", "estimate_boundary_harnack_elliptic", "estimate_carleson",
    "estimate_global_comparison", "estimate_holder_decay", "estimate_interior_harnack",
    "estimate_linear_rate", "estimate_local_comparison", "DEFAULT_P_LIST", "FamilyError", "Member",
    "SolutionFamily", "build_family", "StabilityReport", "refinement_study",
]

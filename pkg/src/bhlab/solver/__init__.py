"""Lattice solvers and oracles.

The hot loops live in a compiled extension (``_kernels``); the numpy twin
``_kernels_py`` is used when the extension is missing or when the
environment variable ``BHLAB_PURE_PYTHON=1`` is set.  Both produce
bit-identical results.
"""

import os

if os.environ.get("BHLAB_PURE_PYTHON", "") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND

from .core import (CFLError, Discretization, GridMismatch, GridSpec, discrete_comparison_check,  # noqa: E402
                   extremal_residuals, get_kernels, solve, step)
from .field import GridField  # noqa: E402
from .lattice import Lattice, stencil_lines  # noqa: E402
from .meanvalue import (CROSS_SOLVER_BAND, cross_solver_band, mean_value_consistency_check,  # noqa: E402
                        mean_value_solve, mean_value_weights)
from .problem import CoefficientField, ProblemSpec, line_weights  # noqa: E402
from .reference import heat_reference, sector_eigenfunction, sector_eigenvalue  # noqa: E402

__all__ = [
    "BACKEND", "kernels", "CFLError", "Discretization", "GridMismatch", "GridSpec", "GridField", "Lattice",
    "stencil_lines", "ProblemSpec", "CoefficientField", "line_weights", "solve", "step",
    "discrete_comparison_check", "extremal_residuals", "get_kernels", "heat_reference",
    "sector_eigenfunction", "sector_eigenvalue",
    "mean_value_solve", "mean_value_consistency_check", "mean_value_weights", "CROSS_SOLVER_BAND",
    "cross_solver_band",
]

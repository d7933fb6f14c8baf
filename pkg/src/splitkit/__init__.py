"""Operator-splitting solvers for l1-regularized least squares.

Classical, weighted and proximal ADMM variants plus the inverse-free
dual-feedback proximal gradient scheme, on float64 or bit-accurate
fixed-point arithmetic, with convergence-bound and stability analysis.
"""

from .fixedpoint import OverflowMode, QFormat, QuantizeMode
from .kernels import BACKEND
from .problem import CompositeProblem, LassoSpec, generate_lasso
from .solvers import Scheme, SolverConfig, flop_model, run

__all__ = [
    "BACKEND", "CompositeProblem", "LassoSpec", "OverflowMode", "QFormat", "QuantizeMode",
    "Scheme", "SolverConfig", "flop_model", "generate_lasso", "run",
]
__version__ = "0.1.0"

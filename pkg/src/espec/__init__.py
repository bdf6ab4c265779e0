"""Point spectrum of damped elastic wave operators on truncated boxes.

Finite-difference Lamé matrices, the quadratic pencil ``z^2 + z a - Lame``
through its companion linearization, dense and shift-invert eigensolvers,
enclosure regions for the computed eigenvalues, and a scenario runner.
"""

__version__ = "0.1.0"

from .errors import EspecError
from .model import DampingField, FieldKind, Grid, LameParams, lp_norm, make_params, sample_field
from .discretize import OperatorMatrix, assemble_lame
from .eigensolve import EigenResult, SolveOptions, solve_arnoldi, solve_dense
from .pencil import DampedPencil, PencilEigenpair, build_pencil, pencil_spectrum

__all__ = [
    "EspecError", "DampingField", "FieldKind", "Grid", "LameParams", "lp_norm", "make_params",
    "sample_field", "OperatorMatrix", "assemble_lame", "EigenResult", "SolveOptions",
    "solve_arnoldi", "solve_dense", "DampedPencil", "PencilEigenpair", "build_pencil",
    "pencil_spectrum",
]

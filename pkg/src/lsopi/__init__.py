"""Decide linearizability of two-input control-affine systems by successive
one-fold prolongations that gain involutivity at each step."""

from .engine import CaseLabel, Verdict, classify, run_lsopi
from .funlinalg import GenericityError, Sampler
from .geometry import ControlAffineSystem, Distribution, Filtration, VectorField, lie_bracket
from .symcore import Expr, parse_expr

__all__ = [
    "CaseLabel",
    "ControlAffineSystem",
    "Distribution",
    "Expr",
    "Filtration",
    "GenericityError",
    "Sampler",
    "VectorField",
    "Verdict",
    "classify",
    "lie_bracket",
    "parse_expr",
    "run_lsopi",
]

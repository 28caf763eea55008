"""Numerical verification of norm-resolvent convergence for thin non-Hermitian Robin layers."""

__version__ = "0.1.0"

from .assembly import LayerGrid, OperatorSet, assemble_operators, build_grid  # noqa: E402
from .model import BoundaryCoupling, HypothesisViolation, theorem_constants  # noqa: E402

__all__ = ["BoundaryCoupling", "HypothesisViolation", "LayerGrid", "OperatorSet",
           "assemble_operators", "build_grid", "theorem_constants", "__version__"]

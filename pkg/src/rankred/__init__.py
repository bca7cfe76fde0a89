"""Compile polynomial systems into minrank matrices and tensors, and check the
rank equivalences exactly over small fields."""

from .fields import ConcreteMatrix, FieldSpec, matrix_rank, solve_affine
from .minrank import SymbolicMatrix, build_matrix, minrank_bruteforce, verify_observation
from .ranklab import absorb_slice, absorb_slices, eig0, realization_space, tensor_rank_leq
from .syslang import QuadraticSystem, check_assumptions, normalize, parse_source, quadratize
from .tensorize import Tensor, build_tensor, expansion_from_assignment, verify_expansion

__all__ = [
    "ConcreteMatrix",
    "FieldSpec",
    "QuadraticSystem",
    "SymbolicMatrix",
    "Tensor",
    "absorb_slice",
    "absorb_slices",
    "build_matrix",
    "build_tensor",
    "check_assumptions",
    "eig0",
    "expansion_from_assignment",
    "matrix_rank",
    "minrank_bruteforce",
    "normalize",
    "parse_source",
    "quadratize",
    "realization_space",
    "solve_affine",
    "tensor_rank_leq",
    "verify_expansion",
    "verify_observation",
]

"""Symmetries of stochastic differential equations under stochastic
transformations (state map, noise rotation, random time change)."""

from .expr import (
    Domain, DimensionError, ExprError, ParseError, UndecidableError, UndefinedError,
    differentiate, evaluate, evaluate_points, is_zero, parse, simplify, substitute, to_text, zero_test,
)
from .io import ModelFile, ModelFileError, load, loads, save
from .model import (
    FiniteTransformation, InfinitesimalTransformation, Sde, generator_apply, jacobian, lie_bracket,
    mixed_bracket, validate,
)
from .simulate import (
    PathBundle, SimConfig, brownian_check, composition_pathwise_check, euler_maruyama, process_transform,
    two_sample_check,
)
from .symmetry import (
    ResidualReport, StructureConstants, bracket, closure_check, determining_residuals,
    finite_symmetry_check, generator_commutation_check, is_strong_symmetry, is_weak_symmetry,
    strong_reduction_solve, strong_reduction_verify,
)
from .transform import FlowResult, compose, flow, invert, pullback, pushforward, transform_sde

__version__ = "0.1.0"

__all__ = [
    "bracket",
    "brownian_check",
    "closure_check",
    "compose",
    "composition_pathwise_check",
    "determining_residuals",
    "differentiate",
    "DimensionError",
    "Domain",
    "euler_maruyama",
    "evaluate",
    "evaluate_points",
    "ExprError",
    "finite_symmetry_check",
    "FiniteTransformation",
    "flow",
    "FlowResult",
    "generator_apply",
    "generator_commutation_check",
    "InfinitesimalTransformation",
    "invert",
    "is_strong_symmetry",
    "is_weak_symmetry",
    "is_zero",
    "jacobian",
    "lie_bracket",
    "load",
    "loads",
    "mixed_bracket",
    "ModelFile",
    "ModelFileError",
    "parse",
    "ParseError",
    "PathBundle",
    "process_transform",
    "pullback",
    "pushforward",
    "ResidualReport",
    "save",
    "Sde",
    "SimConfig",
    "simplify",
    "strong_reduction_solve",
    "strong_reduction_verify",
    "StructureConstants",
    "substitute",
    "to_text",
    "transform_sde",
    "two_sample_check",
    "UndecidableError",
    "UndefinedError",
    "validate",
    "zero_test",
]

"""
Compilers Package
=================
Constructions that turn functions into deep narrow networks.

This package contains:
- pwl_compiler: increasing PWL functions as width-1 Leaky-ReLU networks
- ridge: ridge sums and the random-feature least-squares fitter
- coupling_compiler: ridge adds, translation adds, affine coupling flows
- sct_compiler: slice induction with the sharpening iteration
- lifts: width d+1 (ReLU) and d+2 (general activation) single-coordinate maps
- inn_compiler: stage-by-stage compilation of invertible programs
- pipeline: inclusion, projection and width accounting end to end
- expressions: numpy expression oracles for program files
"""

from .coupling_compiler import (
    AcfSpec, acf_inverse, build_ridge_add, build_translation_add, compile_acf, evaluate_acf,
)
from .expressions import ExpressionOracle, VectorExpressionOracle
from .inn_compiler import (
    AcfStage, AffineStage, InnProgram, SctStage, compile_inn, evaluate_inn_program,
)
from .lifts import lift_acf_general, lift_general, lift_relu
from .pipeline import (
    ActivationClass, DiffeoTarget, GeneralClass, LeakyReluClass, ReluClass, alpha_of,
    compile_pipeline, include, min_width_bound, parse_activation_class, project,
    verification_box,
)
from .pwl_compiler import (
    PwlFunction, compile_increasing_pwl, eval_pwl, generalize_activation, pwl_approximate,
)
from .ridge import RidgeSum, RidgeTerm, fit_ridge
from .sct_compiler import (
    SharpenState, compile_sct_leakyrelu, compile_sct_with_report, sharpen_step, sharpen_until,
)

__all__ = [
    'PwlFunction', 'eval_pwl', 'compile_increasing_pwl', 'pwl_approximate', 'generalize_activation',
    'RidgeTerm', 'RidgeSum', 'fit_ridge',
    'AcfSpec', 'build_ridge_add', 'build_translation_add', 'compile_acf', 'evaluate_acf', 'acf_inverse',
    'SharpenState', 'sharpen_step', 'sharpen_until', 'compile_sct_leakyrelu', 'compile_sct_with_report',
    'lift_relu', 'lift_general', 'lift_acf_general',
    'AffineStage', 'AcfStage', 'SctStage', 'InnProgram', 'compile_inn', 'evaluate_inn_program',
    'ActivationClass', 'LeakyReluClass', 'ReluClass', 'GeneralClass', 'parse_activation_class',
    'alpha_of', 'min_width_bound', 'include', 'project', 'DiffeoTarget', 'verification_box',
    'compile_pipeline',
    'ExpressionOracle', 'VectorExpressionOracle',
]

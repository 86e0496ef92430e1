"""Numerical verification of multi-function Gaussian hypercontractivity and related inequalities."""

__version__ = "0.1.0"

from .gaussian import BlockCovariance, expect_mc, expect_quadrature, wick_moment
from .hermite import HermitePoly, heat_smooth, hermite_basis, ou_generator, random_poly
from .local import (HyperParams, check_complex_local, check_fb_complex_local, check_fb_real_local,
                    check_gaussian_jensen, check_imaginary_sandwich, check_real_local)
from .mehler import ExpLinear, GaussPoly, Polynomial, ShiftedPositive, mehler_transform, noise_operator
from .pairs import FunctionPair, InnerFunction, OuterFunction
from .results import Comparison, ConditionReport
from .verify import (Budget, SharpConstants, perturbation_witness, verify_chaos_moments,
                     verify_complex_hc, verify_log_sobolev, verify_noisy_jensen,
                     verify_pq_hausdorff_young, verify_real_hc, verify_rho_hy)
from .flow import FlowSpec, certify_monotone
from .borell import borell_M, verify_noisy_borell

__all__ = [
    "BlockCovariance",
    "expect_mc",
    "expect_quadrature",
    "wick_moment",
    "HermitePoly",
    "heat_smooth",
    "hermite_basis",
    "ou_generator",
    "random_poly",
    "HyperParams",
    "check_complex_local",
    "check_fb_complex_local",
    "check_fb_real_local",
    "check_gaussian_jensen",
    "check_imaginary_sandwich",
    "check_real_local",
    "ExpLinear",
    "GaussPoly",
    "Polynomial",
    "ShiftedPositive",
    "mehler_transform",
    "noise_operator",
    "FunctionPair",
    "InnerFunction",
    "OuterFunction",
    "Comparison",
    "ConditionReport",
    "Budget",
    "SharpConstants",
    "perturbation_witness",
    "verify_chaos_moments",
    "verify_complex_hc",
    "verify_log_sobolev",
    "verify_noisy_jensen",
    "verify_pq_hausdorff_young",
    "verify_real_hc",
    "verify_rho_hy",
    "FlowSpec",
    "certify_monotone",
    "borell_M",
    "verify_noisy_borell",
]

"""Assortment and pricing optimization under generalized nested logit demand."""

from __future__ import annotations

from .assortment import SolverConfig, solve_gnl_bisection, solve_gnl_logconvex, solve_mgnl, solve_zero_optout
from .bnb import BnbConfig, SolveResult
from .models import GnlModel, LinearConstraintSet, MgnlModel, NestStructure, build_gnl_model, expected_revenue
from .pricing import PriceBounds, PriceLadder, solve_jap_cp, solve_jap_dp

__all__ = [
    "BnbConfig",
    "GnlModel",
    "LinearConstraintSet",
    "MgnlModel",
    "NestStructure",
    "PriceBounds",
    "PriceLadder",
    "SolveResult",
    "SolverConfig",
    "build_gnl_model",
    "expected_revenue",
    "solve_gnl_bisection",
    "solve_gnl_logconvex",
    "solve_jap_cp",
    "solve_jap_dp",
    "solve_mgnl",
    "solve_zero_optout",
]

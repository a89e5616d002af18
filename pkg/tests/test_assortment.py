"""Tests for the exact assortment solvers against exhaustive enumeration."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gnlopt.assortment import (
    BisectionState,
    SolverConfig,
    bisection_subproblem,
    mixed_beta,
    solve_gnl_bisection,
    solve_gnl_logconvex,
    solve_mgnl,
    solve_zero_optout,
)
from gnlopt.bnb import BnbConfig
from gnlopt.const import KIND_GNL, KIND_MGNL, TERMINATION_OPTIMAL, TERMINATION_TIME_LIMIT
from gnlopt.errors import InfeasibleError
from gnlopt.instances import GenSpec, generate
from gnlopt.models import LinearConstraintSet, MgnlModel, expected_revenue, mgnl_expected_revenue
from gnlopt.oracle import enumerate_assortments
from gnlopt.reformulate import choose_beta


def _gnl(seed: int, m: int = 6, n_nests: int = 2):
    return generate(GenSpec(KIND_GNL, m, n_nests, seed))


def _assert_matches_oracle(result, expected: float) -> None:
    assert result.termination == TERMINATION_OPTIMAL
    assert result.objective == pytest.approx(expected, rel=1e-6, abs=1e-9)
    assert result.bound >= result.objective - 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_logconvex_matches_oracle(seed: int) -> None:
    """The log-convex solver should reach the enumerated optimum."""
    instance = _gnl(seed, m=7, n_nests=3)
    oracle = enumerate_assortments(instance.model, instance.constraints)
    result = solve_gnl_logconvex(instance.model, instance.constraints, choose_beta(instance.model))
    _assert_matches_oracle(result, oracle.objective)
    assert instance.constraints.is_satisfied(np.asarray(result.assortment, dtype=np.float64))
    assert expected_revenue(instance.model, result.assortment) == pytest.approx(result.objective)


@pytest.mark.parametrize("seed", range(3))
def test_bisection_matches_oracle_and_logconvex(seed: int) -> None:
    """Bisection should agree with enumeration and with the log-convex path."""
    instance = _gnl(10 + seed)
    beta = choose_beta(instance.model)
    oracle = enumerate_assortments(instance.model, instance.constraints)
    bisection = solve_gnl_bisection(instance.model, instance.constraints, beta, tol=1e-8)
    logconvex = solve_gnl_logconvex(instance.model, instance.constraints, beta)
    _assert_matches_oracle(bisection, oracle.objective)
    assert bisection.objective == pytest.approx(logconvex.objective, rel=1e-6)


def test_bisection_bracket_halves_exactly() -> None:
    """After k steps the bracket width should be beta * 2**-k exactly."""
    instance = _gnl(21)
    beta = choose_beta(instance.model)
    result = solve_gnl_bisection(instance.model, instance.constraints, beta, tol=1e-6)
    widths = result.extras["widths"]
    assert len(widths) == result.iterations
    for k, width in enumerate(widths, start=1):
        assert width == beta * 2.0**-k
    assert result.extras["delta_hi"] - result.extras["delta_lo"] <= 1e-6 * max(1.0, beta) + 1e-12
    assert result.gap <= 1e-6 * max(1.0, beta) + 1e-9


def test_bisection_state_arithmetic() -> None:
    """The bracket state should keep the side that still contains the optimum."""
    state = BisectionState(beta=8.0, tolerance=0.5)
    assert state.midpoint == 4.0
    state.halve(achievable=False)
    assert (state.delta_lo, state.delta_hi) == (4.0, 8.0)
    assert state.midpoint == 6.0
    state.halve(achievable=True)
    assert (state.delta_lo, state.delta_hi) == (4.0, 6.0)
    assert state.widths == [4.0, 2.0]
    state.record((1, 0), 3.0)
    state.record((0, 1), 2.0)
    assert state.best_assortment == (1, 0)


def test_bisection_subproblem_sign_changes_at_optimum() -> None:
    """G should be positive below beta minus the optimum and negative above it."""
    instance = _gnl(31)
    beta = choose_beta(instance.model)
    best = enumerate_assortments(instance.model, instance.constraints).objective
    above, x_above, _ = bisection_subproblem(instance.model, instance.constraints, beta, beta - best + 0.1)
    below, _, _ = bisection_subproblem(instance.model, instance.constraints, beta, beta - best - 0.1)
    assert above < 0.0
    assert below > 0.0
    assert x_above is not None
    with pytest.raises(ValueError):
        bisection_subproblem(instance.model, instance.constraints, beta, -1.0)


def test_cut_switches_do_not_change_the_optimum() -> None:
    """Disabling submodular cuts or enabling the joint logsum cut should keep the optimum."""
    instance = _gnl(41, m=7, n_nests=3)
    beta = choose_beta(instance.model)
    default = solve_gnl_logconvex(instance.model, instance.constraints, beta)
    without_sc = solve_gnl_logconvex(instance.model, instance.constraints, beta, SolverConfig(use_sc_cuts=False))
    with_joint = solve_gnl_logconvex(instance.model, instance.constraints, beta, SolverConfig(use_joint_logsum=True))
    assert without_sc.objective == pytest.approx(default.objective, abs=1e-8)
    assert with_joint.objective == pytest.approx(default.objective, abs=1e-8)
    assert without_sc.family_counts()["sc"] == 0


@pytest.mark.parametrize("seed", range(3))
def test_mgnl_matches_oracle(seed: int) -> None:
    """The mixed solver should reach the enumerated mixture optimum."""
    instance = generate(GenSpec(KIND_MGNL, 6, 2, 50 + seed, T=2 + seed % 2))
    mixed = instance.model
    oracle = enumerate_assortments(mixed, instance.constraints)
    result = solve_mgnl(mixed, instance.constraints, mixed_beta(mixed))
    _assert_matches_oracle(result, oracle.objective)
    assert mgnl_expected_revenue(mixed, result.assortment) == pytest.approx(result.objective)


def test_single_segment_mixture_equals_gnl() -> None:
    """A one-segment mixture with unit weight should report the GNL optimum."""
    instance = _gnl(61)
    model = instance.model
    mixed = MgnlModel(segments=(model,), theta=[1.0])
    assert mixed_beta(mixed) == choose_beta(model)
    single = solve_gnl_logconvex(model, instance.constraints, choose_beta(model))
    wrapped = solve_mgnl(mixed, instance.constraints, mixed_beta(mixed))
    assert wrapped.objective == pytest.approx(single.objective, abs=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_zero_optout_matches_oracle(seed: int) -> None:
    """The floored solver should match enumeration where empty nests contribute nothing."""
    instance = generate(GenSpec(KIND_GNL, 6, 3, 70 + seed, zero_optout_nests=1))
    model = instance.model
    assert model.has_zero_optout
    oracle = enumerate_assortments(model, instance.constraints, allow_empty_nests=True)
    result = solve_zero_optout(model, instance.constraints, choose_beta(model))
    _assert_matches_oracle(result, oracle.objective)


def test_zero_optout_floor_does_not_move_the_optimum() -> None:
    """Halving the nest floor should leave the optimal revenue unchanged."""
    instance = generate(GenSpec(KIND_GNL, 6, 3, 80, zero_optout_nests=1))
    beta = choose_beta(instance.model)
    coarse = solve_zero_optout(instance.model, instance.constraints, beta, SolverConfig(floor_fraction=0.5))
    fine = solve_zero_optout(instance.model, instance.constraints, beta, SolverConfig(floor_fraction=0.25))
    assert abs(coarse.objective - fine.objective) < 1e-8


def test_infeasible_constraints_raise() -> None:
    """Constraints that exclude every offer set should raise an infeasibility error."""
    instance = _gnl(91, m=4)
    m = instance.model.m
    constraints = LinearConstraintSet(a=np.vstack([np.ones(m), -np.ones(m)]), b=np.array([0.0, -1.0]))
    with pytest.raises(InfeasibleError):
        solve_gnl_logconvex(instance.model, constraints, choose_beta(instance.model))


def test_time_limit_reports_honest_gap() -> None:
    """A tiny time limit should stop early with a bound no smaller than the incumbent."""
    instance = _gnl(93, m=10, n_nests=3)
    config = SolverConfig(bnb=BnbConfig(time_limit=1e-9))
    result = solve_gnl_logconvex(instance.model, instance.constraints, choose_beta(instance.model), config)
    assert result.termination == TERMINATION_TIME_LIMIT
    assert result.bound >= result.objective - 1e-9
    optimum = enumerate_assortments(instance.model, instance.constraints).objective
    assert result.bound >= optimum - 1e-6
    assert math.isfinite(result.gap) or result.objective == -math.inf


def test_unconstrained_optimum() -> None:
    """Without constraints the solver should still reach the enumerated optimum."""
    instance = _gnl(95)
    oracle = enumerate_assortments(instance.model)
    result = solve_gnl_logconvex(instance.model, None, choose_beta(instance.model))
    _assert_matches_oracle(result, oracle.objective)


@pytest.mark.slow
@pytest.mark.parametrize("m", (6, 8, 10, 12))
@pytest.mark.parametrize("n_nests", (2, 3, 4))
def test_gnl_oracle_battery(m: int, n_nests: int) -> None:
    """Both GNL solvers should match enumeration across product and nest counts."""
    for seed in range(5):
        instance = generate(GenSpec(KIND_GNL, m, n_nests, 1000 + 100 * m + 10 * n_nests + seed))
        beta = choose_beta(instance.model)
        expected = enumerate_assortments(instance.model, instance.constraints).objective
        for result in (
            solve_gnl_logconvex(instance.model, instance.constraints, beta),
            solve_gnl_bisection(instance.model, instance.constraints, beta),
        ):
            assert result.objective == pytest.approx(expected, rel=1e-6, abs=1e-9)


@pytest.mark.slow
def test_scalability_smoke() -> None:
    """A 40-product five-nest instance should solve within a minute."""
    instance = generate(GenSpec(KIND_GNL, 40, 5, 2024))
    result = solve_gnl_logconvex(instance.model, instance.constraints, choose_beta(instance.model))
    assert result.termination == TERMINATION_OPTIMAL
    assert result.seconds < 60.0

"""Tests for the bounded-variable revised simplex kernel."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from gnlopt.errors import BoundsError
from gnlopt.reformulate import SENSE_EQ, SENSE_GE, SENSE_LE
from gnlopt.simplex import LpProblem, LpStatus, format_lp, lp_solve


def _random_problem(seed: int, n: int = 8, rows: int = 6) -> LpProblem:
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 2.0, (rows, n))
    b = rng.uniform(1.0, 5.0, rows)
    return LpProblem(
        c=rng.uniform(-3.0, 3.0, n),
        a=a,
        senses=(SENSE_LE,) * rows,
        rhs=b,
        lower=np.zeros(n),
        upper=rng.uniform(0.5, 4.0, n),
    )


@pytest.mark.parametrize("seed", range(10))
def test_matches_scipy_on_random_bounded_lps(seed: int) -> None:
    """Optimal objectives should agree with HiGHS on feasible bounded LPs."""
    problem = _random_problem(seed)
    solution = lp_solve(problem)
    reference = linprog(
        problem.c, A_ub=problem.a, b_ub=problem.rhs, bounds=list(zip(problem.lower, problem.upper)), method="highs"
    )
    assert solution.status is LpStatus.OPTIMAL
    assert reference.status == 0
    assert solution.objective == pytest.approx(reference.fun, abs=1e-7)
    assert problem.row_violation(solution.x) <= 1e-7


def test_mixed_senses_and_equalities() -> None:
    """Greater-equal and equality rows should be honoured at the optimum."""
    problem = LpProblem.from_rows(
        c=[1.0, 2.0, 3.0],
        rows=[({0: 1.0, 1: 1.0, 2: 1.0}, SENSE_EQ, 2.0), ({1: 1.0, 2: 1.0}, SENSE_GE, 1.0)],
        lower=[0.0, 0.0, 0.0],
        upper=[1.5, 2.0, 2.0],
    )
    solution = lp_solve(problem)
    assert solution.status is LpStatus.OPTIMAL
    assert solution.objective == pytest.approx(1.0 + 2.0)
    assert solution.x == pytest.approx([1.0, 1.0, 0.0])


def test_infeasible_problem_is_reported() -> None:
    """Contradictory rows should give an infeasible status without a point."""
    problem = LpProblem.from_rows(
        c=[1.0, 1.0],
        rows=[({0: 1.0, 1: 1.0}, SENSE_GE, 3.0)],
        lower=[0.0, 0.0],
        upper=[1.0, 1.0],
    )
    solution = lp_solve(problem)
    assert solution.status is LpStatus.INFEASIBLE
    assert solution.x is None
    crossed = problem.with_bounds([0.0, 2.0], [1.0, 1.0])
    assert lp_solve(crossed).status is LpStatus.INFEASIBLE


def test_warm_start_reaches_same_optimum() -> None:
    """Re-solving with the previous basis after tightening a bound should match a cold solve."""
    problem = _random_problem(42)
    first = lp_solve(problem)
    upper = problem.upper.copy()
    upper[int(np.argmax(first.x))] = 0.0
    tightened = problem.with_bounds(problem.lower, upper)
    warm = lp_solve(tightened, first.basis)
    cold = lp_solve(tightened)
    assert warm.objective == pytest.approx(cold.objective, abs=1e-9)


def test_solves_are_deterministic() -> None:
    """Identical inputs should give identical points and iteration counts."""
    problem = _random_problem(7)
    first, second = lp_solve(problem), lp_solve(problem)
    assert np.array_equal(first.x, second.x)
    assert first.iterations == second.iterations


def test_problem_validation() -> None:
    """Unbounded columns and unknown senses should be rejected up front."""
    with pytest.raises(BoundsError):
        LpProblem(c=[1.0], a=np.zeros((0, 1)), senses=(), rhs=[], lower=[0.0], upper=[np.inf])
    with pytest.raises(BoundsError):
        LpProblem.from_rows(c=[1.0], rows=[({0: 1.0}, "<", 1.0)], lower=[0.0], upper=[1.0])


def test_format_lp_lists_bounds_and_rows() -> None:
    """The text dump should carry one line per column and row."""
    problem = LpProblem.from_rows(c=[1.0, -1.0], rows=[({0: 1.0, 1: 2.0}, SENSE_LE, 4.0)], lower=[0.0, 0.0], upper=[1.0, 3.0])
    text = format_lp(problem, names=["a", "b"])
    assert "a 0 1 1" in text
    assert "r0 <= 4 a:1 b:2" in text

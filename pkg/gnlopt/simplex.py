"""Bounded-variable revised simplex for the branch-and-cut masters."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of enum.StrEnum: members are str and print as their value."""

        __str__ = str.__str__
        __format__ = str.__format__
import logging

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import lu_factor, lu_solve

from .const import (
    LP_DEGENERATE_FACTOR,
    LP_FEASIBILITY_TOL,
    LP_MAX_REPAIRS,
    LP_OPTIMALITY_TOL,
    LP_PIVOT_TOL,
    LP_REFACTOR_INTERVAL,
)
from .errors import BoundsError, NumericalFailureError
from .models import FloatArray
from .reformulate import SENSE_EQ, SENSE_GE, SENSE_LE

_LOGGER = logging.getLogger(__name__)

_SENSES = (SENSE_LE, SENSE_GE, SENSE_EQ)
_SINGULAR_TOL = 1e-11
_STEP_TOL = 1e-12


class LpStatus(StrEnum):
    """Outcome of one LP solve."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, slots=True, eq=False)
class LpProblem:
    """min c @ x subject to rows a @ x (sense) rhs and lower <= x <= upper."""

    c: FloatArray
    a: FloatArray
    senses: tuple[str, ...]
    rhs: FloatArray
    lower: FloatArray
    upper: FloatArray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=np.float64)
        n = c.shape[0]
        a = np.asarray(self.a, dtype=np.float64).reshape(-1, n)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        if len(self.senses) != a.shape[0] or self.rhs.shape[0] != a.shape[0]:
            raise BoundsError("row senses and right-hand sides must match the constraint matrix")
        if any(sense not in _SENSES for sense in self.senses):
            raise BoundsError(f"Unsupported row sense in {set(self.senses)}")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise BoundsError("variable bounds must have one entry per column")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise BoundsError("every LP column needs finite bounds")

    @property
    def n_vars(self) -> int:
        return int(self.c.shape[0])

    @property
    def n_rows(self) -> int:
        return int(self.a.shape[0])

    @classmethod
    def from_rows(
        cls,
        c: ArrayLike,
        rows: Iterable[tuple[Mapping[int, float], str, float]],
        lower: ArrayLike,
        upper: ArrayLike,
    ) -> LpProblem:
        """Build a problem from sparse rows given as (coefficients, sense, rhs)."""
        cost = np.asarray(c, dtype=np.float64)
        dense, senses, rhs = _dense_rows(rows, cost.shape[0])
        return cls(c=cost, a=dense, senses=senses, rhs=rhs, lower=lower, upper=upper)

    def with_rows(self, rows: Iterable[tuple[Mapping[int, float], str, float]]) -> LpProblem:
        dense, senses, rhs = _dense_rows(rows, self.n_vars)
        if not senses:
            return self
        return LpProblem(
            c=self.c,
            a=np.vstack([self.a, dense]),
            senses=self.senses + senses,
            rhs=np.concatenate([self.rhs, rhs]),
            lower=self.lower,
            upper=self.upper,
        )

    def with_bounds(self, lower: ArrayLike, upper: ArrayLike) -> LpProblem:
        return LpProblem(c=self.c, a=self.a, senses=self.senses, rhs=self.rhs, lower=lower, upper=upper)

    def row_violation(self, x: FloatArray) -> float:
        """Return the largest absolute row or bound violation at x."""
        worst = float(max(0.0, np.max(self.lower - x, initial=0.0), np.max(x - self.upper, initial=0.0)))
        if self.n_rows:
            activity = self.a @ x
            for sense, value, bound in zip(self.senses, activity, self.rhs):
                if sense == SENSE_LE:
                    worst = max(worst, value - bound)
                elif sense == SENSE_GE:
                    worst = max(worst, bound - value)
                else:
                    worst = max(worst, abs(value - bound))
        return worst


def _dense_rows(
    rows: Iterable[tuple[Mapping[int, float], str, float]], n: int
) -> tuple[FloatArray, tuple[str, ...], FloatArray]:
    dense: list[FloatArray] = []
    senses: list[str] = []
    rhs: list[float] = []
    for coeffs, sense, bound in rows:
        row = np.zeros(n)
        for column, value in coeffs.items():
            row[column] += value
        dense.append(row)
        senses.append(sense)
        rhs.append(float(bound))
    if not dense:
        return np.zeros((0, n)), (), np.zeros(0)
    return np.vstack(dense), tuple(senses), np.asarray(rhs)


@dataclass(frozen=True, slots=True)
class LpBasis:
    """Basic column list and the nonbasic columns sitting at their upper bound.

    Column ids at or past the number of structurals are row logicals.
    """

    basic: tuple[int, ...]
    at_upper: frozenset[int]


@dataclass(frozen=True, slots=True, eq=False)
class LpSolution:
    """Primal result of lp_solve."""

    status: LpStatus
    x: FloatArray | None
    objective: float
    basis: LpBasis | None
    iterations: int


class _SingularBasisError(Exception):
    """Internal signal for a singular basis matrix."""


class _BasisFactor:
    """Dense LU of the basis with a product-form eta file."""

    def __init__(self, matrix: FloatArray) -> None:
        if matrix.shape[0] == 0:
            self._lu = None
        else:
            lu, piv = lu_factor(matrix, check_finite=False)
            diagonal = np.abs(np.diag(lu))
            if diagonal.min() <= _SINGULAR_TOL * max(1.0, float(diagonal.max())):
                raise _SingularBasisError
            self._lu = (lu, piv)
        self._etas: list[tuple[int, FloatArray]] = []

    @property
    def n_updates(self) -> int:
        return len(self._etas)

    def ftran(self, v: FloatArray) -> FloatArray:
        """Solve B w = v."""
        if self._lu is None:
            return v.copy()
        w = lu_solve(self._lu, v, check_finite=False)
        for r, d in self._etas:
            pivot = w[r] / d[r]
            w -= d * pivot
            w[r] = pivot
        return w

    def btran(self, v: FloatArray) -> FloatArray:
        """Solve B^T w = v."""
        if self._lu is None:
            return v.copy()
        w = v.astype(np.float64, copy=True)
        for r, d in reversed(self._etas):
            w[r] = (w[r] - (d @ w - d[r] * w[r])) / d[r]
        return lu_solve(self._lu, w, trans=1, check_finite=False)

    def update(self, r: int, d: FloatArray) -> None:
        self._etas.append((r, d.copy()))


class _RevisedSimplex:
    """One solve of the bounded-variable revised simplex in range form A x - r = 0."""

    def __init__(self, problem: LpProblem, warm_start: LpBasis | None) -> None:
        p, n = problem.n_rows, problem.n_vars
        self.n = n
        self.p = p
        self.matrix = np.hstack([problem.a, -np.eye(p)])
        row_lo = np.where(np.asarray([s != SENSE_LE for s in problem.senses], dtype=bool), problem.rhs, -np.inf)
        row_hi = np.where(np.asarray([s != SENSE_GE for s in problem.senses], dtype=bool), problem.rhs, np.inf)
        self.lower = np.concatenate([problem.lower, row_lo])
        self.upper = np.concatenate([problem.upper, row_hi])
        self.cost = np.concatenate([problem.c, np.zeros(p)])
        self.iterations = 0
        self.repairs = 0
        self.degenerate_run = 0
        if warm_start is None or not self._load_basis(warm_start):
            self._slack_basis()
        try:
            self._refactor()
        except _SingularBasisError:
            _LOGGER.debug("Warm-start basis is singular, falling back to the slack basis")
            self._slack_basis()
            self._refactor()

    def _slack_basis(self) -> None:
        self.basis = np.arange(self.n, self.n + self.p)
        self.is_basic = np.zeros(self.n + self.p, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.n + self.p, dtype=bool)
        self._sanitize_nonbasic()

    def _load_basis(self, warm_start: LpBasis) -> bool:
        basic = list(warm_start.basic)
        if len(basic) > self.p or any(not 0 <= j < self.n + self.p for j in basic):
            return False
        basic.extend(self.n + r for r in range(len(basic), self.p))
        if len(set(basic)) != self.p:
            return False
        self.basis = np.asarray(basic, dtype=np.int64)
        self.is_basic = np.zeros(self.n + self.p, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.n + self.p, dtype=bool)
        for j in warm_start.at_upper:
            if 0 <= j < self.n + self.p and not self.is_basic[j]:
                self.at_upper[j] = True
        self._sanitize_nonbasic()
        return True

    def _sanitize_nonbasic(self) -> None:
        """Move every nonbasic column onto a finite bound."""
        self.at_upper &= np.isfinite(self.upper)
        self.at_upper |= ~np.isfinite(self.lower)
        self.at_upper &= ~self.is_basic

    def _refactor(self) -> None:
        self.factor = _BasisFactor(self.matrix[:, self.basis])
        self.values = np.where(self.at_upper, self.upper, self.lower)
        self.values[self.is_basic] = 0.0
        self.values[self.basis] = self.factor.ftran(-(self.matrix @ self.values))

    def _repair(self) -> None:
        self.repairs += 1
        if self.repairs > LP_MAX_REPAIRS:
            raise NumericalFailureError(f"LP basis stayed singular after {LP_MAX_REPAIRS} repairs")
        _LOGGER.warning("Singular basis during simplex, restarting from the slack basis")
        self._slack_basis()
        self._refactor()

    def _infeasibility(self) -> tuple[FloatArray, FloatArray]:
        xb = self.values[self.basis]
        below = xb < self.lower[self.basis] - LP_FEASIBILITY_TOL
        above = xb > self.upper[self.basis] + LP_FEASIBILITY_TOL
        return below, above

    def solve(self, max_iterations: int) -> LpStatus:
        while self.iterations < max_iterations:
            if self.factor.n_updates >= LP_REFACTOR_INTERVAL:
                try:
                    self._refactor()
                except _SingularBasisError:
                    self._repair()
            below, above = self._infeasibility()
            phase_one = bool(np.any(below) or np.any(above))
            if phase_one:
                basic_cost = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                column_cost = np.zeros(self.n + self.p)
            else:
                basic_cost = self.cost[self.basis]
                column_cost = self.cost
            duals = self.factor.btran(basic_cost)
            reduced = column_cost - self.matrix.T @ duals
            entering, direction = self._choose_entering(reduced)
            if entering < 0:
                if phase_one:
                    return LpStatus.INFEASIBLE
                if self._verified():
                    return LpStatus.OPTIMAL
                continue
            status = self._step(entering, direction, below, above, phase_one)
            if status is not None:
                return status
            self.iterations += 1
        raise NumericalFailureError(f"simplex iteration limit {max_iterations} reached")

    def _choose_entering(self, reduced: FloatArray) -> tuple[int, float]:
        movable = ~self.is_basic & (self.upper - self.lower > 0.0)
        increase = movable & ~self.at_upper & (reduced < -LP_OPTIMALITY_TOL)
        decrease = movable & self.at_upper & (reduced > LP_OPTIMALITY_TOL)
        candidates = np.flatnonzero(increase | decrease)
        if candidates.size == 0:
            return -1, 0.0
        if self.degenerate_run > LP_DEGENERATE_FACTOR * max(1, self.p):
            entering = int(candidates[0])
        else:
            entering = int(candidates[np.argmax(np.abs(reduced[candidates]))])
        return entering, (1.0 if increase[entering] else -1.0)

    def _step(
        self, q: int, direction: float, below: FloatArray, above: FloatArray, phase_one: bool
    ) -> LpStatus | None:
        alpha = self.factor.ftran(self.matrix[:, q])
        delta = -direction * alpha
        xb = self.values[self.basis]
        lb = self.lower[self.basis]
        ub = self.upper[self.basis]
        ratios = np.full(self.p, np.inf)
        to_upper = np.zeros(self.p, dtype=bool)
        for i in np.flatnonzero(np.abs(delta) > LP_PIVOT_TOL):
            change = delta[i]
            if phase_one and below[i]:
                if change > 0.0:
                    ratios[i] = (lb[i] - xb[i]) / change
            elif phase_one and above[i]:
                if change < 0.0:
                    ratios[i] = (xb[i] - ub[i]) / -change
                    to_upper[i] = True
            elif change < 0.0 and np.isfinite(lb[i]):
                ratios[i] = (xb[i] - lb[i]) / -change
            elif change > 0.0 and np.isfinite(ub[i]):
                ratios[i] = (ub[i] - xb[i]) / change
                to_upper[i] = True
        ratios = np.maximum(ratios, 0.0)
        flip = self.upper[q] - self.lower[q]
        step = min(float(ratios.min(initial=np.inf)), flip)
        if not np.isfinite(step):
            if phase_one:
                raise NumericalFailureError("phase one ray without a blocking row")
            return LpStatus.UNBOUNDED
        self.degenerate_run = self.degenerate_run + 1 if step <= _STEP_TOL else 0
        self.values[self.basis] = xb + delta * step
        self.values[q] += direction * step
        if flip <= step:
            self.at_upper[q] = not self.at_upper[q]
            self.values[q] = self.upper[q] if self.at_upper[q] else self.lower[q]
            return None
        ties = np.flatnonzero(ratios <= step + _STEP_TOL)
        if self.degenerate_run > LP_DEGENERATE_FACTOR * max(1, self.p):
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(delta[ties]))])
        leaving = int(self.basis[r])
        self.is_basic[leaving] = False
        self.at_upper[leaving] = bool(to_upper[r])
        self.values[leaving] = self.upper[leaving] if to_upper[r] else self.lower[leaving]
        self.basis[r] = q
        self.is_basic[q] = True
        self.at_upper[q] = False
        self.factor.update(r, alpha)
        return None

    def _verified(self) -> bool:
        """Refactor, recompute the basic values and confirm feasibility."""
        try:
            self._refactor()
        except _SingularBasisError:
            self._repair()
            return False
        below, above = self._infeasibility()
        return not (np.any(below) or np.any(above))

    def basis_snapshot(self) -> LpBasis:
        return LpBasis(
            basic=tuple(int(j) for j in self.basis),
            at_upper=frozenset(int(j) for j in np.flatnonzero(self.at_upper & ~self.is_basic)),
        )


def lp_solve(problem: LpProblem, warm_start: LpBasis | None = None) -> LpSolution:
    """Solve an LP with finite column bounds; deterministic for identical input."""
    if np.any(problem.lower > problem.upper):
        return LpSolution(LpStatus.INFEASIBLE, None, float("inf"), None, 0)
    engine = _RevisedSimplex(problem, warm_start)
    max_iterations = 50 * (problem.n_vars + problem.n_rows) + 1000
    status = engine.solve(max_iterations)
    if status is not LpStatus.OPTIMAL:
        _LOGGER.debug("LP finished with status %s after %s iterations", status, engine.iterations)
        return LpSolution(status, None, float("inf") if status is LpStatus.INFEASIBLE else float("-inf"), None, engine.iterations)
    x = np.clip(engine.values[: problem.n_vars], problem.lower, problem.upper)
    violation = problem.row_violation(x)
    if violation > LP_FEASIBILITY_TOL * 10:
        raise NumericalFailureError(f"optimal basis violates rows by {violation:.3e}")
    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        objective=float(problem.c @ x),
        basis=engine.basis_snapshot(),
        iterations=engine.iterations,
    )


def format_lp(problem: LpProblem, *, names: Sequence[str] | None = None) -> str:
    """Return a plain-text dump: a bounds block then a rows block.

    Bounds lines read `name lower upper cost`; row lines read
    `row sense rhs name:coef ...` listing nonzero coefficients only.
    """
    labels = list(names) if names is not None else [f"c{j}" for j in range(problem.n_vars)]
    lines = [f"LP columns={problem.n_vars} rows={problem.n_rows}", "BOUNDS"]
    for j in range(problem.n_vars):
        lines.append(f"{labels[j]} {problem.lower[j]:.17g} {problem.upper[j]:.17g} {problem.c[j]:.17g}")
    lines.append("ROWS")
    for r in range(problem.n_rows):
        terms = " ".join(
            f"{labels[j]}:{problem.a[r, j]:.17g}" for j in np.flatnonzero(problem.a[r])
        )
        lines.append(f"r{r} {problem.senses[r]} {problem.rhs[r]:.17g} {terms}".rstrip())
    return "\n".join(lines) + "\n"

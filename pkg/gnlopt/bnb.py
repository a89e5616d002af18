"""Branch and cut over the simplex kernel with a lazy separation callback."""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
import heapq
import logging
import math
import time
from typing import Any

import numpy as np

from .const import (
    ACCEPTANCE_TOL,
    BRANCH_MOST_FRACTIONAL,
    BRANCH_RULES,
    DEFAULT_FRACTIONAL_ROUNDS,
    DEFAULT_INT_TOL,
    DEFAULT_NODE_LIMIT,
    DEFAULT_REL_GAP,
    NODE_BEST_BOUND,
    NODE_DEPTH_FIRST,
    NODE_SELECTIONS,
    TERMINATION_CUT_LIMIT,
    TERMINATION_INFEASIBLE,
    TERMINATION_NODE_LIMIT,
    TERMINATION_OPTIMAL,
    TERMINATION_TIME_LIMIT,
)
from .models import FloatArray
from .reformulate import CutOrigin, LinearCut
from .simplex import LpBasis, LpProblem, LpStatus, lp_solve

_LOGGER = logging.getLogger(__name__)

_MAX_INTEGRAL_ROUNDS = 100


@dataclass(frozen=True, slots=True)
class BnbConfig:
    """Tree-search settings."""

    int_tol: float = DEFAULT_INT_TOL
    rel_gap: float = DEFAULT_REL_GAP
    node_limit: int = DEFAULT_NODE_LIMIT
    time_limit: float | None = None
    node_selection: str = NODE_BEST_BOUND
    branching: str = BRANCH_MOST_FRACTIONAL
    fractional_rounds: int = DEFAULT_FRACTIONAL_ROUNDS

    def __post_init__(self) -> None:
        if not (self.int_tol > 0.0 and self.rel_gap > 0.0):
            raise ValueError("tolerances must be positive")
        if self.node_limit < 1:
            raise ValueError("node_limit must be at least 1")
        if self.time_limit is not None and self.time_limit <= 0.0:
            raise ValueError("time_limit must be positive")
        if self.node_selection not in NODE_SELECTIONS:
            raise ValueError(f"Unsupported node selection: {self.node_selection}")
        if self.branching not in BRANCH_RULES:
            raise ValueError(f"Unsupported branching rule: {self.branching}")
        if self.fractional_rounds < 0:
            raise ValueError("fractional_rounds must be nonnegative")


@dataclass(frozen=True, slots=True)
class Separation:
    """Callback answer: cuts to add and an optional exactly lifted candidate."""

    cuts: tuple[LinearCut, ...] = ()
    candidate: FloatArray | None = None


CutOracle = Callable[[FloatArray, bool], Separation]


def relative_gap(incumbent: float, bound: float, *, maximize: bool = False) -> float:
    """Return (incumbent - bound) / max(1, |incumbent|), sign-adjusted for maximisation."""
    if not math.isfinite(incumbent):
        return math.inf
    difference = bound - incumbent if maximize else incumbent - bound
    return difference / max(1.0, abs(incumbent))


@dataclass(frozen=True, slots=True, eq=False)
class SolveResult:
    """Incumbent, bound and search statistics of one solve."""

    values: FloatArray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    cut_counts: Mapping[str, int]
    seconds: float
    termination: str
    maximize: bool = False
    assortment: tuple[int, ...] | None = None
    prices: tuple[float | None, ...] | None = None
    iterations: int = 0
    extras: Mapping[str, Any] = field(default_factory=dict)

    @property
    def has_incumbent(self) -> bool:
        return self.values is not None or self.assortment is not None

    def family_counts(self) -> dict[str, int]:
        """Return cut counts grouped into oa, sc and mc."""
        totals = {"oa": 0, "sc": 0, "mc": 0}
        for origin, count in self.cut_counts.items():
            totals[CutOrigin(origin).family] += count
        return totals


class CutPool:
    """Globally valid cuts of one solve, deduplicated by key."""

    def __init__(self) -> None:
        self._keys: set[tuple] = set()
        self.cuts: list[LinearCut] = []
        self.counts: Counter[str] = Counter()

    def __len__(self) -> int:
        return len(self.cuts)

    def add(self, cut: LinearCut) -> bool:
        key = cut.dedup_key
        if key in self._keys:
            return False
        self._keys.add(key)
        self.cuts.append(cut)
        self.counts[cut.origin.value] += 1
        return True


def _as_row(cut: LinearCut) -> tuple[Mapping[int, float], str, float]:
    return cut.coeffs, cut.sense, cut.rhs


@dataclass(order=True, slots=True)
class _Node:
    key: tuple
    bound: float = field(compare=False)
    depth: int = field(compare=False)
    fixed_zero: frozenset[int] = field(compare=False)
    fixed_one: frozenset[int] = field(compare=False)
    basis: LpBasis | None = field(compare=False, default=None)


class _StopSearch(Exception):
    """Raised inside node processing when the time limit expires."""


class BranchAndCut:
    """Best-bound (or depth-first) branch and cut with lazy global cuts."""

    def __init__(
        self,
        problem: LpProblem,
        binaries: Iterable[int],
        cut_oracle: CutOracle | None,
        config: BnbConfig,
        *,
        pool: CutPool | None = None,
        initial_cuts: Iterable[LinearCut] = (),
    ) -> None:
        self.config = config
        self.binaries = np.asarray(sorted(set(binaries)), dtype=np.int64)
        if np.any(problem.lower[self.binaries] < 0.0) or np.any(problem.upper[self.binaries] > 1.0):
            raise ValueError("binary columns must have bounds within [0, 1]")
        self._oracle = cut_oracle
        self.pool = pool if pool is not None else CutPool()
        self._root_lower = problem.lower.copy()
        self._root_upper = problem.upper.copy()
        self._problem = problem.with_rows(_as_row(cut) for cut in self.pool.cuts)
        self._pending: list[LinearCut] = []
        for cut in initial_cuts:
            self.add_cut_global(cut)
        self._sync_rows()
        self.incumbent: FloatArray | None = None
        self.incumbent_objective = math.inf
        self._bound = -math.inf
        self._pruned_floor = math.inf
        self._unresolved = 0
        self._sequence = 0
        self._started = 0.0
        self.lp_solves = 0

    def add_cut_global(self, cut: LinearCut) -> bool:
        """Add a cut to every open node; duplicates leave the pool unchanged."""
        if self.pool.add(cut):
            self._pending.append(cut)
            return True
        return False

    def _sync_rows(self) -> None:
        if self._pending:
            self._problem = self._problem.with_rows(_as_row(cut) for cut in self._pending)
            self._pending.clear()

    def offer(self, values: FloatArray, objective: float | None = None) -> bool:
        """Adopt values as incumbent when feasible and better."""
        candidate = np.asarray(values, dtype=np.float64)
        self._sync_rows()
        binary_part = candidate[self.binaries]
        if np.any(np.minimum(np.abs(binary_part), np.abs(binary_part - 1.0)) > self.config.int_tol):
            return False
        root = self._problem.with_bounds(self._root_lower, self._root_upper)
        if root.row_violation(candidate) > ACCEPTANCE_TOL * (1.0 + float(np.max(np.abs(candidate), initial=0.0))):
            _LOGGER.debug("Rejected candidate incumbent violating rows or pooled cuts")
            return False
        value = float(self._problem.c @ candidate) if objective is None else objective
        if value < self.incumbent_objective:
            self.incumbent = candidate.copy()
            self.incumbent_objective = value
            _LOGGER.debug("New incumbent %.10g", value)
            return True
        return False

    def _push(self, heap: list[_Node], *, bound: float, depth: int, zero: frozenset[int], one: frozenset[int], basis: LpBasis | None) -> None:
        self._sequence += 1
        if self.config.node_selection == NODE_DEPTH_FIRST:
            key = (-depth, -self._sequence)
        else:
            key = (bound, self._sequence)
        heapq.heappush(heap, _Node(key, bound, depth, zero, one, basis))

    def _timed_out(self) -> bool:
        limit = self.config.time_limit
        return limit is not None and time.perf_counter() - self._started >= limit

    def _prune_level(self) -> float:
        if not math.isfinite(self.incumbent_objective):
            return math.inf
        return self.incumbent_objective - self.config.rel_gap * max(1.0, abs(self.incumbent_objective))

    def _update_bound(self, heap: list[_Node]) -> float:
        open_bound = min((node.bound for node in heap), default=math.inf)
        self._bound = max(self._bound, min(open_bound, self.incumbent_objective, self._pruned_floor))
        return self._bound

    def solve(self) -> SolveResult:
        self._started = time.perf_counter()
        heap: list[_Node] = []
        self._push(heap, bound=-math.inf, depth=0, zero=frozenset(), one=frozenset(), basis=None)
        nodes = 0
        termination: str | None = None
        while heap:
            if nodes >= self.config.node_limit:
                termination = TERMINATION_NODE_LIMIT
                break
            if nodes and self._timed_out():
                termination = TERMINATION_TIME_LIMIT
                break
            node = heapq.heappop(heap)
            if node.bound >= self._prune_level():
                self._pruned_floor = min(self._pruned_floor, node.bound)
                continue
            nodes += 1
            try:
                self._process(node, heap)
            except _StopSearch:
                termination = TERMINATION_TIME_LIMIT
                break
            bound = self._update_bound(heap)
            if heap and relative_gap(self.incumbent_objective, bound) <= self.config.rel_gap:
                termination = TERMINATION_OPTIMAL
                break
        if termination is None:
            bound = self._update_bound(heap)
            if self._unresolved and relative_gap(self.incumbent_objective, bound) > self.config.rel_gap:
                termination = TERMINATION_CUT_LIMIT
                _LOGGER.warning("Branch and cut left %s nodes unresolved after %s nodes", self._unresolved, nodes)
            else:
                termination = TERMINATION_OPTIMAL if self.incumbent is not None else TERMINATION_INFEASIBLE
        else:
            self._update_bound(heap)
            if termination != TERMINATION_OPTIMAL:
                _LOGGER.warning("Branch and cut stopped on %s after %s nodes", termination, nodes)
        seconds = time.perf_counter() - self._started
        gap = relative_gap(self.incumbent_objective, self._bound)
        _LOGGER.debug(
            "Branch and cut %s: objective=%s bound=%s nodes=%s cuts=%s",
            termination,
            self.incumbent_objective,
            self._bound,
            nodes,
            len(self.pool),
        )
        return SolveResult(
            values=self.incumbent,
            objective=self.incumbent_objective,
            bound=self._bound,
            gap=gap,
            nodes=nodes,
            cut_counts=dict(self.pool.counts),
            seconds=seconds,
            termination=termination,
            extras={"lp_solves": self.lp_solves},
        )

    def _process(self, node: _Node, heap: list[_Node]) -> None:
        lower = self._root_lower.copy()
        upper = self._root_upper.copy()
        if node.fixed_zero:
            upper[list(node.fixed_zero)] = 0.0
        if node.fixed_one:
            lower[list(node.fixed_one)] = 1.0
        basis = node.basis
        bound = node.bound
        fractional_rounds = 0
        integral_rounds = 0
        while True:
            self._sync_rows()
            solution = lp_solve(self._problem.with_bounds(lower, upper), basis)
            self.lp_solves += 1
            if solution.status is not LpStatus.OPTIMAL:
                if solution.status is LpStatus.UNBOUNDED:
                    _LOGGER.warning("Unbounded node relaxation pruned")
                return
            basis = solution.basis
            bound = max(bound, solution.objective)
            if self._timed_out():
                self._push(heap, bound=bound, depth=node.depth, zero=node.fixed_zero, one=node.fixed_one, basis=basis)
                raise _StopSearch
            if bound >= self._prune_level():
                self._pruned_floor = min(self._pruned_floor, bound)
                return
            x = solution.x
            binary_values = x[self.binaries]
            distance = np.minimum(binary_values - np.floor(binary_values), np.ceil(binary_values) - binary_values)
            integral = bool(np.all(distance <= self.config.int_tol))
            if integral:
                separation = self._separate(x, integral=True)
                added = self._absorb(separation)
                if not any(cut.is_violated(x) for cut in separation.cuts):
                    self._settle(x, solution.objective, bound)
                    return
                integral_rounds += 1
                if added and integral_rounds < _MAX_INTEGRAL_ROUNDS:
                    continue
                _LOGGER.debug("Integral node still separated after %s rounds", integral_rounds)
                self._keep_unresolved(bound)
                return
            if fractional_rounds < self.config.fractional_rounds and self._oracle is not None:
                fractional_rounds += 1
                if self._absorb(self._separate(x, integral=False)):
                    continue
            break
        self._branch(node, heap, x, bound, basis)

    def _separate(self, x: FloatArray, *, integral: bool) -> Separation:
        if self._oracle is None:
            return Separation()
        return self._oracle(x, integral)

    def _absorb(self, separation: Separation) -> int:
        if separation.candidate is not None:
            self.offer(separation.candidate)
        return sum(self.add_cut_global(cut) for cut in separation.cuts)

    def _settle(self, x: FloatArray, objective: float, bound: float) -> None:
        if self.offer(x, objective):
            return
        if bound >= self._prune_level():
            self._pruned_floor = min(self._pruned_floor, bound)
            return
        self._keep_unresolved(bound)

    def _keep_unresolved(self, bound: float) -> None:
        # The node leaves the tree but its bound stays in the reported one.
        self._pruned_floor = min(self._pruned_floor, bound)
        self._unresolved += 1

    def _branch(self, node: _Node, heap: list[_Node], x: FloatArray, bound: float, basis: LpBasis | None) -> None:
        fixed = node.fixed_zero | node.fixed_one
        free = [int(j) for j in self.binaries if int(j) not in fixed]
        if not free:
            self._keep_unresolved(bound)
            return
        values = x[free]
        distance = np.minimum(values - np.floor(values), np.ceil(values) - values)
        column = free[int(np.argmax(distance))]
        self._push(heap, bound=bound, depth=node.depth + 1, zero=node.fixed_zero | {column}, one=node.fixed_one, basis=basis)
        self._push(heap, bound=bound, depth=node.depth + 1, zero=node.fixed_zero, one=node.fixed_one | {column}, basis=basis)


def bnb_solve(
    problem: LpProblem,
    binaries: Iterable[int],
    cut_oracle: CutOracle | None,
    config: BnbConfig | None = None,
    *,
    pool: CutPool | None = None,
    initial_cuts: Iterable[LinearCut] = (),
    incumbent_hint: FloatArray | None = None,
) -> SolveResult:
    """Minimise problem.c @ x with binaries integral and the callback's cuts satisfied."""
    engine = BranchAndCut(problem, binaries, cut_oracle, config or BnbConfig(), pool=pool, initial_cuts=initial_cuts)
    if incumbent_hint is not None:
        engine.offer(incumbent_hint)
    return engine.solve()

"""Exact assortment solvers: bisection, log-convex, mixed and zero opt-out branch and cut."""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
import logging
import math
import time

import numpy as np

from .bnb import BnbConfig, CutPool, Separation, SolveResult, bnb_solve, relative_gap
from .const import (
    ACCEPTANCE_TOL,
    BETA_MARGIN_MIN,
    BETA_MARGIN_REL,
    DEFAULT_BISECTION_TOL,
    LIMIT_TERMINATIONS,
    TERMINATION_INFEASIBLE,
    TERMINATION_OPTIMAL,
    TERMINATION_TIME_LIMIT,
    ZERO_OPTOUT_FLOOR_FRACTION,
)
from .errors import InfeasibleError, ModelError
from .models import (
    FloatArray,
    GnlModel,
    LinearConstraintSet,
    MgnlModel,
    bisection_objective,
    check_beta,
    expected_revenue,
    h_values,
    inclusive_value,
    k_values,
    safe_power,
)
from .reformulate import (
    SENSE_EQ,
    SENSE_GE,
    SENSE_LE,
    LinearCut,
    VarBounds,
    mccormick,
    nest_floors,
    oa_cut_exp,
    oa_cut_H,
    oa_cut_K,
    oa_cut_logsum,
    oa_cut_logW,
    oa_cut_joint_logsum,
    submodular_cut_K,
    submodular_cut_Z,
    supermodular_cut_H,
    supermodular_cut_Y,
    var_key,
    variable_bounds,
    x_key,
)
from .simplex import LpProblem

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SolverConfig:
    """Settings shared by the assortment solvers."""

    bnb: BnbConfig = field(default_factory=BnbConfig)
    bisection_tol: float = DEFAULT_BISECTION_TOL
    use_sc_cuts: bool = True
    use_joint_logsum: bool = False
    floor_fraction: float = ZERO_OPTOUT_FLOOR_FRACTION

    def __post_init__(self) -> None:
        if self.bisection_tol <= 0.0:
            raise ValueError("bisection_tol must be positive")
        if not 0.0 < self.floor_fraction < 1.0:
            raise ValueError("floor_fraction must lie in (0, 1)")


@dataclass(slots=True)
class BisectionState:
    """Bracket [delta_lo, delta_hi] on beta minus the optimal revenue.

    The bracket is tracked as integer numerators over 2**iterations so the
    width halves exactly.
    """

    beta: float
    tolerance: float
    lo_steps: int = 0
    hi_steps: int = 1
    iterations: int = 0
    best_assortment: tuple[int, ...] | None = None
    best_revenue: float = -math.inf
    widths: list[float] = field(default_factory=list)

    @property
    def delta_lo(self) -> float:
        return self.beta * self.lo_steps / 2**self.iterations

    @property
    def delta_hi(self) -> float:
        return self.beta * self.hi_steps / 2**self.iterations

    @property
    def width(self) -> float:
        return math.ldexp(self.beta, -self.iterations)

    @property
    def midpoint(self) -> float:
        return self.beta * (2 * self.lo_steps + 1) / 2 ** (self.iterations + 1)

    def converged(self) -> bool:
        return self.width <= self.tolerance * max(1.0, self.beta)

    def record(self, assortment: tuple[int, ...], revenue: float) -> None:
        if revenue > self.best_revenue:
            self.best_revenue = revenue
            self.best_assortment = assortment

    def halve(self, *, achievable: bool) -> None:
        """Keep the upper half when the midpoint is not achievable, else the lower half."""
        self.lo_steps *= 2
        self.hi_steps *= 2
        if achievable:
            self.hi_steps = self.lo_steps + 1
        else:
            self.lo_steps += 1
        self.iterations += 1
        self.widths.append(self.width)


class MasterVariables:
    """Column registry mapping every master symbol to one LP column."""

    def __init__(self) -> None:
        self.columns: dict[Hashable, int] = {}
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.cost: list[float] = []

    def __contains__(self, key: Hashable) -> bool:
        return key in self.columns

    def __len__(self) -> int:
        return len(self.columns)

    def add(self, key: Hashable, lower: float, upper: float, cost: float = 0.0) -> int:
        if key in self.columns:
            raise ModelError(f"column {key!r} registered twice")
        self.columns[key] = len(self.lower)
        self.lower.append(float(lower))
        self.upper.append(float(max(lower, upper)))
        self.cost.append(float(cost))
        return self.columns[key]

    def column(self, key: Hashable) -> int:
        return self.columns[key]

    def vector(self, assignments: Mapping[Hashable, float]) -> FloatArray:
        values = np.zeros(len(self.lower))
        for key, value in assignments.items():
            values[self.columns[key]] = value
        return np.clip(values, self.lower, self.upper)

    def keyed(self, values: FloatArray) -> dict[Hashable, float]:
        return {key: float(values[column]) for key, column in self.columns.items()}

    def to_columns(self, cut: LinearCut) -> LinearCut:
        return cut.relabel(self.columns)

    def row(self, coeffs: Mapping[Hashable, float], sense: str, rhs: float) -> tuple[dict[int, float], str, float]:
        return {self.columns[key]: value for key, value in coeffs.items()}, sense, rhs

    def problem(self, rows: Sequence[tuple[dict[int, float], str, float]], cost: Sequence[float] | None = None) -> LpProblem:
        return LpProblem.from_rows(
            self.cost if cost is None else cost,
            rows,
            np.asarray(self.lower),
            np.asarray(self.upper),
        )


def _violation_tol(value: float) -> float:
    return ACCEPTANCE_TOL * (1.0 + abs(value))


def _constraint_rows(master: MasterVariables, constraints: LinearConstraintSet | None, m: int) -> list:
    if constraints is None or constraints.n_rows == 0:
        return []
    if constraints.dim != m:
        raise ModelError(f"constraints span {constraints.dim} variables, expected {m}")
    rows = []
    for coefficients, bound in zip(constraints.a, constraints.b):
        coeffs = {x_key(i): float(value) for i, value in enumerate(coefficients) if value != 0.0}
        if coeffs:
            rows.append(master.row(coeffs, SENSE_LE, float(bound)))
        elif bound < 0.0:
            raise InfeasibleError("a constraint row reads 0 <= negative bound")
    return rows


def _filter_violated(cuts: Iterable[LinearCut], keyed: Mapping[Hashable, float]) -> list[LinearCut]:
    return [cut for cut in cuts if cut.is_violated(keyed)]


def _round_binary(values: FloatArray) -> FloatArray:
    return (values > 0.5).astype(np.float64)


def _support(x: FloatArray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(x > 0.5))


def _feasible(constraints: LinearConstraintSet | None, x: FloatArray) -> bool:
    return constraints is None or constraints.n_rows == 0 or constraints.is_satisfied(x)


def _remaining(config: BnbConfig, started: float) -> BnbConfig | None:
    """Return config with the time budget left, or None when it is spent."""
    if config.time_limit is None:
        return config
    left = config.time_limit - (time.perf_counter() - started)
    if left <= 0.0:
        return None
    return replace(config, time_limit=left)


class _BisectionMaster:
    """Columns (x, W, h, k, s) with McCormick rows; the objective depends on delta."""

    def __init__(self, model: GnlModel, constraints: LinearConstraintSet | None, beta: float, config: SolverConfig) -> None:
        check_beta(model.r, beta)
        self.model = model
        self.beta = beta
        self.config = config
        self.bounds: VarBounds = variable_bounds(model, beta)
        self.vars = MasterVariables()
        m, n_nests = model.m, model.n_nests
        for i in range(m):
            self.vars.add(x_key(i), 0.0, 1.0)
        for n in range(n_nests):
            self.vars.add(var_key("W", n), self.bounds.w_lo[n], self.bounds.w_hi[n])
            self.vars.add(var_key("h", n), self.bounds.h_lo[n], self.bounds.h_hi[n])
            self.vars.add(var_key("k", n), self.bounds.k_lo[n], self.bounds.k_hi[n])
        self.members = [np.flatnonzero(model.weights[:, n] > 0.0) for n in range(n_nests)]
        for n in range(n_nests):
            for i in self.members[n]:
                self.vars.add(var_key("s", n, int(i)), 0.0, self.bounds.h_hi[n])
        self.rows = _constraint_rows(self.vars, constraints, m)
        for n in range(n_nests):
            coeffs = {var_key("W", n): 1.0}
            for i in self.members[n]:
                coeffs[x_key(int(i))] = -float(model.weights[i, n])
            self.rows.append(self.vars.row(coeffs, SENSE_EQ, float(model.v0[n])))
        self.x_columns = [self.vars.column(x_key(i)) for i in range(m)]
        self.constraints = constraints

    def cost(self, delta: float) -> list[float]:
        model = self.model
        cost = [0.0] * len(self.vars)
        for n in range(model.n_nests):
            cost[self.vars.column(var_key("h", n))] = self.beta * float(model.v0[n])
            cost[self.vars.column(var_key("k", n))] = -delta
            for i in self.members[n]:
                column = self.vars.column(var_key("s", n, int(i)))
                cost[column] = float(model.weights[i, n]) * (self.beta - float(model.r[i]))
        return cost

    def initial_cuts(self) -> list[LinearCut]:
        model = self.model
        cuts: list[LinearCut] = []
        for n in range(model.n_nests):
            for i in self.members[n]:
                cuts.extend(
                    mccormick(
                        var_key("s", n, int(i)),
                        var_key("h", n),
                        x_key(int(i)),
                        float(self.bounds.h_lo[n]),
                        float(self.bounds.h_hi[n]),
                    )
                )
        anchors = (np.zeros(model.m), np.ones(model.m))
        for point in anchors:
            for n in range(model.n_nests):
                cuts.append(oa_cut_H(model, n, point))
                cuts.append(oa_cut_K(model, n, point))
                if self.config.use_sc_cuts:
                    cuts.append(supermodular_cut_H(model, n, _support(point)))
                    cuts.append(submodular_cut_K(model, n, _support(point)))
        return [self.vars.to_columns(cut) for cut in cuts]

    def lift(self, x: FloatArray) -> FloatArray:
        model = self.model
        w = inclusive_value(model, x)
        h = h_values(model, x)
        k = k_values(model, x)
        values: dict[Hashable, float] = {x_key(i): float(x[i]) for i in range(model.m)}
        for n in range(model.n_nests):
            values[var_key("W", n)] = float(w[n])
            values[var_key("h", n)] = float(h[n])
            values[var_key("k", n)] = float(k[n])
            for i in self.members[n]:
                values[var_key("s", n, int(i))] = float(h[n] * x[i])
        return self.vars.vector(values)

    def separate(self, values: FloatArray, integral: bool) -> Separation:
        model = self.model
        keyed = self.vars.keyed(values)
        x = values[self.x_columns]
        point = _round_binary(x) if integral else np.clip(x, 0.0, 1.0)
        h = h_values(model, point)
        k = k_values(model, point)
        cuts: list[LinearCut] = []
        for n in range(model.n_nests):
            if keyed[var_key("h", n)] < h[n] - _violation_tol(h[n]):
                cuts.append(oa_cut_H(model, n, point))
                if integral and self.config.use_sc_cuts:
                    cuts.append(supermodular_cut_H(model, n, _support(point)))
            if keyed[var_key("k", n)] > k[n] + _violation_tol(k[n]):
                cuts.append(oa_cut_K(model, n, point))
                if integral and self.config.use_sc_cuts:
                    cuts.append(submodular_cut_K(model, n, _support(point)))
        violated = _filter_violated(cuts, keyed)
        candidate = self.lift(point) if integral else None
        return Separation(tuple(self.vars.to_columns(cut) for cut in violated), candidate)

    def empty_hint(self) -> FloatArray | None:
        empty = np.zeros(self.model.m)
        return self.lift(empty) if _feasible(self.constraints, empty) else None


def _bisection_solve(
    master: _BisectionMaster, delta: float, config: BnbConfig, pool: CutPool
) -> tuple[float, FloatArray | None, SolveResult]:
    problem = master.vars.problem(master.rows, master.cost(delta))
    result = bnb_solve(
        problem,
        master.x_columns,
        master.separate,
        config,
        pool=pool,
        initial_cuts=master.initial_cuts() if len(pool) == 0 else (),
        incumbent_hint=master.empty_hint(),
    )
    if result.values is None:
        if result.termination == TERMINATION_INFEASIBLE:
            raise InfeasibleError("the assortment constraints admit no feasible offer set")
        return math.inf, None, result
    x = _round_binary(result.values[master.x_columns])
    return bisection_objective(master.model, x, master.beta, delta), x, result


def bisection_subproblem(
    model: GnlModel,
    constraints: LinearConstraintSet | None,
    beta: float,
    delta: float,
    config: SolverConfig | None = None,
    *,
    pool: CutPool | None = None,
) -> tuple[float, FloatArray | None, SolveResult]:
    """Return (min_x G(delta, x), argmin x, kernel result) for one delta."""
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    settings = config or SolverConfig()
    master = _BisectionMaster(model, constraints, beta, settings)
    return _bisection_solve(master, delta, settings.bnb, pool if pool is not None else CutPool())


def solve_gnl_bisection(
    model: GnlModel,
    constraints: LinearConstraintSet | None,
    beta: float,
    tol: float | None = None,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Maximise expected revenue by bisection on delta over branch-and-cut subproblems."""
    settings = config or SolverConfig()
    started = time.perf_counter()
    state = BisectionState(beta=beta, tolerance=settings.bisection_tol if tol is None else tol)
    master = _BisectionMaster(model, constraints, beta, settings)
    pool = CutPool()
    nodes = 0
    termination = TERMINATION_OPTIMAL
    while not state.converged():
        budget = _remaining(settings.bnb, started)
        if budget is None:
            termination = TERMINATION_TIME_LIMIT
            break
        delta = state.midpoint
        value, x, result = _bisection_solve(master, delta, budget, pool)
        nodes += result.nodes
        if x is None:
            termination = result.termination
            break
        state.record(tuple(int(v) for v in x), expected_revenue(model, x))
        if result.termination in LIMIT_TERMINATIONS:
            termination = result.termination
            break
        state.halve(achievable=value <= 0.0)
        _LOGGER.debug(
            "Bisection step %s: delta=%.10g G=%.3e bracket=[%.10g, %.10g]",
            state.iterations,
            delta,
            value,
            state.delta_lo,
            state.delta_hi,
        )
    if state.best_assortment is None:
        empty = np.zeros(model.m)
        if _feasible(constraints, empty):
            state.record(tuple(0 for _ in range(model.m)), 0.0)
    revenue = state.best_revenue if state.best_assortment is not None else -math.inf
    bound = beta - state.delta_lo
    seconds = time.perf_counter() - started
    _LOGGER.info(
        "Bisection finished (%s) after %s steps: revenue=%.10g bound=%.10g", termination, state.iterations, revenue, bound
    )
    return SolveResult(
        values=None if state.best_assortment is None else np.asarray(state.best_assortment, dtype=np.float64),
        objective=revenue,
        bound=bound,
        gap=relative_gap(revenue, bound, maximize=True),
        nodes=nodes,
        cut_counts=dict(pool.counts),
        seconds=seconds,
        termination=termination,
        maximize=True,
        assortment=state.best_assortment,
        iterations=state.iterations,
        extras={"widths": tuple(state.widths), "delta_lo": state.delta_lo, "delta_hi": state.delta_hi},
    )


class _LogConvexMaster:
    """Columns (x, W, U, e, y, z, t, s) per segment for the log-transformed program."""

    def __init__(
        self,
        segments: Sequence[GnlModel],
        theta: Sequence[float],
        constraints: LinearConstraintSet | None,
        beta: float,
        config: SolverConfig,
        *,
        zero_optout: bool,
    ) -> None:
        self.segments = tuple(segments)
        self.theta = tuple(float(t) for t in theta)
        self.beta = beta
        self.config = config
        self.zero_optout = zero_optout
        self.m = self.segments[0].m
        self.constraints = constraints
        self.vars = MasterVariables()
        for i in range(self.m):
            self.vars.add(x_key(i), 0.0, 1.0)
        self.rows = _constraint_rows(self.vars, constraints, self.m)
        self.floors: list[FloatArray] = []
        self.bounds: list[VarBounds] = []
        self.members: list[list[FloatArray]] = []
        for t, model in enumerate(self.segments):
            check_beta(model.r, beta)
            floors = nest_floors(model, config.floor_fraction) if zero_optout else np.zeros(model.n_nests)
            if not zero_optout and model.has_zero_optout:
                raise ModelError("a nest without opt-out weight needs the zero opt-out solver")
            bounds = variable_bounds(model, beta, floors=floors if zero_optout else None)
            self.floors.append(floors)
            self.bounds.append(bounds)
            self.members.append([np.flatnonzero(model.weights[:, n] > 0.0) for n in range(model.n_nests)])
            self._add_segment(t, model, bounds, floors)
        self.x_columns = [self.vars.column(x_key(i)) for i in range(self.m)]

    def _add_segment(self, t: int, model: GnlModel, bounds: VarBounds, floors: FloatArray) -> None:
        vars_ = self.vars
        theta = self.theta[t]
        members = self.members[t]
        vars_.add(var_key("z", segment=t), bounds.z_lo, bounds.z_hi)
        for n in range(model.n_nests):
            vars_.add(var_key("W", n, segment=t), bounds.w_lo[n], bounds.w_hi[n])
            vars_.add(var_key("y", n, segment=t), bounds.y_lo[n], bounds.y_hi[n])
            vars_.add(var_key("t", n, segment=t), bounds.t_lo[n], bounds.t_hi[n], theta * self.beta * float(model.v0[n]))
            for i in members[n]:
                weight = float(model.weights[i, n]) * (self.beta - float(model.r[i]))
                vars_.add(var_key("s", n, int(i), segment=t), 0.0, bounds.t_hi[n], theta * weight)
            linear = {x_key(int(i)): -float(model.weights[i, n]) for i in members[n]}
            if not self.zero_optout:
                self.rows.append(vars_.row({var_key("W", n, segment=t): 1.0, **linear}, SENSE_EQ, float(model.v0[n])))
                continue
            vars_.add(var_key("U", n, segment=t), bounds.u_lo[n], bounds.u_hi[n])
            self.rows.append(vars_.row({var_key("U", n, segment=t): 1.0, **linear}, SENSE_EQ, float(model.v0[n])))
            if floors[n] > 0.0:
                empty = var_key("e", n, segment=t)
                vars_.add(empty, 0.0, 1.0)
                self.rows.append(
                    vars_.row(
                        {var_key("W", n, segment=t): 1.0, var_key("U", n, segment=t): -1.0, empty: -float(floors[n])},
                        SENSE_EQ,
                        0.0,
                    )
                )
                self.rows.append(vars_.row({empty: 1.0, **{x_key(int(i)): 1.0 for i in members[n]}}, SENSE_GE, 1.0))
                for i in members[n]:
                    self.rows.append(vars_.row({empty: 1.0, x_key(int(i)): 1.0}, SENSE_LE, 1.0))
            else:
                self.rows.append(
                    vars_.row({var_key("W", n, segment=t): 1.0, var_key("U", n, segment=t): -1.0}, SENSE_EQ, 0.0)
                )

    @property
    def denominator_family(self) -> str:
        return "U" if self.zero_optout else "W"

    def _joint_logsum_applies(self, t: int) -> bool:
        model = self.segments[t]
        return self.config.use_joint_logsum and bool(np.all(model.sigma < 1.0)) and not np.any(self.floors[t] > 0.0)

    def exact(self, t: int, x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray, float]:
        """Return (U, W, Y, Z) of segment t at a binary x."""
        model = self.segments[t]
        u = inclusive_value(model, x)
        w = u.copy()
        floors = self.floors[t]
        empty = (floors > 0.0) & (u <= 0.0)
        w[empty] = floors[empty]
        y = (model.sigma - 1.0) * np.log(w)
        z = float(np.log(safe_power(u, model.sigma).sum()))
        return u, w, y, z

    def lift(self, x: FloatArray) -> FloatArray:
        values: dict[Hashable, float] = {x_key(i): float(x[i]) for i in range(self.m)}
        for t, model in enumerate(self.segments):
            u, w, y, z = self.exact(t, x)
            values[var_key("z", segment=t)] = z
            for n in range(model.n_nests):
                tn = math.exp(y[n] - z)
                values[var_key("W", n, segment=t)] = float(w[n])
                values[var_key("y", n, segment=t)] = float(y[n])
                values[var_key("t", n, segment=t)] = tn
                if self.zero_optout:
                    values[var_key("U", n, segment=t)] = float(u[n])
                    if self.floors[t][n] > 0.0:
                        values[var_key("e", n, segment=t)] = 1.0 if u[n] <= 0.0 else 0.0
                for i in self.members[t][n]:
                    values[var_key("s", n, int(i), segment=t)] = tn * float(x[i])
        return self.vars.vector(values)

    def _logsum_point(self, t: int, u: FloatArray) -> FloatArray:
        floors = self.floors[t]
        fallback = np.where(floors > 0.0, floors, 1e-12)
        return np.where(u > 0.0, u, fallback)

    def initial_cuts(self) -> list[LinearCut]:
        cuts: list[LinearCut] = []
        for t, model in enumerate(self.segments):
            bounds = self.bounds[t]
            for n in range(model.n_nests):
                for i in self.members[t][n]:
                    cuts.extend(
                        mccormick(
                            var_key("s", n, int(i), segment=t),
                            var_key("t", n, segment=t),
                            x_key(int(i)),
                            float(bounds.t_lo[n]),
                            float(bounds.t_hi[n]),
                        )
                    )
            for point in (np.zeros(self.m), np.ones(self.m)):
                cuts.extend(self._exact_cuts(t, point, anchor=True))
        return [self.vars.to_columns(cut) for cut in cuts]

    def _exact_cuts(self, t: int, x: FloatArray, *, anchor: bool) -> list[LinearCut]:
        """Cuts tight at the exact lift of a binary point."""
        model = self.segments[t]
        u, w, y, z = self.exact(t, x)
        support = _support(x)
        cuts: list[LinearCut] = []
        for n in range(model.n_nests):
            cuts.append(oa_cut_logW(model, n, float(w[n]), segment=t))
            cuts.append(oa_cut_exp(float(y[n]), z, n=n, segment=t))
            if self.config.use_sc_cuts and self.floors[t][n] <= 0.0:
                cuts.append(supermodular_cut_Y(model, n, support, segment=t))
        cuts.append(oa_cut_logsum(model, self._logsum_point(t, u), segment=t, family=self.denominator_family))
        if self.config.use_sc_cuts:
            cuts.append(submodular_cut_Z(model, support, segment=t))
        if self._joint_logsum_applies(t):
            cuts.append(oa_cut_joint_logsum(model.sigma, y, segment=t))
        return cuts

    def separate(self, values: FloatArray, integral: bool) -> Separation:
        keyed = self.vars.keyed(values)
        x = values[self.x_columns]
        cuts: list[LinearCut] = []
        if integral:
            point = _round_binary(x)
            for t in range(len(self.segments)):
                cuts.extend(self._integral_cuts(t, point, keyed))
            candidate = self.lift(point)
        else:
            for t in range(len(self.segments)):
                cuts.extend(self._fractional_cuts(t, keyed))
            candidate = None
        violated = _filter_violated(cuts, keyed)
        return Separation(tuple(self.vars.to_columns(cut) for cut in violated), candidate)

    def _integral_cuts(self, t: int, x: FloatArray, keyed: Mapping[Hashable, float]) -> list[LinearCut]:
        model = self.segments[t]
        u, w, y_exact, z_exact = self.exact(t, x)
        z_lp = keyed[var_key("z", segment=t)]
        support = _support(x)
        cuts: list[LinearCut] = []
        if z_lp > z_exact + _violation_tol(z_exact):
            cuts.append(oa_cut_logsum(model, self._logsum_point(t, u), segment=t, family=self.denominator_family))
            if self.config.use_sc_cuts:
                cuts.append(submodular_cut_Z(model, support, segment=t))
        for n in range(model.n_nests):
            y_lp = keyed[var_key("y", n, segment=t)]
            t_lp = keyed[var_key("t", n, segment=t)]
            if y_lp < y_exact[n] - _violation_tol(y_exact[n]):
                cuts.append(oa_cut_logW(model, n, float(w[n]), segment=t))
                if self.config.use_sc_cuts and self.floors[t][n] <= 0.0:
                    cuts.append(supermodular_cut_Y(model, n, support, segment=t))
            target = math.exp(min(y_lp - z_lp, 700.0))
            if t_lp < target - _violation_tol(target):
                cuts.append(oa_cut_exp(float(y_exact[n]), z_exact, n=n, segment=t))
                cuts.append(oa_cut_exp(y_lp, z_lp, n=n, segment=t))
        if self._joint_logsum_applies(t):
            cuts.append(oa_cut_joint_logsum(model.sigma, y_exact, segment=t))
        return cuts

    def _fractional_cuts(self, t: int, keyed: Mapping[Hashable, float]) -> list[LinearCut]:
        model = self.segments[t]
        z_lp = keyed[var_key("z", segment=t)]
        w = np.array([keyed[var_key("W", n, segment=t)] for n in range(model.n_nests)])
        u = (
            np.array([keyed[var_key("U", n, segment=t)] for n in range(model.n_nests)])
            if self.zero_optout
            else w
        )
        y_lp = np.array([keyed[var_key("y", n, segment=t)] for n in range(model.n_nests)])
        cuts: list[LinearCut] = []
        point = self._logsum_point(t, u)
        if z_lp > math.log(float(np.sum(point**model.sigma))) + _violation_tol(z_lp):
            cuts.append(oa_cut_logsum(model, point, segment=t, family=self.denominator_family))
        for n in range(model.n_nests):
            w_n = max(float(w[n]), float(self.bounds[t].w_lo[n]))
            if y_lp[n] < (model.sigma[n] - 1.0) * math.log(w_n) - _violation_tol(y_lp[n]):
                cuts.append(oa_cut_logW(model, n, w_n, segment=t))
            target = math.exp(min(y_lp[n] - z_lp, 700.0))
            if keyed[var_key("t", n, segment=t)] < target - _violation_tol(target):
                cuts.append(oa_cut_exp(float(y_lp[n]), z_lp, n=n, segment=t))
        if self._joint_logsum_applies(t):
            cuts.append(oa_cut_joint_logsum(model.sigma, y_lp, segment=t))
        return cuts

    def empty_hint(self) -> FloatArray | None:
        empty = np.zeros(self.m)
        return self.lift(empty) if _feasible(self.constraints, empty) else None

    def revenue(self, x: FloatArray) -> float:
        total = 0.0
        for theta, model in zip(self.theta, self.segments):
            total += theta * expected_revenue(model, x, allow_empty_nests=self.zero_optout)
        return total


def _solve_log_convex(master: _LogConvexMaster, method: str) -> SolveResult:
    started = time.perf_counter()
    result = bnb_solve(
        master.vars.problem(master.rows),
        master.x_columns,
        master.separate,
        master.config.bnb,
        initial_cuts=master.initial_cuts(),
        incumbent_hint=master.empty_hint(),
    )
    if result.termination == TERMINATION_INFEASIBLE:
        raise InfeasibleError("the assortment constraints admit no feasible offer set")
    beta = master.beta
    bound = beta - result.bound
    if result.values is None:
        assortment = None
        revenue = -math.inf
    else:
        x = _round_binary(result.values[master.x_columns])
        assortment = tuple(int(v) for v in x)
        revenue = master.revenue(x)
    _LOGGER.info("%s finished (%s): revenue=%.10g bound=%.10g nodes=%s", method, result.termination, revenue, bound, result.nodes)
    return SolveResult(
        values=result.values,
        objective=revenue,
        bound=bound,
        gap=relative_gap(revenue, bound, maximize=True),
        nodes=result.nodes,
        cut_counts=result.cut_counts,
        seconds=time.perf_counter() - started,
        termination=result.termination,
        maximize=True,
        assortment=assortment,
        extras={"kernel_objective": result.objective, "kernel_bound": result.bound},
    )


def solve_gnl_logconvex(
    model: GnlModel,
    constraints: LinearConstraintSet | None,
    beta: float,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Maximise expected revenue through the log-transformed convex branch and cut."""
    settings = config or SolverConfig()
    master = _LogConvexMaster((model,), (1.0,), constraints, beta, settings, zero_optout=False)
    return _solve_log_convex(master, "logconvex")


def solve_mgnl(
    mixed: MgnlModel,
    constraints: LinearConstraintSet | None,
    beta: float,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Maximise sum_t theta_t F_t(x) with one log block per segment."""
    settings = config or SolverConfig()
    master = _LogConvexMaster(mixed.segments, mixed.theta, constraints, beta, settings, zero_optout=False)
    return _solve_log_convex(master, "mgnl")


def solve_zero_optout(
    model: GnlModel,
    constraints: LinearConstraintSet | None,
    beta: float,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Maximise expected revenue when some nests have no opt-out weight; empty nests contribute zero."""
    settings = config or SolverConfig()
    master = _LogConvexMaster((model,), (1.0,), constraints, beta, settings, zero_optout=True)
    return _solve_log_convex(master, "zero_optout")


def mixed_beta(mixed: MgnlModel) -> float:
    """Return beta above every segment revenue."""
    top = max(float(segment.r.max()) for segment in mixed.segments)
    return top + max(BETA_MARGIN_MIN, BETA_MARGIN_REL * top)

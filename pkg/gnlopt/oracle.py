"""Brute-force ground truth for assortment and pricing problems at small sizes."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np
from numpy.typing import ArrayLike

from .const import ORACLE_MAX_PATTERNS, ORACLE_MAX_PRODUCTS, ORACLE_TENSOR_SUPPORT
from .errors import InfeasibleError, ModelError, OracleGuardError
from .models import FloatArray, GnlModel, LinearConstraintSet, MgnlModel, NestStructure
from .pricing import PriceBounds, PriceLadder, cp_revenue, expand_discrete, lift_constraints, polish_prices

_LOGGER = logging.getLogger(__name__)

_CHUNK = 1 << 15
_FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class OracleResult:
    """Best candidate found by exhaustive evaluation."""

    assortment: tuple[int, ...] | None
    objective: float
    evaluated: int
    prices: tuple[float | None, ...] | None = None


def _rows_hold(constraints: LinearConstraintSet | None, candidates: FloatArray) -> np.ndarray:
    if constraints is None or constraints.n_rows == 0:
        return np.ones(candidates.shape[0], dtype=bool)
    activity = candidates @ constraints.a.T
    return np.all(activity <= constraints.b + _FEASIBILITY_TOL * (1.0 + np.abs(constraints.b)), axis=1)


def _binary_patterns(start: int, stop: int, m: int) -> FloatArray:
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.float64)


def _batch_revenue(model: GnlModel, offers: FloatArray, *, allow_empty_nests: bool) -> FloatArray:
    """Evaluate F on every row of offers; empty zero opt-out nests contribute nothing."""
    inclusive = model.v0 + offers @ model.weights
    empty = inclusive <= 0.0
    if np.any(empty) and not allow_empty_nests:
        raise ModelError("a candidate leaves a nest with zero inclusive value")
    safe = np.where(empty, 1.0, inclusive)
    powered = np.where(empty, 0.0, safe**model.sigma)
    scale = np.where(empty, 0.0, safe ** (model.sigma - 1.0))
    numerator = (offers * model.r) @ model.weights
    return (scale * numerator).sum(axis=1) / powered.sum(axis=1)


def _mixed_revenue(model: GnlModel | MgnlModel, offers: FloatArray, *, allow_empty_nests: bool) -> FloatArray:
    if isinstance(model, MgnlModel):
        total = np.zeros(offers.shape[0])
        for theta, segment in zip(model.theta, model.segments):
            total += theta * _batch_revenue(segment, offers, allow_empty_nests=allow_empty_nests)
        return total
    return _batch_revenue(model, offers, allow_empty_nests=allow_empty_nests)


def enumerate_assortments(
    model: GnlModel | MgnlModel,
    constraints: LinearConstraintSet | None = None,
    *,
    allow_empty_nests: bool = False,
) -> OracleResult:
    """Evaluate the revenue of every feasible offer set; ties go to the first pattern."""
    m = model.m
    if m > ORACLE_MAX_PRODUCTS:
        raise OracleGuardError(f"{m} products exceed the enumeration guard of {ORACLE_MAX_PRODUCTS}")
    best_value = -math.inf
    best: tuple[int, ...] | None = None
    evaluated = 0
    total = 1 << m
    for start in range(0, total, _CHUNK):
        offers = _binary_patterns(start, min(total, start + _CHUNK), m)
        offers = offers[_rows_hold(constraints, offers)]
        if offers.shape[0] == 0:
            continue
        evaluated += offers.shape[0]
        values = _mixed_revenue(model, offers, allow_empty_nests=allow_empty_nests)
        index = int(np.argmax(values))
        if values[index] > best_value:
            best_value = float(values[index])
            best = tuple(int(v) for v in offers[index])
    if best is None:
        raise InfeasibleError("no offer set satisfies the constraints")
    _LOGGER.debug("Enumerated %s feasible offer sets, best revenue %.10g", evaluated, best_value)
    return OracleResult(assortment=best, objective=best_value, evaluated=evaluated)


def _price_patterns(sizes: Sequence[int]) -> FloatArray:
    """Return every price-or-absent choice, absent encoded as 0, the first product varying slowest."""
    grids = np.meshgrid(*[np.arange(size + 1) for size in sizes], indexing="ij")
    return np.stack([grid.reshape(-1) for grid in grids], axis=1)


def enumerate_jap_dp(
    model: GnlModel | NestStructure | MgnlModel,
    ladder: PriceLadder,
    constraints: LinearConstraintSet | None = None,
) -> OracleResult:
    """Evaluate every price-or-absent pattern on the discrete ladders."""
    patterns_count = math.prod(size + 1 for size in ladder.sizes)
    if patterns_count > ORACLE_MAX_PATTERNS:
        raise OracleGuardError(f"{patterns_count} price patterns exceed the guard of {ORACLE_MAX_PATTERNS}")
    if isinstance(model, MgnlModel):
        segments = [expand_discrete(segment, ladder)[0] for segment in model.segments]
        expanded: GnlModel | MgnlModel = MgnlModel(segments=tuple(segments), theta=model.theta)
    else:
        expanded = expand_discrete(model, ladder)[0]
    lifted = lift_constraints(constraints, ladder)
    choices = _price_patterns(ladder.sizes)
    offsets = np.concatenate([[0], np.cumsum(ladder.sizes)[:-1]]).astype(np.int64)
    offers = np.zeros((choices.shape[0], ladder.n_virtual))
    for i, offset in enumerate(offsets):
        picked = choices[:, i] > 0
        offers[np.flatnonzero(picked), offset + choices[picked, i] - 1] = 1.0
    feasible = _rows_hold(lifted, offers)
    if not np.any(feasible):
        raise InfeasibleError("no price pattern satisfies the constraints")
    values = np.where(feasible, _mixed_revenue(expanded, offers, allow_empty_nests=False), -np.inf)
    index = int(np.argmax(values))
    choice = choices[index]
    prices = tuple(None if level == 0 else float(ladder.prices[i][level - 1]) for i, level in enumerate(choice))
    return OracleResult(
        assortment=tuple(int(level > 0) for level in choice),
        objective=float(values[index]),
        evaluated=int(feasible.sum()),
        prices=prices,
    )


def _joint_feasible(
    constraints: LinearConstraintSet | None, x: FloatArray, prices: FloatArray
) -> np.ndarray:
    if constraints is None or constraints.n_rows == 0:
        return np.ones(prices.shape[0], dtype=bool)
    m = x.shape[0]
    if constraints.dim == m:
        ok = bool(_rows_hold(constraints, x[None, :])[0])
        return np.full(prices.shape[0], ok)
    joint = np.hstack([np.repeat(x[None, :], prices.shape[0], axis=0), prices * x])
    return _rows_hold(constraints, joint)


def grid_multistart_prices(
    structure: NestStructure,
    bounds: PriceBounds,
    x: ArrayLike,
    grid_n: int = 25,
    starts: int = 10,
    *,
    constraints: LinearConstraintSet | None = None,
    seed: int = 0,
) -> OracleResult:
    """Grid the offered prices, then polish the best grid point and random restarts."""
    offer = np.asarray(x, dtype=np.float64)
    support = [int(i) for i in np.flatnonzero(offer > 0.5)]
    base = bounds.lower.copy()
    evaluated = 0
    if not support:
        value = float(cp_revenue(structure, bounds, offer, base))
        return OracleResult(assortment=tuple(int(v) for v in offer), objective=value, evaluated=1, prices=(None,) * bounds.m)
    axes = [np.linspace(bounds.lower[i], bounds.upper[i], grid_n) for i in support]
    if len(support) <= ORACLE_TENSOR_SUPPORT:
        if grid_n ** len(support) > ORACLE_MAX_PATTERNS:
            raise OracleGuardError(f"a {grid_n}-point grid over {len(support)} prices exceeds the guard")
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.repeat(base[None, :], mesh[0].size, axis=0)
        for column, grid in zip(support, mesh):
            points[:, column] = grid.reshape(-1)
        points = points[_joint_feasible(constraints, offer, points)]
        if points.shape[0] == 0:
            raise InfeasibleError("no grid price vector satisfies the constraints")
        values = np.asarray(cp_revenue(structure, bounds, offer, points))
        evaluated += points.shape[0]
        start = points[int(np.argmax(values))]
    else:
        start = base.copy()
        start[support] = 0.5 * (bounds.lower[support] + bounds.upper[support])
        current = float(cp_revenue(structure, bounds, offer, start))
        for _sweep in range(20):
            improved = False
            for column, axis in zip(support, axes):
                trial = np.repeat(start[None, :], axis.shape[0], axis=0)
                trial[:, column] = axis
                trial = trial[_joint_feasible(constraints, offer, trial)]
                if trial.shape[0] == 0:
                    continue
                values = np.asarray(cp_revenue(structure, bounds, offer, trial))
                evaluated += trial.shape[0]
                index = int(np.argmax(values))
                if values[index] > current + 1e-12:
                    start, current, improved = trial[index].copy(), float(values[index]), True
            if not improved:
                break
    polished, value, stats = polish_prices(
        structure, bounds, offer, start, constraints=constraints, starts=starts, seed=seed
    )
    evaluated += stats.evaluations
    prices = tuple(float(polished[i]) if offer[i] > 0.5 else None for i in range(bounds.m))
    return OracleResult(assortment=tuple(int(v) for v in offer), objective=value, evaluated=evaluated, prices=prices)


def enumerate_jap_cp(
    structure: NestStructure,
    bounds: PriceBounds,
    constraints: LinearConstraintSet | None = None,
    *,
    grid_n: int = 25,
    starts: int = 10,
    seed: int = 0,
) -> OracleResult:
    """Every offer set times grid-plus-multistart prices."""
    m = bounds.m
    if m > ORACLE_MAX_PRODUCTS:
        raise OracleGuardError(f"{m} products exceed the enumeration guard of {ORACLE_MAX_PRODUCTS}")
    best: OracleResult | None = None
    evaluated = 0
    for offer in _binary_patterns(0, 1 << m, m):
        try:
            result = grid_multistart_prices(
                structure, bounds, offer, grid_n, starts, constraints=constraints, seed=seed
            )
        except InfeasibleError:
            continue
        if not _joint_feasible(constraints, offer, _filled(bounds, result.prices)[None, :])[0]:
            continue
        evaluated += result.evaluated
        if best is None or result.objective > best.objective:
            best = result
    if best is None:
        raise InfeasibleError("no offer set and price vector satisfy the constraints")
    return OracleResult(assortment=best.assortment, objective=best.objective, evaluated=evaluated, prices=best.prices)


def _filled(bounds: PriceBounds, prices: Sequence[float | None] | None) -> FloatArray:
    values = bounds.lower.copy()
    for i, price in enumerate(prices or ()):
        if price is not None:
            values[i] = price
    return values


def local_maxima_scan(
    sampler: Callable[[float], float], interval: tuple[float, float], grid_n: int
) -> list[tuple[float, float]]:
    """Return grid points strictly above their neighbours; endpoints compare with their one neighbour."""
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    lo, hi = interval
    grid = np.linspace(lo, hi, grid_n)
    values = np.asarray([float(sampler(float(point))) for point in grid])
    peaks: list[tuple[float, float]] = []
    if values[0] > values[1]:
        peaks.append((float(grid[0]), float(values[0])))
    inner = np.flatnonzero((values[1:-1] > values[:-2]) & (values[1:-1] > values[2:])) + 1
    peaks.extend((float(grid[i]), float(values[i])) for i in inner)
    if values[-1] > values[-2]:
        peaks.append((float(grid[-1]), float(values[-1])))
    return peaks

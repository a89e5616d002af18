"""Joint assortment and pricing: discrete price ladders, PWLA grids and continuous prices."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
import logging
import math
import time
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .assortment import SolverConfig, solve_gnl_bisection, solve_gnl_logconvex, solve_mgnl
from .bnb import SolveResult, relative_gap
from .const import (
    CP_BETA_MARGIN,
    CP_IMPROVEMENT_TOL,
    CP_MAX_ROUNDS,
    DEFAULT_EPSILON,
    DEFAULT_POLISH_STARTS,
    METHOD_BISECTION,
    METHOD_LOGCONVEX,
    POLISH_GOLDEN_TOL,
    POLISH_MAX_SWEEPS,
    POLISH_SCAN_POINTS,
    PWLA_TAU_FRACTION,
)
from .errors import InfeasibleError, ModelError, PwlaError, UnsupportedConstraintError
from .models import FloatArray, GnlModel, LinearConstraintSet, MgnlModel, NestStructure, expected_revenue
from .reformulate import choose_beta

_LOGGER = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_DUPLICATE_PRICE_TOL = 1e-12


def _frozen(values: ArrayLike, name: str) -> FloatArray:
    array = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(array)):
        raise ModelError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, slots=True, eq=False)
class PriceLadder:
    """Admissible discrete prices per product with utility v_il = kappa_i - eta_i p_il."""

    prices: tuple[FloatArray, ...]
    eta: FloatArray
    kappa: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", tuple(_frozen(p, "prices") for p in self.prices))
        object.__setattr__(self, "eta", _frozen(self.eta, "eta"))
        object.__setattr__(self, "kappa", _frozen(self.kappa, "kappa"))
        m = len(self.prices)
        if self.eta.shape[0] != m or self.kappa.shape[0] != m:
            raise ModelError("eta and kappa need one entry per product ladder")
        if np.any(self.eta <= 0.0):
            raise ModelError("price sensitivities eta must be positive")
        for i, ladder in enumerate(self.prices):
            if np.any(ladder <= 0.0):
                raise ModelError(f"product {i} has a nonpositive price")
            if np.any(np.diff(ladder) <= 0.0):
                raise ModelError(f"prices of product {i} must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.prices)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(int(p.shape[0]) for p in self.prices)

    @property
    def n_virtual(self) -> int:
        return sum(self.sizes)

    def virtual_items(self) -> list[tuple[int, int]]:
        """Return the (product, level) pair of every virtual item, product-major."""
        return [(i, level) for i, ladder in enumerate(self.prices) for level in range(ladder.shape[0])]

    def augmented(self, extra: Mapping[int, float]) -> PriceLadder:
        """Return a ladder with extra prices merged in."""
        prices = []
        for i, ladder in enumerate(self.prices):
            merged = ladder if i not in extra else np.append(ladder, float(extra[i]))
            prices.append(_unique_prices(merged))
        return PriceLadder(prices=tuple(prices), eta=self.eta, kappa=self.kappa)


def _unique_prices(values: ArrayLike) -> FloatArray:
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    if ordered.size == 0:
        return ordered
    keep = [ordered[0]]
    for price in ordered[1:]:
        if price - keep[-1] > _DUPLICATE_PRICE_TOL * max(1.0, abs(price)):
            keep.append(price)
    return np.asarray(keep)


@dataclass(frozen=True, slots=True, eq=False)
class PriceBounds:
    """Continuous price ranges [L_i, U_i] with sensitivities and intercepts."""

    lower: FloatArray
    upper: FloatArray
    eta: FloatArray
    kappa: FloatArray

    def __post_init__(self) -> None:
        for name in ("lower", "upper", "eta", "kappa"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        m = self.lower.shape[0]
        if any(getattr(self, name).shape[0] != m for name in ("upper", "eta", "kappa")):
            raise ModelError("price bounds need one entry per product in every field")
        if np.any(self.lower <= 0.0):
            raise ModelError("lower price bounds must be positive")
        if np.any(self.upper < self.lower):
            raise ModelError("every upper price bound must be at least the lower bound")
        if np.any(self.eta <= 0.0):
            raise ModelError("price sensitivities eta must be positive")

    @property
    def m(self) -> int:
        return int(self.lower.shape[0])

    def w_domain(self, i: int, sigma_n: float) -> tuple[float, float]:
        """Return the exponent range of w_in = (kappa_i - eta_i y_i) / sigma_n."""
        return (
            (float(self.kappa[i]) - float(self.eta[i]) * float(self.upper[i])) / sigma_n,
            (float(self.kappa[i]) - float(self.eta[i]) * float(self.lower[i])) / sigma_n,
        )

    def price_of(self, i: int, sigma_n: float, w: ArrayLike) -> FloatArray:
        """Map exponents back to prices."""
        return (float(self.kappa[i]) - sigma_n * np.asarray(w, dtype=np.float64)) / float(self.eta[i])


@dataclass(frozen=True, slots=True, eq=False)
class Breakpoints:
    """Secant grid of exp over [q_1, q_{H+1}] with a certified error."""

    q: FloatArray
    slopes: FloatArray
    epsilon: float
    tau: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _frozen(self.q, "q"))
        object.__setattr__(self, "slopes", _frozen(self.slopes, "slopes"))
        if self.q.shape[0] == 0:
            raise PwlaError("a breakpoint grid needs at least one point")
        if np.any(np.diff(self.q) <= 0.0):
            raise PwlaError("breakpoints must be strictly increasing")
        if self.slopes.shape[0] != self.q.shape[0] - 1:
            raise PwlaError("one slope per segment is required")

    @classmethod
    def from_points(cls, q: ArrayLike, *, epsilon: float, tau: float) -> Breakpoints:
        points = np.asarray(q, dtype=np.float64)
        return cls(q=points, slopes=_secant_slopes(points), epsilon=epsilon, tau=tau)

    @property
    def n_segments(self) -> int:
        return int(self.q.shape[0] - 1)

    @property
    def w_lo(self) -> float:
        return float(self.q[0])

    @property
    def w_hi(self) -> float:
        return float(self.q[-1])

    def max_theta(self) -> float:
        if self.n_segments == 0:
            return 0.0
        return max(pwla_theta(float(a), float(b)) for a, b in zip(self.q[:-1], self.q[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {"q": [float(v) for v in self.q], "epsilon": self.epsilon, "tau": self.tau}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Breakpoints:
        try:
            return cls.from_points(data["q"], epsilon=float(data["epsilon"]), tau=float(data["tau"]))
        except (KeyError, TypeError, ValueError) as err:
            raise PwlaError(f"malformed breakpoint record: {err}") from err


def _secant_slopes(q: FloatArray) -> FloatArray:
    if q.shape[0] < 2:
        return np.zeros(0)
    widths = np.diff(q)
    return np.exp(q[:-1]) * np.expm1(widths) / widths


@dataclass(frozen=True, slots=True)
class PolishStats:
    starts: int = 0
    accepted: int = 0
    evaluations: int = 0
    sweeps: int = 0


@dataclass(frozen=True, slots=True)
class CpConfig:
    """Settings of the continuous-price pipeline."""

    solver: SolverConfig = field(default_factory=SolverConfig)
    method: str = METHOD_LOGCONVEX
    starts: int = DEFAULT_POLISH_STARTS
    seed: int = 0
    max_rounds: int = CP_MAX_ROUNDS
    improvement_tol: float = CP_IMPROVEMENT_TOL

    def __post_init__(self) -> None:
        if self.method not in (METHOD_LOGCONVEX, METHOD_BISECTION):
            raise ValueError(f"Unsupported grid method: {self.method}")
        if self.starts < 0 or self.max_rounds < 1:
            raise ValueError("starts must be nonnegative and max_rounds positive")


@dataclass(frozen=True, slots=True)
class CpSolveReport:
    """Outcome of the continuous-price pipeline.

    `grid_bound` is the dual bound of the price-grid problem. It
    bounds the grid problem only, never the continuous one.
    """

    assortment: tuple[int, ...]
    prices: tuple[float | None, ...]
    revenue: float
    surrogate_revenue: float
    grid_revenue: float
    grid_bound: float
    grid_gap: float
    rounds: int
    ladder_sizes: tuple[int, ...]
    polish: PolishStats
    seconds: float
    grid_result: SolveResult

    def as_result(self) -> SolveResult:
        """Return the report in SolveResult form; the bound field carries the grid bound."""
        base = self.grid_result
        return replace(
            base,
            values=None,
            objective=self.revenue,
            bound=max(self.grid_bound, self.revenue),
            gap=relative_gap(self.revenue, max(self.grid_bound, self.revenue), maximize=True),
            seconds=self.seconds,
            assortment=self.assortment,
            prices=self.prices,
            iterations=self.rounds,
            extras={"surrogate_revenue": self.surrogate_revenue, "grid_bound_only": True},
        )


def _structure_of(model: GnlModel | NestStructure) -> NestStructure:
    return model.structure if isinstance(model, GnlModel) else model


def price_weights(structure: NestStructure, eta: ArrayLike, kappa: ArrayLike, prices: ArrayLike) -> FloatArray:
    """Return V_in = exp((kappa_i - eta_i y_i) / sigma_n); batches broadcast over leading axes."""
    y = np.asarray(prices, dtype=np.float64)
    utility = np.asarray(kappa, dtype=np.float64) - np.asarray(eta, dtype=np.float64) * y
    return np.exp(utility[..., None] / structure.sigma)


def priced_model(structure: NestStructure, bounds: PriceBounds, prices: ArrayLike) -> GnlModel:
    y = np.asarray(prices, dtype=np.float64)
    return GnlModel.from_structure(structure, v=price_weights(structure, bounds.eta, bounds.kappa, y), r=y)


def expand_discrete(model: GnlModel | NestStructure, ladder: PriceLadder) -> tuple[GnlModel, LinearConstraintSet]:
    """Turn every (product, price) pair into a virtual product with at most one price per product."""
    structure = _structure_of(model)
    if ladder.m != structure.m:
        raise ModelError(f"ladder covers {ladder.m} products, model has {structure.m}")
    empty = [i for i, size in enumerate(ladder.sizes) if size == 0]
    if empty:
        raise ModelError(f"products {empty} have an empty price ladder")
    items = ladder.virtual_items()
    owner = np.asarray([i for i, _ in items], dtype=np.int64)
    prices = np.concatenate(ladder.prices)
    v = price_weights(structure, ladder.eta[owner], ladder.kappa[owner], prices)
    extended = GnlModel(v0=structure.v0, v=v, alpha=structure.alpha[owner], sigma=structure.sigma, r=prices)
    rows = np.zeros((ladder.m, len(items)))
    rows[owner, np.arange(len(items))] = 1.0
    return extended, LinearConstraintSet(a=rows, b=np.ones(ladder.m))


def lift_constraints(
    constraints: LinearConstraintSet | None, ladder: PriceLadder, *, joint_prices: bool = False
) -> LinearConstraintSet | None:
    """Rewrite product-level rows over the virtual items.

    Rows over m columns act on x_i = sum_l x_il. With joint_prices, rows over
    2m columns read (x, y) and y_i enters as y_i x_i = sum_l p_il x_il. Rows
    already over the virtual items pass through.
    """
    if constraints is None or constraints.n_rows == 0:
        return None
    m, size = ladder.m, ladder.n_virtual
    owner = np.asarray([i for i, _ in ladder.virtual_items()], dtype=np.int64)
    prices = np.concatenate(ladder.prices)
    if joint_prices and constraints.dim == 2 * m:
        a_x, a_y = constraints.a[:, :m], constraints.a[:, m:]
        return LinearConstraintSet(a=a_x[:, owner] + a_y[:, owner] * prices, b=constraints.b)
    if constraints.dim == m:
        return LinearConstraintSet(a=constraints.a[:, owner], b=constraints.b)
    if constraints.dim == size and not joint_prices:
        return constraints
    raise ModelError(f"constraints over {constraints.dim} columns fit neither {m} products nor {size} virtual items")


def _ladders_for(model: GnlModel | NestStructure | MgnlModel, ladder: PriceLadder | Sequence[PriceLadder]) -> list[PriceLadder]:
    count = model.n_segments if isinstance(model, MgnlModel) else 1
    ladders = [ladder] * count if isinstance(ladder, PriceLadder) else list(ladder)
    if len(ladders) != count:
        raise ModelError(f"{len(ladders)} ladders supplied for {count} segments")
    first = ladders[0]
    for other in ladders[1:]:
        if other.sizes != first.sizes or not all(np.array_equal(a, b) for a, b in zip(other.prices, first.prices)):
            raise ModelError("segments must share the same price points")
    return ladders


def solve_jap_dp(
    model: GnlModel | NestStructure | MgnlModel,
    ladder: PriceLadder | Sequence[PriceLadder],
    extra_constraints: LinearConstraintSet | None = None,
    config: SolverConfig | None = None,
    *,
    method: str = METHOD_LOGCONVEX,
) -> SolveResult:
    """Solve assortment and discrete pricing jointly on the virtual-item expansion.

    A mixed model may carry one ladder per segment; the price points must agree.
    """
    ladders = _ladders_for(model, ladder)
    base = ladders[0]
    if isinstance(model, MgnlModel):
        expansions = [expand_discrete(segment, seg_ladder) for segment, seg_ladder in zip(model.segments, ladders)]
        one_price = expansions[0][1]
        mixed = MgnlModel(segments=tuple(extended for extended, _ in expansions), theta=model.theta)
        beta = max(choose_beta(extended) for extended in mixed.segments)
        constraints = _stack(one_price, lift_constraints(extra_constraints, base))
        result = solve_mgnl(mixed, constraints, beta, config)
    else:
        extended, one_price = expand_discrete(model, base)
        beta = choose_beta(extended)
        constraints = _stack(one_price, lift_constraints(extra_constraints, base))
        if method == METHOD_BISECTION:
            result = solve_gnl_bisection(extended, constraints, beta, config=config)
        elif method == METHOD_LOGCONVEX:
            result = solve_gnl_logconvex(extended, constraints, beta, config)
        else:
            raise ValueError(f"Unsupported discrete-price method: {method}")
    return _map_virtual(result, base)


def _stack(first: LinearConstraintSet, second: LinearConstraintSet | None) -> LinearConstraintSet:
    return first if second is None else first.stacked(second)


def _map_virtual(result: SolveResult, ladder: PriceLadder) -> SolveResult:
    if result.assortment is None:
        return result
    offered = [0] * ladder.m
    prices: list[float | None] = [None] * ladder.m
    for chosen, (i, level) in zip(result.assortment, ladder.virtual_items()):
        if chosen:
            offered[i] = 1
            prices[i] = float(ladder.prices[i][level])
    extras = dict(result.extras)
    extras["virtual_assortment"] = result.assortment
    return replace(result, assortment=tuple(offered), prices=tuple(prices), extras=extras)


def pwla_theta(q_h: float, q_next: float) -> float:
    """Return the largest gap between the secant of exp over [q_h, q_next] and exp."""
    if not q_next > q_h:
        raise PwlaError(f"breakpoint interval [{q_h}, {q_next}] is empty")
    width = q_next - q_h
    ratio = math.expm1(width) / width
    gap = 1.0 + (math.log(ratio) - 1.0) * ratio
    return math.exp(q_h) * max(0.0, gap)


def pwla_next_breakpoint(q_h: float, w_hi: float, epsilon: float, tau: float) -> float:
    """Return the furthest breakpoint after q_h, within tau, whose segment stays within epsilon."""
    if not q_h < w_hi:
        raise PwlaError(f"no room after breakpoint {q_h} below {w_hi}")
    if epsilon <= 0.0 or tau <= 0.0:
        raise PwlaError("epsilon and tau must be positive")
    if pwla_theta(q_h, w_hi) <= epsilon:
        return w_hi
    lo, hi = q_h, w_hi
    while hi - lo > tau:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pwla_theta(q_h, mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return lo


def pwla_build(w_lo: float, w_hi: float, epsilon: float, tau: float | None = None) -> Breakpoints:
    """Build breakpoints greedily from w_lo so every segment's gap stays within epsilon."""
    if w_lo > w_hi:
        raise PwlaError(f"inverted PWLA domain [{w_lo}, {w_hi}]")
    if epsilon <= 0.0:
        raise PwlaError("epsilon must be positive")
    step = PWLA_TAU_FRACTION * (w_hi - w_lo) if tau is None else tau
    if w_lo == w_hi:
        return Breakpoints.from_points([w_lo], epsilon=epsilon, tau=step)
    points = [w_lo]
    while points[-1] < w_hi:
        nxt = pwla_next_breakpoint(points[-1], w_hi, epsilon, step)
        if nxt <= points[-1]:
            raise PwlaError(f"epsilon={epsilon!r} is too small for tau={step!r} at w={points[-1]!r}")
        points.append(nxt)
    _LOGGER.debug("PWLA over [%s, %s] with epsilon=%s uses %s segments", w_lo, w_hi, epsilon, len(points) - 1)
    return Breakpoints.from_points(points, epsilon=epsilon, tau=step)


def _segment_index(bp: Breakpoints, w: FloatArray) -> FloatArray:
    slack = 1e-12 * max(1.0, abs(bp.w_lo), abs(bp.w_hi))
    if np.any(w < bp.w_lo - slack) or np.any(w > bp.w_hi + slack):
        raise PwlaError(f"query outside the PWLA domain [{bp.w_lo}, {bp.w_hi}]")
    return np.clip(np.searchsorted(bp.q, w, side="right") - 1, 0, max(bp.n_segments - 1, 0))


def pwla_eval(bp: Breakpoints, w: ArrayLike) -> FloatArray | float:
    """Return the secant interpolant of exp at w; exact at every breakpoint."""
    values = np.asarray(w, dtype=np.float64)
    if bp.n_segments == 0:
        _segment_index(bp, np.atleast_1d(values))
        result = np.full(values.shape, math.exp(bp.w_lo))
        return float(result) if result.ndim == 0 else result
    flat = np.atleast_1d(values)
    index = _segment_index(bp, flat)
    clipped = np.clip(flat, bp.w_lo, bp.w_hi)
    result = np.exp(bp.q[index]) + bp.slopes[index] * (clipped - bp.q[index])
    result = np.where(clipped == bp.w_hi, math.exp(bp.w_hi), result)
    return float(result[0]) if values.ndim == 0 else result.reshape(values.shape)


def pwla_fill_fractions(bp: Breakpoints, w: float) -> FloatArray:
    """Return the incremental fill nu_h of every segment; nu is nonincreasing in h."""
    _segment_index(bp, np.atleast_1d(float(w)))
    if bp.n_segments == 0:
        return np.zeros(0)
    return np.clip((w - bp.q[:-1]) / np.diff(bp.q), 0.0, 1.0)


def pwla_incremental_value(bp: Breakpoints, w: float) -> float:
    """Return exp(q_1) + sum_h slope_h (q_{h+1} - q_h) nu_h."""
    nu = pwla_fill_fractions(bp, w)
    return math.exp(bp.w_lo) + float(np.sum(bp.slopes * np.diff(bp.q) * nu))


def pwla_bound(lower: float, upper: float, eta: float, kappa: float, sigma: float, epsilon: float) -> int:
    """Return the closed-form upper bound on the number of PWLA segments."""
    if upper < lower or eta <= 0.0 or not 0.0 < sigma <= 1.0 or epsilon <= 0.0:
        raise PwlaError("pwla_bound needs U >= L, eta > 0, sigma in (0, 1] and epsilon > 0")
    scale = math.exp((kappa - lower * eta) / (2.0 * sigma))
    return int(math.ceil(scale * eta * (upper - lower) / (2.0 * math.sqrt(2.0 * epsilon) * sigma)))


def cp_breakpoints(
    structure: NestStructure, bounds: PriceBounds, epsilon: float
) -> dict[tuple[int, int], Breakpoints]:
    """Build one breakpoint grid per (product, nest) membership."""
    grids: dict[tuple[int, int], Breakpoints] = {}
    for i in range(bounds.m):
        for n in np.flatnonzero(structure.alpha[i] > 0.0):
            w_lo, w_hi = bounds.w_domain(i, float(structure.sigma[n]))
            grids[(i, int(n))] = pwla_build(w_lo, w_hi, epsilon)
    return grids


def cp_price_ladder(structure: NestStructure, bounds: PriceBounds, epsilon: float) -> PriceLadder:
    """Map the finest per-nest grid of every product back to price space."""
    grids = cp_breakpoints(structure, bounds, epsilon)
    prices = []
    for i in range(bounds.m):
        options = [(grid.n_segments, -n, n) for (j, n), grid in grids.items() if j == i]
        if not options:
            raise ModelError(f"product {i} belongs to no nest")
        _, _, n = max(options)
        mapped = bounds.price_of(i, float(structure.sigma[n]), grids[(i, n)].q)
        prices.append(_unique_prices(np.clip(mapped, bounds.lower[i], bounds.upper[i])))
    return PriceLadder(prices=tuple(prices), eta=bounds.eta, kappa=bounds.kappa)


def cp_beta(bounds: PriceBounds) -> float:
    return float(bounds.upper.max()) + CP_BETA_MARGIN


def cp_revenue(structure: NestStructure, bounds: PriceBounds, x: ArrayLike, y: ArrayLike) -> FloatArray | float:
    """Return F(x, y); a 2-D y evaluates one price vector per row."""
    offer = np.asarray(x, dtype=np.float64)
    prices = np.asarray(y, dtype=np.float64)
    batch = np.atleast_2d(prices)
    weights = structure.alpha * price_weights(structure, bounds.eta, bounds.kappa, batch) * offer[:, None]
    inclusive = structure.v0 + weights.sum(axis=1)
    if np.any(inclusive <= 0.0):
        raise ModelError("continuous-price revenue needs positive inclusive values")
    numerator = np.einsum("kin,ki->kn", weights, batch)
    revenue = (inclusive ** (structure.sigma - 1.0) * numerator).sum(axis=1) / (inclusive**structure.sigma).sum(axis=1)
    return float(revenue[0]) if prices.ndim == 1 else revenue


def pwla_surrogate_revenue(
    structure: NestStructure,
    bounds: PriceBounds,
    x: ArrayLike,
    y: ArrayLike,
    grids: Mapping[tuple[int, int], Breakpoints],
) -> float:
    """Return F with every exp(w_in) replaced by its PWLA value."""
    prices = np.asarray(y, dtype=np.float64)
    v = price_weights(structure, bounds.eta, bounds.kappa, prices)
    for (i, n), grid in grids.items():
        w = (float(bounds.kappa[i]) - float(bounds.eta[i]) * prices[i]) / float(structure.sigma[n])
        v[i, n] = pwla_eval(grid, w)
    return expected_revenue(GnlModel.from_structure(structure, v=v, r=prices), x)


def pwla_objective_gap(
    structure: NestStructure,
    bounds: PriceBounds,
    x: ArrayLike,
    y: ArrayLike,
    epsilon: float,
    *,
    grids: Mapping[tuple[int, int], Breakpoints] | None = None,
) -> float:
    """Return |F(x, y) - F_pwla(x, y)|."""
    prices = np.asarray(y, dtype=np.float64)
    if np.any(prices < bounds.lower - 1e-12) or np.any(prices > bounds.upper + 1e-12):
        raise PwlaError("prices outside their bounds")
    grids = cp_breakpoints(structure, bounds, epsilon) if grids is None else grids
    exact = float(cp_revenue(structure, bounds, x, prices))
    return abs(exact - pwla_surrogate_revenue(structure, bounds, x, prices, grids))


@dataclass(frozen=True, slots=True, eq=False)
class _JointRows:
    """Rows a_x x + a_y (y * x) <= b."""

    a_x: FloatArray
    a_y: FloatArray
    b: FloatArray

    @property
    def has_prices(self) -> bool:
        return bool(np.any(self.a_y != 0.0))

    def slack(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self.b - self.a_x @ x - self.a_y @ (y * x)


def _joint_rows(constraints: LinearConstraintSet | None, m: int) -> _JointRows | None:
    if constraints is None or constraints.n_rows == 0:
        return None
    if constraints.dim == m:
        return _JointRows(a_x=constraints.a, a_y=np.zeros_like(constraints.a), b=constraints.b)
    if constraints.dim == 2 * m:
        return _JointRows(a_x=constraints.a[:, :m], a_y=constraints.a[:, m:], b=constraints.b)
    raise ModelError(f"price constraints must span m={m} or 2m={2 * m} columns, got {constraints.dim}")


class _PricePolisher:
    """Cyclic coordinate search on the true revenue with the assortment fixed."""

    def __init__(
        self,
        structure: NestStructure,
        bounds: PriceBounds,
        x: FloatArray,
        rows: _JointRows | None,
    ) -> None:
        self.structure = structure
        self.bounds = bounds
        self.x = x
        self.rows = rows
        self.offered = [int(i) for i in np.flatnonzero(x > 0.5)]
        self.evaluations = 0

    def revenue(self, y: FloatArray) -> float | FloatArray:
        self.evaluations += 1 if y.ndim == 1 else y.shape[0]
        return cp_revenue(self.structure, self.bounds, self.x, y)

    def feasible(self, y: FloatArray) -> bool:
        return self.rows is None or bool(np.all(self.rows.slack(self.x, y) >= -1e-9))

    def interval(self, y: FloatArray, i: int) -> tuple[float, float]:
        lo, hi = float(self.bounds.lower[i]), float(self.bounds.upper[i])
        if self.rows is None:
            return lo, hi
        others = y.copy()
        others[i] = 0.0
        slack = self.rows.slack(self.x, others)
        for coef, room in zip(self.rows.a_y[:, i], slack):
            if coef > 0.0:
                hi = min(hi, room / coef)
            elif coef < 0.0:
                lo = max(lo, room / coef)
        return lo, hi

    def _line_search(self, y: FloatArray, i: int, lo: float, hi: float) -> tuple[float, float]:
        grid = np.linspace(lo, hi, POLISH_SCAN_POINTS)
        trial = np.repeat(y[None, :], grid.shape[0], axis=0)
        trial[:, i] = grid
        values = np.asarray(self.revenue(trial))
        best = int(np.argmax(values))
        a = grid[max(best - 1, 0)]
        b = grid[min(best + 1, grid.shape[0] - 1)]
        point, value = float(grid[best]), float(values[best])

        def at(price: float) -> float:
            probe = y.copy()
            probe[i] = price
            return float(self.revenue(probe))

        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = at(c), at(d)
        while b - a > POLISH_GOLDEN_TOL * max(1.0, abs(b)):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = at(c)
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = at(d)
        for candidate, score in ((c, fc), (d, fd)):
            if score > value:
                point, value = candidate, score
        return point, value

    def polish(self, start: FloatArray) -> tuple[FloatArray, float, int]:
        y = start.copy()
        value = float(self.revenue(y))
        sweeps = 0
        for sweeps in range(1, POLISH_MAX_SWEEPS + 1):
            improved = False
            for i in self.offered:
                lo, hi = self.interval(y, i)
                if hi < lo:
                    continue
                point, score = self._line_search(y, i, lo, hi)
                if score > value + 1e-12 * max(1.0, abs(value)):
                    probe = y.copy()
                    probe[i] = point
                    if self.feasible(probe):
                        y, value, improved = probe, score, True
            if not improved:
                break
        return y, value, sweeps


def polish_prices(
    structure: NestStructure,
    bounds: PriceBounds,
    x: ArrayLike,
    start: ArrayLike,
    *,
    constraints: LinearConstraintSet | None = None,
    starts: int = DEFAULT_POLISH_STARTS,
    seed: int = 0,
) -> tuple[FloatArray, float, PolishStats]:
    """Improve prices of the offered products from start plus random restarts.

    Only improvements on the true revenue are kept, so the result never falls
    below the revenue at start.
    """
    offer = np.asarray(x, dtype=np.float64)
    rows = _joint_rows(constraints, bounds.m)
    polisher = _PricePolisher(structure, bounds, offer, rows)
    best_y = np.asarray(start, dtype=np.float64).copy()
    best = float(polisher.revenue(best_y))
    if not polisher.offered:
        return best_y, best, PolishStats(starts=0, evaluations=polisher.evaluations)
    rng = np.random.default_rng(seed)
    seeds = [best_y]
    for _ in range(starts):
        for _attempt in range(50):
            trial = best_y.copy()
            trial[polisher.offered] = rng.uniform(bounds.lower[polisher.offered], bounds.upper[polisher.offered])
            if polisher.feasible(trial):
                seeds.append(trial)
                break
    accepted = 0
    sweeps = 0
    for seed_y in seeds:
        y, value, used = polisher.polish(seed_y)
        sweeps += used
        if value > best + 1e-12 * max(1.0, abs(best)):
            best_y, best = y, value
            accepted += 1
    stats = PolishStats(starts=len(seeds), accepted=accepted, evaluations=polisher.evaluations, sweeps=sweeps)
    return best_y, best, stats


def _grid_solve(
    structure: NestStructure,
    ladder: PriceLadder,
    constraints: LinearConstraintSet | None,
    config: CpConfig,
) -> SolveResult:
    rows = _joint_rows(constraints, ladder.m)
    joint = None if rows is None else LinearConstraintSet(a=np.hstack([rows.a_x, rows.a_y]), b=rows.b)
    lifted = None if joint is None else lift_constraints(joint, ladder, joint_prices=True)
    try:
        return solve_jap_dp(structure, ladder, lifted, config.solver, method=config.method)
    except InfeasibleError as err:
        if rows is None or not rows.has_prices:
            raise
        plain = np.all(rows.a_y == 0.0, axis=1)
        x_only = LinearConstraintSet(a=rows.a_x[plain], b=rows.b[plain]) if np.any(plain) else None
        try:
            solve_jap_dp(structure, ladder, x_only, config.solver, method=config.method)
        except InfeasibleError:
            raise err from None
        raise UnsupportedConstraintError("the price constraints admit no point on the price grid") from err


def _price_vector(bounds: PriceBounds, prices: Sequence[float | None]) -> FloatArray:
    return np.asarray([bounds.lower[i] if p is None else p for i, p in enumerate(prices)], dtype=np.float64)


def solve_jap_cp(
    model: GnlModel | NestStructure,
    bounds: PriceBounds,
    constraints: LinearConstraintSet | None = None,
    epsilon: float = DEFAULT_EPSILON,
    config: CpConfig | None = None,
) -> CpSolveReport:
    """Solve assortment and continuous pricing: PWLA price grid, exact grid solve, then price polish."""
    settings = config or CpConfig()
    structure = _structure_of(model)
    if bounds.m != structure.m:
        raise ModelError(f"price bounds cover {bounds.m} products, model has {structure.m}")
    started = time.perf_counter()
    grids = cp_breakpoints(structure, bounds, epsilon)
    ladder = cp_price_ladder(structure, bounds, epsilon)
    first = _grid_solve(structure, ladder, constraints, settings)
    if first.assortment is None:
        raise InfeasibleError(f"price-grid solve stopped on {first.termination} without an assortment")
    offer = np.asarray(first.assortment, dtype=np.float64)
    best_y, best, stats = polish_prices(
        structure,
        bounds,
        offer,
        _price_vector(bounds, first.prices or ()),
        constraints=constraints,
        starts=settings.starts,
        seed=settings.seed,
    )
    _LOGGER.debug("Grid revenue %.10g polished to %.10g", first.objective, best)
    best_x = offer
    rounds = 1
    total = stats
    for rounds in range(2, settings.max_rounds + 1):
        extra = {i: float(best_y[i]) for i in np.flatnonzero(best_x > 0.5)}
        ladder = ladder.augmented(extra)
        result = _grid_solve(structure, ladder, constraints, settings)
        if result.assortment is None:
            break
        offer = np.asarray(result.assortment, dtype=np.float64)
        y, value, stats = polish_prices(
            structure,
            bounds,
            offer,
            _price_vector(bounds, result.prices or ()),
            constraints=constraints,
            starts=settings.starts,
            seed=settings.seed + rounds,
        )
        total = PolishStats(
            starts=total.starts + stats.starts,
            accepted=total.accepted + stats.accepted,
            evaluations=total.evaluations + stats.evaluations,
            sweeps=total.sweeps + stats.sweeps,
        )
        gain = value - best
        if gain > 0.0:
            best_x, best_y, best = offer, y, value
        if gain < settings.improvement_tol:
            break
    prices = tuple(float(best_y[i]) if best_x[i] > 0.5 else None for i in range(bounds.m))
    surrogate = pwla_surrogate_revenue(structure, bounds, best_x, best_y, grids)
    seconds = time.perf_counter() - started
    _LOGGER.info("Continuous pricing finished after %s rounds: revenue=%.10g", rounds, best)
    return CpSolveReport(
        assortment=tuple(int(v) for v in best_x),
        prices=prices,
        revenue=best,
        surrogate_revenue=surrogate,
        grid_revenue=first.objective,
        grid_bound=first.bound,
        grid_gap=first.gap,
        rounds=rounds,
        ladder_sizes=ladder.sizes,
        polish=total,
        seconds=seconds,
        grid_result=first,
    )


def two_peak_shell() -> NestStructure:
    """Return the two-nest single-product layout with a two-peak price landscape."""
    return NestStructure(v0=np.array([1.0, 1.0]), alpha=np.array([[0.1, 5.0]]), sigma=np.array([0.1, 0.9]))


def two_peak_bounds() -> PriceBounds:
    return PriceBounds(lower=np.array([0.01]), upper=np.array([10.0]), eta=np.array([1.0]), kappa=np.array([2.0]))

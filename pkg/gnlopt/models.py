"""Choice models and forward evaluation for generalized nested logit."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .const import DEGENERATE_WEIGHT
from .errors import BetaError, DegenerateNestError, ModelError

FloatArray = NDArray[np.float64]


def _as_array(value: ArrayLike, *, ndim: int, name: str) -> FloatArray:
    """Return value as a read-only float array with the expected rank."""
    try:
        array = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as err:
        raise ModelError(f"{name} is not numeric") from err
    if array.ndim != ndim:
        raise ModelError(f"{name} must have {ndim} dimension(s), got {array.ndim}")
    array.setflags(write=False)
    return array


def safe_power(weights: FloatArray, exponents: FloatArray) -> FloatArray:
    """Return weights**exponents computed as exp(e * log w).

    Zero weights give 0 for positive exponents and 1 for a zero exponent;
    a negative exponent on a zero weight is a degenerate nest.
    """
    weights = np.asarray(weights, dtype=np.float64)
    exponents = np.broadcast_to(np.asarray(exponents, dtype=np.float64), weights.shape)
    empty = weights < DEGENERATE_WEIGHT
    if np.any(empty & (exponents < 0.0)):
        raise DegenerateNestError("zero inclusive value raised to a negative power")
    safe = np.where(empty, 1.0, weights)
    result = np.exp(exponents * np.log(safe))
    return np.where(empty, np.where(exponents == 0.0, 1.0, 0.0), result)


@dataclass(frozen=True, slots=True, eq=False)
class NestStructure:
    """Nest layout shared by every price or preference realisation."""

    v0: FloatArray
    alpha: FloatArray
    sigma: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "v0", _as_array(self.v0, ndim=1, name="v0"))
        object.__setattr__(self, "alpha", _as_array(self.alpha, ndim=2, name="alpha"))
        object.__setattr__(self, "sigma", _as_array(self.sigma, ndim=1, name="sigma"))
        n_nests = self.v0.shape[0]
        if self.alpha.shape[1] != n_nests or self.sigma.shape[0] != n_nests:
            raise ModelError(
                f"nest dimensions disagree: v0={n_nests}, alpha={self.alpha.shape}, sigma={self.sigma.shape[0]}"
            )

    @property
    def m(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def n_nests(self) -> int:
        return int(self.v0.shape[0])


@dataclass(frozen=True, slots=True, eq=False)
class GnlModel:
    """One customer segment: opt-out weights, memberships, dissimilarities, revenues.

    `v` holds preference weights after exponentiation.
    """

    v0: FloatArray
    v: FloatArray
    alpha: FloatArray
    sigma: FloatArray
    r: FloatArray
    _weights: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "v0", _as_array(self.v0, ndim=1, name="v0"))
        object.__setattr__(self, "v", _as_array(self.v, ndim=2, name="v"))
        object.__setattr__(self, "alpha", _as_array(self.alpha, ndim=2, name="alpha"))
        object.__setattr__(self, "sigma", _as_array(self.sigma, ndim=1, name="sigma"))
        object.__setattr__(self, "r", _as_array(self.r, ndim=1, name="r"))
        m, n_nests = self.v.shape
        if self.alpha.shape != (m, n_nests):
            raise ModelError(f"alpha shape {self.alpha.shape} does not match v shape {self.v.shape}")
        if self.v0.shape[0] != n_nests or self.sigma.shape[0] != n_nests:
            raise ModelError("v0 and sigma must have one entry per nest")
        if self.r.shape[0] != m:
            raise ModelError(f"r has {self.r.shape[0]} entries for {m} products")
        weights = self.alpha * self.v
        weights.setflags(write=False)
        object.__setattr__(self, "_weights", weights)

    @property
    def m(self) -> int:
        return int(self.v.shape[0])

    @property
    def n_nests(self) -> int:
        return int(self.v.shape[1])

    @property
    def weights(self) -> FloatArray:
        """Return alpha_in * V_in."""
        return self._weights

    @property
    def structure(self) -> NestStructure:
        return NestStructure(v0=self.v0, alpha=self.alpha, sigma=self.sigma)

    @property
    def has_zero_optout(self) -> bool:
        return bool(np.any(self.v0 <= 0.0))

    @classmethod
    def from_structure(cls, structure: NestStructure, *, v: ArrayLike, r: ArrayLike) -> GnlModel:
        """Build a model by attaching preference weights and revenues to a nest layout."""
        return cls(v0=structure.v0, v=v, alpha=structure.alpha, sigma=structure.sigma, r=r)


@dataclass(frozen=True, slots=True, eq=False)
class MgnlModel:
    """Finite mixture of GNL segments with arrival probabilities."""

    segments: tuple[GnlModel, ...]
    theta: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "theta", _as_array(self.theta, ndim=1, name="theta"))
        if not self.segments:
            raise ModelError("a mixed model needs at least one segment")
        if len(self.segments) != self.theta.shape[0]:
            raise ModelError("theta must have one entry per segment")
        sizes = {segment.m for segment in self.segments}
        if len(sizes) != 1:
            raise ModelError(f"segments disagree on the number of products: {sorted(sizes)}")

    @property
    def m(self) -> int:
        return self.segments[0].m

    @property
    def n_segments(self) -> int:
        return len(self.segments)


@dataclass(frozen=True, slots=True)
class Assortment:
    """Binary offer vector over the products."""

    x: tuple[int, ...]

    @classmethod
    def from_set(cls, m: int, offered: Iterable[int]) -> Assortment:
        chosen = set(offered)
        if any(not 0 <= i < m for i in chosen):
            raise ModelError(f"product index outside [0, {m})")
        return cls(tuple(1 if i in chosen else 0 for i in range(m)))

    @classmethod
    def from_vector(cls, x: ArrayLike, *, tol: float = 1e-6) -> Assortment:
        """Round a vector that is binary within tol."""
        values = np.asarray(x, dtype=np.float64)
        if np.any(np.minimum(np.abs(values), np.abs(values - 1.0)) > tol):
            raise ModelError(f"assortment vector is not binary: {values.tolist()}")
        return cls(tuple(int(v > 0.5) for v in values))

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, value in enumerate(self.x) if value)

    def as_array(self) -> FloatArray:
        return np.asarray(self.x, dtype=np.float64)


@dataclass(frozen=True, slots=True, eq=False)
class LinearConstraintSet:
    """Rows A @ var <= b over d decision variables."""

    a: FloatArray
    b: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _as_array(self.a, ndim=2, name="a"))
        object.__setattr__(self, "b", _as_array(self.b, ndim=1, name="b"))
        if self.a.shape[0] != self.b.shape[0]:
            raise ModelError(f"constraint matrix has {self.a.shape[0]} rows but b has {self.b.shape[0]}")

    @classmethod
    def empty(cls, d: int) -> LinearConstraintSet:
        return cls(a=np.zeros((0, d)), b=np.zeros(0))

    @property
    def n_rows(self) -> int:
        return int(self.a.shape[0])

    @property
    def dim(self) -> int:
        return int(self.a.shape[1])

    def is_satisfied(self, var: ArrayLike, *, tol: float = 1e-9) -> bool:
        values = np.asarray(var, dtype=np.float64)
        if values.shape != (self.dim,):
            raise ModelError(f"constraint set over {self.dim} variables got a vector of shape {values.shape}")
        if self.n_rows == 0:
            return True
        return bool(np.all(self.a @ values <= self.b + tol * (1.0 + np.abs(self.b))))

    def stacked(self, other: LinearConstraintSet) -> LinearConstraintSet:
        if other.dim != self.dim:
            raise ModelError("cannot stack constraint sets of different dimension")
        return LinearConstraintSet(a=np.vstack([self.a, other.a]), b=np.concatenate([self.b, other.b]))


def cardinality_constraints(
    m: int,
    *,
    total: int | None = None,
    nest_members: Sequence[Sequence[int]] = (),
    nest_limits: Sequence[int] = (),
) -> LinearConstraintSet:
    """Build a global cardinality row and optional per-nest rows."""
    rows: list[FloatArray] = []
    rhs: list[float] = []
    if total is not None:
        rows.append(np.ones(m))
        rhs.append(float(total))
    for members, limit in zip(nest_members, nest_limits, strict=True):
        row = np.zeros(m)
        row[list(members)] = 1.0
        rows.append(row)
        rhs.append(float(limit))
    if not rows:
        return LinearConstraintSet.empty(m)
    return LinearConstraintSet(a=np.vstack(rows), b=np.asarray(rhs))


def build_gnl_model(
    *,
    v0: ArrayLike,
    v: ArrayLike,
    alpha: ArrayLike,
    sigma: ArrayLike,
    r: ArrayLike,
    allow_zero_optout: bool = False,
) -> GnlModel:
    """Construct a model and reject it unless every invariant holds."""
    model = GnlModel(v0=v0, v=v, alpha=alpha, sigma=sigma, r=r)
    violations = validate_model(model, allow_zero_optout=allow_zero_optout)
    if violations:
        raise ModelError("; ".join(violations))
    return model


def build_mgnl_model(segments: Sequence[GnlModel], theta: ArrayLike) -> MgnlModel:
    """Construct a mixed model, checking the arrival probabilities."""
    mixed = MgnlModel(segments=tuple(segments), theta=theta)
    if np.any(mixed.theta <= 0.0):
        raise ModelError("arrival probabilities must be positive")
    if abs(float(mixed.theta.sum()) - 1.0) > 1e-9:
        raise ModelError(f"arrival probabilities sum to {float(mixed.theta.sum())!r}, expected 1")
    for t, segment in enumerate(mixed.segments):
        violations = validate_model(segment)
        if violations:
            raise ModelError(f"segment {t}: " + "; ".join(violations))
    return mixed


def validate_model(model: GnlModel, *, allow_zero_optout: bool = False) -> list[str]:
    """Return a list of invariant violations, empty when the model is valid."""
    violations: list[str] = []
    for n, sigma in enumerate(model.sigma):
        if not 0.0 < sigma <= 1.0:
            violations.append(f"sigma[{n}]={sigma!r} outside (0, 1]")
    if np.any(model.alpha < 0.0):
        violations.append("alpha has negative entries")
    if np.any(model.v < 0.0):
        violations.append("v has negative entries")
    if np.any(model.r < 0.0):
        violations.append("r has negative entries")
    if not np.all(np.isfinite(model.v)) or not np.all(np.isfinite(model.alpha)):
        violations.append("v or alpha has non-finite entries")
    for i in range(model.m):
        if not np.any(model.weights[i] > 0.0):
            violations.append(f"product {i} belongs to no nest")
    if np.any(model.v0 < 0.0):
        violations.append("v0 has negative entries")
    elif not allow_zero_optout and np.any(model.v0 <= 0.0):
        violations.append("v0 must be positive for the standard model")
    return violations


def as_vector(x: Assortment | ArrayLike, m: int) -> FloatArray:
    """Return an offer vector (binary or relaxed) of length m."""
    values = x.as_array() if isinstance(x, Assortment) else np.asarray(x, dtype=np.float64)
    if values.shape != (m,):
        raise ModelError(f"assortment has shape {values.shape}, expected ({m},)")
    return values


def indicator(m: int, offered: Iterable[int]) -> FloatArray:
    """Return the 0/1 vector of a product set."""
    values = np.zeros(m)
    chosen = list(offered)
    if chosen:
        values[chosen] = 1.0
    return values


def inclusive_value(model: GnlModel | NestStructure, x: Assortment | ArrayLike, v: ArrayLike | None = None) -> FloatArray:
    """Return W_n = V_0n + sum_i alpha_in x_i V_in for every nest."""
    if isinstance(model, GnlModel):
        weights = model.weights
    else:
        weights = model.alpha * np.asarray(v, dtype=np.float64)
    return model.v0 + as_vector(x, model.m) @ weights


def _choice_terms(
    model: GnlModel, x: Assortment | ArrayLike, *, allow_empty_nests: bool
) -> tuple[FloatArray, FloatArray, FloatArray, float]:
    values = as_vector(x, model.m)
    w = inclusive_value(model, values)
    empty = w < DEGENERATE_WEIGHT
    if np.any(empty & (model.sigma < 1.0)) and not allow_empty_nests:
        raise DegenerateNestError("a nest has zero inclusive value; use the zero opt-out path")
    k = safe_power(w, model.sigma)
    total = float(k.sum())
    if total <= 0.0:
        raise DegenerateNestError("every nest is empty")
    h = np.where(empty, 0.0, safe_power(np.where(empty, 1.0, w), model.sigma - 1.0))
    return values, w, h, total


def nest_choice_prob(model: GnlModel, x: Assortment | ArrayLike, *, allow_empty_nests: bool = False) -> FloatArray:
    """Return P(S_n | x) = W_n^sigma_n / sum_n' W_n'^sigma_n'."""
    _, w, _, total = _choice_terms(model, x, allow_empty_nests=allow_empty_nests)
    return safe_power(w, model.sigma) / total


def product_choice_prob(model: GnlModel, x: Assortment | ArrayLike, *, allow_empty_nests: bool = False) -> FloatArray:
    """Return the unconditional purchase probability of every product."""
    values, _, h, total = _choice_terms(model, x, allow_empty_nests=allow_empty_nests)
    return values * (model.weights @ h) / total


def no_purchase_prob(model: GnlModel, x: Assortment | ArrayLike, *, allow_empty_nests: bool = False) -> float:
    """Return the probability of leaving without a purchase."""
    _, _, h, total = _choice_terms(model, x, allow_empty_nests=allow_empty_nests)
    return float(h @ model.v0) / total


def expected_revenue(model: GnlModel, x: Assortment | ArrayLike, *, allow_empty_nests: bool = False) -> float:
    """Return F(x) = sum_i r_i P(i | x)."""
    return float(model.r @ product_choice_prob(model, x, allow_empty_nests=allow_empty_nests))


def mgnl_expected_revenue(mixed: MgnlModel, x: Assortment | ArrayLike) -> float:
    """Return sum_t theta_t F_t(x)."""
    values = as_vector(x, mixed.m)
    return float(sum(theta * expected_revenue(segment, values) for theta, segment in zip(mixed.theta, mixed.segments)))


def check_beta(r: ArrayLike, beta: float) -> None:
    revenues = np.asarray(r, dtype=np.float64)
    if revenues.size and not beta > float(revenues.max()):
        raise BetaError(f"beta={beta!r} must exceed max revenue {float(revenues.max())!r}")


def min_objective(model: GnlModel, x: Assortment | ArrayLike, beta: float, *, allow_empty_nests: bool = False) -> float:
    """Return the minimisation form with r'_i = beta - r_i; equals beta - F(x)."""
    check_beta(model.r, beta)
    values, _, h, total = _choice_terms(model, x, allow_empty_nests=allow_empty_nests)
    numerator = beta * model.v0 + (values * (beta - model.r)) @ model.weights
    return float(h @ numerator) / total


def bisection_objective(model: GnlModel, x: Assortment | ArrayLike, beta: float, delta: float) -> float:
    """Return G(delta, x) = sum_n H_n (beta V_0n + sum_i alpha x r' V) - delta sum_n K_n."""
    check_beta(model.r, beta)
    values = as_vector(x, model.m)
    h = h_values(model, values)
    k = k_values(model, values)
    numerator = beta * model.v0 + (values * (beta - model.r)) @ model.weights
    return float(h @ numerator - delta * k.sum())


def h_values(model: GnlModel, x: Assortment | ArrayLike) -> FloatArray:
    """Return H_n(x) = W_n(x)^(sigma_n - 1) for every nest."""
    return safe_power(inclusive_value(model, x), model.sigma - 1.0)


def k_values(model: GnlModel, x: Assortment | ArrayLike) -> FloatArray:
    """Return K_n(x) = W_n(x)^sigma_n for every nest."""
    return safe_power(inclusive_value(model, x), model.sigma)


def y_values(model: GnlModel, x: Assortment | ArrayLike) -> FloatArray:
    """Return Y_n(x) = (sigma_n - 1) log W_n(x)."""
    w = inclusive_value(model, x)
    degenerate = (w < DEGENERATE_WEIGHT) & (model.sigma < 1.0)
    if np.any(degenerate):
        raise DegenerateNestError("log of a zero inclusive value")
    return (model.sigma - 1.0) * np.log(np.where(w < DEGENERATE_WEIGHT, 1.0, w))


def z_value(model: GnlModel, x: Assortment | ArrayLike) -> float:
    """Return Z(x) = log sum_n W_n(x)^sigma_n."""
    total = float(k_values(model, x).sum())
    if total <= 0.0:
        raise DegenerateNestError("log of an empty denominator")
    return float(np.log(total))


def _set_vector(model: GnlModel, subset: Iterable[int]) -> FloatArray:
    chosen = list(subset)
    if any(not 0 <= i < model.m for i in chosen):
        raise ModelError(f"set element outside [0, {model.m})")
    return indicator(model.m, chosen)


def set_H(model: GnlModel, n: int, subset: Iterable[int]) -> float:
    """Return H_n(S)."""
    return float(h_values(model, _set_vector(model, subset))[n])


def set_K(model: GnlModel, n: int, subset: Iterable[int]) -> float:
    """Return K_n(S)."""
    return float(k_values(model, _set_vector(model, subset))[n])


def set_Y(model: GnlModel, n: int, subset: Iterable[int]) -> float:
    """Return Y_n(S)."""
    return float(y_values(model, _set_vector(model, subset))[n])


def set_Z(model: GnlModel, subset: Iterable[int]) -> float:
    """Return Z(S)."""
    return z_value(model, _set_vector(model, subset))


def model_summary(model: GnlModel) -> dict[str, Any]:
    """Return a short description used in log lines."""
    return {
        "m": model.m,
        "n_nests": model.n_nests,
        "sigma_min": float(model.sigma.min()),
        "zero_optout": int(np.sum(model.v0 <= 0.0)),
    }

"""Linear cut families and auxiliary-variable bounds for the reformulated masters."""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable, Mapping
from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of enum.StrEnum: members are str and print as their value."""

        __str__ = str.__str__
        __format__ = str.__format__
import math

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp, softmax

from .const import (
    BETA_MARGIN_MIN,
    BETA_MARGIN_REL,
    CUT_DEDUP_DIGITS,
    DEGENERATE_WEIGHT,
    EXP_OVERFLOW_EXPONENT,
    VIOLATION_TOL,
    ZERO_OPTOUT_FLOOR_FRACTION,
)
from .errors import BoundsError, CutError, DegenerateNestError
from .models import (
    FloatArray,
    GnlModel,
    as_vector,
    check_beta,
    h_values,
    indicator,
    inclusive_value,
    k_values,
    safe_power,
    y_values,
    z_value,
)

VarKey = Hashable

SENSE_LE = "<="
SENSE_GE = ">="
SENSE_EQ = "="


class CutOrigin(StrEnum):
    """Family tag of a generated row."""

    OA_H = "OA_H"
    OA_K = "OA_K"
    OA_EXP = "OA_EXP"
    OA_LOGW = "OA_LOGW"
    OA_LOGSUM = "OA_LOGSUM"
    OA_JOINT = "OA_JOINT"
    SC_Z = "SC_Z"
    SC_Y = "SC_Y"
    SC_H = "SC_H"
    SC_K = "SC_K"
    MCCORMICK = "MCCORMICK"

    @property
    def family(self) -> str:
        """Return the reporting family: oa, sc or mc."""
        if self is CutOrigin.MCCORMICK:
            return "mc"
        return self.value.split("_", 1)[0].lower()


def var_key(family: str, *index: int, segment: int | None = None) -> tuple:
    """Return the column key of an auxiliary variable, optionally per segment."""
    if segment is None:
        return (family, *index)
    return (family, segment, *index)


def x_key(i: int) -> tuple:
    return ("x", i)


@dataclass(frozen=True, slots=True)
class LinearCut:
    """One linear inequality sum(coeffs[v] * v) sense rhs."""

    coeffs: Mapping[VarKey, float]
    rhs: float
    sense: str
    origin: CutOrigin
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.sense not in (SENSE_LE, SENSE_GE):
            raise CutError(f"Unsupported cut sense: {self.sense}")
        cleaned = {key: float(value) for key, value in self.coeffs.items() if value != 0.0}
        if not cleaned:
            raise CutError(f"{self.origin} cut has no nonzero coefficient")
        if not all(math.isfinite(value) for value in cleaned.values()) or not math.isfinite(self.rhs):
            raise CutError(f"{self.origin} cut has non-finite data")
        object.__setattr__(self, "coeffs", cleaned)
        object.__setattr__(self, "rhs", float(self.rhs))
        scale = max(abs(value) for value in cleaned.values())
        terms = tuple(
            sorted(((repr(key), round(value / scale, CUT_DEDUP_DIGITS)) for key, value in cleaned.items()))
        )
        object.__setattr__(
            self, "_key", (self.origin.value, self.sense, terms, round(self.rhs / scale, CUT_DEDUP_DIGITS))
        )

    @property
    def dedup_key(self) -> tuple:
        """Return origin plus coefficients rounded relative to the largest one."""
        return self._key

    def activity(self, values: Mapping[VarKey, float]) -> float:
        return float(sum(coef * values[key] for key, coef in self.coeffs.items()))

    def slack(self, values: Mapping[VarKey, float]) -> float:
        """Return a nonnegative number when the cut holds at values."""
        activity = self.activity(values)
        return activity - self.rhs if self.sense == SENSE_GE else self.rhs - activity

    def is_violated(self, values: Mapping[VarKey, float], *, tol: float = VIOLATION_TOL) -> bool:
        return self.slack(values) < -tol * (1.0 + abs(self.rhs))

    def relabel(self, columns: Mapping[VarKey, int]) -> LinearCut:
        """Return the same cut keyed by integer column ids."""
        return LinearCut(
            coeffs={columns[key]: value for key, value in self.coeffs.items()},
            rhs=self.rhs,
            sense=self.sense,
            origin=self.origin,
        )


@dataclass(frozen=True, slots=True, eq=False)
class VarBounds:
    """Finite bounds for every auxiliary family of one segment."""

    w_lo: FloatArray
    w_hi: FloatArray
    h_lo: FloatArray
    h_hi: FloatArray
    k_lo: FloatArray
    k_hi: FloatArray
    y_lo: FloatArray
    y_hi: FloatArray
    z_lo: float
    z_hi: float
    t_lo: FloatArray
    t_hi: FloatArray
    u_lo: FloatArray
    u_hi: FloatArray

    def families(self) -> dict[str, tuple[FloatArray, FloatArray]]:
        return {
            "W": (self.w_lo, self.w_hi),
            "U": (self.u_lo, self.u_hi),
            "h": (self.h_lo, self.h_hi),
            "k": (self.k_lo, self.k_hi),
            "y": (self.y_lo, self.y_hi),
            "z": (np.array([self.z_lo]), np.array([self.z_hi])),
            "t": (self.t_lo, self.t_hi),
        }


def choose_beta(model: GnlModel) -> float:
    """Return beta = max r + max(1, 0.01 max r)."""
    top = float(model.r.max()) if model.m else 0.0
    return top + max(BETA_MARGIN_MIN, BETA_MARGIN_REL * top)


def nest_floors(model: GnlModel, fraction: float = ZERO_OPTOUT_FLOOR_FRACTION) -> FloatArray:
    """Return floor_n = fraction * min member weight for nests without an opt-out weight, zero elsewhere."""
    if not np.any(model.v0 > 0.0):
        raise BoundsError("at least one nest must keep a positive opt-out weight")
    floors = np.zeros(model.n_nests)
    for n in np.flatnonzero(model.v0 <= 0.0):
        members = model.weights[:, n][model.weights[:, n] > 0.0]
        if members.size == 0:
            raise DegenerateNestError(f"nest {n} has no opt-out weight and no member products")
        floors[n] = fraction * float(members.min())
    return floors


def variable_bounds(model: GnlModel, beta: float, *, floors: ArrayLike | None = None) -> VarBounds:
    """Return bounds on W, U, h, k, y, z and t implied by the model data.

    Zero opt-out nests take their floor as the lower W bound; the
    denominator family U keeps the unfloored range.
    """
    check_beta(model.r, beta)
    u_lo = np.asarray(model.v0, dtype=np.float64).copy()
    u_hi = model.v0 + model.weights.sum(axis=0)
    w_lo = u_lo.copy()
    zero = w_lo <= 0.0
    if np.any(zero):
        if floors is None:
            raise BoundsError("a nest without opt-out weight needs a floor")
        floor_values = np.asarray(floors, dtype=np.float64)
        if np.any(floor_values[zero] <= 0.0):
            raise BoundsError("floors must be positive on zero opt-out nests")
        w_lo[zero] = floor_values[zero]
    w_hi = np.maximum(u_hi, w_lo)
    sigma = model.sigma
    h_lo = safe_power(w_hi, sigma - 1.0)
    h_hi = safe_power(w_lo, sigma - 1.0)
    k_lo = safe_power(w_lo, sigma)
    k_hi = safe_power(w_hi, sigma)
    y_lo = (sigma - 1.0) * np.log(w_hi)
    y_hi = (sigma - 1.0) * np.log(w_lo)
    denominator_lo = float(safe_power(u_lo, sigma).sum())
    if denominator_lo <= 0.0:
        raise BoundsError("at least one nest must keep a positive opt-out weight")
    z_lo = float(np.log(denominator_lo))
    z_hi = float(np.log(safe_power(u_hi, sigma).sum()))
    t_lo = np.exp(y_lo - z_hi)
    t_hi = np.exp(y_hi - z_lo)
    return VarBounds(
        w_lo=w_lo,
        w_hi=w_hi,
        h_lo=h_lo,
        h_hi=h_hi,
        k_lo=k_lo,
        k_hi=k_hi,
        y_lo=y_lo,
        y_hi=y_hi,
        z_lo=z_lo,
        z_hi=z_hi,
        t_lo=t_lo,
        t_hi=t_hi,
        u_lo=u_lo,
        u_hi=u_hi,
    )


def _nest_weight(model: GnlModel, n: int, x0: ArrayLike) -> float:
    w0 = float(inclusive_value(model, as_vector(x0, model.m))[n])
    if w0 < DEGENERATE_WEIGHT:
        raise DegenerateNestError(f"nest {n} is empty at the tangent point")
    return w0


def _gradient_cut(
    model: GnlModel,
    n: int,
    x0: FloatArray,
    *,
    target: tuple,
    value: float,
    slope: float,
    sense: str,
    origin: CutOrigin,
) -> LinearCut:
    """Return target (sense) value + slope * sum_i aV_in (x_i - x0_i)."""
    gradient = slope * model.weights[:, n]
    coeffs: dict[VarKey, float] = {target: 1.0}
    for i in np.flatnonzero(gradient):
        coeffs[x_key(int(i))] = -float(gradient[i])
    return LinearCut(coeffs=coeffs, rhs=value - float(gradient @ x0), sense=sense, origin=origin)


def oa_cut_H(model: GnlModel, n: int, x0: ArrayLike, *, segment: int | None = None) -> LinearCut:
    """Return the tangent underestimator of the convex H_n at x0."""
    point = as_vector(x0, model.m)
    w0 = _nest_weight(model, n, point)
    sigma = float(model.sigma[n])
    return _gradient_cut(
        model,
        n,
        point,
        target=var_key("h", n, segment=segment),
        value=w0 ** (sigma - 1.0),
        slope=(sigma - 1.0) * w0 ** (sigma - 2.0),
        sense=SENSE_GE,
        origin=CutOrigin.OA_H,
    )


def oa_cut_K(model: GnlModel, n: int, x0: ArrayLike, *, segment: int | None = None) -> LinearCut:
    """Return the tangent overestimator of the concave K_n at x0."""
    point = as_vector(x0, model.m)
    w0 = _nest_weight(model, n, point)
    sigma = float(model.sigma[n])
    return _gradient_cut(
        model,
        n,
        point,
        target=var_key("k", n, segment=segment),
        value=w0**sigma,
        slope=sigma * w0 ** (sigma - 1.0),
        sense=SENSE_LE,
        origin=CutOrigin.OA_K,
    )


def oa_cut_exp(y0: float, z0: float, *, n: int, segment: int | None = None) -> LinearCut:
    """Return t_n >= e^a (1 + (y_n - z) - a) with a = y0 - z0."""
    a = float(y0) - float(z0)
    if a > EXP_OVERFLOW_EXPONENT:
        raise CutError(f"exp tangent at exponent {a!r} overflows; rescale the instance")
    scale = math.exp(a)
    return LinearCut(
        coeffs={
            var_key("t", n, segment=segment): 1.0,
            var_key("y", n, segment=segment): -scale,
            var_key("z", segment=segment): scale,
        },
        rhs=scale * (1.0 - a),
        sense=SENSE_GE,
        origin=CutOrigin.OA_EXP,
    )


def oa_cut_logW(model: GnlModel, n: int, w0: float, *, segment: int | None = None) -> LinearCut:
    """Return y_n >= (sigma_n - 1)(log W0 + (W_n - W0) / W0)."""
    if not w0 > 0.0:
        raise CutError(f"log tangent needs a positive point, got {w0!r}")
    factor = float(model.sigma[n]) - 1.0
    return LinearCut(
        coeffs={var_key("y", n, segment=segment): 1.0, var_key("W", n, segment=segment): -factor / w0},
        rhs=factor * (math.log(w0) - 1.0),
        sense=SENSE_GE,
        origin=CutOrigin.OA_LOGW,
    )


def oa_cut_logsum(
    model: GnlModel, w0: ArrayLike, *, segment: int | None = None, family: str = "W"
) -> LinearCut:
    """Return the tangent of z <= log sum_n W_n^sigma_n at W0."""
    point = np.asarray(w0, dtype=np.float64)
    if np.any(point <= 0.0):
        raise CutError("logsum tangent needs a strictly positive point")
    powers = point**model.sigma
    total = float(powers.sum())
    gradient = model.sigma * powers / point / total
    coeffs: dict[VarKey, float] = {var_key("z", segment=segment): 1.0}
    for n in range(model.n_nests):
        coeffs[var_key(family, n, segment=segment)] = -float(gradient[n])
    return LinearCut(
        coeffs=coeffs,
        rhs=math.log(total) - float(gradient @ point),
        sense=SENSE_LE,
        origin=CutOrigin.OA_LOGSUM,
    )


def oa_cut_joint_logsum(sigma: ArrayLike, y0: ArrayLike, *, segment: int | None = None) -> LinearCut:
    """Return the tangent of z >= log sum_n exp(sigma_n y_n / (sigma_n - 1)) at y0."""
    sig = np.asarray(sigma, dtype=np.float64)
    point = np.asarray(y0, dtype=np.float64)
    if np.any(sig >= 1.0):
        raise CutError("the log-sum-exp lower bound needs every sigma below one")
    c = sig / (sig - 1.0)
    weights = softmax(c * point)
    gradient = weights * c
    coeffs: dict[VarKey, float] = {var_key("z", segment=segment): 1.0}
    for n in range(sig.shape[0]):
        coeffs[var_key("y", n, segment=segment)] = -float(gradient[n])
    return LinearCut(
        coeffs=coeffs,
        rhs=float(logsumexp(c * point)) - float(gradient @ point),
        sense=SENSE_GE,
        origin=CutOrigin.OA_JOINT,
    )


def nemhauser_wolsey_cut(
    set_function: Callable[[FloatArray], float],
    m: int,
    anchor: Iterable[int],
    *,
    target: VarKey,
    sense: str,
    origin: CutOrigin,
) -> LinearCut:
    """Return target (sense) f(S0) + sum_{j not in S0} rho_j(S0) x_j - sum_{j in S0} rho_j(V-j)(1 - x_j).

    With sense "<=" this is valid for monotone increasing submodular f; with
    ">=" for monotone decreasing supermodular f.
    """
    chosen = sorted(set(anchor))
    base = indicator(m, chosen)
    full = np.ones(m)
    f_anchor = set_function(base)
    f_full = set_function(full)
    coeffs: dict[VarKey, float] = {target: 1.0}
    rhs = f_anchor
    members = set(chosen)
    for j in range(m):
        if j in members:
            without = full.copy()
            without[j] = 0.0
            rho = f_full - set_function(without)
            rhs -= rho
        else:
            grown = base.copy()
            grown[j] = 1.0
            rho = set_function(grown) - f_anchor
        if rho != 0.0:
            coeffs[x_key(j)] = -rho
    return LinearCut(coeffs=coeffs, rhs=rhs, sense=sense, origin=origin)


def submodular_cut_Z(model: GnlModel, anchor: Iterable[int], *, segment: int | None = None) -> LinearCut:
    """Return the submodular upper cut on z anchored at a product set."""
    return nemhauser_wolsey_cut(
        lambda x: z_value(model, x),
        model.m,
        anchor,
        target=var_key("z", segment=segment),
        sense=SENSE_LE,
        origin=CutOrigin.SC_Z,
    )


def supermodular_cut_Y(model: GnlModel, n: int, anchor: Iterable[int], *, segment: int | None = None) -> LinearCut:
    """Return the supermodular lower cut on y_n anchored at a product set."""
    return nemhauser_wolsey_cut(
        lambda x: float(y_values(model, x)[n]),
        model.m,
        anchor,
        target=var_key("y", n, segment=segment),
        sense=SENSE_GE,
        origin=CutOrigin.SC_Y,
    )


def submodular_cut_K(model: GnlModel, n: int, anchor: Iterable[int]) -> LinearCut:
    """Return the submodular upper cut on k_n anchored at a product set."""
    return nemhauser_wolsey_cut(
        lambda x: float(k_values(model, x)[n]),
        model.m,
        anchor,
        target=var_key("k", n),
        sense=SENSE_LE,
        origin=CutOrigin.SC_K,
    )


def supermodular_cut_H(model: GnlModel, n: int, anchor: Iterable[int]) -> LinearCut:
    """Return the supermodular lower cut on h_n anchored at a product set."""
    return nemhauser_wolsey_cut(
        lambda x: float(h_values(model, x)[n]),
        model.m,
        anchor,
        target=var_key("h", n),
        sense=SENSE_GE,
        origin=CutOrigin.SC_H,
    )


def mccormick(s_id: VarKey, h_id: VarKey, x_id: VarKey, h_lo: float, h_hi: float) -> list[LinearCut]:
    """Return the four envelope rows forcing s = h * x for binary x."""
    if h_lo > h_hi:
        raise CutError(f"inverted bounds [{h_lo!r}, {h_hi!r}]")
    origin = CutOrigin.MCCORMICK
    return [
        LinearCut(coeffs={s_id: 1.0, x_id: -h_lo}, rhs=0.0, sense=SENSE_GE, origin=origin),
        LinearCut(coeffs={s_id: 1.0, x_id: -h_hi}, rhs=0.0, sense=SENSE_LE, origin=origin),
        LinearCut(coeffs={s_id: 1.0, h_id: -1.0, x_id: -h_hi}, rhs=-h_hi, sense=SENSE_GE, origin=origin),
        LinearCut(coeffs={s_id: 1.0, h_id: -1.0, x_id: -h_lo}, rhs=-h_lo, sense=SENSE_LE, origin=origin),
    ]

"""Seeded instance generation and the JSON interchange format."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
import json
import logging
import math
import os
import pathlib
from typing import Any

import numpy as np
import voluptuous as vol

from .const import (
    DEFAULT_CROSS_RATE,
    INSTANCE_KINDS,
    KIND_GNL,
    KIND_JAP_DP,
    KIND_MGNL,
    PRICE_SCHEME_ARITHMETIC,
    PRICE_SCHEME_FINE,
    PRICE_SCHEMES,
    RNG_STREAMS,
    SCHEMA_VERSION,
)
from .errors import InstanceFormatError, ModelError
from .models import (
    FloatArray,
    GnlModel,
    LinearConstraintSet,
    MgnlModel,
    NestStructure,
    build_gnl_model,
    build_mgnl_model,
    cardinality_constraints,
)
from .pricing import Breakpoints, PriceBounds, PriceLadder

_LOGGER = logging.getLogger(__name__)

_SIGMA_RANGE = (0.25, 1.0)
_XY_RANGE = (0.1, 10.0)
_GLOBAL_CAPACITY = 0.5
_NEST_CAPACITY = 0.8
_CP_LOWER_PRICE = 0.5
_PRICE_OFFSET = 0.5


@dataclass(frozen=True, slots=True)
class GenSpec:
    """Parameters of one generated instance."""

    kind: str
    m: int
    n_nests: int
    seed: int
    T: int = 1
    L: int = 3
    cross_rate: float = DEFAULT_CROSS_RATE
    price_scheme: str = PRICE_SCHEME_ARITHMETIC
    zero_optout_nests: int = 0

    def __post_init__(self) -> None:
        if self.kind not in INSTANCE_KINDS:
            raise ModelError(f"Unknown instance kind: {self.kind}")
        if self.m < 1 or self.n_nests < 1 or self.T < 1 or self.L < 1:
            raise ModelError("m, n_nests, T and L must be positive")
        if self.cross_rate < 1.0:
            raise ModelError("cross_rate must be at least 1")
        if math.ceil(self.cross_rate * self.m) > self.n_nests * self.m:
            raise ModelError(
                f"{math.ceil(self.cross_rate * self.m)} nest entries do not fit {self.n_nests} nests of {self.m} products"
            )
        if self.price_scheme not in PRICE_SCHEMES:
            raise ModelError(f"Unknown price scheme: {self.price_scheme}")
        if not 0 <= self.zero_optout_nests < self.n_nests:
            raise ModelError("zero_optout_nests must leave at least one nest with an opt-out weight")
        if self.zero_optout_nests and self.kind != KIND_GNL:
            raise ModelError("zero opt-out nests are generated for GNL instances only")

    def params(self) -> dict[str, Any]:
        return {
            "T": self.T,
            "L": self.L,
            "cross_rate": self.cross_rate,
            "price_scheme": self.price_scheme,
            "zero_optout_nests": self.zero_optout_nests,
        }


@dataclass(frozen=True, slots=True, eq=False)
class Instance:
    """A model with its constraints and, for pricing kinds, its price data."""

    kind: str
    model: GnlModel | MgnlModel | NestStructure
    constraints: LinearConstraintSet
    seed: int = 0
    ladder: PriceLadder | None = None
    bounds: PriceBounds | None = None
    gen_params: Mapping[str, Any] = field(default_factory=dict)
    breakpoints: Mapping[tuple[int, int], Breakpoints] | None = None

    @property
    def m(self) -> int:
        return self.model.m

    @property
    def structure(self) -> NestStructure:
        if isinstance(self.model, NestStructure):
            return self.model
        if isinstance(self.model, MgnlModel):
            return self.model.segments[0].structure
        return self.model.structure


def _stream(seed: int, family: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(RNG_STREAMS[family],))))


def _open_unit(rng: np.random.Generator, size: int | tuple[int, ...]) -> FloatArray:
    """Draw from (0, 1): U[0, 1) with exact zeros resampled."""
    values = rng.random(size)
    while np.any(values == 0.0):
        zeros = values == 0.0
        values[zeros] = rng.random(int(zeros.sum()))
    return values


def _memberships(spec: GenSpec) -> np.ndarray:
    """Assign ceil(cross_rate * m) product entries to nests, each product at most once per nest."""
    rng = _stream(spec.seed, "membership")
    m, n_nests = spec.m, spec.n_nests
    member = np.zeros((m, n_nests), dtype=bool)
    member[np.arange(m), rng.integers(0, n_nests, size=m)] = True
    for _ in range(math.ceil(spec.cross_rate * m) - m):
        i = int(rng.integers(0, m))
        free = np.flatnonzero(~member[i])
        if free.size == 0:
            continue
        member[i, int(rng.choice(free))] = True
    for n in range(spec.zero_optout_nests):
        if not member[:, n].any():
            member[int(rng.integers(0, m)), n] = True
    return member


def _allocation(spec: GenSpec, member: np.ndarray) -> FloatArray:
    rng = _stream(spec.seed, "alpha")
    draws = _open_unit(rng, member.shape) * member
    return draws / draws.sum(axis=1, keepdims=True)


def _sigma(spec: GenSpec) -> FloatArray:
    return _stream(spec.seed, "sigma").uniform(*_SIGMA_RANGE, size=spec.n_nests)


def _constraints(spec: GenSpec, member: np.ndarray) -> LinearConstraintSet:
    nests = [np.flatnonzero(member[:, n]) for n in range(spec.n_nests)]
    nests = [members for members in nests if members.size]
    return cardinality_constraints(
        spec.m,
        total=math.ceil(_GLOBAL_CAPACITY * spec.m),
        nest_members=[members.tolist() for members in nests],
        nest_limits=[math.ceil(_NEST_CAPACITY * members.size) for members in nests],
    )


def _price_sensitivity(spec: GenSpec) -> tuple[FloatArray, FloatArray, FloatArray]:
    mu = _stream(spec.seed, "price_mu").uniform(-1.0, 1.0, size=spec.m)
    eta = _open_unit(_stream(spec.seed, "price_eta"), spec.m)
    gamma = _open_unit(_stream(spec.seed, "price_gamma"), spec.m)
    return mu, eta, gamma


def price_levels(gamma: FloatArray, L: int, scheme: str = PRICE_SCHEME_ARITHMETIC) -> tuple[FloatArray, ...]:
    """Return p_il = l gamma_i + 0.5 for l in [L], or 0.5 l gamma_i + 0.5 for l in [2L] on the fine scheme."""
    if scheme == PRICE_SCHEME_FINE:
        levels, step = np.arange(1, 2 * L + 1), 0.5
    else:
        levels, step = np.arange(1, L + 1), 1.0
    return tuple(step * levels * g + _PRICE_OFFSET for g in gamma)


def generate(spec: GenSpec) -> Instance:
    """Generate an instance deterministically from its settings."""
    member = _memberships(spec)
    alpha = _allocation(spec, member)
    sigma = _sigma(spec)
    constraints = _constraints(spec, member)
    v0 = np.ones(spec.n_nests)
    v0[: spec.zero_optout_nests] = 0.0
    if spec.kind in (KIND_GNL, KIND_MGNL):
        u = 1.0 - _stream(spec.seed, "utility_u").random(spec.m)
        x_draw = _stream(spec.seed, "revenue_x").uniform(*_XY_RANGE, size=spec.m)
        r = u**2 * x_draw
        preference = _stream(spec.seed, "preference_y").uniform(*_XY_RANGE, size=(spec.T, spec.m))
        segments = [
            build_gnl_model(
                v0=v0,
                v=np.repeat(((1.0 - u) * preference[t])[:, None], spec.n_nests, axis=1),
                alpha=alpha,
                sigma=sigma,
                r=r,
                allow_zero_optout=spec.zero_optout_nests > 0,
            )
            for t in range(spec.T)
        ]
        if spec.kind == KIND_GNL:
            model: GnlModel | MgnlModel | NestStructure = segments[0]
        else:
            theta = _open_unit(_stream(spec.seed, "theta"), spec.T)
            model = build_mgnl_model(segments, theta / theta.sum())
        return Instance(kind=spec.kind, model=model, constraints=constraints, seed=spec.seed, gen_params=spec.params())
    structure = NestStructure(v0=v0, alpha=alpha, sigma=sigma)
    mu, eta, gamma = _price_sensitivity(spec)
    if spec.kind == KIND_JAP_DP:
        ladder = PriceLadder(prices=price_levels(gamma, spec.L, spec.price_scheme), eta=eta, kappa=mu)
        return Instance(
            kind=spec.kind,
            model=structure,
            constraints=constraints,
            seed=spec.seed,
            ladder=ladder,
            gen_params=spec.params(),
        )
    lower = np.full(spec.m, _CP_LOWER_PRICE)
    bounds = PriceBounds(lower=lower, upper=lower * gamma + _PRICE_OFFSET, eta=eta, kappa=mu)
    return Instance(
        kind=spec.kind, model=structure, constraints=constraints, seed=spec.seed, bounds=bounds, gen_params=spec.params()
    )


def _floats(values: Any) -> Any:
    return np.asarray(values, dtype=np.float64).tolist()


def to_json(instance: Instance) -> dict[str, Any]:
    """Return the JSON document of an instance."""
    model = instance.model
    structure = instance.structure
    payload: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": instance.kind,
        "m": instance.m,
        "n_nests": structure.n_nests,
        "sigma": _floats(structure.sigma),
        "alpha": _floats(structure.alpha),
        "constraints": {"a": _floats(instance.constraints.a), "b": _floats(instance.constraints.b)},
        "seed": instance.seed,
        "gen_params": dict(instance.gen_params),
    }
    if isinstance(model, MgnlModel):
        payload["T"] = model.n_segments
        payload["v0"] = [_floats(segment.v0) for segment in model.segments]
        payload["v"] = [_floats(segment.v) for segment in model.segments]
        payload["r"] = [_floats(segment.r) for segment in model.segments]
        payload["theta"] = _floats(model.theta)
    elif isinstance(model, GnlModel):
        payload["v0"] = _floats(model.v0)
        payload["v"] = _floats(model.v)
        payload["r"] = _floats(model.r)
    else:
        payload["v0"] = _floats(model.v0)
    if instance.ladder is not None:
        payload["price_ladder"] = [_floats(prices) for prices in instance.ladder.prices]
        payload["eta"] = _floats(instance.ladder.eta)
        payload["kappa"] = _floats(instance.ladder.kappa)
    if instance.bounds is not None:
        payload["price_bounds"] = {"lower": _floats(instance.bounds.lower), "upper": _floats(instance.bounds.upper)}
        payload["eta"] = _floats(instance.bounds.eta)
        payload["kappa"] = _floats(instance.bounds.kappa)
    if instance.breakpoints is not None:
        payload["breakpoints"] = [
            {"product": i, "nest": n, **grid.to_dict()} for (i, n), grid in sorted(instance.breakpoints.items())
        ]
    return payload


_NUMBER = vol.All(vol.Coerce(float))
_VECTOR = [_NUMBER]
_MATRIX = [[_NUMBER]]

INSTANCE_SCHEMA = vol.Schema(
    {
        vol.Required("schema_version"): int,
        vol.Required("kind"): vol.In(INSTANCE_KINDS),
        vol.Required("m"): vol.All(int, vol.Range(min=1)),
        vol.Required("n_nests"): vol.All(int, vol.Range(min=1)),
        vol.Optional("T"): vol.All(int, vol.Range(min=1)),
        vol.Required("sigma"): _VECTOR,
        vol.Required("v0"): vol.Any(_VECTOR, _MATRIX),
        vol.Required("alpha"): _MATRIX,
        vol.Optional("v"): vol.Any(_MATRIX, [_MATRIX]),
        vol.Optional("r"): vol.Any(_VECTOR, _MATRIX),
        vol.Optional("theta"): _VECTOR,
        vol.Required("constraints"): {vol.Required("a"): _MATRIX, vol.Required("b"): _VECTOR},
        vol.Optional("price_ladder"): [_VECTOR],
        vol.Optional("price_bounds"): {vol.Required("lower"): _VECTOR, vol.Required("upper"): _VECTOR},
        vol.Optional("eta"): _VECTOR,
        vol.Optional("kappa"): _VECTOR,
        vol.Required("seed"): int,
        vol.Optional("gen_params", default=dict): dict,
        vol.Optional("breakpoints"): [
            {
                vol.Required("product"): int,
                vol.Required("nest"): int,
                vol.Required("q"): _VECTOR,
                vol.Required("epsilon"): _NUMBER,
                vol.Required("tau"): _NUMBER,
            }
        ],
    }
)


def _need(data: Mapping[str, Any], *keys: str) -> None:
    missing = [key for key in keys if key not in data]
    if missing:
        raise InstanceFormatError(f"{data['kind']} instance lacks {', '.join(missing)}")


def _constraints_from(data: Mapping[str, Any]) -> LinearConstraintSet:
    rows = data["constraints"]
    a = np.asarray(rows["a"], dtype=np.float64).reshape(len(rows["b"]), -1) if rows["b"] else np.zeros((0, data["m"]))
    return LinearConstraintSet(a=a, b=np.asarray(rows["b"], dtype=np.float64))


def from_json(document: Mapping[str, Any], *, expected_kind: str | None = None) -> Instance:
    """Validate a JSON document and rebuild the instance."""
    if not isinstance(document, Mapping):
        raise InstanceFormatError("instance document must be a JSON object")
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InstanceFormatError(f"schema version {version!r} is not supported (expected {SCHEMA_VERSION})")
    try:
        data = INSTANCE_SCHEMA(dict(document))
    except vol.Invalid as err:
        raise InstanceFormatError(f"Invalid instance document: {err}") from err
    kind = data["kind"]
    if expected_kind is not None and kind != expected_kind:
        raise InstanceFormatError(f"expected a {expected_kind} instance, found {kind}")
    try:
        return _build(data)
    except ModelError as err:
        raise InstanceFormatError(f"Inconsistent {kind} instance: {err}") from err


def _build(data: Mapping[str, Any]) -> Instance:
    kind = data["kind"]
    constraints = _constraints_from(data)
    common = {"kind": kind, "constraints": constraints, "seed": data["seed"], "gen_params": data["gen_params"]}
    sigma, alpha = data["sigma"], data["alpha"]
    if kind == KIND_GNL:
        _need(data, "v", "r")
        model = build_gnl_model(
            v0=data["v0"], v=data["v"], alpha=alpha, sigma=sigma, r=data["r"], allow_zero_optout=True
        )
        return Instance(model=model, **common)
    if kind == KIND_MGNL:
        _need(data, "T", "v", "r", "theta")
        segments = [
            build_gnl_model(v0=data["v0"][t], v=data["v"][t], alpha=alpha, sigma=sigma, r=data["r"][t])
            for t in range(data["T"])
        ]
        return Instance(model=build_mgnl_model(segments, data["theta"]), **common)
    structure = NestStructure(v0=np.asarray(data["v0"]), alpha=np.asarray(alpha), sigma=np.asarray(sigma))
    _need(data, "eta", "kappa")
    breakpoints = None
    if "breakpoints" in data:
        breakpoints = {(entry["product"], entry["nest"]): Breakpoints.from_dict(entry) for entry in data["breakpoints"]}
    if kind == KIND_JAP_DP:
        _need(data, "price_ladder")
        ladder = PriceLadder(prices=tuple(data["price_ladder"]), eta=data["eta"], kappa=data["kappa"])
        return Instance(model=structure, ladder=ladder, breakpoints=breakpoints, **common)
    _need(data, "price_bounds")
    bounds = PriceBounds(
        lower=data["price_bounds"]["lower"], upper=data["price_bounds"]["upper"], eta=data["eta"], kappa=data["kappa"]
    )
    return Instance(model=structure, bounds=bounds, breakpoints=breakpoints, **common)


def dumps(instance: Instance) -> str:
    return json.dumps(to_json(instance), indent=1, sort_keys=True, allow_nan=False) + "\n"


def save(instance: Instance, path: str | os.PathLike[str]) -> pathlib.Path:
    """Write the instance as JSON; identical instances give identical bytes."""
    file_path = pathlib.Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(dumps(instance), encoding="utf-8")
    _LOGGER.debug("Saved %s instance to %s", instance.kind, file_path)
    return file_path


def load(path: str | os.PathLike[str], *, expected_kind: str | None = None) -> Instance:
    """Read and validate an instance file."""
    file_path = pathlib.Path(path)
    try:
        document = json.loads(file_path.read_text(encoding="utf-8"))
    except OSError as err:
        raise InstanceFormatError(f"Cannot read instance file {file_path}: {err}") from err
    except json.JSONDecodeError as err:
        raise InstanceFormatError(f"Instance file {file_path} is not valid JSON: {err}") from err
    return from_json(document, expected_kind=expected_kind)

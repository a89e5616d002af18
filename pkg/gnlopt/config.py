"""Solver settings: voluptuous schemas, YAML files and dataclass construction."""

from __future__ import annotations

from collections.abc import Mapping
import logging
import os
import pathlib
from typing import Any

import voluptuous as vol
import yaml

from .assortment import SolverConfig
from .bnb import BnbConfig
from .const import (
    BRANCH_MOST_FRACTIONAL,
    CP_IMPROVEMENT_TOL,
    CP_MAX_ROUNDS,
    DEFAULT_BISECTION_TOL,
    DEFAULT_EPSILON,
    DEFAULT_FRACTIONAL_ROUNDS,
    DEFAULT_INT_TOL,
    DEFAULT_NODE_LIMIT,
    DEFAULT_POLISH_STARTS,
    DEFAULT_REL_GAP,
    ENV_SEED,
    METHOD_BISECTION,
    METHOD_LOGCONVEX,
    NODE_BEST_BOUND,
    NODE_DEPTH_FIRST,
    ZERO_OPTOUT_FLOOR_FRACTION,
)
from .errors import ConfigError
from .pricing import CpConfig

_LOGGER = logging.getLogger(__name__)

CONF_BNB = "bnb"
CONF_SOLVER = "solver"
CONF_PRICING = "pricing"
CONF_EPSILON = "epsilon"

_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
_NONNEGATIVE = vol.All(vol.Coerce(float), vol.Range(min=0.0))

BNB_SCHEMA = vol.Schema(
    {
        vol.Optional("int_tol", default=DEFAULT_INT_TOL): _POSITIVE,
        vol.Optional("rel_gap", default=DEFAULT_REL_GAP): _NONNEGATIVE,
        vol.Optional("node_limit", default=DEFAULT_NODE_LIMIT): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional("time_limit", default=None): vol.Any(None, _POSITIVE),
        vol.Optional("node_selection", default=NODE_BEST_BOUND): vol.In((NODE_BEST_BOUND, NODE_DEPTH_FIRST)),
        vol.Optional("branching", default=BRANCH_MOST_FRACTIONAL): vol.In((BRANCH_MOST_FRACTIONAL,)),
        vol.Optional("fractional_rounds", default=DEFAULT_FRACTIONAL_ROUNDS): vol.All(
            vol.Coerce(int), vol.Range(min=0)
        ),
    }
)

SOLVER_SCHEMA = vol.Schema(
    {
        vol.Optional("bisection_tol", default=DEFAULT_BISECTION_TOL): _POSITIVE,
        vol.Optional("use_sc_cuts", default=True): vol.Boolean(),
        vol.Optional("use_joint_logsum", default=False): vol.Boolean(),
        vol.Optional("floor_fraction", default=ZERO_OPTOUT_FLOOR_FRACTION): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=1.0, min_included=False, max_included=False)
        ),
    }
)

PRICING_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_EPSILON, default=DEFAULT_EPSILON): _POSITIVE,
        vol.Optional("method", default=METHOD_LOGCONVEX): vol.In((METHOD_LOGCONVEX, METHOD_BISECTION)),
        vol.Optional("starts", default=DEFAULT_POLISH_STARTS): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional("seed", default=0): vol.Coerce(int),
        vol.Optional("max_rounds", default=CP_MAX_ROUNDS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional("improvement_tol", default=CP_IMPROVEMENT_TOL): _NONNEGATIVE,
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_BNB, default=dict): BNB_SCHEMA,
        vol.Optional(CONF_SOLVER, default=dict): SOLVER_SCHEMA,
        vol.Optional(CONF_PRICING, default=dict): PRICING_SCHEMA,
    }
)


def validate_config(data: Mapping[str, Any] | None) -> dict[str, dict[str, Any]]:
    """Validate a settings mapping and fill every default."""
    try:
        return CONFIG_SCHEMA(dict(data or {}))
    except vol.Invalid as err:
        raise ConfigError(f"Invalid solver settings: {err}") from err


def load_config(path: str | os.PathLike[str] | None) -> dict[str, dict[str, Any]]:
    """Read a YAML settings file; a missing path yields the defaults."""
    if path is None:
        return validate_config(None)
    file_path = pathlib.Path(path)
    try:
        raw = yaml.safe_load(file_path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"Cannot read settings file {file_path}: {err}") from err
    if raw is not None and not isinstance(raw, Mapping):
        raise ConfigError(f"Settings file {file_path} must hold a mapping")
    _LOGGER.debug("Loaded settings from %s", file_path)
    return validate_config(raw)


def merge_overrides(settings: Mapping[str, Mapping[str, Any]], overrides: Mapping[str, Mapping[str, Any]]) -> dict[str, dict[str, Any]]:
    """Apply non-None overrides per section and validate the result."""
    merged = {section: dict(values) for section, values in settings.items()}
    for section, values in overrides.items():
        merged.setdefault(section, {}).update({key: value for key, value in values.items() if value is not None})
    return validate_config(merged)


def bnb_config(settings: Mapping[str, Mapping[str, Any]]) -> BnbConfig:
    return BnbConfig(**settings[CONF_BNB])


def solver_config(settings: Mapping[str, Mapping[str, Any]]) -> SolverConfig:
    return SolverConfig(bnb=bnb_config(settings), **settings[CONF_SOLVER])


def cp_config(settings: Mapping[str, Mapping[str, Any]]) -> CpConfig:
    pricing = dict(settings[CONF_PRICING])
    pricing.pop(CONF_EPSILON)
    return CpConfig(solver=solver_config(settings), **pricing)


def seed_override(default: int) -> int:
    """Return the seed from the environment when set."""
    value = os.environ.get(ENV_SEED)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError as err:
        raise ConfigError(f"{ENV_SEED} must be an integer, got {value!r}") from err

"""Tests for solver settings."""

from __future__ import annotations

import pytest

from gnlopt.config import (
    CONF_BNB,
    CONF_PRICING,
    CONF_SOLVER,
    bnb_config,
    cp_config,
    load_config,
    merge_overrides,
    seed_override,
    solver_config,
    validate_config,
)
from gnlopt.const import DEFAULT_EPSILON, DEFAULT_REL_GAP, ENV_SEED, NODE_DEPTH_FIRST
from gnlopt.errors import ConfigError


def test_defaults_fill_every_section() -> None:
    """An empty mapping should validate to complete defaults."""
    settings = validate_config(None)
    assert settings[CONF_BNB]["rel_gap"] == DEFAULT_REL_GAP
    assert settings[CONF_BNB]["time_limit"] is None
    assert settings[CONF_SOLVER]["use_sc_cuts"] is True
    assert settings[CONF_PRICING]["epsilon"] == DEFAULT_EPSILON
    assert load_config(None) == settings


def test_yaml_file_is_loaded(tmp_path) -> None:
    """Values from a YAML file should reach the built dataclasses."""
    path = tmp_path / "settings.yaml"
    path.write_text(
        "bnb:\n  node_selection: depth_first\n  time_limit: 5\nsolver:\n  use_joint_logsum: yes\npricing:\n  starts: 2\n",
        encoding="utf-8",
    )
    settings = load_config(path)
    assert bnb_config(settings).node_selection == NODE_DEPTH_FIRST
    assert bnb_config(settings).time_limit == 5.0
    assert solver_config(settings).use_joint_logsum is True
    assert cp_config(settings).starts == 2


@pytest.mark.parametrize(
    "content",
    (
        "bnb:\n  rel_gap: -1\n",
        "bnb:\n  node_selection: widest\n",
        "solver:\n  floor_fraction: 1.5\n",
        "pricing:\n  epsilon: 0\n",
        "unknown: 1\n",
        "- a\n- b\n",
        "bnb: [\n",
    ),
)
def test_invalid_files_raise(content: str, tmp_path) -> None:
    """Out-of-range values, unknown keys and broken YAML should raise config errors."""
    path = tmp_path / "bad.yaml"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file_raises(tmp_path) -> None:
    """A settings path that does not exist should raise a config error."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_overrides_skip_unset_values() -> None:
    """Only overrides that carry a value should replace the loaded settings."""
    settings = validate_config({CONF_BNB: {"rel_gap": 1e-3}})
    merged = merge_overrides(settings, {CONF_BNB: {"rel_gap": None, "node_limit": 10}, CONF_PRICING: {"epsilon": 0.1}})
    assert merged[CONF_BNB]["rel_gap"] == 1e-3
    assert merged[CONF_BNB]["node_limit"] == 10
    assert merged[CONF_PRICING]["epsilon"] == 0.1
    with pytest.raises(ConfigError):
        merge_overrides(settings, {CONF_BNB: {"node_limit": 0}})


def test_seed_override_from_environment(monkeypatch) -> None:
    """The seed variable should replace the default seed when set."""
    monkeypatch.delenv(ENV_SEED, raising=False)
    assert seed_override(7) == 7
    monkeypatch.setenv(ENV_SEED, "42")
    assert seed_override(7) == 42
    monkeypatch.setenv(ENV_SEED, "")
    assert seed_override(7) == 7
    monkeypatch.setenv(ENV_SEED, "seven")
    with pytest.raises(ConfigError):
        seed_override(7)

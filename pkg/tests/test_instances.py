"""Tests for seeded generation and the instance file format."""

from __future__ import annotations

from dataclasses import replace
import json
import math

import numpy as np
import pytest

from gnlopt.const import KIND_GNL, KIND_JAP_CP, KIND_JAP_DP, KIND_MGNL, PRICE_SCHEME_FINE, SCHEMA_VERSION
from gnlopt.errors import InstanceFormatError, ModelError
from gnlopt.instances import GenSpec, dumps, from_json, generate, load, price_levels, save, to_json
from gnlopt.models import MgnlModel, NestStructure, expected_revenue
from gnlopt.pricing import cp_breakpoints


@pytest.mark.parametrize("kind", (KIND_GNL, KIND_MGNL, KIND_JAP_DP, KIND_JAP_CP))
def test_generation_is_deterministic(kind: str) -> None:
    """The same generation settings should give byte-identical files."""
    spec = GenSpec(kind, 6, 3, 17, T=2)
    assert dumps(generate(spec)) == dumps(generate(spec))
    assert dumps(generate(spec)) != dumps(generate(GenSpec(kind, 6, 3, 18, T=2)))


@pytest.mark.parametrize("kind", (KIND_GNL, KIND_MGNL, KIND_JAP_DP, KIND_JAP_CP))
def test_file_round_trip(kind: str, tmp_path) -> None:
    """Saving and loading should rebuild an instance that serialises identically."""
    instance = generate(GenSpec(kind, 5, 2, 3, T=3))
    path = save(instance, tmp_path / "nested" / f"{kind}.json")
    again = load(path, expected_kind=kind)
    assert again.kind == kind
    assert dumps(again) == dumps(instance)


def test_round_trip_keeps_revenues_exact() -> None:
    """Reloaded GNL models should evaluate to the same revenues bit for bit."""
    instance = generate(GenSpec(KIND_GNL, 6, 3, 5))
    again = from_json(json.loads(dumps(instance)))
    x = np.array([1, 0, 1, 1, 0, 1])
    assert expected_revenue(again.model, x) == expected_revenue(instance.model, x)


def test_breakpoints_travel_with_the_instance(tmp_path) -> None:
    """Embedded breakpoint grids should survive a save and load."""
    instance = generate(GenSpec(KIND_JAP_CP, 3, 2, 8))
    grids = cp_breakpoints(instance.structure, instance.bounds, 1e-2)
    embedded = replace(instance, breakpoints=grids)
    again = load(save(embedded, tmp_path / "cp.json"))
    assert set(again.breakpoints) == set(grids)
    for key, grid in grids.items():
        assert np.array_equal(again.breakpoints[key].q, grid.q)


def test_rejects_malformed_files(tmp_path) -> None:
    """Truncated JSON, missing files, wrong kinds and versions should raise format errors."""
    path = save(generate(GenSpec(KIND_GNL, 4, 2, 1)), tmp_path / "gnl.json")
    text = path.read_text(encoding="utf-8")
    truncated = tmp_path / "truncated.json"
    truncated.write_text(text[: len(text) // 2], encoding="utf-8")
    with pytest.raises(InstanceFormatError):
        load(truncated)
    with pytest.raises(InstanceFormatError):
        load(tmp_path / "missing.json")
    with pytest.raises(InstanceFormatError):
        load(path, expected_kind=KIND_MGNL)
    document = json.loads(text)
    with pytest.raises(InstanceFormatError):
        from_json(document | {"schema_version": SCHEMA_VERSION + 1})
    with pytest.raises(InstanceFormatError):
        from_json({key: value for key, value in document.items() if key != "r"})
    with pytest.raises(InstanceFormatError):
        from_json(document | {"sigma": [0.5]})
    with pytest.raises(InstanceFormatError):
        from_json([document])


def test_spec_validation() -> None:
    """Impossible generation requests should be rejected."""
    with pytest.raises(ModelError):
        GenSpec("NL", 4, 2, 0)
    with pytest.raises(ModelError):
        GenSpec(KIND_GNL, 0, 2, 0)
    with pytest.raises(ModelError):
        GenSpec(KIND_GNL, 4, 2, 0, cross_rate=0.5)
    with pytest.raises(ModelError):
        GenSpec(KIND_GNL, 4, 1, 0, cross_rate=1.5)
    with pytest.raises(ModelError):
        GenSpec(KIND_GNL, 4, 2, 0, zero_optout_nests=2)
    with pytest.raises(ModelError):
        GenSpec(KIND_MGNL, 4, 2, 0, zero_optout_nests=1)


def test_memberships_and_allocations() -> None:
    """Every product should sit in some nest and spread its allocation to sum one."""
    spec = GenSpec(KIND_GNL, 10, 4, 21, cross_rate=1.5)
    model = generate(spec).model
    member = model.alpha > 0.0
    assert np.all(member.any(axis=1))
    assert spec.m <= int(member.sum()) <= math.ceil(spec.cross_rate * spec.m)
    assert np.allclose(model.alpha.sum(axis=1), 1.0)
    assert np.all((model.sigma >= 0.25) & (model.sigma < 1.0))


def test_generated_constraints_are_cardinalities() -> None:
    """Generated rows should cap the total at half the products."""
    instance = generate(GenSpec(KIND_GNL, 8, 2, 4))
    constraints = instance.constraints
    assert np.array_equal(constraints.a[0], np.ones(8))
    assert constraints.b[0] == 4.0
    assert constraints.is_satisfied(np.zeros(8))


def test_mixture_segments_share_the_nest_layout() -> None:
    """Mixture segments should share alpha, sigma and revenues and carry weights summing one."""
    mixed = generate(GenSpec(KIND_MGNL, 6, 3, 9, T=3)).model
    assert isinstance(mixed, MgnlModel)
    first = mixed.segments[0]
    for segment in mixed.segments[1:]:
        assert np.array_equal(segment.alpha, first.alpha)
        assert np.array_equal(segment.sigma, first.sigma)
        assert np.array_equal(segment.r, first.r)
    assert mixed.theta.sum() == pytest.approx(1.0)


def test_zero_optout_nests() -> None:
    """Requested nests should get a zero opt-out weight and at least one member."""
    model = generate(GenSpec(KIND_GNL, 6, 3, 2, zero_optout_nests=1)).model
    assert model.v0[0] == 0.0
    assert np.all(model.v0[1:] == 1.0)
    assert np.any(model.alpha[:, 0] > 0.0)


def test_price_data() -> None:
    """Pricing kinds should carry ladders or bounds built from the price draws."""
    dp = generate(GenSpec(KIND_JAP_DP, 4, 2, 6, L=3))
    assert isinstance(dp.model, NestStructure)
    assert dp.ladder.sizes == (3, 3, 3, 3)
    assert dp.bounds is None
    cp = generate(GenSpec(KIND_JAP_CP, 4, 2, 6))
    assert np.all(cp.bounds.lower == 0.5)
    assert np.all(cp.bounds.upper > 0.5) and np.all(cp.bounds.upper < 1.0)
    assert cp.ladder is None
    assert "price_bounds" in to_json(cp)


def test_price_level_schemes() -> None:
    """Arithmetic levels should step by gamma and the fine scheme by half of it."""
    gamma = np.array([0.2, 1.0])
    coarse = price_levels(gamma, 3)
    fine = price_levels(gamma, 3, PRICE_SCHEME_FINE)
    assert np.allclose(coarse[0], [0.7, 0.9, 1.1])
    assert np.allclose(coarse[1], [1.5, 2.5, 3.5])
    assert fine[0].shape == (6,)
    assert np.allclose(fine[1][1::2], coarse[1])

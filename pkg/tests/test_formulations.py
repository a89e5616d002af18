"""Tests for the text formulation listings."""

from __future__ import annotations

import pytest

from gnlopt.const import KIND_GNL, KIND_JAP_CP, KIND_MGNL
from gnlopt.errors import BetaError
from gnlopt.formulations import format_cp_gnl_bi, format_gnl_bis, format_mgnl_bi
from gnlopt.instances import GenSpec, generate
from gnlopt.reformulate import choose_beta


def _sections(text: str) -> list[str]:
    return [line for line in text.splitlines() if line and not line.startswith((" ", "\\"))]


def test_gnl_listing_has_every_row_family() -> None:
    """The bisection listing should carry the inclusive, tangent, envelope and assortment rows."""
    instance = generate(GenSpec(KIND_GNL, 5, 2, 3))
    model = instance.model
    text = format_gnl_bis(model, instance.constraints, choose_beta(model), 1.5)
    assert text.startswith("\\ bisection subproblem:")
    assert _sections(text) == ["minimize", "subject to", "bounds", "binary"]
    for n in range(model.n_nests):
        assert f" inclusive[{n}]:" in text
        assert f" oa_h[{n}]:" in text
        assert f" k[{n}]: [" in text
    members = int((model.weights > 0.0).sum())
    assert text.count(" mc1[") == members
    assert text.count(" assort[") == instance.constraints.n_rows
    assert " x: x[0] x[1] x[2] x[3] x[4]" in text
    with pytest.raises(BetaError):
        format_gnl_bis(model, instance.constraints, float(model.r.max()), 0.0)


def test_mixed_listing_has_one_ratio_per_segment() -> None:
    """The mixed listing should weight each segment level and link k to W h."""
    instance = generate(GenSpec(KIND_MGNL, 4, 2, 5, T=3))
    mixed = instance.model
    beta = max(choose_beta(segment) for segment in mixed.segments)
    text = format_mgnl_bi(mixed, instance.constraints, beta)
    assert _sections(text) == ["minimize", "subject to", "binary"]
    assert text.count(" ratio[") == 3
    assert text.count(" link[") == 3 * mixed.segments[0].n_nests
    assert "delta[2]" in text.splitlines()[2]


def test_continuous_listing_reads_prices_and_bounds() -> None:
    """The continuous-price listing should spell out exponents and price bounds."""
    instance = generate(GenSpec(KIND_JAP_CP, 3, 2, 7))
    text = format_cp_gnl_bi(instance.structure, instance.bounds, instance.constraints)
    assert _sections(text) == ["minimize", "subject to", "bounds", "binary"]
    assert " ratio:" in text
    for i in range(3):
        assert f" y[{i}]: [0.5, " in text
    with pytest.raises(ValueError):
        format_cp_gnl_bi(instance.structure, instance.bounds, beta=float(instance.bounds.upper.max()))

"""Tests for GNL model construction and forward evaluation."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from gnlopt.errors import BetaError, DegenerateNestError, ModelError
from gnlopt.models import (
    Assortment,
    GnlModel,
    bisection_objective,
    build_gnl_model,
    build_mgnl_model,
    cardinality_constraints,
    expected_revenue,
    h_values,
    inclusive_value,
    k_values,
    mgnl_expected_revenue,
    min_objective,
    nest_choice_prob,
    no_purchase_prob,
    product_choice_prob,
    set_H,
    set_K,
    set_Y,
    set_Z,
    validate_model,
)


def _two_nest_model() -> GnlModel:
    return build_gnl_model(
        v0=[1.0, 0.5],
        v=[[2.0, 2.0], [1.0, 1.0], [3.0, 3.0]],
        alpha=[[1.0, 0.0], [0.4, 0.6], [0.0, 1.0]],
        sigma=[0.5, 0.8],
        r=[4.0, 6.0, 2.0],
    )


def _random_model(seed: int, m: int = 6, n_nests: int = 3) -> GnlModel:
    rng = np.random.default_rng(seed)
    alpha = rng.random((m, n_nests)) * (rng.random((m, n_nests)) < 0.6)
    alpha[np.arange(m), rng.integers(0, n_nests, size=m)] += 0.1
    alpha /= alpha.sum(axis=1, keepdims=True)
    return build_gnl_model(
        v0=rng.uniform(0.5, 2.0, n_nests),
        v=rng.uniform(0.1, 3.0, (m, n_nests)),
        alpha=alpha,
        sigma=rng.uniform(0.25, 1.0, n_nests),
        r=rng.uniform(1.0, 10.0, m),
    )


def test_probabilities_sum_to_one() -> None:
    """Product and no-purchase probabilities should add up to one for every offer set."""
    model = _two_nest_model()
    for bits in itertools.product((0, 1), repeat=model.m):
        total = product_choice_prob(model, bits).sum() + no_purchase_prob(model, bits)
        assert total == pytest.approx(1.0, abs=1e-10)
        assert nest_choice_prob(model, bits).sum() == pytest.approx(1.0, abs=1e-10)


def test_unoffered_products_have_zero_probability() -> None:
    """Products outside the offer set should never be chosen."""
    model = _two_nest_model()
    probabilities = product_choice_prob(model, [1, 0, 1])
    assert probabilities[1] == 0.0
    assert probabilities[0] > 0.0 and probabilities[2] > 0.0


def test_revenue_matches_hand_computation() -> None:
    """Expected revenue should match the nest-by-nest formula on a small example."""
    model = _two_nest_model()
    x = np.array([1.0, 1.0, 0.0])
    w = np.array([1.0 + 2.0 + 0.4, 0.5 + 0.6])
    denominator = np.sum(w ** model.sigma)
    numerator = w[0] ** (model.sigma[0] - 1.0) * (4.0 * 2.0 + 6.0 * 0.4) + w[1] ** (model.sigma[1] - 1.0) * (6.0 * 0.6)
    assert inclusive_value(model, x) == pytest.approx(w)
    assert expected_revenue(model, x) == pytest.approx(numerator / denominator, rel=1e-12)


def test_empty_assortment_earns_nothing() -> None:
    """The empty offer set should have zero revenue and certain no-purchase."""
    model = _two_nest_model()
    assert expected_revenue(model, [0, 0, 0]) == 0.0
    assert no_purchase_prob(model, [0, 0, 0]) == pytest.approx(1.0)


def test_min_objective_is_beta_minus_revenue() -> None:
    """The minimisation form should equal beta minus revenue."""
    model = _random_model(3)
    beta = float(model.r.max()) + 1.0
    for bits in itertools.product((0, 1), repeat=model.m):
        assert min_objective(model, bits, beta) == pytest.approx(beta - expected_revenue(model, bits), abs=1e-10)


def test_bisection_objective_sign_tracks_ratio() -> None:
    """G(delta, x) should be zero at the ratio value and change sign around it."""
    model = _random_model(5)
    beta = float(model.r.max()) + 1.0
    x = [1, 0, 1, 1, 0, 1]
    ratio = min_objective(model, x, beta)
    assert bisection_objective(model, x, beta, ratio) == pytest.approx(0.0, abs=1e-10)
    assert bisection_objective(model, x, beta, ratio - 0.1) > 0.0
    assert bisection_objective(model, x, beta, ratio + 0.1) < 0.0


def test_beta_must_exceed_revenues() -> None:
    """A beta at or below the largest revenue should be rejected."""
    model = _two_nest_model()
    with pytest.raises(BetaError):
        min_objective(model, [1, 1, 1], 6.0)


def test_validation_reports_every_violation() -> None:
    """Invalid parameters should all be listed and rejected by the builder."""
    model = GnlModel(
        v0=[0.0, 1.0],
        v=[[1.0, 1.0], [1.0, 1.0]],
        alpha=[[0.0, 0.0], [1.0, 0.0]],
        sigma=[1.5, 0.5],
        r=[1.0, -2.0],
    )
    violations = validate_model(model)
    assert any("sigma[0]" in item for item in violations)
    assert any("r has negative" in item for item in violations)
    assert any("product 0 belongs to no nest" in item for item in violations)
    assert any("v0 must be positive" in item for item in violations)
    with pytest.raises(ModelError):
        build_gnl_model(v0=[1.0], v=[[1.0]], alpha=[[1.0]], sigma=[0.0], r=[1.0])


def test_shape_mismatch_is_rejected() -> None:
    """Arrays of disagreeing shapes should raise a model error."""
    with pytest.raises(ModelError):
        GnlModel(v0=[1.0], v=[[1.0, 2.0]], alpha=[[1.0]], sigma=[0.5], r=[1.0])


def test_zero_optout_nest_needs_explicit_opt_in() -> None:
    """An empty zero opt-out nest should raise unless empty nests are allowed."""
    model = build_gnl_model(
        v0=[0.0, 1.0],
        v=[[1.0, 1.0], [2.0, 2.0]],
        alpha=[[1.0, 0.0], [0.0, 1.0]],
        sigma=[0.5, 0.5],
        r=[3.0, 2.0],
        allow_zero_optout=True,
    )
    assert model.has_zero_optout
    with pytest.raises(DegenerateNestError):
        expected_revenue(model, [0, 1])
    assert expected_revenue(model, [0, 1], allow_empty_nests=True) == pytest.approx(2.0 * 2.0 / 3.0)


def test_set_functions_match_vector_forms() -> None:
    """Set-indexed H, K, Y and Z should agree with the vector evaluations."""
    model = _random_model(7)
    subset = (0, 2, 5)
    x = Assortment.from_set(model.m, subset)
    for n in range(model.n_nests):
        assert set_H(model, n, subset) == pytest.approx(h_values(model, x)[n])
        assert set_K(model, n, subset) == pytest.approx(k_values(model, x)[n])
        w = inclusive_value(model, x)[n]
        assert set_Y(model, n, subset) == pytest.approx((model.sigma[n] - 1.0) * np.log(w))
    assert set_Z(model, subset) == pytest.approx(np.log(k_values(model, x).sum()))


def test_h_convex_and_k_concave_along_segments() -> None:
    """H should be midpoint convex and K midpoint concave on relaxed offers."""
    model = _random_model(11)
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = rng.random(model.m), rng.random(model.m)
        mid = 0.5 * (a + b)
        assert np.all(h_values(model, mid) <= 0.5 * (h_values(model, a) + h_values(model, b)) + 1e-10)
        assert np.all(k_values(model, mid) >= 0.5 * (k_values(model, a) + k_values(model, b)) - 1e-10)


def test_set_functions_have_diminishing_returns() -> None:
    """K and Z should be submodular and Y supermodular over nested subsets."""
    model = _random_model(13)
    m = model.m
    for small_bits in itertools.product((0, 1), repeat=m):
        small = {i for i in range(m) if small_bits[i]}
        for extra in range(m):
            if extra in small:
                continue
            large = small | {extra}
            for j in set(range(m)) - large:
                gain_small = set_Z(model, small | {j}) - set_Z(model, small)
                gain_large = set_Z(model, large | {j}) - set_Z(model, large)
                assert gain_small >= gain_large - 1e-10
                for n in range(model.n_nests):
                    k_small = set_K(model, n, small | {j}) - set_K(model, n, small)
                    k_large = set_K(model, n, large | {j}) - set_K(model, n, large)
                    assert k_small >= k_large - 1e-10
                    y_small = set_Y(model, n, small | {j}) - set_Y(model, n, small)
                    y_large = set_Y(model, n, large | {j}) - set_Y(model, n, large)
                    assert y_small <= y_large + 1e-10


def test_mixture_revenue_weights_segments() -> None:
    """Mixed revenue should be the theta-weighted sum of segment revenues."""
    first, second = _random_model(1), _random_model(2)
    mixed = build_mgnl_model([first, second], [0.3, 0.7])
    x = [1, 1, 0, 0, 1, 0]
    expected = 0.3 * expected_revenue(first, x) + 0.7 * expected_revenue(second, x)
    assert mgnl_expected_revenue(mixed, x) == pytest.approx(expected)
    with pytest.raises(ModelError):
        build_mgnl_model([first, second], [0.5, 0.6])


def test_cardinality_rows() -> None:
    """Cardinality helpers should build one global row and one row per nest."""
    constraints = cardinality_constraints(4, total=2, nest_members=[[0, 1], [2, 3]], nest_limits=[1, 1])
    assert constraints.n_rows == 3
    assert constraints.is_satisfied([1, 0, 1, 0])
    assert not constraints.is_satisfied([1, 1, 0, 0])


def test_assortment_from_vector_rounds_near_binary() -> None:
    """Near-binary vectors should round and fractional ones should be rejected."""
    assert Assortment.from_vector([1.0 - 1e-9, 1e-9, 1.0]).support == (0, 2)
    with pytest.raises(ModelError):
        Assortment.from_vector([0.5, 1.0])

"""Tests for price ladders, PWLA grids and the joint pricing pipelines."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gnlopt.const import KIND_JAP_CP, KIND_JAP_DP
from gnlopt.errors import ModelError, PwlaError
from gnlopt.instances import GenSpec, generate
from gnlopt.models import LinearConstraintSet, NestStructure, expected_revenue
from gnlopt.oracle import enumerate_jap_cp, enumerate_jap_dp, local_maxima_scan
from gnlopt.pricing import (
    Breakpoints,
    CpConfig,
    PriceBounds,
    PriceLadder,
    cp_breakpoints,
    cp_price_ladder,
    cp_revenue,
    expand_discrete,
    lift_constraints,
    polish_prices,
    pwla_bound,
    pwla_build,
    pwla_eval,
    pwla_fill_fractions,
    pwla_incremental_value,
    pwla_next_breakpoint,
    pwla_objective_gap,
    pwla_theta,
    solve_jap_cp,
    solve_jap_dp,
    two_peak_bounds,
    two_peak_shell,
)


def _shell() -> NestStructure:
    return NestStructure(v0=[1.0, 1.0], alpha=[[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]], sigma=[0.5, 0.8])


def _max_error(bp: Breakpoints, samples: int = 10_000) -> float:
    w = np.linspace(bp.w_lo, bp.w_hi, samples)
    return float(np.max(np.abs(np.exp(w) - pwla_eval(bp, w))))


def test_theta_matches_brute_force_gap() -> None:
    """The closed-form segment gap should match a dense search of secant minus exp."""
    for q_h, q_next in ((0.0, 1.0), (-2.0, 0.5), (3.0, 3.2)):
        w = np.linspace(q_h, q_next, 100_001)
        secant = np.exp(q_h) + (np.exp(q_next) - np.exp(q_h)) / (q_next - q_h) * (w - q_h)
        assert pwla_theta(q_h, q_next) == pytest.approx(float(np.max(secant - np.exp(w))), rel=1e-6)
    with pytest.raises(PwlaError):
        pwla_theta(1.0, 1.0)


def test_next_breakpoint_respects_epsilon_and_domain() -> None:
    """The next breakpoint should keep the gap within epsilon and stop at the domain end."""
    nxt = pwla_next_breakpoint(0.0, 5.0, 1e-3, 1e-12)
    assert 0.0 < nxt < 5.0
    assert pwla_theta(0.0, nxt) <= 1e-3
    assert pwla_next_breakpoint(0.0, 0.01, 1e-3, 1e-12) == 0.01


def test_build_certifies_max_error_on_random_domains() -> None:
    """Every built grid should keep the interpolation error within epsilon."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        w_lo = rng.uniform(-4.0, 2.0)
        w_hi = w_lo + rng.uniform(0.1, 3.0)
        epsilon = 10.0 ** rng.uniform(-4.0, -1.0)
        bp = pwla_build(w_lo, w_hi, epsilon)
        assert bp.q[0] == w_lo and bp.q[-1] == w_hi
        assert _max_error(bp) <= epsilon * (1.0 + 1e-9)
        assert bp.max_theta() <= epsilon * (1.0 + 1e-9)


def test_eval_is_exact_at_breakpoints() -> None:
    """The interpolant should reproduce exp at every breakpoint."""
    bp = pwla_build(-1.0, 2.0, 1e-3)
    assert np.allclose(pwla_eval(bp, bp.q), np.exp(bp.q), rtol=1e-14, atol=0.0)
    assert pwla_eval(bp, 2.0) == math.exp(2.0)
    with pytest.raises(PwlaError):
        pwla_eval(bp, 2.5)


def test_degenerate_domain_has_no_segments() -> None:
    """A single-point domain should give one breakpoint and a constant interpolant."""
    bp = pwla_build(0.5, 0.5, 1e-3)
    assert bp.n_segments == 0
    assert pwla_eval(bp, 0.5) == pytest.approx(math.exp(0.5))
    with pytest.raises(PwlaError):
        pwla_build(1.0, 0.0, 1e-3)


def test_incremental_form_matches_interpolant() -> None:
    """Filling segments in order should reproduce the interpolated value."""
    bp = pwla_build(-0.5, 1.5, 1e-3)
    for w in np.linspace(-0.5, 1.5, 37):
        nu = pwla_fill_fractions(bp, float(w))
        assert np.all(np.diff(nu) <= 0.0)
        assert pwla_incremental_value(bp, float(w)) == pytest.approx(float(pwla_eval(bp, w)), rel=1e-12)


def test_segment_counts_respect_closed_form_bound() -> None:
    """Grid sizes should stay within the closed-form bound on random price domains."""
    rng = np.random.default_rng(1)
    for _ in range(100):
        lower, upper = 0.5, 0.5 + rng.uniform(0.0, 1.0)
        eta, kappa, sigma = rng.uniform(0.05, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(0.25, 1.0)
        epsilon = 1e-3
        w_lo, w_hi = (kappa - eta * upper) / sigma, (kappa - eta * lower) / sigma
        bp = pwla_build(w_lo, w_hi, epsilon)
        assert bp.n_segments <= pwla_bound(lower, upper, eta, kappa, sigma, epsilon)


def test_quartering_epsilon_roughly_doubles_segments() -> None:
    """Segment counts should scale with one over the square root of epsilon."""
    rng = np.random.default_rng(2)
    coarse, fine = [], []
    for _ in range(40):
        w_lo = rng.uniform(-2.0, 1.0)
        w_hi = w_lo + rng.uniform(1.0, 3.0)
        coarse.append(pwla_build(w_lo, w_hi, 1e-4).n_segments)
        fine.append(pwla_build(w_lo, w_hi, 2.5e-5).n_segments)
    ratio = float(np.mean(fine)) / float(np.mean(coarse))
    assert 1.5 <= ratio <= 2.5


def test_breakpoint_record_round_trip() -> None:
    """A stored breakpoint record should rebuild the same grid."""
    bp = pwla_build(0.0, 1.0, 1e-3)
    again = Breakpoints.from_dict(bp.to_dict())
    assert np.array_equal(again.q, bp.q)
    assert np.allclose(again.slopes, bp.slopes)
    with pytest.raises(PwlaError):
        Breakpoints.from_dict({"q": [0.0, 1.0]})


def test_ladder_validation_and_virtual_items() -> None:
    """Ladders should reject unsorted prices and list virtual items product-major."""
    ladder = PriceLadder(prices=([1.0, 2.0], [1.5]), eta=[1.0, 0.5], kappa=[0.0, 0.0])
    assert ladder.virtual_items() == [(0, 0), (0, 1), (1, 0)]
    assert ladder.augmented({1: 1.5}).sizes == (2, 1)
    assert ladder.augmented({1: 2.5}).sizes == (2, 2)
    with pytest.raises(ModelError):
        PriceLadder(prices=([2.0, 1.0],), eta=[1.0], kappa=[0.0])
    with pytest.raises(ModelError):
        PriceLadder(prices=([1.0],), eta=[0.0], kappa=[0.0])


def test_expansion_and_lifted_rows() -> None:
    """Virtual products should carry their prices and rows should lift to the items."""
    ladder = PriceLadder(prices=([1.0, 2.0], [1.0, 3.0], [2.0]), eta=[1.0, 1.0, 1.0], kappa=[1.0, 2.0, 0.5])
    model, one_price = expand_discrete(_shell(), ladder)
    assert model.m == 5
    assert np.array_equal(model.r, [1.0, 2.0, 1.0, 3.0, 2.0])
    assert one_price.is_satisfied([1, 0, 0, 1, 1])
    assert not one_price.is_satisfied([1, 1, 0, 0, 0])
    cardinality = LinearConstraintSet(a=[[1.0, 1.0, 1.0]], b=[2.0])
    assert np.array_equal(lift_constraints(cardinality, ladder).a, [[1.0, 1.0, 1.0, 1.0, 1.0]])
    budget = LinearConstraintSet(a=[[0.0, 0.0, 0.0, 1.0, 1.0, 0.0]], b=[3.0])
    lifted = lift_constraints(budget, ladder, joint_prices=True)
    assert np.array_equal(lifted.a, [[1.0, 2.0, 1.0, 3.0, 0.0]])
    with pytest.raises(ModelError):
        lift_constraints(LinearConstraintSet(a=[[1.0, 1.0]], b=[1.0]), ladder)


@pytest.mark.parametrize("seed", range(4))
def test_discrete_pricing_matches_oracle(seed: int) -> None:
    """Joint discrete pricing should match enumeration over every price pattern."""
    instance = generate(GenSpec(KIND_JAP_DP, 4, 2, 300 + seed, L=2 + seed % 2))
    oracle = enumerate_jap_dp(instance.structure, instance.ladder, instance.constraints)
    result = solve_jap_dp(instance.structure, instance.ladder, instance.constraints)
    assert result.objective == pytest.approx(oracle.objective, rel=1e-6, abs=1e-9)
    assert len(result.prices) == instance.m
    for offered, price in zip(result.assortment, result.prices):
        assert (price is None) == (offered == 0)


def test_discrete_pricing_with_bisection() -> None:
    """The bisection path should agree with the log-convex path on the expansion."""
    instance = generate(GenSpec(KIND_JAP_DP, 3, 2, 320, L=2))
    logconvex = solve_jap_dp(instance.structure, instance.ladder, instance.constraints)
    bisection = solve_jap_dp(instance.structure, instance.ladder, instance.constraints, method="bisection")
    assert bisection.objective == pytest.approx(logconvex.objective, rel=1e-6)


def test_continuous_revenue_batches() -> None:
    """Batched evaluation should agree with row-by-row evaluation."""
    bounds = PriceBounds(lower=[0.5, 0.5, 0.5], upper=[2.0, 2.0, 2.0], eta=[1.0, 0.8, 0.6], kappa=[0.5, 0.0, 1.0])
    x = np.array([1.0, 0.0, 1.0])
    prices = np.random.default_rng(3).uniform(0.5, 2.0, (5, 3))
    batch = cp_revenue(_shell(), bounds, x, prices)
    assert batch.shape == (5,)
    for row, value in zip(prices, batch):
        assert cp_revenue(_shell(), bounds, x, row) == pytest.approx(value)


def test_objective_gap_shrinks_with_epsilon() -> None:
    """The PWLA revenue error should fall as epsilon falls."""
    bounds = PriceBounds(lower=[0.5, 0.5, 0.5], upper=[1.5, 1.5, 1.5], eta=[1.0, 0.8, 0.6], kappa=[0.5, 0.0, 1.0])
    x = np.ones(3)
    rng = np.random.default_rng(4)
    coarse = fine = 0.0
    coarse_grids = cp_breakpoints(_shell(), bounds, 1e-2)
    fine_grids = cp_breakpoints(_shell(), bounds, 1e-4)
    for y in rng.uniform(0.5, 1.5, (50, 3)):
        coarse = max(coarse, pwla_objective_gap(_shell(), bounds, x, y, 1e-2, grids=coarse_grids))
        fine = max(fine, pwla_objective_gap(_shell(), bounds, x, y, 1e-4, grids=fine_grids))
    assert fine < coarse
    with pytest.raises(PwlaError):
        pwla_objective_gap(_shell(), bounds, x, [3.0, 1.0, 1.0], 1e-2)


def test_price_ladder_stays_inside_bounds() -> None:
    """Grid prices should lie within their bounds and include both ends."""
    bounds = PriceBounds(lower=[0.5, 0.5, 0.5], upper=[1.5, 2.0, 1.0], eta=[1.0, 0.8, 0.6], kappa=[0.5, 0.0, 1.0])
    ladder = cp_price_ladder(_shell(), bounds, 1e-3)
    for i, prices in enumerate(ladder.prices):
        assert prices[0] == pytest.approx(bounds.lower[i])
        assert prices[-1] == pytest.approx(bounds.upper[i])
        assert np.all(np.diff(prices) > 0.0)


def test_polish_never_loses_revenue() -> None:
    """Polishing should return at least the revenue of its starting prices."""
    bounds = PriceBounds(lower=[0.5, 0.5, 0.5], upper=[3.0, 3.0, 3.0], eta=[1.0, 0.8, 0.6], kappa=[0.5, 0.0, 1.0])
    x = np.array([1.0, 1.0, 0.0])
    start = np.array([3.0, 0.5, 0.5])
    y, value, stats = polish_prices(_shell(), bounds, x, start, starts=3, seed=1)
    assert value >= cp_revenue(_shell(), bounds, x, start)
    assert value == pytest.approx(cp_revenue(_shell(), bounds, x, y))
    assert stats.starts == 4
    assert y[2] == start[2]


def test_polish_respects_price_budget() -> None:
    """Joint price rows should hold at the polished prices."""
    bounds = PriceBounds(lower=[0.5, 0.5, 0.5], upper=[3.0, 3.0, 3.0], eta=[0.3, 0.3, 0.3], kappa=[0.5, 0.0, 1.0])
    budget = LinearConstraintSet(a=[[0.0, 0.0, 0.0, 1.0, 1.0, 0.0]], b=[2.0])
    x = np.array([1.0, 1.0, 0.0])
    y, _, _ = polish_prices(_shell(), bounds, x, np.array([0.5, 0.5, 0.5]), constraints=budget, starts=2)
    assert y[0] + y[1] <= 2.0 + 1e-9


def test_two_peak_has_two_local_maxima() -> None:
    """The single-product two-nest layout should show exactly two revenue peaks."""
    shell, bounds = two_peak_shell(), two_peak_bounds()
    peaks = local_maxima_scan(lambda p: cp_revenue(shell, bounds, [1.0], [p]), (0.01, 10.0), 10_000)
    assert len(peaks) == 2


def test_two_peak_pipeline_reaches_a_peak() -> None:
    """The continuous-price pipeline should land within one percent of the best scanned peak."""
    shell, bounds = two_peak_shell(), two_peak_bounds()
    peaks = local_maxima_scan(lambda p: cp_revenue(shell, bounds, [1.0], [p]), (0.01, 10.0), 10_000)
    report = solve_jap_cp(shell, bounds, epsilon=1e6, config=CpConfig(starts=3))
    assert report.assortment == (1,)
    assert report.revenue >= 0.99 * max(value for _, value in peaks)
    assert report.revenue == pytest.approx(cp_revenue(shell, bounds, [1.0], [report.prices[0]]))


def test_continuous_pricing_near_oracle() -> None:
    """Continuous pricing should come within one percent of the grid-multistart oracle."""
    instance = generate(GenSpec(KIND_JAP_CP, 2, 2, 400))
    oracle = enumerate_jap_cp(instance.structure, instance.bounds, instance.constraints, grid_n=25, starts=3)
    report = solve_jap_cp(instance.structure, instance.bounds, instance.constraints, epsilon=1e-2)
    assert report.revenue >= 0.99 * oracle.objective
    assert report.rounds >= 1
    result = report.as_result()
    assert result.objective == report.revenue
    assert result.bound >= result.objective


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_continuous_pricing_battery(seed: int) -> None:
    """Across seeds the continuous-price pipeline should stay within one percent of the oracle."""
    instance = generate(GenSpec(KIND_JAP_CP, 4, 2, 500 + seed))
    oracle = enumerate_jap_cp(instance.structure, instance.bounds, instance.constraints)
    report = solve_jap_cp(instance.structure, instance.bounds, instance.constraints, epsilon=1e-3)
    assert report.revenue >= 0.99 * oracle.objective


@pytest.mark.slow
def test_objective_gap_halves_with_epsilon() -> None:
    """Halving epsilon should roughly halve the worst observed revenue error."""
    instance = generate(GenSpec(KIND_JAP_CP, 4, 2, 600))
    structure, bounds = instance.structure, instance.bounds
    x = np.ones(instance.m)
    rng = np.random.default_rng(5)
    samples = rng.uniform(bounds.lower, bounds.upper, (2000, instance.m))
    errors = []
    for epsilon in (2e-3, 1e-3):
        grids = cp_breakpoints(structure, bounds, epsilon)
        errors.append(max(pwla_objective_gap(structure, bounds, x, y, epsilon, grids=grids) for y in samples))
    assert 1.6 <= errors[0] / errors[1] <= 2.6


def test_expanded_model_revenue_matches_priced_products() -> None:
    """Offering one virtual item per product should equal continuous revenue at those prices."""
    shell = _shell()
    ladder = PriceLadder(prices=([1.0, 2.0], [1.0, 3.0], [2.0]), eta=[1.0, 1.0, 1.0], kappa=[1.0, 2.0, 0.5])
    bounds = PriceBounds(lower=[1.0, 1.0, 2.0], upper=[2.0, 3.0, 2.0], eta=[1.0, 1.0, 1.0], kappa=[1.0, 2.0, 0.5])
    model, _ = expand_discrete(shell, ladder)
    virtual = [0, 1, 1, 0, 1]
    assert expected_revenue(model, virtual) == pytest.approx(cp_revenue(shell, bounds, np.ones(3), [2.0, 1.0, 2.0]))

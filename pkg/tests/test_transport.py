"""Discrete transport: OT and TL^p distances, plans, bottleneck matching."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pctv.errors import MarginalError, UnsupportedConfigurationError
from pctv.geometry import grid_points, sample_iid, uniform_density, unit_box
from pctv.transport import (
    DiscreteMeasure,
    LiftedFunction,
    TransportPlan,
    bottleneck_distance,
    matching_scaling_experiment,
    ot_distance,
    plan_compose,
    plan_inverse,
    push_forward,
    scaling_ratio,
    tlp_distance,
)

from oracles import exhaustive_bottleneck, exhaustive_tlp


def _uniform_measure(points):
    return DiscreteMeasure.uniform_on(np.asarray(points, dtype=float))


def test_measure_validation():
    pts = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError):
        DiscreteMeasure(pts, np.array([0.7, 0.2]))
    with pytest.raises(ValueError):
        DiscreteMeasure(pts, np.array([1.2, -0.2]))
    measure = DiscreteMeasure.uniform_on(pts)
    assert measure.uniform
    assert measure.n == 2
    assert measure.dimension == 1


def test_two_atom_distance_by_hand():
    mu = _uniform_measure([[0.0], [1.0]])
    nu = _uniform_measure([[0.4], [1.0]])
    distance, plan = ot_distance(mu, nu, p=1)
    assert_allclose(distance, 0.2)
    assert_allclose(plan.cost(1), 0.2)


def test_identical_measures_have_zero_distance():
    pts = np.array([[0.1, 0.2], [0.5, 0.9], [0.3, 0.3]])
    mu = _uniform_measure(pts)
    distance, plan = ot_distance(mu, mu, p=2)
    assert distance == 0.0
    assert_allclose(plan.cost(2), 0.0, atol=1e-30)


def test_ot_matches_exhaustive_on_small_uniform_instances():
    rng = np.random.default_rng(12)
    for _ in range(60):
        n = int(rng.integers(2, 7))
        x = rng.uniform(size=(n, 2))
        y = rng.uniform(size=(n, 2))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        distance, plan = ot_distance(_uniform_measure(x), _uniform_measure(y), p=p)
        oracle = exhaustive_tlp(x, np.zeros(n), y, np.zeros(n), p)
        assert abs(distance - oracle) < 1e-10
        assert_allclose(plan.cost(p) ** (1.0 / p), distance, rtol=1e-10)


def test_general_masses_use_the_lp_solver():
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.3, 0.7]))
    nu = DiscreteMeasure(np.array([[0.25], [0.75]]), np.array([0.5, 0.5]))
    distance, plan = ot_distance(mu, nu, p=1)
    # move 0.3 from 0 to 0.25, 0.2 from 1 to 0.25, 0.5 from 1 to 0.75
    assert_allclose(distance, 0.3 * 0.25 + 0.2 * 0.75 + 0.5 * 0.25, rtol=1e-9)
    assert_allclose(np.bincount(plan.ii, weights=plan.mm, minlength=2),
                    mu.masses, atol=1e-10)
    assert_allclose(np.bincount(plan.jj, weights=plan.mm, minlength=2),
                    nu.masses, atol=1e-10)


def test_tlp_matches_exhaustive_oracle():
    rng = np.random.default_rng(23)
    for _ in range(60):
        n = int(rng.integers(2, 7))
        x = rng.uniform(size=(n, 1))
        y = rng.uniform(size=(n, 1))
        f = rng.normal(size=n)
        g = rng.normal(size=n)
        p = float(rng.choice([1.0, 2.0]))
        distance, _ = tlp_distance(
            LiftedFunction(_uniform_measure(x), f),
            LiftedFunction(_uniform_measure(y), g),
            p=p,
        )
        oracle = exhaustive_tlp(x, f, y, g, p)
        assert abs(distance - oracle) < 1e-10


def test_tlp_metric_axioms_on_random_triples():
    rng = np.random.default_rng(31)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        lifted = []
        for _ in range(3):
            pts = rng.uniform(size=(n, 2))
            lifted.append(LiftedFunction(_uniform_measure(pts), rng.normal(size=n)))
        dab, _ = tlp_distance(lifted[0], lifted[1], p=2)
        dba, _ = tlp_distance(lifted[1], lifted[0], p=2)
        dac, _ = tlp_distance(lifted[0], lifted[2], p=2)
        dcb, _ = tlp_distance(lifted[2], lifted[1], p=2)
        assert abs(dab - dba) < 1e-12
        assert dab <= dac + dcb + 1e-10
        same, _ = tlp_distance(lifted[0], lifted[0], p=2)
        assert same == 0.0


def test_plan_marginal_validation():
    mu = _uniform_measure(np.array([[0.0], [1.0]]))
    nu = _uniform_measure(np.array([[0.5], [1.5]]))
    with pytest.raises(MarginalError):
        TransportPlan(mu, nu, np.array([0, 0]), np.array([0, 1]),
                      np.array([0.5, 0.5]))


def test_plan_inverse_is_an_involution():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(5, 2))
    y = rng.uniform(size=(5, 2))
    _, plan = ot_distance(_uniform_measure(x), _uniform_measure(y), p=2)
    inv = plan_inverse(plan)
    double = plan_inverse(inv)
    assert_allclose(inv.cost(2), plan.cost(2), rtol=1e-12)
    keys = lambda p: set(zip(p.ii.tolist(), p.jj.tolist(), p.mm.tolist()))
    assert keys(double) == keys(plan)


def test_plan_compose_with_identity():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mu = _uniform_measure(pts)
    eye = TransportPlan(mu, mu, np.arange(3), np.arange(3), np.full(3, 1.0 / 3.0))
    _, plan = ot_distance(mu, _uniform_measure(pts + 0.25), p=2)
    composed = plan_compose(eye, plan)
    assert_allclose(composed.cost(2), plan.cost(2), rtol=1e-12)


def test_plan_compose_permutations():
    pts = np.array([[0.0], [1.0]])
    mu = _uniform_measure(pts)
    swap = TransportPlan(mu, mu, np.array([0, 1]), np.array([1, 0]),
                         np.array([0.5, 0.5]))
    composed = plan_compose(swap, swap)
    pairs = set(zip(composed.ii.tolist(), composed.jj.tolist()))
    assert pairs == {(0, 0), (1, 1)}


def test_plan_compose_needs_a_shared_middle():
    mu = _uniform_measure(np.array([[0.0], [1.0]]))
    nu = _uniform_measure(np.array([[0.5], [1.5]]))
    xi = _uniform_measure(np.array([[0.25], [0.75]]))
    _, p12 = ot_distance(mu, nu, p=1)
    _, p23 = ot_distance(xi, mu, p=1)
    with pytest.raises(UnsupportedConfigurationError):
        plan_compose(p12, p23)


def test_push_forward_change_of_variables():
    rng = np.random.default_rng(9)
    pts = rng.uniform(size=(6, 2))
    target = rng.uniform(size=(4, 2))
    assignment = np.array([0, 1, 2, 3, 0, 1])
    mu = _uniform_measure(pts)
    pushed = push_forward(mu, assignment, target)
    phi = rng.normal(size=4)
    lhs = float(np.dot(pushed.masses, phi))
    rhs = float(np.mean(phi[assignment]))
    assert_allclose(lhs, rhs, rtol=1e-14)


def test_bottleneck_matches_exhaustive_oracle():
    rng = np.random.default_rng(44)
    for _ in range(25):
        n = int(rng.integers(2, 8))
        x = rng.uniform(size=(n, 2))
        y = rng.uniform(size=(n, 2))
        distance, match = bottleneck_distance(_uniform_measure(x), _uniform_measure(y))
        oracle = exhaustive_bottleneck(x, y)
        assert abs(distance - oracle) < 1e-12
        moved = np.linalg.norm(x - y[match.assignment], axis=1)
        assert_allclose(moved.max(), distance, rtol=1e-12)


def test_bottleneck_on_identical_grids_is_zero():
    grid = _uniform_measure(grid_points(5, 2))
    distance, match = bottleneck_distance(grid, grid)
    assert distance == 0.0
    assert np.array_equal(match.assignment, np.arange(25))


def test_bottleneck_requires_uniform_equal_counts():
    mu = _uniform_measure(np.array([[0.0], [1.0]]))
    nu = _uniform_measure(np.array([[0.0], [0.5], [1.0]]))
    with pytest.raises(UnsupportedConfigurationError):
        bottleneck_distance(mu, nu)
    skew = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.3, 0.7]))
    with pytest.raises(UnsupportedConfigurationError):
        bottleneck_distance(skew, mu)


def test_scaling_ratio_formulas():
    assert_allclose(scaling_ratio(100, 2, 0.1),
                    0.1 * 10.0 / np.log(100) ** 0.75)
    assert_allclose(scaling_ratio(1000, 3, 0.05),
                    0.05 * 1000 ** (1 / 3) / np.log(1000) ** (1 / 3))


def test_matching_experiment_validates_grid_sizes():
    domain = unit_box(2)
    with pytest.raises(ValueError):
        matching_scaling_experiment(domain, uniform_density(domain), [10], [0])


def test_matching_experiment_smoke():
    domain = unit_box(2)
    records, tau, pvalue = matching_scaling_experiment(
        domain, uniform_density(domain), [16, 64], [0, 1, 2]
    )
    assert len(records) == 6
    assert all(r.distance > 0 for r in records)
    assert -1.0 <= tau <= 1.0
    assert 0.0 <= pvalue <= 1.0


def test_plan_csv_export(tmp_path):
    mu = _uniform_measure(np.array([[0.0], [1.0]]))
    _, plan = ot_distance(mu, mu, p=2)
    path = tmp_path / "plan.csv"
    plan.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,mass"
    assert len(lines) == 3

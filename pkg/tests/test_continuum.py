"""Weighted continuum functionals and the nonlocal total variation."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pctv import kernels
from pctv.continuum import (
    PolygonalSet,
    affine_function,
    check_gradient,
    coordinate_function,
    disk_set,
    halfplane_set,
    nonlocal_tv,
    weighted_perimeter,
    weighted_tv_smooth,
)
from pctv.errors import UnsupportedConfigurationError
from pctv.geometry import Density, dumbbell, uniform_density, unit_box

from oracles import halfplane_tv_expansion


def test_affine_function_values_and_gradient():
    fn = affine_function([2.0, -1.0], offset=0.5)
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert_allclose(fn(pts), [0.5, 1.5])
    assert_allclose(fn.grad(pts), [[2.0, -1.0], [2.0, -1.0]])
    assert check_gradient(fn, pts) < 1e-9


def test_coordinate_function_picks_an_axis():
    fn = coordinate_function(1)
    pts = np.array([[0.3, 0.7], [0.1, 0.2]])
    assert_allclose(fn(pts), [0.7, 0.2])


def test_weighted_tv_of_coordinate_is_one():
    domain = unit_box(2)
    value, err = weighted_tv_smooth(coordinate_function(0), uniform_density(domain), domain)
    assert_allclose(value, 1.0, rtol=1e-12)
    assert err >= 0.0


def test_weighted_tv_with_affine_weight():
    # rho(x) = 1 + x1 unnormalized: integral of (1 + x1)^2 over the unit
    # square is 7/3
    domain = unit_box(2)
    rho = Density(lambda p: 1.0 + p[:, 0], lower=1.0, upper=2.0, normalized=False)
    value, _ = weighted_tv_smooth(coordinate_function(0), rho, domain)
    assert_allclose(value, 7.0 / 3.0, rtol=1e-5)


def test_halfplane_set_membership():
    domain = unit_box(2)
    region = halfplane_set(domain, axis=0, threshold=0.5)
    pts = np.array([[0.2, 0.9], [0.7, 0.1]])
    assert_allclose(region.indicator(pts), [1.0, 0.0])
    assert region.boundary_segments().shape[1:] == (2, 2)


def test_perimeter_of_half_cut_square():
    domain = unit_box(2)
    region = halfplane_set(domain, axis=0, threshold=0.5)
    value = weighted_perimeter(region, uniform_density(domain), domain)
    assert_allclose(value, 1.0, rtol=1e-12)


def test_perimeter_with_affine_weight():
    # rho = 1 + x1 on the cut {x1 = 1/2}: integrand (1.5)^2 along a unit
    # segment
    domain = unit_box(2)
    rho = Density(lambda p: 1.0 + p[:, 0], lower=1.0, upper=2.0, normalized=False)
    region = halfplane_set(domain, axis=0, threshold=0.5)
    assert_allclose(weighted_perimeter(region, rho, domain), 2.25, rtol=1e-12)


def test_dumbbell_cuts_clip_to_the_shape():
    shape = dumbbell()
    rho = uniform_density(shape)
    rho_sq = 1.0 / shape.volume() ** 2
    neck = halfplane_set(shape, axis=0, threshold=1.25)
    left = halfplane_set(shape, axis=0, threshold=0.5)
    interface = halfplane_set(shape, axis=0, threshold=1.0)
    assert_allclose(weighted_perimeter(neck, rho, shape), 0.25 * rho_sq, rtol=1e-10)
    assert_allclose(weighted_perimeter(left, rho, shape), 1.0 * rho_sq, rtol=1e-10)
    # the cut at the block interface only crosses the open neck
    assert_allclose(weighted_perimeter(interface, rho, shape), 0.25 * rho_sq,
                    rtol=1e-10)


def test_disk_perimeter_matches_circumference():
    domain = unit_box(2)
    region = disk_set([0.5, 0.5], 0.25)
    value = weighted_perimeter(region, uniform_density(domain), domain)
    assert_allclose(value, 2.0 * math.pi * 0.25, rtol=1e-4)


def test_polygonal_sets_are_planar_only():
    with pytest.raises(UnsupportedConfigurationError):
        halfplane_set(unit_box(3), axis=0, threshold=0.5)
    with pytest.raises(ValueError):
        PolygonalSet(np.zeros((4, 3)))


def test_nonlocal_quadrature_tracks_the_expansion():
    domain = unit_box(2)
    rho = uniform_density(domain)
    u = coordinate_function(0)
    profile = kernels.indicator()
    for eps in (0.16, 0.08):
        est = nonlocal_tv(u, rho, domain, profile, eps, method="quadrature")
        assert est.method == "quadrature"
        assert est.error_estimate >= 0.0
        assert abs(est.value - halfplane_tv_expansion(eps)) < 3e-3 + eps ** 2


def test_nonlocal_value_grows_toward_the_limit():
    domain = unit_box(2)
    rho = uniform_density(domain)
    u = coordinate_function(0)
    profile = kernels.indicator()
    values = [
        nonlocal_tv(u, rho, domain, profile, eps, method="quadrature").value
        for eps in (0.32, 0.16, 0.08)
    ]
    assert values[0] < values[1] < values[2] < 4.0 / 3.0


def test_nonlocal_monte_carlo_agrees_with_quadrature():
    domain = unit_box(2)
    rho = uniform_density(domain)
    u = coordinate_function(0)
    profile = kernels.indicator()
    quad = nonlocal_tv(u, rho, domain, profile, 0.16, method="quadrature")
    mc = nonlocal_tv(u, rho, domain, profile, 0.16, method="monte-carlo",
                     samples=200000, seed=5)
    again = nonlocal_tv(u, rho, domain, profile, 0.16, method="monte-carlo",
                        samples=200000, seed=5)
    assert mc.value == again.value
    assert mc.samples == 200000
    assert abs(mc.value - quad.value) < 5.0 * mc.stderr


def test_monte_carlo_requires_a_normalized_density():
    domain = unit_box(2)
    rho = Density(lambda p: 1.0 + p[:, 0], lower=1.0, upper=2.0, normalized=False)
    with pytest.raises(UnsupportedConfigurationError):
        nonlocal_tv(coordinate_function(0), rho, domain, kernels.indicator(), 0.2,
                    method="monte-carlo")


def test_unknown_method_is_rejected():
    domain = unit_box(2)
    with pytest.raises(ValueError):
        nonlocal_tv(coordinate_function(0), uniform_density(domain), domain,
                    kernels.indicator(), 0.2, method="simpson")

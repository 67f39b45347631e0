"""Domains, densities, sampling, and the point cloud container."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pctv import geometry
from pctv.errors import EnvelopeError
from pctv.geometry import (
    Box,
    BoxUnion,
    ConvexPolygon,
    Density,
    PointCloud,
    affine_density,
    dumbbell,
    grid_points,
    integrate_density,
    lipschitz_approx,
    sample_iid,
    uniform_density,
    unit_box,
)


def test_box_volume_and_moment():
    box = Box([0.0, 0.0], [2.0, 3.0])
    assert box.volume() == 6.0
    assert box.moment(0) == 6.0
    assert box.moment(1) == 9.0
    assert box.dimension == 2


def test_box_contains_is_closed():
    box = unit_box(2)
    inside = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
    outside = np.array([[1.0 + 1e-12, 0.5], [-0.1, 0.5]])
    assert geometry.Box.contains(box, inside).all()
    assert not box.contains(outside).any()


def test_degenerate_box_is_rejected():
    with pytest.raises(ValueError):
        Box([0.0, 0.0], [1.0, 0.0])


def test_dumbbell_volume_and_moment_are_exact():
    shape = dumbbell()
    assert shape.volume() == 2.125
    assert_allclose(shape.moment(0), 2.65625, rtol=0, atol=1e-14)
    inner = np.array([[1.25, 0.5], [0.5, 0.5], [2.0, 0.5]])
    outer = np.array([[1.25, 0.2], [1.25, 0.8], [2.6, 0.5]])
    assert shape.contains(inner).all()
    assert not shape.contains(outer).any()


def test_dumbbell_with_custom_neck():
    shape = dumbbell(width=0.5, length=1.0)
    assert shape.volume() == 2.5
    lo, hi = shape.bounding_box()
    assert_allclose(hi - lo, [3.0, 1.0])


def test_overlapping_union_counts_volume_once():
    union = BoxUnion([Box([0.0, 0.0], [1.0, 1.0]), Box([0.5, 0.0], [1.5, 1.0])])
    assert_allclose(union.volume(), 1.5)


def test_disconnected_union_is_rejected():
    with pytest.raises(ValueError):
        BoxUnion([Box([0.0, 0.0], [1.0, 1.0]), Box([2.0, 0.0], [3.0, 1.0])])


def test_corner_contact_does_not_connect():
    with pytest.raises(ValueError):
        BoxUnion([Box([0.0, 0.0], [1.0, 1.0]), Box([1.0, 1.0], [2.0, 2.0])])


def test_triangle_area_and_moment():
    tri = ConvexPolygon([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert_allclose(tri.volume(), 0.5)
    assert_allclose(tri.moment(0), 1.0 / 6.0)
    assert_allclose(tri.moment(1), 1.0 / 6.0)


def test_clockwise_vertices_are_normalized():
    ccw = ConvexPolygon([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]])
    cw = ConvexPolygon([[0.0, 0.0], [0.0, 1.0], [2.0, 1.0], [2.0, 0.0]])
    assert_allclose(ccw.volume(), cw.volume())
    assert_allclose(ccw.volume(), 2.0)


def test_nonconvex_polygon_is_rejected():
    with pytest.raises(ValueError):
        ConvexPolygon([[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [0.0, 2.0]])


def test_density_bounds_are_validated():
    with pytest.raises(ValueError):
        Density(lambda p: np.ones(len(p)), lower=0.0, upper=1.0)
    with pytest.raises(ValueError):
        Density(lambda p: np.ones(len(p)), lower=2.0, upper=1.0)


def test_uniform_density_integrates_to_one():
    for domain, resolution in (
        (unit_box(2), 512),
        (dumbbell(), 512),
        (Box([0.0, 0.0, 0.0], [2.0, 1.0, 1.0]), 48),
    ):
        density = uniform_density(domain)
        assert density.normalized
        assert_allclose(integrate_density(density, domain, resolution), 1.0, rtol=5e-3)


def test_affine_density_normalization_is_exact():
    domain = unit_box(2)
    density = affine_density(domain, axis=0, slope=1.0)
    # midpoint quadrature integrates an affine integrand exactly on a box
    assert_allclose(integrate_density(density, domain), 1.0, rtol=1e-12)


def test_sampling_stays_inside_and_is_reproducible():
    domain = dumbbell()
    density = uniform_density(domain)
    cloud = sample_iid(domain, density, 4000, seed=11)
    again = sample_iid(domain, density, 4000, seed=11)
    other = sample_iid(domain, density, 4000, seed=12)
    assert domain.contains(cloud.points).all()
    assert np.array_equal(cloud.points, again.points)
    assert not np.array_equal(cloud.points, other.points)


def test_sampling_matches_affine_mean():
    domain = unit_box(1)
    density = affine_density(domain, axis=0, slope=1.0)
    cloud = sample_iid(domain, density, 40000, seed=5)
    # E[x] for rho(x) = (1+x)/1.5 on [0,1] is (1/2 + 1/3)/1.5
    assert abs(cloud.points[:, 0].mean() - 5.0 / 9.0) < 0.01


def test_envelope_violation_is_detected():
    domain = unit_box(2)
    spiky = Density(
        lambda p: np.where(p[:, 0] > 0.9, 3.0, 1.0), lower=0.5, upper=2.0,
        normalized=False,
    )
    with pytest.raises(EnvelopeError):
        sample_iid(domain, spiky, 1000, seed=0)


def test_hopeless_acceptance_rate_is_detected():
    domain = unit_box(2)
    flat = Density(
        lambda p: np.ones(len(p)), lower=1.0, upper=1e6, normalized=False
    )
    with pytest.raises(EnvelopeError):
        sample_iid(domain, flat, 1000, seed=0)


def test_point_cloud_csv_roundtrip(tmp_path):
    cloud = sample_iid(unit_box(3), uniform_density(unit_box(3)), 64, seed=2)
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "x0,x1,x2"
    back = PointCloud.from_csv(path)
    assert_allclose(back.points, cloud.points, rtol=0, atol=0)


def test_grid_points_are_cell_centers_in_order():
    pts = grid_points(3, 2)
    assert pts.shape == (9, 2)
    assert_allclose(pts[0], [1.0 / 6.0, 1.0 / 6.0])
    assert_allclose(pts[1], [1.0 / 6.0, 0.5])
    assert_allclose(pts[3], [0.5, 1.0 / 6.0])
    assert_allclose(pts[-1], [5.0 / 6.0, 5.0 / 6.0])


def test_lipschitz_approx_brackets_the_density():
    domain = unit_box(2)
    density = affine_density(domain, axis=0, slope=2.0)
    below = lipschitz_approx(density, domain, k=5.0, side="below")
    above = lipschitz_approx(density, domain, k=5.0, side="above")
    probe = sample_iid(domain, uniform_density(domain), 500, seed=9).points
    rho = density(probe)
    assert (below(probe) <= rho + 1e-12).all()
    assert (above(probe) >= rho - 1e-12).all()
    # the affine density has slope 2/Z < 5, so the 5-Lipschitz envelopes
    # coincide with the density itself
    assert np.max(np.abs(below(probe) - rho)) < 1e-12
    assert np.max(np.abs(above(probe) - rho)) < 1e-12


def test_lipschitz_below_with_small_constant():
    # rho(x) = (1 + x)/1.5 on [0, 1] has slope 2/3; with k = 1/2 < 2/3
    # the inf of rho(y) + k|x-y| sits at y = 0, giving 2/3 + x/2
    domain = unit_box(1)
    density = affine_density(domain, axis=0, slope=1.0)
    below = lipschitz_approx(density, domain, k=0.5, side="below")
    xs = np.linspace(0.0, 1.0, 33)[:, None]
    expected = 2.0 / 3.0 + 0.5 * xs[:, 0]
    assert_allclose(below(xs), expected, rtol=5e-3)


def test_lipschitz_functions_obey_the_constant():
    domain = unit_box(2)
    density = affine_density(domain, axis=1, slope=3.0)
    k = 2.0
    below = lipschitz_approx(density, domain, k=k, side="below")
    rng = np.random.default_rng(21)
    a = rng.uniform(size=(200, 2))
    b = rng.uniform(size=(200, 2))
    gap = np.abs(below(a) - below(b))
    allowed = k * np.linalg.norm(a - b, axis=1) + 1e-9
    assert (gap <= allowed).all()


def test_domain_from_config_shapes():
    assert geometry.domain_from_config({"shape": "unit-box", "dimension": 3}).dimension == 3
    assert geometry.domain_from_config({"shape": "dumbbell"}).volume() == 2.125
    box = geometry.domain_from_config({"shape": "box", "lo": [0, 0], "hi": [2, 1]})
    assert box.volume() == 2.0
    union = geometry.domain_from_config(
        {"shape": "box-union",
         "boxes": [{"lo": [0, 0], "hi": [1, 1]}, {"lo": [1, 0], "hi": [2, 1]}]}
    )
    assert union.volume() == 2.0
    poly = geometry.domain_from_config(
        {"shape": "polygon", "vertices": [[0, 0], [1, 0], [0, 1]]}
    )
    assert_allclose(poly.volume(), 0.5)
    with pytest.raises(ValueError):
        geometry.domain_from_config({"shape": "sphere"})


def test_density_from_config_names():
    domain = unit_box(2)
    uniform = geometry.density_from_config({"name": "uniform"}, domain)
    assert_allclose(uniform(np.array([[0.5, 0.5]])), [1.0])
    affine = geometry.density_from_config({"name": "affine", "slope": 1.0}, domain)
    assert affine.normalized
    with pytest.raises(ValueError):
        geometry.density_from_config({"name": "rings"}, domain)

import json

import numpy as np
import pytest

from billiards.errors import NearTangentRay
from billiards.surface import (
    Ellipsoid,
    GenericImplicit,
    Sphere,
    surface_from_json,
)

from oracles import fd_gradient, random_boundary_launch


def make_generic_ellipsoid(semi_axes):
    """The same body as Ellipsoid but routed through the generic Newton path."""
    w = 1.0 / np.asarray(semi_axes, dtype=float) ** 2
    return GenericImplicit(
        f=lambda x: float(x @ (w * x) - 1.0),
        gradient=lambda x: 2.0 * w * x,
        hessian=lambda x: 2.0 * np.diag(w),
        dimension=len(semi_axes),
        diameter_bound=2.0 * float(np.max(semi_axes)),
    )


@pytest.mark.parametrize("surface", [Sphere(1.3), Ellipsoid([0.8, 1.0, 1.2])])
def test_gradient_matches_finite_differences(surface):
    rng = np.random.default_rng(11)
    for _ in range(5):
        x, _ = random_boundary_launch(surface, rng)
        g = surface.gradient(x)
        g_fd = fd_gradient(surface.eval, x)
        assert np.abs(g - g_fd).max() < 1e-7


def test_hessian_matches_gradient_differences():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(12)
    x, _ = random_boundary_launch(surface, rng)
    h = surface.hessian(x)
    for i in range(3):
        col = fd_gradient(lambda p: float(surface.gradient(p)[i]), x)
        assert np.abs(h[i] - col).max() < 1e-6


@pytest.mark.parametrize("surface", [Sphere(1.0), Ellipsoid([0.5, 1.0, 1.5])])
def test_inward_normal_points_inside(surface):
    rng = np.random.default_rng(4)
    for _ in range(8):
        x, _ = random_boundary_launch(surface, rng)
        n = surface.inward_normal(x)
        assert abs(np.linalg.norm(n) - 1.0) < 1e-12
        assert surface.eval(x + 1e-4 * n) < 0.0


def test_tangent_frame_is_orthonormal_and_tangent():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(5)
    for _ in range(10):
        x, _ = random_boundary_launch(surface, rng)
        frame = surface.tangent_frame(x)
        v = frame.vectors
        assert np.abs(v @ v.T - np.eye(2)).max() < 1e-12
        n = surface.inward_normal(x)
        assert np.abs(v @ n).max() < 1e-12


def test_tangent_frame_deterministic():
    surface = Sphere(1.0)
    x = surface.boundary_point(np.array([0.3, -0.2, 0.9]))
    f1 = surface.tangent_frame(x)
    f2 = surface.tangent_frame(x)
    assert np.array_equal(f1.vectors, f2.vectors)


def test_frame_coords_embed_roundtrip():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(6)
    x, u = random_boundary_launch(surface, rng)
    frame = surface.tangent_frame(x)
    c = frame.coords(u)
    assert np.abs(frame.embed(c) - u).max() < 1e-12


def test_project_tangent_decomposition():
    surface = Sphere(1.0)
    rng = np.random.default_rng(7)
    x, _ = random_boundary_launch(surface, rng)
    n = surface.inward_normal(x)
    frame = surface.tangent_frame(x)
    z = 0.6 * frame.vectors[0] + 0.8 * n
    v, v_hat = surface.project_tangent(x, z)
    assert abs(v_hat - 0.8) < 1e-12
    assert np.abs(v + v_hat * n - z).max() < 1e-12
    with pytest.raises(ValueError):
        surface.project_tangent(x, -n)


def test_sphere_shape_matrix_is_identity_over_radius():
    radius = 1.7
    surface = Sphere(radius)
    rng = np.random.default_rng(8)
    x, _ = random_boundary_launch(surface, rng)
    frame = surface.tangent_frame(x)
    s = surface.shape_matrix(frame)
    assert np.abs(s - np.eye(2) / radius).max() < 1e-12


def test_ellipsoid_principal_curvatures_at_axis_point():
    a1, a2, a3 = 0.3, 1.0, 1.2
    surface = Ellipsoid([a1, a2, a3])
    x = np.array([a1, 0.0, 0.0])
    frame = surface.tangent_frame(x)
    s = surface.shape_matrix(frame)
    got = np.sort(np.linalg.eigvalsh(s))
    want = np.sort([a1 / a2**2, a1 / a3**2])
    assert np.abs(got - want).max() < 1e-12


def test_normal_curvature_positive_on_convex_bodies():
    surface = Ellipsoid([0.6, 1.0, 1.4])
    rng = np.random.default_rng(9)
    for _ in range(10):
        x, u = random_boundary_launch(surface, rng)
        assert surface.normal_curvature(x, u) > 0.0


@pytest.mark.parametrize("surface", [Sphere(0.9), Ellipsoid([0.8, 1.0, 1.2])])
def test_intersect_ray_lands_on_surface(surface):
    rng = np.random.default_rng(10)
    for _ in range(10):
        x, u = random_boundary_launch(surface, rng)
        n = surface.inward_normal(x)
        z = 0.7 * u + np.sqrt(1 - 0.49) * n
        y, length = surface.intersect_ray(x, z)
        assert abs(surface.eval(y)) < 1e-9
        assert abs(length - np.linalg.norm(y - x)) < 1e-12
        assert length > 1e-3


def test_generic_newton_matches_closed_form_intersection():
    axes = [0.8, 1.0, 1.2]
    quadric = Ellipsoid(axes)
    generic = make_generic_ellipsoid(axes)
    rng = np.random.default_rng(13)
    for _ in range(10):
        x, u = random_boundary_launch(quadric, rng)
        n = quadric.inward_normal(x)
        z = 0.5 * u + np.sqrt(0.75) * n
        y_closed, l_closed = quadric.intersect_ray(x, z)
        y_newton, l_newton = generic.intersect_ray(x, z)
        assert np.abs(y_closed - y_newton).max() < 1e-9
        assert abs(l_closed - l_newton) < 1e-9


def test_intersect_ray_rejects_tangent_and_outward():
    surface = Sphere(1.0)
    x = np.array([1.0, 0.0, 0.0])
    with pytest.raises(NearTangentRay):
        surface.intersect_ray(x, np.array([0.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        surface.intersect_ray(x, np.array([1.0, 0.0, 0.0]))


def test_boundary_point_and_project_point():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    p = surface.boundary_point(np.array([1.0, 2.0, -0.5]))
    assert abs(surface.eval(p)) < 1e-12
    q = surface.project_point(p + 0.05 * surface.inward_normal(p))
    assert abs(surface.eval(q)) < 1e-12


def test_surface_from_json_roundtrip():
    sphere = surface_from_json({"kind": "sphere", "radius": 2.0, "dimension": 4})
    assert isinstance(sphere, Sphere)
    assert sphere.radius == 2.0 and sphere.dimension == 4

    text = json.dumps({"kind": "ellipsoid", "semi_axes": [0.8, 1.0, 1.2]})
    ell = surface_from_json(text)
    assert isinstance(ell, Ellipsoid)
    assert np.array_equal(ell.semi_axes, [0.8, 1.0, 1.2])

    rebuilt = surface_from_json(ell.describe())
    assert np.array_equal(rebuilt.semi_axes, ell.semi_axes)

    with pytest.raises(ValueError):
        surface_from_json({"kind": "torus"})


def test_constructor_validation():
    with pytest.raises(ValueError):
        Sphere(-1.0)
    with pytest.raises(ValueError):
        Sphere(1.0, dimension=1)
    with pytest.raises(ValueError):
        Ellipsoid([1.0])
    with pytest.raises(ValueError):
        Ellipsoid([1.0, -2.0])

import csv

import numpy as np
import pytest

from billiards.dynamics import (
    billiard_step,
    orbit,
    orbit_to_csv,
    phase_point,
    reflect,
    reversed_start,
)
from billiards.errors import NearTangentRay
from billiards.surface import Ellipsoid, Sphere

from oracles import random_boundary_launch

X0 = np.array([1.0, 0.0, 0.0])
U0 = np.array([0.0, 1.0, 0.0])


def test_phase_point_angle_and_v_norm_agree():
    surface = Sphere(1.0)
    alpha = 0.7
    p1 = phase_point(surface, X0, U0, angle=alpha)
    p2 = phase_point(surface, X0, U0, v_norm=np.cos(alpha))
    assert np.abs(p1.v - p2.v).max() < 1e-12
    assert abs(p1.v_hat - p2.v_hat) < 1e-12
    assert abs(p1.speed - np.cos(alpha)) < 1e-12


def test_phase_point_requires_exactly_one_parameter():
    surface = Sphere(1.0)
    with pytest.raises(ValueError):
        phase_point(surface, X0, U0)
    with pytest.raises(ValueError):
        phase_point(surface, X0, U0, angle=0.5, v_norm=0.5)
    with pytest.raises(ValueError):
        phase_point(surface, X0, U0, angle=2.0)
    with pytest.raises(ValueError):
        phase_point(surface, X0, U0, v_norm=1.0)


def test_phase_point_normal_incidence():
    surface = Sphere(1.0)
    p = phase_point(surface, X0, U0, angle=np.pi / 2)
    assert p.speed == 0.0
    assert p.v_hat == 1.0


def test_phase_point_rejects_normal_direction():
    surface = Sphere(1.0)
    with pytest.raises(ValueError):
        phase_point(surface, X0, X0, angle=0.5)


def test_reflection_law():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(21)
    for _ in range(8):
        y, u = random_boundary_launch(surface, rng)
        n = surface.inward_normal(y)
        incoming = 0.6 * u - 0.8 * n  # hitting the wall
        outgoing = reflect(surface, y, incoming)
        t_in = incoming - (incoming @ n) * n
        t_out = outgoing - (outgoing @ n) * n
        assert np.abs(t_in - t_out).max() < 1e-12
        assert abs((incoming @ n) + (outgoing @ n)) < 1e-12


def test_billiard_step_consistency():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(22)
    x, u = random_boundary_launch(surface, rng)
    p = phase_point(surface, x, u, v_norm=0.55)
    q, chord = billiard_step(surface, p)
    assert abs(surface.eval(chord.y)) < 1e-9
    z = (chord.y - chord.x) / chord.length
    n_x = surface.inward_normal(chord.x)
    n_y = surface.inward_normal(chord.y)
    assert np.abs(chord.v + chord.v_hat * n_x - z).max() < 1e-10
    assert np.abs(chord.w - (z - (z @ n_y) * n_y)).max() < 1e-10
    assert abs(chord.w_hat + (z @ n_y)) < 1e-12
    assert q.v_hat == chord.w_hat
    assert np.abs(q.v - chord.w).max() == 0.0


def test_sphere_orbit_is_regular_polygon():
    surface = Sphere(1.0)
    alpha = np.pi / 5
    p = phase_point(surface, X0, U0, angle=alpha)
    segment = orbit(surface, p, 9)
    lengths = np.array([c.length for c in segment.chords])
    assert np.abs(lengths - 2.0 * np.sin(alpha)).max() < 1e-12
    assert np.abs(segment.sines - np.sin(alpha)).max() < 1e-12
    # stays in the plane spanned by the start point and direction
    assert np.abs(segment.points[:, 2]).max() < 1e-12
    assert segment.n_bounces == 9
    assert segment.interior_count == 8
    assert np.abs(segment.angles - alpha).max() < 1e-12


def test_orbit_reversibility():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(23)
    x, u = random_boundary_launch(surface, rng)
    p = phase_point(surface, x, u, v_norm=0.6)
    forward = orbit(surface, p, 6)
    back = orbit(surface, reversed_start(forward), 6)
    assert np.abs(back.points - forward.points[::-1]).max() < 1e-8


def test_orbit_grazing_reports_bounce_index():
    surface = Sphere(1.0)
    p = phase_point(surface, X0, U0, v_norm=0.9999999999999)
    with pytest.raises(NearTangentRay) as err:
        orbit(surface, p, 3)
    assert err.value.index == 0


def test_orbit_to_csv_layout(tmp_path):
    surface = Sphere(1.0)
    p = phase_point(surface, X0, U0, angle=0.9)
    segment = orbit(surface, p, 4)
    path = tmp_path / "orbit.csv"
    orbit_to_csv(segment, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "x1", "x2", "x3", "phi", "chord_length"]
    assert len(rows) == 6  # header + 5 vertices
    assert rows[-1][-1] == ""  # no chord leaves the final vertex
    first = np.array([float(v) for v in rows[1][1:4]])
    assert np.abs(first - segment.points[0]).max() == 0.0
    assert float(rows[1][5]) == segment.chords[0].length

import numpy as np
import pytest

from billiards.dynamics import billiard_step, phase_point
from billiards.errors import DegenerateChord
from billiards.surface import Ellipsoid, Sphere
from billiards.variation import ChordOperators, chord_operators

from oracles import chord_grad_x, chord_grad_y, fd_chord_operators, random_boundary_launch


def random_chord(surface, rng, v_norm=None):
    x, u = random_boundary_launch(surface, rng)
    if v_norm is None:
        v_norm = rng.uniform(0.2, 0.9)
    p = phase_point(surface, x, u, v_norm=float(v_norm))
    _, chord = billiard_step(surface, p)
    return chord


def test_first_derivatives_are_minus_v_and_w():
    """The chord-length endpoint gradients equal -v and w."""
    surface = Ellipsoid([0.7, 1.0, 1.3])
    rng = np.random.default_rng(31)
    for _ in range(6):
        chord = random_chord(surface, rng)
        gx = chord_grad_x(surface, chord.x, chord.y)
        gy = chord_grad_y(surface, chord.x, chord.y)
        assert np.abs(gx + chord.v).max() < 1e-12
        assert np.abs(gy - chord.w).max() < 1e-12


@pytest.mark.parametrize("surface", [Sphere(1.2), Ellipsoid([0.8, 1.0, 1.2])])
def test_operators_match_finite_differences(surface):
    rng = np.random.default_rng(32)
    for _ in range(10):
        chord = random_chord(surface, rng)
        fx = surface.tangent_frame(chord.x)
        fy = surface.tangent_frame(chord.y)
        ops = chord_operators(surface, chord, fx, fy)
        f11, f22, f12, f21 = fd_chord_operators(surface, chord.x, chord.y, fx, fy)
        scale = max(np.abs(ops.l11).max(), 1e-12)
        assert np.abs(ops.l11 - f11).max() / scale < 1e-5
        assert np.abs(ops.l22 - f22).max() / max(np.abs(ops.l22).max(), 1e-12) < 1e-5
        assert np.abs(ops.l12 - f12).max() / max(np.abs(ops.l12).max(), 1e-12) < 1e-5
        assert np.abs(ops.l21 - f21).max() / max(np.abs(ops.l21).max(), 1e-12) < 1e-5


def test_adjointness_and_symmetry():
    surface = Ellipsoid([0.8, 1.0, 1.2])
    rng = np.random.default_rng(33)
    for _ in range(10):
        chord = random_chord(surface, rng)
        fx = surface.tangent_frame(chord.x)
        fy = surface.tangent_frame(chord.y)
        ops = chord_operators(surface, chord, fx, fy)
        assert np.abs(ops.l12.T - ops.l21).max() < 1e-14
        assert np.abs(ops.l11 - ops.l11.T).max() < 1e-14
        assert np.abs(ops.l22 - ops.l22.T).max() < 1e-14


def test_sphere_transversal_entries_match_closed_form():
    """On the unit sphere, the l11 block along the orbit-plane normal is known."""
    surface = Sphere(1.0)
    alpha = 0.8
    x = np.array([1.0, 0.0, 0.0])
    p = phase_point(surface, x, np.array([0.0, 1.0, 0.0]), angle=alpha)
    _, chord = billiard_step(surface, p)
    fx = surface.tangent_frame(chord.x)
    fy = surface.tangent_frame(chord.y)
    ops = chord_operators(surface, chord, fx, fy)
    e = np.array([0.0, 0.0, 1.0])
    cx = fx.coords(e)
    # each endpoint contributes half of the diagonal a = cos(2a)/sin(a)
    want = 0.5 * np.cos(2 * alpha) / np.sin(alpha)
    assert abs(cx @ ops.l11 @ cx - want) < 1e-12
    cy = fy.coords(e)
    assert abs(cy @ ops.l22 @ cy - want) < 1e-12
    assert abs(cx @ ops.l12 @ cy - (-0.5 / np.sin(alpha))) < 1e-12


def test_degenerate_chord_rejected():
    surface = Sphere(1.0)
    rng = np.random.default_rng(34)
    chord = random_chord(surface, rng)
    broken = type(chord)(
        x=chord.x, y=chord.x, length=0.0,
        v=chord.v, w=chord.w, v_hat=chord.v_hat, w_hat=chord.w_hat,
    )
    fx = surface.tangent_frame(chord.x)
    with pytest.raises(DegenerateChord):
        chord_operators(surface, broken, fx, fx)


def test_min_singular_value():
    singular = ChordOperators(
        l11=np.eye(2), l22=np.eye(2),
        l12=np.array([[1.0, 0.0], [0.0, 0.0]]),
        l21=np.array([[1.0, 0.0], [0.0, 0.0]]),
        frame_x=None, frame_y=None,
    )
    assert singular.min_singular == 0.0

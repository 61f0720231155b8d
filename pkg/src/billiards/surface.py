"""Strictly convex implicit surfaces and their first/second order geometry.

A surface is the zero set of a smooth function F with F < 0 inside the
body.  All billiard constructions only need F, its gradient and its
Hessian; spheres and ellipsoids carry closed forms, anything else can be
wrapped as a :class:`GenericImplicit`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NearTangentRay

# Absolute tolerances, tuned for desk-scale bodies (coordinates of order one).
ON_SURFACE_TOL = 1e-8    # |F(x)| accepted as "x lies on the surface"
RAY_ROOT_TOL = 1e-10     # |F(y)| required of a ray intersection
RAY_T_MIN = 1e-7         # smallest ray parameter the bracketing step resolves
GRAZING_SIN = 1e-6       # sin(angle) below which a ray counts as tangent
OUTWARD_TOL = 1e-10      # tolerated outward normal component of a direction


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal basis of the tangent space at a surface point.

    ``vectors`` has shape (d-1, d); row i is the i-th basis vector.
    """

    base_point: np.ndarray
    vectors: np.ndarray

    def coords(self, xi: np.ndarray) -> np.ndarray:
        """Frame coordinates of an ambient tangent vector."""
        return self.vectors @ np.asarray(xi, dtype=float)

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Ambient vector with the given frame coordinates."""
        return self.vectors.T @ np.asarray(coords, dtype=float)


class Surface:
    """Base class: implicit hypersurface F = 0 with F < 0 inside."""

    kind = "generic"
    dimension: int
    diameter_bound: float

    # -- scalar field -------------------------------------------------------

    def eval(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> float:
        return self.eval(x)

    def is_on_surface(self, x: np.ndarray, tol: float = ON_SURFACE_TOL) -> bool:
        return abs(self.eval(x)) < tol

    def describe(self) -> dict:
        """JSON-ready summary of the surface (kind plus its parameters)."""
        return {"kind": self.kind, "dimension": self.dimension}

    # -- first order --------------------------------------------------------

    def inward_normal(self, x: np.ndarray) -> np.ndarray:
        """Unit normal pointing into the body (-grad F / |grad F|)."""
        g = self.gradient(x)
        ng = float(np.linalg.norm(g))
        if not np.isfinite(ng) or ng < 1e-14:
            raise ValueError("degenerate surface point: vanishing gradient")
        return -g / ng

    def project_tangent(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, float]:
        """Split a unit direction z into tangential part v and normal size v_hat.

        z = v + v_hat * n with n the inward normal; rejects directions that
        point out of the body.
        """
        n = self.inward_normal(x)
        z = np.asarray(z, dtype=float)
        zn = float(z @ n)
        if zn < -OUTWARD_TOL:
            raise ValueError("direction points out of the body")
        v = z - zn * n
        return v, max(zn, 0.0)

    def tangent_frame(self, x: np.ndarray) -> TangentFrame:
        """Deterministic orthonormal tangent basis at x.

        Drops the ambient axis most parallel to the normal (lowest index on
        ties) and Gram-Schmidts the remaining axes against the normal.
        """
        x = np.asarray(x, dtype=float)
        n = self.inward_normal(x)
        d = self.dimension
        drop = int(np.argmax(np.abs(n)))
        vecs = []
        for i in range(d):
            if i == drop:
                continue
            e = np.zeros(d)
            e[i] = 1.0
            e = e - n[i] * n
            for u in vecs:
                e = e - (e @ u) * u
            e = e / np.linalg.norm(e)
            vecs.append(e)
        return TangentFrame(base_point=x.copy(), vectors=np.array(vecs))

    # -- second order -------------------------------------------------------

    def shape_operator(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """S(xi) = -D_xi n for the inward normal n; tangent in, tangent out.

        Positive definite on tangent vectors for a strictly convex body.
        """
        g = self.gradient(x)
        ng = np.linalg.norm(g)
        nu = g / ng
        h = self.hessian(x) @ np.asarray(xi, dtype=float)
        h = h - (h @ nu) * nu
        return h / ng

    def shape_matrix(self, frame: TangentFrame) -> np.ndarray:
        """Matrix of the shape operator in a tangent frame (symmetric)."""
        x = frame.base_point
        ng = np.linalg.norm(self.gradient(x))
        m = frame.vectors @ self.hessian(x) @ frame.vectors.T / ng
        return 0.5 * (m + m.T)

    def normal_curvature(self, x: np.ndarray, xi: np.ndarray) -> float:
        """Second fundamental form B(xi, xi) = <S(xi), xi>."""
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.shape_operator(x, xi))

    # -- rays ----------------------------------------------------------------

    def intersect_ray(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, float]:
        """Second intersection of the ray x + t z with the surface.

        x must lie on the surface and z must point strictly inward.  Returns
        (y, chord_length).  Implemented by safeguarded Newton on
        t -> F(x + t z) inside the bracket [RAY_T_MIN, 2 * diameter_bound];
        quadric subclasses override this with the exact root.
        """
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        n = self.inward_normal(x)
        if float(z @ n) < 0.0:
            raise ValueError("ray direction must point into the body")
        lo = RAY_T_MIN
        hi = 2.0 * self.diameter_bound
        if self.eval(x + lo * z) >= 0.0:
            raise NearTangentRay("bracketing step cannot separate the ray from its start")
        f_hi = self.eval(x + hi * z)
        if f_hi <= 0.0:
            raise RuntimeError("diameter_bound does not enclose the body")
        t = 0.5 * (lo + hi)
        for _ in range(200):
            f = self.eval(x + t * z)
            if abs(f) < RAY_ROOT_TOL:
                break
            if f > 0.0:
                hi = t
            else:
                lo = t
            df = float(self.gradient(x + t * z) @ z)
            t_newton = t - f / df if df != 0.0 else lo - 1.0
            if lo < t_newton < hi:
                t = t_newton
            else:
                t = 0.5 * (lo + hi)
        else:
            raise RuntimeError("ray intersection did not converge")
        y = x + t * z
        return y, float(np.linalg.norm(y - x))

    def boundary_point(self, u: np.ndarray) -> np.ndarray:
        """Boundary point along direction u from the origin (origin inside)."""
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u)
        if self.eval(np.zeros(self.dimension)) >= 0.0:
            raise ValueError("origin is not interior to the body")
        lo, hi = 0.0, self.diameter_bound
        while self.eval(hi * u) <= 0.0:
            hi *= 2.0
        for _ in range(200):
            t = 0.5 * (lo + hi)
            f = self.eval(t * u)
            if abs(f) < RAY_ROOT_TOL:
                return t * u
            if f > 0.0:
                hi = t
            else:
                lo = t
        return 0.5 * (lo + hi) * u

    def project_point(self, p: np.ndarray, max_iter: int = 60) -> np.ndarray:
        """Project a nearby ambient point onto the surface (Newton along grad F)."""
        p = np.asarray(p, dtype=float).copy()
        for _ in range(max_iter):
            f = self.eval(p)
            if abs(f) < 1e-13:
                return p
            g = self.gradient(p)
            p = p - f * g / float(g @ g)
        raise RuntimeError("surface projection did not converge")


class Sphere(Surface):
    """Sphere of given radius centered at the origin; F(x) = |x|^2 - r^2."""

    kind = "sphere"

    def __init__(self, radius: float, dimension: int = 3):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if dimension < 2:
            raise ValueError("dimension must be at least 2")
        self.radius = float(radius)
        self.dimension = int(dimension)
        self.diameter_bound = 2.0 * self.radius

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ x - self.radius**2)

    def gradient(self, x):
        return 2.0 * np.asarray(x, dtype=float)

    def hessian(self, x):
        return 2.0 * np.eye(self.dimension)

    def intersect_ray(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if float(x @ z) > 0.0:
            raise ValueError("ray direction must point into the body")
        t = -2.0 * float(x @ z) / float(z @ z)
        if t <= RAY_T_MIN:
            raise NearTangentRay("bracketing step cannot separate the ray from its start")
        y = x + t * z
        return y, float(np.linalg.norm(y - x))

    def boundary_point(self, u):
        u = np.asarray(u, dtype=float)
        return self.radius * u / np.linalg.norm(u)

    def describe(self):
        return {"kind": self.kind, "radius": self.radius, "dimension": self.dimension}


class Ellipsoid(Surface):
    """Axis-aligned ellipsoid; F(x) = sum x_i^2 / a_i^2 - 1."""

    kind = "ellipsoid"

    def __init__(self, semi_axes):
        a = np.asarray(semi_axes, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("semi_axes must be a vector of length >= 2")
        if np.any(a <= 0):
            raise ValueError("semi-axes must be positive")
        self.semi_axes = a
        self.weights = 1.0 / a**2
        self.dimension = int(a.size)
        self.diameter_bound = 2.0 * float(a.max())

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ (self.weights * x) - 1.0)

    def gradient(self, x):
        return 2.0 * self.weights * np.asarray(x, dtype=float)

    def hessian(self, x):
        return 2.0 * np.diag(self.weights)

    def intersect_ray(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        wz = self.weights * z
        if float(x @ wz) > 0.0:
            raise ValueError("ray direction must point into the body")
        t = -2.0 * float(x @ wz) / float(z @ wz)
        if t <= RAY_T_MIN:
            raise NearTangentRay("bracketing step cannot separate the ray from its start")
        y = x + t * z
        return y, float(np.linalg.norm(y - x))

    def boundary_point(self, u):
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u)
        return u / np.sqrt(float(u @ (self.weights * u)))

    def describe(self):
        return {"kind": self.kind, "semi_axes": self.semi_axes.tolist()}


class GenericImplicit(Surface):
    """Surface from user-supplied F, grad F, Hess F callables.

    The body must be strictly convex and contain the origin; diameter_bound
    must genuinely bound the diameter for ray bracketing to work.
    """

    kind = "generic"

    def __init__(
        self,
        f: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        hessian: Callable[[np.ndarray], np.ndarray],
        dimension: int,
        diameter_bound: float,
    ):
        if dimension < 2:
            raise ValueError("dimension must be at least 2")
        if diameter_bound <= 0:
            raise ValueError("diameter_bound must be positive")
        self._f = f
        self._grad = gradient
        self._hess = hessian
        self.dimension = int(dimension)
        self.diameter_bound = float(diameter_bound)

    def eval(self, x):
        return float(self._f(np.asarray(x, dtype=float)))

    def gradient(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def hessian(self, x):
        return np.asarray(self._hess(np.asarray(x, dtype=float)), dtype=float)


def surface_from_json(spec) -> Surface:
    """Build a surface from a JSON document or an already-parsed mapping.

    Supported kinds: {"kind": "sphere", "radius": r[, "dimension": d]} and
    {"kind": "ellipsoid", "semi_axes": [a1, ...]}.
    """
    if isinstance(spec, (str, bytes)):
        spec = json.loads(spec)
    if not isinstance(spec, dict):
        raise ValueError("surface spec must be a JSON object")
    kind = spec.get("kind")
    if kind == "sphere":
        if "radius" not in spec:
            raise ValueError("sphere spec requires a radius")
        return Sphere(spec["radius"], dimension=int(spec.get("dimension", 3)))
    if kind == "ellipsoid":
        if "semi_axes" not in spec:
            raise ValueError("ellipsoid spec requires semi_axes")
        return Ellipsoid(spec["semi_axes"])
    raise ValueError(f"unknown surface kind: {kind}")

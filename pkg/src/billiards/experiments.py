"""Reproducible numerical experiments with machine-checkable reports.

Each experiment builds orbits, assembles second-variation data, runs a
fixed list of checks, and returns an ExperimentReport.  Reports serialize
to JSON without timestamps so identical inputs give identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import PhasePoint, orbit, orbit_to_csv, phase_point
from .surface import Ellipsoid, Sphere, Surface
from .variation import (
    INDEFINITE,
    MAXIMIZING,
    NEG_DEF,
    assemble_form,
    definiteness,
    mixed_block,
    one_bounce_matrix,
    restrict_form,
)

EQUATOR_GRID = 512  # sampling resolution for curvature extrema


@dataclass
class Check:
    name: str
    passed: bool
    observed: float | None = None
    bound: float | None = None
    detail: str = ""


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    checks: list[Check] = field(default_factory=list)
    observations: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, observed=None, bound=None, detail: str = "") -> None:
        self.checks.append(
            Check(
                name=name,
                passed=bool(passed),
                observed=None if observed is None else float(observed),
                bound=None if bound is None else float(bound),
                detail=detail,
            )
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "parameters": _jsonable(self.parameters),
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "observed": c.observed,
                    "bound": c.bound,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
            "observations": _jsonable(self.observations),
            "artifacts": list(self.artifacts),
        }

    def write(self, output_dir) -> Path:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.report.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# closed-form tridiagonal helpers


def _toeplitz_tridiag(a: float, b: float, n: int) -> np.ndarray:
    m = a * np.eye(n)
    idx = np.arange(n - 1)
    m[idx, idx + 1] = b
    m[idx + 1, idx] = b
    return m


def _tridiag_eigenvalues(a: float, b: float, n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    return np.sort(a + 2.0 * b * np.cos(k * np.pi / (n + 1)))


# ---------------------------------------------------------------------------
# sphere regression report


def sphere_report(alpha: float, n_max: int, output_dir=None) -> ExperimentReport:
    """Compare sphere orbit forms against their closed-form tridiagonals.

    A planar polygonal orbit at reflection angle alpha on the unit sphere is
    generated, the second variation is assembled over up to n_max interior
    vertices, and its restrictions to the orbit-plane normal (transversal)
    and the chord directions (longitudinal) are compared entrywise with the
    constant tridiagonal matrices those restrictions are known to equal.
    The first segment length whose form stops being negative semidefinite
    is matched against the value the transversal spectrum predicts.
    """
    if not 0.0 < alpha <= np.pi / 2.0 + 1e-12:
        raise ValueError("alpha must lie in (0, pi/2]")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    surface = Sphere(1.0, dimension=3)
    x0 = np.array([1.0, 0.0, 0.0])
    u = np.array([0.0, 1.0, 0.0])
    p = phase_point(surface, x0, u, angle=alpha)
    segment = orbit(surface, p, n_max + 1)
    full = assemble_form(surface, segment)
    report = ExperimentReport(
        name="sphere-forms",
        parameters={"alpha": float(alpha), "n_max": int(n_max), "radius": 1.0},
    )

    sin_a = np.sin(alpha)
    a_t = np.cos(2.0 * alpha) / sin_a
    b_t = -1.0 / (2.0 * sin_a)
    normal_incidence = p.speed < 1e-9

    # transversal family: the constant normal of the orbit plane
    e = np.array([0.0, 0.0, 1.0])
    trans = restrict_form(full, [e] * n_max)
    err_t = float(np.abs(trans - _toeplitz_tridiag(a_t, b_t, n_max)).max())
    report.add("transversal-matches-closed-form", err_t < 1e-8, observed=err_t, bound=1e-8)

    eig_err = 0.0
    for n in range(1, n_max + 1):
        got = np.sort(np.linalg.eigvalsh(trans[:n, :n]))
        eig_err = max(eig_err, float(np.abs(got - _tridiag_eigenvalues(a_t, b_t, n)).max()))
    report.add("transversal-spectrum-matches", eig_err < 1e-8, observed=eig_err, bound=1e-8)

    if normal_incidence:
        worst = max(float(np.linalg.norm(c.v)) for c in segment.chords)
        report.add("normal-incidence-chords", worst < 1e-9, observed=worst, bound=1e-9,
                   detail="diameter orbit: every chord meets the sphere at right angles")
    else:
        a_l = -sin_a
        b_l = 0.5 * sin_a
        tangents = [segment.chords[k].v / np.linalg.norm(segment.chords[k].v) for k in range(1, n_max + 1)]
        longi = restrict_form(full, tangents)
        err_l = float(np.abs(longi - _toeplitz_tridiag(a_l, b_l, n_max)).max())
        report.add("longitudinal-matches-closed-form", err_l < 1e-8, observed=err_l, bound=1e-8)

    # nested principal blocks give the forms of every shorter segment
    tol = 1e-9 * float(np.abs(full.matrix).max())
    s = full.block_size
    first_numeric = None
    for n in range(1, n_max + 1):
        rep = definiteness(full.matrix[: n * s, : n * s], tol=tol)
        if first_numeric is None and not rep.is_maximizing:
            first_numeric = n
    first_analytic = None
    for n in range(1, n_max + 1):
        top = a_t + 2.0 * b_t * np.cos(n * np.pi / (n + 1))
        if top > 1e-12:
            first_analytic = n
            break
    report.add(
        "first-nonmaximizing-length-matches",
        first_numeric == first_analytic,
        observed=None if first_numeric is None else first_numeric,
        bound=None if first_analytic is None else first_analytic,
        detail="None means every length up to n_max stays negative semidefinite",
    )

    report.observations = {
        "chord_length": float(segment.chords[0].length),
        "transversal_diagonal": a_t,
        "transversal_offdiagonal": b_t,
        "first_nonmaximizing_numeric": first_numeric,
        "first_nonmaximizing_analytic": first_analytic,
        "normal_incidence": bool(normal_incidence),
    }
    if output_dir is not None:
        csv_path = Path(output_dir)
        csv_path.mkdir(parents=True, exist_ok=True)
        orbit_to_csv(segment, csv_path / "sphere-orbit.csv")
        report.artifacts.append("sphere-orbit.csv")
        report.write(output_dir)
    return report


# ---------------------------------------------------------------------------
# flat-point positivity on an ellipsoid


def _orthocomplement(q: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the subspace orthogonal to q."""
    q = q / np.linalg.norm(q)
    _, _, vt = np.linalg.svd(q[None, :])
    return vt[1:].T


def _bounce_through(surface: Surface, x, u, phi: float):
    """Two auxiliary vertices making (x_prev, x, x_next) a single bounce."""
    n = surface.inward_normal(x)
    z_out = np.cos(phi) * u + np.sin(phi) * n
    z_back = -np.cos(phi) * u + np.sin(phi) * n
    x_next, _ = surface.intersect_ray(x, z_out)
    x_prev, _ = surface.intersect_ray(x, z_back)
    return x_prev, x_next


def ellipsoid_flat_point_check(
    a1: float,
    a2: float,
    a3: float,
    samples: int = 200,
    seed: int = 42,
    output_dir=None,
) -> ExperimentReport:
    """Probe transversal positivity of single bounces at a flattest point.

    At the axis point (a1, 0, 0) of the ellipsoid the largest principal
    curvature is k_max = a1 / min(a2, a3)^2.  When k_max * D < 1 (D the
    largest diameter), every bounce there has its one-bounce form strictly
    positive on the orthocomplement of the chord direction, with the
    explicit floor 2/D - 2 k_max sin(phi).  The experiment samples random
    bounces and checks the floor sample by sample and globally.
    """
    if min(a1, a2, a3) <= 0:
        raise ValueError("semi-axes must be positive")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    surface = Ellipsoid([a1, a2, a3])
    apex = np.array([a1, 0.0, 0.0])
    k_max = a1 / min(a2, a3) ** 2
    diameter = 2.0 * max(a1, a2, a3)
    floor_global = 2.0 / diameter - 2.0 * k_max

    report = ExperimentReport(
        name="ellipsoid-flat-point",
        parameters={
            "semi_axes": [float(a1), float(a2), float(a3)],
            "samples": int(samples),
            "seed": int(seed),
        },
    )
    report.add(
        "flatness-condition",
        k_max * diameter < 1.0,
        observed=k_max * diameter,
        bound=1.0,
        detail="largest curvature at the probe point times the diameter",
    )

    rng = np.random.default_rng(seed)
    frame = surface.tangent_frame(apex)
    worst_margin = np.inf
    worst_value = np.inf
    per_sample_ok = True
    for _ in range(samples):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        u = np.cos(theta) * frame.vectors[0] + np.sin(theta) * frame.vectors[1]
        phi = rng.uniform(0.05, np.pi / 2.0 - 0.05)
        x_prev, x_next = _bounce_through(surface, apex, u, phi)
        m = one_bounce_matrix(surface, x_prev, apex, x_next, frame)
        basis = _orthocomplement(frame.coords(u))
        min_eig = float(np.linalg.eigvalsh(basis.T @ m @ basis).min())
        bound = 2.0 / diameter - 2.0 * k_max * np.sin(phi)
        margin = min_eig - bound
        worst_margin = min(worst_margin, margin)
        worst_value = min(worst_value, min_eig)
        if margin < -1e-9:
            per_sample_ok = False
    report.add(
        "per-sample-floor",
        per_sample_ok,
        observed=worst_margin,
        bound=0.0,
        detail="smallest transversal eigenvalue minus 2/D - 2 k_max sin(phi)",
    )
    report.add(
        "global-floor",
        worst_value >= floor_global - 1e-9,
        observed=worst_value,
        bound=floor_global,
    )
    report.observations = {
        "k_max": k_max,
        "diameter": diameter,
        "global_floor": floor_global,
        "min_transversal_eigenvalue": worst_value,
    }
    if output_dir is not None:
        report.write(output_dir)
    return report


# ---------------------------------------------------------------------------
# reflection-angle threshold for the one-bounce sign pattern


def angle_threshold_estimate(
    surface: Surface,
    angle_grid: int = 64,
    point_samples: int = 8,
    seed: int = 42,
    output_dir=None,
) -> ExperimentReport:
    """Estimate the largest angle keeping the one-bounce sign pattern.

    The pattern at reflection angle phi: the one-bounce form is positive
    definite transversally (on the orthocomplement of the chord direction)
    and negative along the chord direction.  Angles phi_j = j (pi/2) /
    angle_grid are swept from steep to shallow over sampled bounces; the
    estimate is the largest grid angle below the first failure.  On the
    unit sphere the pattern breaks exactly at pi/4.
    """
    if angle_grid < 8:
        raise ValueError("angle_grid must be at least 8")
    if point_samples < 1:
        raise ValueError("point_samples must be at least 1")
    rng = np.random.default_rng(seed)
    d = surface.dimension
    probes = []
    for _ in range(point_samples):
        raw = rng.normal(size=d)
        x = surface.boundary_point(raw / np.linalg.norm(raw))
        frame = surface.tangent_frame(x)
        for _ in range(3):
            c = rng.normal(size=d - 1)
            u = frame.embed(c / np.linalg.norm(c))
            probes.append((x, u, frame))

    step = (np.pi / 2.0) / angle_grid
    first_fail = None
    for j in range(1, angle_grid):
        phi = j * step
        ok = True
        for x, u, frame in probes:
            x_prev, x_next = _bounce_through(surface, x, u, phi)
            m = one_bounce_matrix(surface, x_prev, x, x_next, frame)
            q = frame.coords(u)
            basis = _orthocomplement(q)
            trans_min = float(np.linalg.eigvalsh(basis.T @ m @ basis).min())
            longi = float(q @ m @ q)
            if not (trans_min > 0.0 and longi < 0.0):
                ok = False
                break
        if not ok:
            first_fail = j
            break
    if first_fail is None:
        threshold = (angle_grid - 1) * step
    else:
        threshold = (first_fail - 1) * step

    report = ExperimentReport(
        name="angle-threshold",
        parameters={
            "angle_grid": int(angle_grid),
            "point_samples": int(point_samples),
            "seed": int(seed),
            "surface": surface.describe(),
        },
    )
    report.add(
        "threshold-at-most-quarter-pi-plus-step",
        threshold <= np.pi / 4.0 + step + 1e-12,
        observed=threshold,
        bound=np.pi / 4.0 + step,
        detail="the sphere attains pi/4; other bodies can only break earlier",
    )
    report.add(
        "threshold-found",
        threshold > 0.0,
        observed=threshold,
        bound=0.0,
        detail="the pattern must hold at the steepest sampled angles",
    )
    report.observations = {
        "threshold": float(threshold),
        "grid_step": float(step),
        "first_failing_angle": None if first_fail is None else float(first_fail * step),
    }
    if output_dir is not None:
        report.write(output_dir)
    return report


# ---------------------------------------------------------------------------
# planar orbits lifted into a symmetric ellipsoid


@dataclass
class CurvatureBounds:
    planar_max: float        # largest curvature of the cross-section ellipse
    transverse_min: float    # smallest vertical normal curvature on the equator
    min_sine: float          # smallest reflection sine along the orbit
    diag_bound: float        # K1 / C1 - 2 K2
    offdiag_bound: float     # K1 / (2 C1)

    @property
    def dominance(self) -> bool:
        return self.diag_bound + 2.0 * self.offdiag_bound < 0.0


def _caustic_chord(a: float, b: float, lam: float, t0: float):
    """Chord of the ellipse tangent to the confocal caustic at parameter t0."""
    ca = np.sqrt(a * a - lam)
    cb = np.sqrt(b * b - lam)
    c = np.array([ca * np.cos(t0), cb * np.sin(t0)])
    tau = np.array([-ca * np.sin(t0), cb * np.cos(t0)])
    tau = tau / np.linalg.norm(tau)
    # intersect c + s tau with the ellipse (quadratic in s)
    w = np.array([1.0 / a**2, 1.0 / b**2])
    qa = float(np.sum(w * tau * tau))
    qb = float(2.0 * np.sum(w * c * tau))
    qc = float(np.sum(w * c * c) - 1.0)
    disc = qb * qb - 4.0 * qa * qc
    if disc <= 0.0:
        raise ValueError("caustic parameter does not produce a crossing chord")
    root = np.sqrt(disc)
    s_minus = (-qb - root) / (2.0 * qa)
    s_plus = (-qb + root) / (2.0 * qa)
    return c + s_minus * tau, c + s_plus * tau


def symmetric_lift_check(
    a: float,
    b: float,
    c: float,
    caustic_parameter: float,
    n_bounces: int = 12,
    seed: int = 42,
    output_dir=None,
) -> ExperimentReport:
    """Lift a planar caustic orbit into the ellipsoid (a, b, c) and split its form.

    A chord construction tangent to the confocal caustic of the cross
    section ellipse (a, b) starts a planar orbit, lifted to the equator of
    the ellipsoid.  Mirror symmetry in the equator plane must decouple the
    second variation into a planar and a vertical block.  A curvature
    dominance statistic (largest planar curvature over smallest reflection
    sine against smallest vertical curvature) predicts whether the
    vertical block is negative definite; the prediction is verified on the
    eigenvalues either way.
    """
    if not 0.0 < caustic_parameter < min(a, b) ** 2:
        raise ValueError("caustic parameter must lie in (0, min(a, b)^2)")
    if n_bounces < 3:
        raise ValueError("n_bounces must be at least 3")
    surface = Ellipsoid([a, b, c])
    p0_2d, p1_2d = _caustic_chord(a, b, caustic_parameter, t0=0.3)
    x0 = np.array([p0_2d[0], p0_2d[1], 0.0])
    x1 = np.array([p1_2d[0], p1_2d[1], 0.0])
    z = (x1 - x0) / np.linalg.norm(x1 - x0)
    n0 = surface.inward_normal(x0)
    v_hat = float(z @ n0)
    start = PhasePoint(x=x0, v=z - v_hat * n0, v_hat=v_hat)
    segment = orbit(surface, start, n_bounces)
    form = assemble_form(surface, segment)
    n_int = segment.interior_count

    report = ExperimentReport(
        name="symmetric-lift",
        parameters={
            "semi_axes": [float(a), float(b), float(c)],
            "caustic_parameter": float(caustic_parameter),
            "n_bounces": int(n_bounces),
            "seed": int(seed),
        },
    )

    drift = max(float(abs(pt[2])) for pt in segment.points)
    report.add("orbit-stays-planar", drift < 1e-8, observed=drift, bound=1e-8)

    e_z = np.array([0.0, 0.0, 1.0])
    planar_dirs = [
        segment.chords[k].v / np.linalg.norm(segment.chords[k].v)
        for k in range(1, n_int + 1)
    ]
    vertical_dirs = [e_z] * n_int
    mixed = mixed_block(form, planar_dirs, vertical_dirs)
    mixed_max = float(np.abs(mixed).max())
    report.add("mixed-block-vanishes", mixed_max < 1e-8, observed=mixed_max, bound=1e-8)

    planar = restrict_form(form, planar_dirs)
    planar_top = float(np.linalg.eigvalsh(planar).max())
    report.add("planar-block-negative-definite", planar_top < 0.0, observed=planar_top, bound=0.0)

    bounds = _lift_bounds(a, b, c, segment)
    vertical = restrict_form(form, vertical_dirs)
    vert_eigs = np.linalg.eigvalsh(vertical)
    full_rep = definiteness(form)
    if bounds.dominance:
        report.add(
            "vertical-block-negative-definite",
            float(vert_eigs.max()) < 0.0,
            observed=float(vert_eigs.max()),
            bound=0.0,
            detail="curvature dominance predicts a definite vertical block",
        )
        report.add(
            "full-form-negative-definite",
            full_rep.classification == NEG_DEF,
            observed=float(full_rep.eigenvalues.max()),
            bound=0.0,
        )
    else:
        diag_max = float(np.diag(vertical).max())
        report.add(
            "vertical-diagonal-has-positive-entry",
            diag_max > 0.0,
            observed=diag_max,
            bound=0.0,
            detail="a flat vertical direction should leave room above zero",
        )
        report.add(
            "full-form-not-negative-semidefinite",
            full_rep.classification not in MAXIMIZING,
            observed=float(full_rep.eigenvalues.max()),
            bound=0.0,
        )

    report.observations = {
        "planar_max_curvature": bounds.planar_max,
        "vertical_min_curvature": bounds.transverse_min,
        "min_reflection_sine": bounds.min_sine,
        "dominance_diag_bound": bounds.diag_bound,
        "dominance_offdiag_bound": bounds.offdiag_bound,
        "dominance": bounds.dominance,
        "full_classification": full_rep.classification,
        "vertical_eigenvalue_range": [float(vert_eigs.min()), float(vert_eigs.max())],
    }
    if output_dir is not None:
        csv_path = Path(output_dir)
        csv_path.mkdir(parents=True, exist_ok=True)
        orbit_to_csv(segment, csv_path / "lift-orbit.csv")
        report.artifacts.append("lift-orbit.csv")
        report.write(output_dir)
    return report


def _lift_bounds(a: float, b: float, c: float, segment) -> CurvatureBounds:
    theta = 2.0 * np.pi * np.arange(EQUATOR_GRID) / EQUATOR_GRID
    # cross-section ellipse curvature and vertical normal curvature on the equator
    planar = a * b / (a * a * np.sin(theta) ** 2 + b * b * np.cos(theta) ** 2) ** 1.5
    vertical = (1.0 / c**2) / np.sqrt(np.cos(theta) ** 2 / a**2 + np.sin(theta) ** 2 / b**2)
    k1 = float(planar.max())
    k2 = float(vertical.min())
    c1 = float(np.min(segment.sines))
    return CurvatureBounds(
        planar_max=k1,
        transverse_min=k2,
        min_sine=c1,
        diag_bound=k1 / c1 - 2.0 * k2,
        offdiag_bound=k1 / (2.0 * c1),
    )

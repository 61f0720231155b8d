"""Second variation of orbit length: chord operators, forms, Jacobi fields.

The total chord length of an orbit segment, as a function of its interior
vertices, has a block tridiagonal second derivative.  The blocks come from
four operators attached to each chord (two endpoint Hessparts and two
cross blocks); everything downstream (definiteness classification, Jacobi
recurrences, conjugate point detection, maximizing-set scans) is assembled
from those blocks in deterministic tangent frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import OrbitSegment, PhasePoint, orbit, phase_point
from .errors import (
    ConjugatePointNotFound,
    DegenerateChord,
    NearTangentRay,
    NotAnOrbit,
    TwistFailure,
)
from .surface import GRAZING_SIN, RAY_T_MIN, Ellipsoid, Sphere, Surface, TangentFrame

MIN_CHORD = 1e-9          # below this the chord is degenerate
TWIST_SV_MIN = 1e-12      # smallest tolerated singular value of a cross block
KERNEL_WINDOW = 1e-6      # |eigenvalue| window used by conjugate detection
DEFAULT_TOL_SCALE = 1e-9  # semidefiniteness tolerance per unit matrix max-norm

NEG_DEF = "negative-definite"
NEG_SEMI = "negative-semidefinite"
INDEFINITE = "indefinite"
POS_SEMI = "positive-semidefinite"
POS_DEF = "positive-definite"
UNRESOLVED = "unresolved"

MAXIMIZING = (NEG_DEF, NEG_SEMI)


# ---------------------------------------------------------------------------
# chord operators


@dataclass
class ChordOperators:
    """Frame matrices of the four second-derivative blocks of one chord.

    l11 and l22 act on the tangent spaces at the two endpoints; l12 maps
    far-end coordinates to near-end coordinates and l21 is its adjoint.
    """

    l11: np.ndarray
    l22: np.ndarray
    l12: np.ndarray
    l21: np.ndarray
    frame_x: TangentFrame
    frame_y: TangentFrame
    _min_singular: float | None = field(default=None, repr=False)

    @property
    def min_singular(self) -> float:
        """Smallest singular value of l12 (the twist quantity)."""
        if self._min_singular is None:
            self._min_singular = float(np.linalg.svd(self.l12, compute_uv=False)[-1])
        return self._min_singular


def chord_operators(surface: Surface, chord, frame_x: TangentFrame, frame_y: TangentFrame) -> ChordOperators:
    """Second-derivative blocks of the chord length in the given frames.

    With z the unit chord direction, v / w its tangential parts and
    v_hat / w_hat the angle sines at the two endpoints:

        l11(xi)  = (xi - <v,xi> v)/L - v_hat * S_x(xi)
        l22(eta) = (eta - <w,eta> w)/L - w_hat * S_y(eta)
        l12(eta) = (-P_x(eta) + <w,eta> v)/L
        l21(xi)  = (-P_y(xi) + <v,xi> w)/L

    where S is the shape operator and P the tangent projection.
    """
    if chord.length < MIN_CHORD:
        raise DegenerateChord("chord endpoints coincide")
    L = chord.length
    s = surface.dimension - 1
    eye = np.eye(s)
    sx = surface.shape_matrix(frame_x)
    sy = surface.shape_matrix(frame_y)
    qv = frame_x.coords(chord.v)
    qw = frame_y.coords(chord.w)
    l11 = (eye - np.outer(qv, qv)) / L - chord.v_hat * sx
    l22 = (eye - np.outer(qw, qw)) / L - chord.w_hat * sy
    cross = frame_x.vectors @ frame_y.vectors.T
    l12 = (-cross + np.outer(qv, qw)) / L
    l21 = (-cross.T + np.outer(qw, qv)) / L
    return ChordOperators(l11=l11, l22=l22, l12=l12, l21=l21, frame_x=frame_x, frame_y=frame_y)


def segment_operators(surface: Surface, segment: OrbitSegment) -> list[ChordOperators]:
    return [
        chord_operators(surface, segment.chords[k], segment.frames[k], segment.frames[k + 1])
        for k in range(segment.n_bounces)
    ]


# ---------------------------------------------------------------------------
# one-bounce form


def _bounce_geometry(surface: Surface, x_prev, x0, x1):
    """Chord data around a single reflection; raises NotAnOrbit if invalid."""
    x_prev = np.asarray(x_prev, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    l_minus = float(np.linalg.norm(x0 - x_prev))
    l_plus = float(np.linalg.norm(x1 - x0))
    if min(l_minus, l_plus) < MIN_CHORD:
        raise DegenerateChord("bounce with a vanishing chord")
    z_in = (x0 - x_prev) / l_minus
    z_out = (x1 - x0) / l_plus
    n0 = surface.inward_normal(x0)
    tan_in = z_in - (z_in @ n0) * n0
    tan_out = z_out - (z_out @ n0) * n0
    if np.linalg.norm(tan_in - tan_out) > 1e-8 or abs((z_in + z_out) @ n0) > 1e-8:
        raise NotAnOrbit("points do not satisfy the reflection law")
    v_hat = float(z_out @ n0)
    if v_hat <= 0:
        raise NotAnOrbit("outgoing chord does not point into the body")
    return tan_out, v_hat, l_minus, l_plus


def one_bounce_form(surface: Surface, x_prev, x0, x1, xi) -> float:
    """Second variation of L(x_prev, x0) + L(x0, x1) in the direction xi at x0.

    Evaluates (|xi|^2 - <v0,xi>^2)(1/L- + 1/L+) - 2 B(xi,xi) v_hat0 with
    v0 the tangential chord direction and B the second fundamental form.
    """
    xi = np.asarray(xi, dtype=float)
    v0, v_hat, l_minus, l_plus = _bounce_geometry(surface, x_prev, x0, x1)
    n0 = surface.inward_normal(np.asarray(x0, dtype=float))
    if abs(xi @ n0) > 1e-8 * max(np.linalg.norm(xi), 1.0):
        raise ValueError("variation vector is not tangent")
    curls = float(xi @ xi - (v0 @ xi) ** 2)
    b = surface.normal_curvature(np.asarray(x0, dtype=float), xi)
    return curls * (1.0 / l_minus + 1.0 / l_plus) - 2.0 * b * v_hat


def one_bounce_matrix(surface: Surface, x_prev, x0, x1, frame: TangentFrame | None = None) -> np.ndarray:
    """Matrix of the one-bounce form in a tangent frame at x0."""
    v0, v_hat, l_minus, l_plus = _bounce_geometry(surface, x_prev, x0, x1)
    if frame is None:
        frame = surface.tangent_frame(np.asarray(x0, dtype=float))
    s = surface.dimension - 1
    q = frame.coords(v0)
    sf = surface.shape_matrix(frame)
    return (np.eye(s) - np.outer(q, q)) * (1.0 / l_minus + 1.0 / l_plus) - 2.0 * v_hat * sf


# ---------------------------------------------------------------------------
# assembled form


@dataclass
class SecondVariationForm:
    """Block tridiagonal second variation over the interior vertices."""

    segment: OrbitSegment
    matrix: np.ndarray
    block_size: int
    operators: list[ChordOperators] = field(repr=False)

    @property
    def n_interior(self) -> int:
        return self.matrix.shape[0] // self.block_size


def assemble_form(surface: Surface, segment: OrbitSegment) -> SecondVariationForm:
    """Second variation of total length with the segment endpoints held fixed.

    Interior vertex k contributes the diagonal block l11(chord k) +
    l22(chord k-1); consecutive interiors couple through l12 of the chord
    between them.
    """
    K = segment.n_bounces
    if K < 2:
        raise ValueError("segment needs at least one interior vertex")
    ops = segment_operators(surface, segment)
    s = surface.dimension - 1
    n_int = K - 1
    Q = np.zeros((n_int * s, n_int * s))
    for j in range(n_int):
        k = j + 1
        sl = slice(j * s, (j + 1) * s)
        Q[sl, sl] = ops[k].l11 + ops[k - 1].l22
        if k <= K - 2:
            sr = slice((j + 1) * s, (j + 2) * s)
            Q[sl, sr] = ops[k].l12
            Q[sr, sl] = ops[k].l21
    return SecondVariationForm(segment=segment, matrix=Q, block_size=s, operators=ops)


def restrict_form(form: SecondVariationForm, directions) -> np.ndarray:
    """Scalar matrix of the form restricted to one tangent direction per vertex.

    `directions` holds one ambient tangent vector per interior vertex; the
    result is the quadratic form on coefficient vectors for those directions.
    """
    C = _direction_matrix(form, directions)
    return C.T @ form.matrix @ C


def mixed_block(form: SecondVariationForm, directions_a, directions_b) -> np.ndarray:
    """Coupling block between two per-vertex direction families."""
    ca = _direction_matrix(form, directions_a)
    cb = _direction_matrix(form, directions_b)
    return ca.T @ form.matrix @ cb


def _direction_matrix(form: SecondVariationForm, directions) -> np.ndarray:
    s = form.block_size
    n_int = form.n_interior
    if len(directions) != n_int:
        raise ValueError("need one direction per interior vertex")
    C = np.zeros((n_int * s, n_int))
    for j, u in enumerate(directions):
        fr = form.segment.frames[j + 1]
        C[j * s : (j + 1) * s, j] = fr.coords(u)
    return C


# ---------------------------------------------------------------------------
# definiteness


@dataclass
class DefinitenessReport:
    eigenvalues: np.ndarray
    classification: str
    kernel_basis: np.ndarray  # columns are eigenvectors with |eigenvalue| <= tol
    tol: float

    @property
    def is_maximizing(self) -> bool:
        return self.classification in MAXIMIZING


def classify_eigenvalues(eigenvalues: np.ndarray, tol: float) -> str:
    lo = float(eigenvalues[0])
    hi = float(eigenvalues[-1])
    if hi < -tol:
        return NEG_DEF
    if lo > tol:
        return POS_DEF
    if hi <= tol:
        return NEG_SEMI
    if lo >= -tol:
        return POS_SEMI
    return INDEFINITE


def definiteness(form, tol: float | None = None) -> DefinitenessReport:
    """Classify a symmetric form (SecondVariationForm or plain matrix)."""
    matrix = form.matrix if isinstance(form, SecondVariationForm) else np.asarray(form, dtype=float)
    if tol is None:
        tol = DEFAULT_TOL_SCALE * max(float(np.abs(matrix).max()), 1e-300)
    eigenvalues, vectors = np.linalg.eigh(matrix)
    kernel = vectors[:, np.abs(eigenvalues) <= tol]
    return DefinitenessReport(
        eigenvalues=eigenvalues,
        classification=classify_eigenvalues(eigenvalues, tol),
        kernel_basis=kernel,
        tol=float(tol),
    )


# ---------------------------------------------------------------------------
# Jacobi fields


@dataclass
class JacobiField:
    """Discrete Jacobi field in frame coordinates, one vector per vertex."""

    segment: OrbitSegment
    vectors: list[np.ndarray]
    residuals: np.ndarray

    @property
    def is_exact(self) -> bool:
        return bool(np.max(self.residuals) < 1e-8)

    def ambient_vectors(self) -> list[np.ndarray]:
        return [fr.embed(c) for fr, c in zip(self.segment.frames, self.vectors)]


def _recurrence_residuals(ops: list[ChordOperators], coords: list[np.ndarray]) -> np.ndarray:
    """Norm of the three-term recurrence at every interior vertex (ends 0)."""
    K = len(ops)
    res = np.zeros(K + 1)
    for k in range(1, K):
        lhs = (
            (ops[k].l11 + ops[k - 1].l22) @ coords[k]
            + ops[k - 1].l21 @ coords[k - 1]
            + ops[k].l12 @ coords[k + 1]
        )
        res[k] = float(np.linalg.norm(lhs))
    return res


def jacobi_propagate(surface: Surface, segment: OrbitSegment, xi_start, xi_next, frame_coords: bool = False) -> JacobiField:
    """Propagate a Jacobi field along the segment from its first two vectors.

    Solves the three-term recurrence forward: each cross block is inverted,
    so a numerically singular one raises TwistFailure.  Inputs are ambient
    tangent vectors unless frame_coords is set.
    """
    K = segment.n_bounces
    if K < 2:
        raise ValueError("segment too short to propagate")
    ops = segment_operators(surface, segment)
    if frame_coords:
        c0 = np.asarray(xi_start, dtype=float)
        c1 = np.asarray(xi_next, dtype=float)
    else:
        c0 = segment.frames[0].coords(xi_start)
        c1 = segment.frames[1].coords(xi_next)
    coords = [c0, c1]
    for k in range(1, K):
        if ops[k].min_singular < TWIST_SV_MIN:
            raise TwistFailure(f"cross block at chord {k} is numerically singular")
        rhs = (ops[k].l11 + ops[k - 1].l22) @ coords[k] + ops[k - 1].l21 @ coords[k - 1]
        coords.append(-np.linalg.solve(ops[k].l12, rhs))
    return JacobiField(segment=segment, vectors=coords, residuals=_recurrence_residuals(ops, coords))


def kernel_field(form: SecondVariationForm, kernel_vector: np.ndarray) -> JacobiField:
    """Zero-padded Jacobi field built from a kernel vector of the form."""
    s = form.block_size
    n_int = form.n_interior
    coords = [np.zeros(s)]
    for j in range(n_int):
        coords.append(np.asarray(kernel_vector[j * s : (j + 1) * s], dtype=float))
    coords.append(np.zeros(s))
    return JacobiField(
        segment=form.segment,
        vectors=coords,
        residuals=_recurrence_residuals(form.operators, coords),
    )


# ---------------------------------------------------------------------------
# conjugate point detection


@dataclass
class ConjugateResult:
    phase_point: PhasePoint
    field: JacobiField
    form: SecondVariationForm
    eigenvalue: float   # eigenvalue of smallest magnitude at the crossing
    v_norm: float
    v_hat: float
    iterations: int


def interior_form(surface: Surface, x, direction, v_norm: float, n: int) -> SecondVariationForm:
    """Form over n interior vertices of the orbit launched from (x, direction)."""
    p = phase_point(surface, x, direction, v_norm=v_norm)
    segment = orbit(surface, p, n + 1)
    return assemble_form(surface, segment)


def detect_conjugate(surface: Surface, x, direction, n: int, search=(0.05, 0.95), coarse: int = 64) -> ConjugateResult:
    """Locate the first |v| in the search interval where the form gains a kernel.

    The count of nonnegative eigenvalues of the n-interior form is sampled
    on a coarse grid over the interval; bisection then sharpens the first
    cell whose endpoint counts differ.  (Counting is used rather than the
    sign of the smallest eigenvalue because the spectrum keeps a negative
    part at every crossing.)  Certifies that the crossing eigenvalue and
    the kernel field's recurrence residuals are below 1e-6.
    """
    lo, hi = float(search[0]), float(search[1])
    if not 0.0 < lo < hi < 1.0:
        raise ValueError("search interval must satisfy 0 < lo < hi < 1")
    if coarse < 1:
        raise ValueError("coarse grid needs at least one cell")

    def count_nonneg(r: float) -> int:
        form = interior_form(surface, x, direction, r, n)
        return int(np.count_nonzero(np.linalg.eigvalsh(form.matrix) >= 0.0))

    grid = np.linspace(lo, hi, coarse + 1)
    counts = [count_nonneg(float(r)) for r in grid]
    cell = None
    for i in range(coarse):
        if counts[i] != counts[i + 1]:
            cell = i
            break
    if cell is None:
        raise ConjugatePointNotFound(
            f"no eigenvalue count change for |v| in ({lo}, {hi}) at resolution {coarse}"
        )
    lo, hi = float(grid[cell]), float(grid[cell + 1])
    c_lo = counts[cell]
    iterations = 0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if count_nonneg(mid) != c_lo:
            hi = mid
        else:
            lo = mid
        iterations += 1
    r = 0.5 * (lo + hi)
    form = interior_form(surface, x, direction, r, n)
    eigenvalues, vectors = np.linalg.eigh(form.matrix)
    idx = int(np.argmin(np.abs(eigenvalues)))
    eigenvalue = float(eigenvalues[idx])
    field = kernel_field(form, vectors[:, idx])
    if abs(eigenvalue) > KERNEL_WINDOW or float(np.max(field.residuals)) > KERNEL_WINDOW:
        raise RuntimeError("crossing located but kernel certification failed")
    p = phase_point(surface, x, direction, v_norm=r)
    return ConjugateResult(
        phase_point=p,
        field=field,
        form=form,
        eigenvalue=eigenvalue,
        v_norm=r,
        v_hat=float(np.sqrt(1.0 - r * r)),
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# maximizing-set sampling


@dataclass
class MaximizerSample:
    direction: np.ndarray
    r: float
    v_hat: float
    classification: str        # at segment length n
    classification_next: str   # at segment length n + 1
    min_sin: float             # smallest reflection sine along the n-segment
    unresolved: bool

    @property
    def maximizing(self) -> bool:
        return self.classification in MAXIMIZING


@dataclass
class MaximizerSetSample:
    x: np.ndarray
    n: int
    samples: list[MaximizerSample]
    boundary_points: list[tuple]       # (direction index, r lo, r hi, class lo, class hi)
    grazing_floor: float | None        # smallest reflection sine among maximizing samples
    nesting_violations: list[tuple]
    inclusion_violations: list[tuple]
    grazing_violations: list[tuple]
    unresolved_count: int


def _tangent_directions(surface: Surface, x, count: int, seed: int = 42) -> list[np.ndarray]:
    frame = surface.tangent_frame(np.asarray(x, dtype=float))
    d = surface.dimension
    if d == 2:
        base = [frame.vectors[0], -frame.vectors[0]]
        return [base[i % 2] for i in range(count)]
    if d == 3:
        angles = 2.0 * np.pi * np.arange(count) / count
        return [np.cos(a) * frame.vectors[0] + np.sin(a) * frame.vectors[1] for a in angles]
    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(count):
        c = rng.normal(size=d - 1)
        c /= np.linalg.norm(c)
        dirs.append(frame.embed(c))
    return dirs


def maximizer_set_sample(
    surface: Surface,
    x,
    n: int,
    directions: int,
    radial_grid: int,
    r_values=None,
) -> MaximizerSetSample:
    """Classify the n-interior form on a polar grid of the unit tangent ball.

    For each sampled (direction, |v|) the orbit is extended one extra bounce
    so the same chord operators yield the forms at lengths n and n + 1
    (the shorter form is a leading principal block of the longer one); both
    are classified with a shared tolerance, making the monotone containment
    and grazing checks exact rather than tolerance-skewed.  Grid points that
    hit the grazing cutoff are marked unresolved, never dropped.
    """
    if directions < 2 or radial_grid < 2:
        raise ValueError("direction and radial grids need at least 2 points")
    if n < 1:
        raise ValueError("n must be at least 1")
    x = np.asarray(x, dtype=float)
    dirs = _tangent_directions(surface, x, directions)
    if r_values is None:
        r_values = np.arange(1, radial_grid + 1) / (radial_grid + 1.0)
    else:
        r_values = np.asarray(r_values, dtype=float)
    s = surface.dimension - 1
    samples: list[MaximizerSample] = []
    transitions: list[tuple] = []
    nesting: list[tuple] = []
    inclusion: list[tuple] = []
    grazing: list[tuple] = []
    unresolved_count = 0
    floor = None
    for di, u in enumerate(dirs):
        previous = None
        for r in r_values:
            r = float(r)
            v_hat = float(np.sqrt(1.0 - r * r))
            try:
                p = phase_point(surface, x, u, v_norm=r)
                segment = orbit(surface, p, n + 2)
                form_next = assemble_form(surface, segment)
                full = form_next.matrix
                sub = full[: n * s, : n * s]
                tol = DEFAULT_TOL_SCALE * max(float(np.abs(full).max()), 1e-300)
                cls = classify_eigenvalues(np.linalg.eigvalsh(sub), tol)
                cls_next = classify_eigenvalues(np.linalg.eigvalsh(full), tol)
                min_sin = float(np.min(segment.sines[: n + 2]))
            except NearTangentRay:
                samples.append(
                    MaximizerSample(
                        direction=u, r=r, v_hat=v_hat, classification=UNRESOLVED,
                        classification_next=UNRESOLVED, min_sin=np.nan, unresolved=True,
                    )
                )
                unresolved_count += 1
                previous = None
                continue
            sample = MaximizerSample(
                direction=u, r=r, v_hat=v_hat, classification=cls,
                classification_next=cls_next, min_sin=min_sin, unresolved=False,
            )
            samples.append(sample)
            if cls_next in MAXIMIZING and cls not in MAXIMIZING:
                nesting.append((di, r, cls, cls_next))
            if cls_next == NEG_DEF and cls not in MAXIMIZING:
                inclusion.append((di, r, cls, cls_next))
            if sample.maximizing:
                if min_sin <= GRAZING_SIN:
                    grazing.append((di, r, min_sin))
                floor = min_sin if floor is None else min(floor, min_sin)
            if previous is not None and (previous[1] in MAXIMIZING) != sample.maximizing:
                transitions.append((di, previous[0], r, previous[1], cls))
            previous = (r, cls)
    return MaximizerSetSample(
        x=x,
        n=n,
        samples=samples,
        boundary_points=transitions,
        grazing_floor=floor,
        nesting_violations=nesting,
        inclusion_violations=inclusion,
        grazing_violations=grazing,
        unresolved_count=unresolved_count,
    )


# ---------------------------------------------------------------------------
# batched radial scans (quadrics get a vectorized fast path)


def _quadric_weights(surface: Surface):
    if isinstance(surface, Sphere):
        return np.full(surface.dimension, 1.0 / surface.radius**2)
    if isinstance(surface, Ellipsoid):
        return surface.weights.copy()
    return None


def _batch_frames(normals: np.ndarray) -> np.ndarray:
    """Deterministic tangent frames for a batch of unit normals."""
    m, d = normals.shape
    frames = np.empty((m, d - 1, d))
    drop = np.argmax(np.abs(normals), axis=1)
    for dv in range(d):
        mask = drop == dv
        if not np.any(mask):
            continue
        nm = normals[mask]
        vecs = []
        for i in range(d):
            if i == dv:
                continue
            e = np.zeros((nm.shape[0], d))
            e[:, i] = 1.0
            e = e - nm[:, i][:, None] * nm
            for u in vecs:
                e = e - np.sum(e * u, axis=1, keepdims=True) * u
            e = e / np.linalg.norm(e, axis=1, keepdims=True)
            vecs.append(e)
        frames[mask] = np.stack(vecs, axis=1)
    return frames


def scan_interior_eigenvalues(surface: Surface, x, direction, n: int, r_values) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of the n-interior form for every |v| in r_values.

    Returns (eigenvalues with shape (m, n*(d-1)), resolved mask); rows that
    hit the grazing cutoff are NaN with resolved False.  Quadrics run a
    vectorized orbit, other surfaces fall back to a scalar loop.
    """
    x = np.asarray(x, dtype=float)
    r_values = np.asarray(r_values, dtype=float)
    weights = _quadric_weights(surface)
    if weights is None:
        return _scan_scalar(surface, x, direction, n, r_values)
    n_x = surface.inward_normal(x)
    u = np.asarray(direction, dtype=float)
    u = u - (u @ n_x) * n_x
    u = u / np.linalg.norm(u)
    m = r_values.size
    X = np.tile(x, (m, 1))
    v_hat0 = np.sqrt(1.0 - r_values**2)
    Z = r_values[:, None] * u[None, :] + v_hat0[:, None] * n_x[None, :]
    Z = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    Q, alive = _batch_form_quadric(weights, X, Z, n + 1)
    size = Q.shape[1]
    Q[~alive] = np.eye(size)
    eigs = np.linalg.eigvalsh(Q)
    eigs[~alive] = np.nan
    return eigs, alive


def _scan_scalar(surface, x, direction, n, r_values):
    out = []
    alive = np.ones(r_values.size, dtype=bool)
    size = n * (surface.dimension - 1)
    for i, r in enumerate(r_values):
        try:
            form = interior_form(surface, x, direction, float(r), n)
            out.append(np.linalg.eigvalsh(form.matrix))
        except NearTangentRay:
            out.append(np.full(size, np.nan))
            alive[i] = False
    return np.array(out), alive


def _batch_form_quadric(weights: np.ndarray, X: np.ndarray, Z: np.ndarray, n_chords: int):
    """Vectorized chord-operator assembly along quadric orbits.

    X holds start points on the surface, Z unit inward directions; one
    block tridiagonal form per row is assembled over n_chords - 1 interior
    vertices.  Rows that graze are flagged dead and skipped downstream.
    """
    m, d = X.shape
    s = d - 1
    eye = np.eye(s)
    alive = np.ones(m, dtype=bool)
    h = 2.0 * weights

    def normals_of(P):
        g = h * P
        ng = np.linalg.norm(g, axis=1)
        return -g / ng[:, None], ng

    def shape_of(F, ng):
        return np.einsum("mid,d,mjd->mij", F, h, F) / ng[:, None, None]

    NX, ngx = normals_of(X)
    FX = _batch_frames(NX)
    SX = shape_of(FX, ngx)
    blocks = []
    for _ in range(n_chords):
        wz = Z * weights
        q2 = np.sum(Z * wz, axis=1)
        q1 = np.sum(X * wz, axis=1)
        with np.errstate(invalid="ignore"):
            t = -2.0 * q1 / q2
        alive &= np.isfinite(t) & (t > RAY_T_MIN)
        t = np.where(alive, t, 1.0)
        Y = X + t[:, None] * Z
        L = np.linalg.norm(Y - X, axis=1)
        NY, ngy = normals_of(Y)
        FY = _batch_frames(NY)
        SY = shape_of(FY, ngy)
        zn = np.sum(Z * NY, axis=1)
        w_hat = -zn
        alive &= w_hat > GRAZING_SIN
        W = Z - zn[:, None] * NY
        v_hat = np.sum(Z * NX, axis=1)
        V = Z - v_hat[:, None] * NX
        qv = np.einsum("mid,md->mi", FX, V)
        qw = np.einsum("mid,md->mi", FY, W)
        Linv = 1.0 / L[:, None, None]
        l11 = (eye[None] - qv[:, :, None] * qv[:, None, :]) * Linv - v_hat[:, None, None] * SX
        l22 = (eye[None] - qw[:, :, None] * qw[:, None, :]) * Linv - w_hat[:, None, None] * SY
        cross = np.einsum("mid,mjd->mij", FX, FY)
        l12 = (-cross + qv[:, :, None] * qw[:, None, :]) * Linv
        blocks.append((l11, l22, l12))
        Z = Z - 2.0 * zn[:, None] * NY
        Z = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        X, NX, FX, SX = Y, NY, FY, SY
    n_int = n_chords - 1
    Q = np.zeros((m, n_int * s, n_int * s))
    for j in range(n_int):
        sl = slice(j * s, (j + 1) * s)
        Q[:, sl, sl] = blocks[j + 1][0] + blocks[j][1]
        if j < n_int - 1:
            sr = slice((j + 1) * s, (j + 2) * s)
            off = blocks[j + 1][2]
            Q[:, sl, sr] = off
            Q[:, sr, sl] = np.transpose(off, (0, 2, 1))
    return Q, alive

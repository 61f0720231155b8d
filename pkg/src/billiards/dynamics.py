"""The billiard map inside a convex body and orbit bookkeeping.

Phase points live on the unit-ball bundle of the surface: a point x and
the tangential part v of a unit direction, with v_hat = sqrt(1 - |v|^2)
the sine of the reflection angle.  One step shoots the ray, reflects at
the far end, and records the chord data needed by the variational layer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import NearTangentRay
from .surface import GRAZING_SIN, Surface, TangentFrame

FLOAT_FMT = "%.17g"  # round-trip exact float formatting for CSV output


@dataclass(frozen=True)
class PhasePoint:
    """Outgoing state at a bounce: position, tangential velocity, sin(angle)."""

    x: np.ndarray
    v: np.ndarray
    v_hat: float

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass(frozen=True)
class ChordData:
    """One chord of an orbit with its projected endpoint directions.

    v is the tangential part of the unit chord direction at the start,
    w the tangential part at the end; v_hat and w_hat are the sines of
    the angles the chord makes with the two tangent planes.
    """

    x: np.ndarray
    y: np.ndarray
    length: float
    v: np.ndarray
    w: np.ndarray
    v_hat: float
    w_hat: float


@dataclass
class OrbitSegment:
    """A finite orbit: K bounces give K+1 vertices and K chords."""

    points: np.ndarray                    # (K+1, d)
    chords: list[ChordData]
    frames: list[TangentFrame]
    sines: np.ndarray = field(repr=False)  # sin(reflection angle) per vertex

    @property
    def n_bounces(self) -> int:
        return len(self.chords)

    @property
    def angles(self) -> np.ndarray:
        return np.arcsin(np.clip(self.sines, -1.0, 1.0))

    @property
    def interior_count(self) -> int:
        return max(self.n_bounces - 1, 0)


def phase_point(
    surface: Surface,
    x: np.ndarray,
    direction: np.ndarray,
    angle: float | None = None,
    v_norm: float | None = None,
) -> PhasePoint:
    """Build a phase point from a tangent direction and a reflection angle.

    Exactly one of `angle` (in (0, pi/2], measured from the tangent plane)
    or `v_norm` (|v| in [0, 1)) must be given.  `direction` is projected
    onto the tangent space and normalized; it may be zero only at normal
    incidence (angle = pi/2).
    """
    if (angle is None) == (v_norm is None):
        raise ValueError("specify exactly one of angle or v_norm")
    x = np.asarray(x, dtype=float)
    if angle is not None:
        if not 0.0 < angle <= np.pi / 2:
            raise ValueError("angle must lie in (0, pi/2]")
        speed = float(np.cos(angle))
        v_hat = float(np.sin(angle))
    else:
        if not 0.0 <= v_norm < 1.0:
            raise ValueError("v_norm must lie in [0, 1)")
        speed = float(v_norm)
        v_hat = float(np.sqrt(1.0 - v_norm**2))
    if abs(speed) < 1e-15:
        return PhasePoint(x=x, v=np.zeros(surface.dimension), v_hat=1.0)
    n = surface.inward_normal(x)
    u = np.asarray(direction, dtype=float)
    u = u - (u @ n) * n
    nu = np.linalg.norm(u)
    if nu < 1e-12:
        raise ValueError("direction is parallel to the normal")
    return PhasePoint(x=x, v=speed * u / nu, v_hat=v_hat)


def reflect(surface: Surface, y: np.ndarray, incoming: np.ndarray) -> np.ndarray:
    """Reflect a unit direction arriving at a boundary point.

    The incoming direction must have a negative inward-normal component
    (it is leaving the body); the tangential part is preserved.
    """
    n = surface.inward_normal(y)
    cn = float(np.asarray(incoming, dtype=float) @ n)
    if abs(cn) < GRAZING_SIN:
        raise NearTangentRay("reflection at tangent incidence")
    if cn > 0:
        raise ValueError("incoming direction does not arrive from inside")
    return incoming - 2.0 * cn * n


def billiard_step(surface: Surface, p: PhasePoint) -> tuple[PhasePoint, ChordData]:
    """One bounce: shoot the chord from p, reflect, return the new state."""
    if p.v_hat < GRAZING_SIN:
        raise NearTangentRay("phase point is below the grazing cutoff")
    n_x = surface.inward_normal(p.x)
    z = p.v + p.v_hat * n_x
    z = z / np.linalg.norm(z)
    y, length = surface.intersect_ray(p.x, z)
    n_y = surface.inward_normal(y)
    zn = float(z @ n_y)          # negative: the chord exits at y
    w_hat = -zn
    if w_hat < GRAZING_SIN:
        raise NearTangentRay("chord arrives tangentially")
    w = z - zn * n_y
    chord = ChordData(
        x=p.x, y=y, length=length, v=p.v, w=w, v_hat=p.v_hat, w_hat=w_hat
    )
    return PhasePoint(x=y, v=w, v_hat=w_hat), chord


def orbit(surface: Surface, p: PhasePoint, n_bounces: int) -> OrbitSegment:
    """Iterate the billiard map; annotates grazing failures with their index."""
    if n_bounces < 1:
        raise ValueError("n_bounces must be at least 1")
    points = [np.asarray(p.x, dtype=float)]
    chords: list[ChordData] = []
    current = p
    for k in range(n_bounces):
        try:
            current, chord = billiard_step(surface, current)
        except NearTangentRay as err:
            err.index = k
            raise
        chords.append(chord)
        points.append(chord.y)
    sines = np.empty(n_bounces + 1)
    for k, chord in enumerate(chords):
        sines[k] = chord.v_hat
    sines[n_bounces] = chords[-1].w_hat
    frames = [surface.tangent_frame(pt) for pt in points]
    return OrbitSegment(
        points=np.array(points), chords=chords, frames=frames, sines=sines
    )


def reversed_start(segment: OrbitSegment) -> PhasePoint:
    """Phase point that retraces the segment from its last vertex."""
    last = segment.chords[-1]
    return PhasePoint(x=last.y, v=-last.w, v_hat=last.w_hat)


def orbit_to_csv(segment: OrbitSegment, path) -> None:
    """Write one row per vertex: n, coordinates, angle, outgoing chord length.

    The final vertex has no outgoing chord; its length field is left empty.
    """
    d = segment.points.shape[1]
    header = ["n"] + [f"x{i + 1}" for i in range(d)] + ["phi", "chord_length"]
    angles = segment.angles
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, pt in enumerate(segment.points):
            row = [str(k)]
            row += [FLOAT_FMT % c for c in pt]
            row.append(FLOAT_FMT % angles[k])
            if k < segment.n_bounces:
                row.append(FLOAT_FMT % segment.chords[k].length)
            else:
                row.append("")
            writer.writerow(row)

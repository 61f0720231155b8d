"""Command line front end.

Subcommands: orbit, variation, conjugate, maximizer-scan, experiment.
Every run is describable as one JSON object; flags are merged over an
optional --config file (flags win) and the merged object goes through a
single validator, so a config file and the equivalent flag invocation
cannot drift apart.  Exit codes: 0 success, 1 experiment check failure,
2 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import orbit, orbit_to_csv, phase_point
from .errors import BilliardError, ConfigError, NearTangentRay
from .experiments import (
    angle_threshold_estimate,
    ellipsoid_flat_point_check,
    sphere_report,
    symmetric_lift_check,
)
from .surface import Surface, surface_from_json
from .variation import definiteness, detect_conjugate, interior_form, maximizer_set_sample

DEFAULT_SEED = 42
SEED_ENV = "BILLIARDS_SEED"

COMMANDS = ("orbit", "variation", "conjugate", "maximizer-scan", "experiment")
EXPERIMENTS = ("sphere", "ellipsoid-flat", "angle-threshold", "symmetric-lift")


@dataclass
class RunConfig:
    """Validated parameters of one CLI run."""

    command: str
    surface: Surface | None = None
    start: np.ndarray | None = None
    direction: np.ndarray | None = None
    angle: float | None = None
    v_norm: float | None = None
    n_bounces: int = 10
    n: int = 1
    search: tuple[float, float] = (0.05, 0.95)
    directions: int = 16
    radial_grid: int = 32
    experiment: str | None = None
    experiment_params: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    output: str | None = None


# ---------------------------------------------------------------------------
# config parsing


def _surface_spec(value):
    """Normalize a surface description to a plain dict.

    Accepts a mapping, a JSON object string, or the inline shorthand
    "sphere:R[:DIM]" / "ellipsoid:a1,a2,...".
    """
    if isinstance(value, dict):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.startswith("{"):
            try:
                return json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError("surface", f"malformed JSON: {exc}") from exc
        kind, _, rest = text.partition(":")
        try:
            if kind == "sphere":
                parts = rest.split(":")
                spec = {"kind": "sphere", "radius": float(parts[0])}
                if len(parts) > 1:
                    spec["dimension"] = int(parts[1])
                return spec
            if kind == "ellipsoid":
                return {"kind": "ellipsoid", "semi_axes": [float(v) for v in rest.split(",")]}
        except (ValueError, IndexError) as exc:
            raise ConfigError("surface", f"cannot parse inline surface {text!r}") from exc
        raise ConfigError("surface", f"unknown surface kind: {kind!r}")
    raise ConfigError("surface", "expected an object or an inline string")


def _build_surface(value) -> Surface:
    try:
        return surface_from_json(_surface_spec(value))
    except ValueError as exc:
        raise ConfigError("surface", str(exc)) from exc


def _vector(data, key, dimension) -> np.ndarray:
    value = data.get(key)
    if value is None:
        raise ConfigError(key, "required for this command")
    try:
        vec = np.asarray([float(v) for v in value], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, "expected a list of numbers") from exc
    if vec.size != dimension:
        raise ConfigError(key, f"needs {dimension} coordinates, got {vec.size}")
    return vec


def _positive_int(data, key, default, minimum=1) -> int:
    value = data.get(key, default)
    try:
        value = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, "expected an integer") from exc
    if value < minimum:
        raise ConfigError(key, f"must be at least {minimum}")
    return value


def parse_config(text: str) -> RunConfig:
    """Validate one JSON run description; the only path into RunConfig."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")

    command = data.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")

    seed = data.get("seed", DEFAULT_SEED)
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError("seed", "expected an integer") from exc
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "expected a path string")

    config = RunConfig(command=command, seed=seed, output=output)

    needs_surface = command != "experiment" or data.get("experiment") == "angle-threshold"
    if needs_surface:
        if data.get("surface") is None:
            raise ConfigError("surface", "required for this command")
        config.surface = _build_surface(data["surface"])

    if command in ("orbit", "variation", "conjugate", "maximizer-scan"):
        config.start = _vector(data, "start", config.surface.dimension)
        if not config.surface.is_on_surface(config.start, tol=1e-8):
            value = config.surface.eval(config.start)
            raise ConfigError("start", f"point is not on the surface (F = {value:.3g})")

    if command in ("orbit", "variation", "conjugate"):
        config.direction = _vector(data, "direction", config.surface.dimension)
        if float(np.linalg.norm(config.direction)) < 1e-12:
            raise ConfigError("direction", "must be a nonzero vector")

    if command in ("orbit", "variation"):
        angle = data.get("angle")
        v_norm = data.get("v_norm")
        if (angle is None) == (v_norm is None):
            raise ConfigError("angle", "give exactly one of angle or v_norm")
        if angle is not None:
            angle = float(angle)
            if not 0.0 < angle <= np.pi / 2.0 + 1e-12:
                raise ConfigError("angle", "must lie in (0, pi/2]")
            config.angle = angle
        else:
            v_norm = float(v_norm)
            if not 0.0 <= v_norm < 1.0:
                raise ConfigError("v_norm", "must lie in [0, 1)")
            config.v_norm = v_norm

    if command == "orbit":
        config.n_bounces = _positive_int(data, "n_bounces", 10)
    if command in ("variation", "conjugate", "maximizer-scan"):
        config.n = _positive_int(data, "n", 1)
    if command == "conjugate":
        search = data.get("search", [0.05, 0.95])
        try:
            lo, hi = float(search[0]), float(search[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError("search", "expected two numbers") from exc
        if not 0.0 < lo < hi < 1.0:
            raise ConfigError("search", "must satisfy 0 < lo < hi < 1")
        config.search = (lo, hi)
    if command == "maximizer-scan":
        config.directions = _positive_int(data, "directions", 16, minimum=2)
        config.radial_grid = _positive_int(data, "radial_grid", 32, minimum=2)

    if command == "experiment":
        name = data.get("experiment")
        if name not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        config.experiment = name
        config.experiment_params = _experiment_params(name, data)
    return config


def _experiment_params(name: str, data: dict) -> dict:
    if name == "sphere":
        alpha = data.get("alpha")
        if alpha is None:
            raise ConfigError("alpha", "required for the sphere experiment")
        alpha = float(alpha)
        if not 0.0 < alpha <= np.pi / 2.0 + 1e-12:
            raise ConfigError("alpha", "must lie in (0, pi/2]")
        return {"alpha": alpha, "n_max": _positive_int(data, "n_max", 8)}
    if name == "ellipsoid-flat":
        axes = _axes(data.get("semi_axes", [0.3, 1.0, 1.2]))
        return {"semi_axes": axes, "samples": _positive_int(data, "samples", 200)}
    if name == "angle-threshold":
        return {
            "angle_grid": _positive_int(data, "angle_grid", 64, minimum=8),
            "point_samples": _positive_int(data, "point_samples", 8),
        }
    axes = _axes(data.get("semi_axes", [1.5, 1.0, 0.2]))
    caustic = float(data.get("caustic", 0.5))
    if not 0.0 < caustic < min(axes[0], axes[1]) ** 2:
        raise ConfigError("caustic", "must lie in (0, min(a, b)^2)")
    return {
        "semi_axes": axes,
        "caustic": caustic,
        "n_bounces": _positive_int(data, "n_bounces", 12, minimum=3),
    }


def _axes(value) -> list[float]:
    try:
        axes = [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError("semi_axes", "expected a list of numbers") from exc
    if len(axes) != 3 or min(axes) <= 0:
        raise ConfigError("semi_axes", "expected three positive numbers")
    return axes


# ---------------------------------------------------------------------------
# flag handling


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="billiards",
        description="Billiard orbits and second-variation analysis in convex bodies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, surface: bool = True) -> None:
        p.add_argument("--config", help="JSON file holding the same keys as the flags")
        p.add_argument("--seed", type=int, help=f"RNG seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
        p.add_argument("--output", help="output file (orbit) or directory (reports)")
        if surface:
            p.add_argument("--surface", help='e.g. "sphere:1.0" or "ellipsoid:0.8,1,1.2"')

    p = sub.add_parser("orbit", help="trace an orbit and print or save it as CSV")
    common(p)
    p.add_argument("--start", help="comma-separated coordinates on the surface")
    p.add_argument("--direction", help="comma-separated tangent direction hint")
    p.add_argument("--angle", type=float, help="reflection angle in (0, pi/2]")
    p.add_argument("--v-norm", dest="v_norm", type=float, help="tangential speed in [0, 1)")
    p.add_argument("--n-bounces", dest="n_bounces", type=int)

    p = sub.add_parser("variation", help="classify the second variation of an orbit segment")
    common(p)
    p.add_argument("--start", help="comma-separated coordinates on the surface")
    p.add_argument("--direction", help="comma-separated tangent direction hint")
    p.add_argument("--angle", type=float)
    p.add_argument("--v-norm", dest="v_norm", type=float)
    p.add_argument("--n", type=int, help="number of interior vertices")

    p = sub.add_parser("conjugate", help="locate a kernel of the form along a launch ray")
    common(p)
    p.add_argument("--start", help="comma-separated coordinates on the surface")
    p.add_argument("--direction", help="comma-separated tangent direction hint")
    p.add_argument("--n", type=int, help="number of interior vertices")
    p.add_argument("--search", help="tangential-speed interval, e.g. 0.6,0.95")

    p = sub.add_parser("maximizer-scan", help="classify forms over a polar grid of launches")
    common(p)
    p.add_argument("--start", help="comma-separated coordinates on the surface")
    p.add_argument("--n", type=int, help="number of interior vertices")
    p.add_argument("--directions", type=int)
    p.add_argument("--radial-grid", dest="radial_grid", type=int)

    p = sub.add_parser("experiment", help="run a reproducible report")
    p.add_argument("name", choices=EXPERIMENTS)
    common(p)
    p.add_argument("--alpha", type=float, help="sphere reflection angle")
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--semi-axes", dest="semi_axes", help="e.g. 0.3,1,1.2")
    p.add_argument("--samples", type=int)
    p.add_argument("--angle-grid", dest="angle_grid", type=int)
    p.add_argument("--point-samples", dest="point_samples", type=int)
    p.add_argument("--caustic", type=float)
    p.add_argument("--n-bounces", dest="n_bounces", type=int)
    return parser


_LIST_KEYS = ("start", "direction", "search", "semi_axes")
_FLAG_KEYS = (
    "surface", "start", "direction", "angle", "v_norm", "n_bounces", "n",
    "search", "directions", "radial_grid", "output",
    "alpha", "n_max", "semi_axes", "samples", "angle_grid", "point_samples", "caustic",
)


def _gather(args: argparse.Namespace) -> dict:
    """Merge config file, flags, and environment into one run description."""
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config", "top level must be an object")
        data = loaded
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key in _LIST_KEYS and isinstance(value, str):
            try:
                value = [float(v) for v in value.split(",")]
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {value!r} as numbers") from exc
        data[key] = value
    data["command"] = args.command
    if args.command == "experiment":
        data["experiment"] = args.name
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    elif "seed" not in data and os.environ.get(SEED_ENV):
        try:
            data["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError("seed", f"${SEED_ENV} is not an integer") from exc
    return data


# ---------------------------------------------------------------------------
# run dispatch


def run(config: RunConfig) -> int:
    if config.command == "orbit":
        return _run_orbit(config)
    if config.command == "variation":
        return _run_variation(config)
    if config.command == "conjugate":
        return _run_conjugate(config)
    if config.command == "maximizer-scan":
        return _run_scan(config)
    return _run_experiment(config)


def _launch_v_norm(config: RunConfig) -> float:
    if config.v_norm is not None:
        return config.v_norm
    return float(np.cos(config.angle))


def _run_orbit(config: RunConfig) -> int:
    p = phase_point(config.surface, config.start, config.direction,
                    angle=config.angle, v_norm=config.v_norm)
    segment = orbit(config.surface, p, config.n_bounces)
    total = sum(c.length for c in segment.chords)
    if config.output:
        orbit_to_csv(segment, config.output)
        print(f"wrote {config.output}")
    print(f"bounces: {segment.n_bounces}")
    print(f"total length: {total:.12g}")
    print(f"smallest reflection sine: {float(segment.sines.min()):.12g}")
    return 0


def _run_variation(config: RunConfig) -> int:
    form = interior_form(config.surface, config.start, config.direction,
                         _launch_v_norm(config), config.n)
    report = definiteness(form)
    print(f"interior vertices: {config.n}")
    print(f"classification: {report.classification}")
    print(f"eigenvalue range: [{report.eigenvalues.min():.12g}, {report.eigenvalues.max():.12g}]")
    print(f"kernel dimension: {report.kernel_basis.shape[1]}")
    if config.output:
        payload = {
            "classification": report.classification,
            "eigenvalues": report.eigenvalues.tolist(),
            "tol": report.tol,
            "n": config.n,
        }
        Path(config.output).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {config.output}")
    return 0


def _run_conjugate(config: RunConfig) -> int:
    result = detect_conjugate(config.surface, config.start, config.direction,
                              config.n, search=config.search)
    print(f"tangential speed at crossing: {result.v_norm:.12g}")
    print(f"reflection sine at crossing: {result.v_hat:.12g}")
    print(f"kernel eigenvalue: {result.eigenvalue:.6g}")
    print(f"max recurrence residual: {float(result.field.residuals.max()):.6g}")
    print(f"bisection steps: {result.iterations}")
    if config.output:
        payload = {
            "v_norm": result.v_norm,
            "v_hat": result.v_hat,
            "eigenvalue": result.eigenvalue,
            "residual": float(result.field.residuals.max()),
            "kernel_field": [v.tolist() for v in result.field.vectors],
        }
        Path(config.output).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {config.output}")
    return 0


def _run_scan(config: RunConfig) -> int:
    scan = maximizer_set_sample(config.surface, config.start, config.n,
                                config.directions, config.radial_grid)
    counts: dict[str, int] = {}
    for sample in scan.samples:
        counts[sample.classification] = counts.get(sample.classification, 0) + 1
    print(f"grid: {config.directions} directions x {config.radial_grid} radii")
    for name in sorted(counts):
        print(f"  {name}: {counts[name]}")
    print(f"boundary transitions: {len(scan.boundary_points)}")
    floor = scan.grazing_floor
    print(f"grazing floor: {'n/a' if floor is None else f'{floor:.12g}'}")
    print(f"nesting violations: {len(scan.nesting_violations)}")
    print(f"inclusion violations: {len(scan.inclusion_violations)}")
    if config.output:
        payload = {
            "n": scan.n,
            "x": scan.x.tolist(),
            "samples": [
                {
                    "direction": s.direction.tolist(),
                    "r": s.r,
                    "v_hat": s.v_hat,
                    "classification": s.classification,
                    "classification_next": s.classification_next,
                    "min_sin": None if np.isnan(s.min_sin) else s.min_sin,
                }
                for s in scan.samples
            ],
            "grazing_floor": floor,
            "nesting_violations": len(scan.nesting_violations),
            "inclusion_violations": len(scan.inclusion_violations),
        }
        Path(config.output).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {config.output}")
    return 0


def _run_experiment(config: RunConfig) -> int:
    params = config.experiment_params
    if config.experiment == "sphere":
        report = sphere_report(params["alpha"], params["n_max"], output_dir=config.output)
    elif config.experiment == "ellipsoid-flat":
        a1, a2, a3 = params["semi_axes"]
        report = ellipsoid_flat_point_check(a1, a2, a3, samples=params["samples"],
                                            seed=config.seed, output_dir=config.output)
    elif config.experiment == "angle-threshold":
        report = angle_threshold_estimate(config.surface, params["angle_grid"],
                                          params["point_samples"], seed=config.seed,
                                          output_dir=config.output)
    else:
        a, b, c = params["semi_axes"]
        report = symmetric_lift_check(a, b, c, params["caustic"], params["n_bounces"],
                                      seed=config.seed, output_dir=config.output)
    for check in report.checks:
        mark = "PASS" if check.passed else "FAIL"
        extra = ""
        if check.observed is not None and check.bound is not None:
            extra = f" (observed {check.observed:.6g}, bound {check.bound:.6g})"
        print(f"[{mark}] {check.name}{extra}")
    if config.output:
        print(f"wrote {Path(config.output) / (report.name + '.report.json')}")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(json.dumps(_gather(args)))
        return run(config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NearTangentRay as err:
        where = f" at bounce {err.index}" if err.index is not None else ""
        print(f"error: ray grazed the surface{where}", file=sys.stderr)
        return 2
    except (BilliardError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

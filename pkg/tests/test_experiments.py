import json

import numpy as np
import pytest

from billiards.experiments import (
    angle_threshold_estimate,
    ellipsoid_flat_point_check,
    sphere_report,
    symmetric_lift_check,
)
from billiards.surface import Ellipsoid, Sphere


def check_names(report):
    return [c.name for c in report.checks]


@pytest.mark.parametrize("alpha", [0.9, np.pi / 4, np.pi / 3])
def test_sphere_report_passes(alpha):
    report = sphere_report(alpha=alpha, n_max=8)
    assert report.passed, [c.name for c in report.checks if not c.passed]
    assert "transversal-matches-closed-form" in check_names(report)
    assert "longitudinal-matches-closed-form" in check_names(report)


def test_sphere_report_diameter_case():
    report = sphere_report(alpha=np.pi / 2, n_max=6)
    assert report.passed
    names = check_names(report)
    assert "normal-incidence-chords" in names
    assert "longitudinal-matches-closed-form" not in names
    assert report.observations["first_nonmaximizing_numeric"] is None


def test_sphere_report_first_failure_length():
    # alpha = 0.9 > pi/4: the transversal spectrum reaches zero at n = 2
    report = sphere_report(alpha=0.9, n_max=8)
    assert report.observations["first_nonmaximizing_numeric"] == 2
    assert report.observations["first_nonmaximizing_analytic"] == 2


def test_sphere_report_validation():
    with pytest.raises(ValueError):
        sphere_report(alpha=0.0, n_max=5)
    with pytest.raises(ValueError):
        sphere_report(alpha=0.5, n_max=0)


def test_flat_point_accepts_flat_ellipsoid():
    report = ellipsoid_flat_point_check(0.3, 1.0, 1.2, samples=120, seed=42)
    assert report.passed
    assert report.observations["min_transversal_eigenvalue"] >= 0.23
    assert abs(report.observations["global_floor"] - (2.0 / 2.4 - 0.6)) < 1e-12


def test_flat_point_rejects_sphere():
    report = ellipsoid_flat_point_check(1.0, 1.0, 1.0, samples=40, seed=0)
    assert not report.passed
    failed = [c.name for c in report.checks if not c.passed]
    assert "flatness-condition" in failed


def test_flat_point_deterministic_for_fixed_seed():
    a = ellipsoid_flat_point_check(0.3, 1.0, 1.2, samples=50, seed=7)
    b = ellipsoid_flat_point_check(0.3, 1.0, 1.2, samples=50, seed=7)
    assert a.to_dict() == b.to_dict()


def test_angle_threshold_sphere_near_quarter_pi():
    report = angle_threshold_estimate(Sphere(1.0), angle_grid=64, point_samples=4, seed=42)
    assert report.passed
    step = report.observations["grid_step"]
    assert abs(report.observations["threshold"] - np.pi / 4) <= step + 1e-12


def test_angle_threshold_ellipsoid_below_sphere():
    report = angle_threshold_estimate(Ellipsoid([0.8, 1.0, 1.2]), angle_grid=64, point_samples=6, seed=42)
    assert report.passed
    assert 0.0 < report.observations["threshold"] <= np.pi / 4 + report.observations["grid_step"]


def test_angle_threshold_validation():
    with pytest.raises(ValueError):
        angle_threshold_estimate(Sphere(1.0), angle_grid=4)
    with pytest.raises(ValueError):
        angle_threshold_estimate(Sphere(1.0), point_samples=0)


def test_symmetric_lift_flat_cylinder_is_definite():
    report = symmetric_lift_check(1.5, 1.0, 0.2, caustic_parameter=0.5, n_bounces=12)
    assert report.passed
    names = check_names(report)
    assert "vertical-block-negative-definite" in names
    assert "full-form-negative-definite" in names
    assert report.observations["dominance"] is True
    assert report.observations["full_classification"] == "negative-definite"


def test_symmetric_lift_tall_cylinder_is_not():
    report = symmetric_lift_check(1.5, 1.0, 5.0, caustic_parameter=0.5, n_bounces=12)
    assert report.passed
    names = check_names(report)
    assert "vertical-diagonal-has-positive-entry" in names
    assert "full-form-not-negative-semidefinite" in names
    assert report.observations["dominance"] is False
    assert report.observations["full_classification"] == "indefinite"


def test_symmetric_lift_validation():
    with pytest.raises(ValueError):
        symmetric_lift_check(1.5, 1.0, 0.2, caustic_parameter=1.5)
    with pytest.raises(ValueError):
        symmetric_lift_check(1.5, 1.0, 0.2, caustic_parameter=0.5, n_bounces=2)


def test_report_files_are_deterministic(tmp_path):
    """Reports carry no timestamps: identical runs give identical bytes."""
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    sphere_report(alpha=0.9, n_max=5, output_dir=dir_a)
    sphere_report(alpha=0.9, n_max=5, output_dir=dir_b)
    file_a = dir_a / "sphere-forms.report.json"
    file_b = dir_b / "sphere-forms.report.json"
    assert file_a.read_bytes() == file_b.read_bytes()
    payload = json.loads(file_a.read_text())
    assert payload["name"] == "sphere-forms"
    assert payload["passed"] is True
    assert payload["artifacts"] == ["sphere-orbit.csv"]
    assert (dir_a / "sphere-orbit.csv").exists()
    for check in payload["checks"]:
        assert set(check) == {"name", "passed", "observed", "bound", "detail"}


def test_lift_report_writes_orbit_artifact(tmp_path):
    report = symmetric_lift_check(1.5, 1.0, 0.2, caustic_parameter=0.5,
                                  n_bounces=8, output_dir=tmp_path)
    assert (tmp_path / "symmetric-lift.report.json").exists()
    assert (tmp_path / "lift-orbit.csv").exists()
    assert report.artifacts == ["lift-orbit.csv"]

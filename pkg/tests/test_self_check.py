"""
tests/test_self_check.py
────────────────────────
Self-check suites.
Run with: pytest tests/ -v
"""

import pytest

from app.core.errors import FixtureMissingError
from app.services.self_check import run_checks


def test_fast_suite_passes():
    report = run_checks("fast")
    assert report.passed, [r for r in report.results if not r.passed]
    assert [r.name for r in report.results] == [
        "integral_symmetry",
        "pool_counts",
        "resource_table",
        "h2_fci_gaps",
        "structure",
    ]


def test_oracle_suite_passes():
    report = run_checks("oracle")
    assert report.passed, [r for r in report.results if not r.passed]
    assert report.suite == "oracle"


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_checks("slow")


def test_missing_fixture(tmp_path):
    with pytest.raises(FixtureMissingError):
        run_checks("fast", tmp_path)


def test_tampered_fixture_stops_after_table_checks(tmp_path, h2_path, h2_dipoles_path):
    (tmp_path / h2_path.name).write_text(h2_path.read_text() + "  0.5  2  1  1  2\n")
    (tmp_path / h2_dipoles_path.name).write_text(h2_dipoles_path.read_text())
    report = run_checks("fast", tmp_path)
    assert not report.passed
    assert len(report.results) == 3
    symmetry = report.results[0]
    assert symmetry.name == "integral_symmetry"
    assert not symmetry.passed
    assert "integral_symmetry" in symmetry.detail

"""
tests/test_resources_spectra.py
───────────────────────────────
Measurement-resource table and spectrum broadening.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.core.errors import SpectrumError
from app.core.models import (
    ExcitationRow,
    GroundStateSummary,
    MethodId,
    MethodResult,
    Peak,
    ResultDocument,
)
from app.services.resources import format_table, hermitian_decomposition, resource_estimate, resource_table
from app.services.spectra import broaden, integrated_intensity, lorentzian, spectra_from_document, write_spectrum


# ── resources ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("method, terms, feasibility, adjusted", [
    (MethodId.naive, 18, "near-term", None),
    (MethodId.SC, 9, "Hadamard-test", 16),
    (MethodId.ST, 7, "Hadamard-test", 10),
    (MethodId.proj, 10, "near-term", None),
    (MethodId.all_SC, 8, "near-term+decomposition", 24),
    (MethodId.all_ST, 3, "near-term+decomposition", 9),
    (MethodId.all_proj, 7, "near-term", None),
    (MethodId.ST_proj, 4, "Hadamard-test", 8),
])
def test_resource_rows(method, terms, feasibility, adjusted):
    row = resource_estimate(method)
    assert row.generic_terms == terms
    assert row.feasibility == feasibility
    assert row.adjusted_terms == adjusted


def test_resource_table_order_and_format():
    rows = resource_table()
    assert [r.method for r in rows] == list(MethodId)
    text = format_table(rows)
    for method in MethodId:
        assert method.value in text
    assert "herm: 16" in text


def test_hermitian_decomposition_recovers_real_part():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    op = m + m.conj().T
    left = rng.normal(size=5) + 1j * rng.normal(size=5)
    right = rng.normal(size=5) + 1j * rng.normal(size=5)
    expect = lambda v: float(np.real(np.vdot(v, op @ v)))
    assert hermitian_decomposition(expect, left, right) == pytest.approx(np.real(np.vdot(left, op @ right)))


# ── broadening ───────────────────────────────────────────────────────────────

PEAKS = [Peak(omega_ev=10.0, f=0.4), Peak(omega_ev=12.0, f=0.1)]


def test_gaussian_area_equals_total_strength():
    curve = broaden(PEAKS, "gaussian", 0.3, points=4000)
    assert integrated_intensity(curve) == pytest.approx(0.5, rel=1e-4)
    assert len(curve.energy_ev) == 4000
    assert min(curve.intensity) >= 0.0


def test_lorentzian_peak_height():
    curve = broaden(PEAKS[:1], "lorentzian", 0.2, points=2001)
    grid = np.asarray(curve.energy_ev)
    centre = int(np.argmin(np.abs(grid - 10.0)))
    assert curve.intensity[centre] == pytest.approx(0.4 * 2 / (np.pi * 0.2), rel=1e-3)
    assert lorentzian(np.array([10.1]), 10.0, 0.2)[0] == pytest.approx(0.5 * lorentzian(np.array([10.0]), 10.0, 0.2)[0])


@pytest.mark.parametrize("peaks, profile, width", [
    ([], "lorentzian", 0.2),
    (PEAKS, "voigt", 0.2),
    (PEAKS, "gaussian", 0.0),
])
def test_broaden_rejects(peaks, profile, width):
    with pytest.raises(SpectrumError):
        broaden(peaks, profile, width)


# ── documents ────────────────────────────────────────────────────────────────

def _document():
    rows = [
        ExcitationRow(index=0, omega_hartree=0.4, omega_ev=10.9, norm=1.0, oscillator_strength=0.3),
        ExcitationRow(index=1, omega_hartree=0.5, omega_ev=13.6, norm=-1.0, oscillator_strength=None, flagged=True),
    ]
    ground = GroundStateSummary(
        energy=-1.1, converged=True, theta_gradient_norm=0.0, kappa_gradient_norm=0.0,
        macro_iterations=0, n_theta=2, n_kappa=0, rank=2, active=(2, 2), spin_square=0.0,
    )
    return ResultDocument(
        n_orb=2,
        n_elec=2,
        ground_state=ground,
        methods=[
            MethodResult(method=MethodId.ST, herm=True, excitations=rows),
            MethodResult(method=MethodId.naive, error="error[qlr_engine]: Metric is numerically singular"),
        ],
    )


def test_spectra_from_document_skips_errors_and_flagged_rows():
    curves = spectra_from_document(_document(), "lorentzian", 0.2)
    assert [c.method for c in curves] == ["HST"]
    assert curves[0].peaks == [Peak(omega_ev=10.9, f=0.3)]


def test_spectra_from_document_without_usable_method():
    with pytest.raises(SpectrumError):
        spectra_from_document(_document(), methods=[MethodId.naive])


def test_write_spectrum(tmp_path):
    curve = spectra_from_document(_document(), "gaussian", 0.3)[0]
    spectrum_path, peaks_path = write_spectrum(curve, tmp_path / "out")
    assert spectrum_path.name == "HST_spectrum.csv"
    lines = spectrum_path.read_text().splitlines()
    assert lines[0] == "energy_ev,intensity"
    assert len(lines) == len(curve.energy_ev) + 1
    peaks = peaks_path.read_text().splitlines()
    assert peaks[0] == "omega_ev,f"
    assert [float(v) for v in peaks[1].split(",")] == pytest.approx([10.9, 0.3])

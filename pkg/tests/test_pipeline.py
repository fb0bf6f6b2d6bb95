"""
tests/test_pipeline.py
──────────────────────
End-to-end runs on the bundled H₂ fixture, result documents and the
per-method failure policy.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import MetricSingularError
from app.core.models import MethodId, OptimizerOptions, RunOptions
from app.services import pipeline
from app.services.dense_oracle import DenseOracle
from app.services.pipeline import read_document, run_from_text, write_document

TIGHT = OptimizerOptions(grad_tol=1e-8, theta_gradient="analytic")


@pytest.fixture(scope="module")
def texts(h2_path, h2_dipoles_path):
    return h2_path.read_text(), h2_dipoles_path.read_text()


@pytest.fixture(scope="module")
def artifacts(texts):
    options = RunOptions(active=(2, 2), methods=[MethodId.naive, MethodId.ST], frequencies=[0.05], optimizer=TIGHT)
    return run_from_text(*texts, options)


# ── run ──────────────────────────────────────────────────────────────────────

def test_document_shape(artifacts):
    doc = artifacts.document
    assert doc.n_orb == 2 and doc.n_elec == 2
    assert doc.ground_state.active == (2, 2)
    assert [m.method for m in doc.methods] == [MethodId.naive, MethodId.ST]
    assert all(m.error is None for m in doc.methods)
    assert set(artifacts.solutions) == {"naive", "ST"}


def test_all_active_methods_agree(artifacts):
    naive, st = artifacts.document.methods
    np.testing.assert_allclose(
        [row.omega_hartree for row in naive.excitations],
        [row.omega_hartree for row in st.excitations],
        atol=1e-7,
    )
    assert naive.excitations[0].oscillator_strength > 0.1
    assert naive.diagnostics.n_q == 0
    assert naive.diagnostics.complete_pool == 2


def test_dipole_properties_match_fci(h2, artifacts):
    _, operators = h2
    oracle = DenseOracle(artifacts.record, operators)
    for result in artifacts.document.methods:
        f = [row.oscillator_strength for row in result.excitations]
        np.testing.assert_allclose(f, oracle.fci_oscillator_strengths(), atol=1e-6)
        exact = oracle.fci_polarizability(0.05).real
        for entry in result.polarizabilities:
            np.testing.assert_allclose(entry.tensor, exact, atol=1e-6)
            assert entry.isotropic > 0.1


def test_polarizability_entries(artifacts):
    entries = artifacts.document.methods[0].polarizabilities
    assert [e.route for e in entries] == ["sos", "response"]
    assert all(e.frequency == 0.05 for e in entries)
    assert entries[0].isotropic == pytest.approx(entries[1].isotropic, abs=1e-8)
    assert entries[0].isotropic > 0


def test_resonant_frequency_is_skipped(texts, artifacts):
    omega = artifacts.document.methods[0].excitations[0].omega_hartree
    options = RunOptions(active=(2, 2), frequencies=[omega, 0.05], optimizer=TIGHT)
    entries = run_from_text(*texts, options).document.methods[0].polarizabilities
    assert [e.frequency for e in entries] == [0.05, 0.05]


def test_no_dipoles_gives_zero_strengths(texts):
    doc = run_from_text(texts[0], None, RunOptions(active=(2, 2), optimizer=TIGHT)).document
    assert all(row.oscillator_strength == 0.0 for row in doc.methods[0].excitations)


def test_herm_with_naive_rejected():
    with pytest.raises(ValidationError):
        RunOptions(active=(2, 2), methods=[MethodId.naive], herm=True)


def test_method_failure_is_recorded(texts, monkeypatch):
    real = pipeline.build_matrices

    def failing(method, *args, **kwargs):
        if method is MethodId.proj:
            raise MetricSingularError("Metric is numerically singular", smallest=0.0)
        return real(method, *args, **kwargs)

    monkeypatch.setattr(pipeline, "build_matrices", failing)
    options = RunOptions(active=(2, 2), methods=[MethodId.proj, MethodId.naive], optimizer=TIGHT)
    doc = run_from_text(*texts, options).document
    failed, ok = doc.methods
    assert failed.error.startswith("error[qlr_engine]")
    assert failed.excitations == []
    assert ok.error is None
    assert len(ok.excitations) == 2


# ── documents ────────────────────────────────────────────────────────────────

def test_write_and_read_document(tmp_path, artifacts):
    path = write_document(artifacts.document, tmp_path / "run")
    assert path.name == "result.json"
    again = read_document(path)
    assert again == artifacts.document
    assert again.schema_version == "1"

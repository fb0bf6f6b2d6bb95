"""
tests/test_qlr_matrices.py
──────────────────────────
Response matrices and property gradients of all eight methods against the
dense full-space reference, plus structural guarantees.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.core.config import settings
from app.core.errors import MethodConfigError
from app.core.models import HERMITIFIABLE, MethodId, OptimizerOptions
from app.services.oo_vqe import optimize
from app.services.qlr_matrices import MatrixBuilder, build_matrices, hermitify, property_gradient, q_scheme
from app.services.qlr_solver import solve
from app.services.response_windows import WindowCache
from app.services.space_partition import make_partition

METHODS = list(MethodId)


# ── against the dense reference ──────────────────────────────────────────────

@pytest.mark.parametrize("method", METHODS, ids=[m.value for m in METHODS])
def test_matrices_match_dense_reference(method, toy_record, toy_cache, toy_oracle):
    got = build_matrices(method, toy_record, cache=toy_cache)
    ref = toy_oracle.matrices(method)
    np.testing.assert_allclose(got.A, ref.A, atol=1e-8)
    np.testing.assert_allclose(got.B, ref.B, atol=1e-8)
    np.testing.assert_allclose(got.sigma, ref.sigma, atol=1e-8)
    np.testing.assert_allclose(ref.delta, 0.0, atol=1e-10)


@pytest.mark.parametrize("method", sorted(HERMITIFIABLE, key=lambda m: m.value), ids=lambda m: m.value)
def test_hermitified_matrices_match_dense_reference(method, toy_record, toy_cache, toy_oracle):
    got = build_matrices(method, toy_record, herm=True, cache=toy_cache)
    ref = toy_oracle.matrices(method, herm=True)
    np.testing.assert_allclose(got.A, ref.A, atol=1e-8)
    np.testing.assert_allclose(got.B, ref.B, atol=1e-8)
    n_q = got.n_q
    assert not np.any(got.B[n_q:, :n_q])
    assert got.herm


@pytest.mark.parametrize("method", [MethodId.SC, MethodId.ST], ids=["SC", "ST"])
def test_discarded_block_norm(method, toy_record, toy_cache, toy_oracle):
    got = build_matrices(method, toy_record, herm=True, cache=toy_cache)
    plain = build_matrices(method, toy_record, cache=toy_cache)
    n_q = plain.n_q
    assert got.b_gq_norm == pytest.approx(np.linalg.norm(plain.B[n_q:, :n_q]), abs=1e-10)
    assert got.b_gq_norm == pytest.approx(toy_oracle.matrices(method, herm=True).b_gq_norm, abs=1e-8)


@pytest.mark.parametrize("method", METHODS, ids=[m.value for m in METHODS])
def test_property_gradients_match_dense_reference(method, toy, toy_record, toy_cache, toy_oracle):
    _, operators = toy
    for label in ("x", "y", "z"):
        got = property_gradient(method, toy_record, operators, label, toy_cache)
        ref = toy_oracle.property_gradient(method, label)
        np.testing.assert_allclose(got.vector, ref.vector, atol=1e-8)


# ── structure ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("method", METHODS, ids=[m.value for m in METHODS])
def test_structure(method, toy_record, toy_cache):
    m = build_matrices(method, toy_record, cache=toy_cache)
    dev = m.structure_deviations()
    assert max(dev.values()) < settings.STRUCTURE_TOL
    assert m.size == m.n_q + m.n_g
    assert m.index[0][0] == "q"
    assert m.index[-1] == ("G", m.n_g - 1)


def test_q_pool_per_method(toy_record, toy_cache):
    assert q_scheme(MethodId.all_SC) == "reduced"
    assert build_matrices(MethodId.naive, toy_record, cache=toy_cache).n_q == 5
    assert build_matrices(MethodId.all_ST, toy_record, cache=toy_cache).n_q == 3


@pytest.mark.parametrize("method", [MethodId.ST, MethodId.all_ST], ids=["ST", "all-ST"])
def test_state_transfer_metric_is_identity_on_g_block(method, toy_record, toy_cache):
    m = build_matrices(method, toy_record, cache=toy_cache)
    n_q = m.n_q
    np.testing.assert_allclose(m.sigma[n_q:, n_q:], np.eye(m.n_g), atol=1e-12)
    assert not np.any(m.B[n_q:, n_q:])


# ── hermitify ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("method", sorted(HERMITIFIABLE, key=lambda m: m.value), ids=lambda m: m.value)
def test_hermitify_equals_direct_build(method, toy_record, toy_cache):
    plain = build_matrices(method, toy_record, cache=toy_cache)
    direct = build_matrices(method, toy_record, herm=True, cache=toy_cache)
    converted = hermitify(method, plain, toy_record, toy_cache)
    np.testing.assert_allclose(converted.A, direct.A, atol=1e-12)
    np.testing.assert_allclose(converted.B, direct.B, atol=1e-12)
    np.testing.assert_array_equal(converted.sigma, plain.sigma)
    assert converted.b_gq_norm == pytest.approx(direct.b_gq_norm)


@pytest.mark.parametrize("method", [MethodId.naive, MethodId.proj, MethodId.all_SC], ids=["naive", "proj", "all-SC"])
def test_herm_rejected_for_other_methods(method, toy_record, toy_cache):
    with pytest.raises(MethodConfigError):
        build_matrices(method, toy_record, herm=True, cache=toy_cache)
    with pytest.raises(MethodConfigError):
        hermitify(method, build_matrices(MethodId.naive, toy_record, cache=toy_cache), toy_record, toy_cache)


def test_rank_mismatch_rejected(toy_record, toy_cache):
    with pytest.raises(MethodConfigError):
        build_matrices(MethodId.naive, toy_record, cache=toy_cache, rank=toy_record.rank + 1)


# ── property gradients ───────────────────────────────────────────────────────

def test_missing_component_gives_zero_gradient(h2, h2_record):
    _, operators = h2
    grad = property_gradient(MethodId.naive, h2_record, operators, "x")
    assert not np.any(grad.vector)
    grad_z = property_gradient(MethodId.naive, h2_record, operators, "z")
    assert np.any(np.abs(grad_z.vector) > 1e-3)


def test_gradient_without_operators(h2_record):
    grad = property_gradient(MethodId.ST, h2_record, None, "z")
    assert grad.vector.shape == (2 * len(h2_record.pool),)
    assert not np.any(grad.vector)


def test_builder_keeps_caller_cache(h2, h2_record):
    _, operators = h2
    cache = WindowCache(h2_record, operators)
    assert MatrixBuilder(MethodId.naive, h2_record, cache).cache is cache
    grad = property_gradient(MethodId.naive, h2_record, operators, "z", cache)
    assert cache.operators is operators
    assert np.any(np.abs(grad.vector) > 1e-3)


# ── hermitification limit ────────────────────────────────────────────────────

def _decoupled(integrals, block):
    """Drop every integral linking `block` to the other orbitals except (pp|tt) Coulomb terms."""
    n = integrals.n_orb
    inside = np.isin(np.arange(n), block).astype(int)
    h = np.where(inside[:, None] == inside[None, :], integrals.h, 0.0)
    count = inside[:, None, None, None] + inside[None, :, None, None] + inside[None, None, :, None] + inside[None, None, None, :]
    diag = np.eye(n, dtype=bool)
    keep = (count == 0) | (count == 4) | (diag[:, :, None, None] & diag[None, None, :, :])
    return integrals.replace(h=h, g=np.where(keep, integrals.g, 0.0))


@pytest.mark.parametrize("method", [MethodId.SC, MethodId.ST], ids=["SC", "ST"])
def test_hermitified_spectrum_equals_plain_without_gq_coupling(method, toy):
    integrals, _ = toy
    partition = make_partition(4, 4, (2, 2))
    record = optimize(_decoupled(integrals, partition.active), partition, 2, OptimizerOptions(grad_tol=1e-8, theta_gradient="analytic"))
    plain = build_matrices(method, record)
    herm = build_matrices(method, record, herm=True)
    assert plain.n_q == 5
    assert herm.b_gq_norm < 1e-8
    np.testing.assert_allclose(solve(herm).omega, solve(plain).omega, atol=1e-8)

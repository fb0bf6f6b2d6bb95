"""
tests/test_orbital_rotation.py
──────────────────────────────
Rotation pools, the exponential orbital rotation and integral transforms.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.services.fock_engine import active_space, casci
from app.services.orbital_rotation import build_rotation_pool, rotation_matrix, transform_integrals
from app.services.space_partition import effective_active_hamiltonian, make_partition


# ── rotation pools ───────────────────────────────────────────────────────────

def test_rotation_pool_sizes():
    part = make_partition(4, 4, (2, 2))
    naive = build_rotation_pool(part, "naive")
    reduced = build_rotation_pool(part, "reduced")
    assert naive.pairs == ((3, 0), (3, 1), (3, 2), (1, 0), (2, 0))
    assert reduced.pairs == ((3, 0), (3, 1), (2, 0))


def test_all_active_has_no_rotations():
    part = make_partition(2, 2, (2, 2))
    assert len(build_rotation_pool(part)) == 0


def test_unknown_scheme():
    with pytest.raises(ValueError):
        build_rotation_pool(make_partition(4, 4, (2, 2)), "minimal")


# ── rotations ────────────────────────────────────────────────────────────────

def test_rotation_matrix_is_orthogonal():
    part = make_partition(4, 4, (2, 2))
    pool = build_rotation_pool(part)
    c = rotation_matrix(pool, np.linspace(-0.5, 0.5, len(pool)))
    np.testing.assert_allclose(c.T @ c, np.eye(4), atol=1e-12)


def test_opposite_rotation_restores_integrals(toy):
    integrals, _ = toy
    pool = build_rotation_pool(make_partition(4, 4, (2, 2)))
    kappa = np.random.default_rng(4).uniform(-0.4, 0.4, len(pool))
    forward = transform_integrals(integrals, rotation_matrix(pool, kappa))
    assert np.max(np.abs(forward.h - integrals.h)) > 1e-3
    back = transform_integrals(forward, rotation_matrix(pool, -kappa))
    np.testing.assert_allclose(back.h, integrals.h, atol=1e-12)
    np.testing.assert_allclose(back.g, integrals.g, atol=1e-12)
    assert back.e_core == integrals.e_core


def test_full_rotation_keeps_fci_energy(toy):
    integrals, _ = toy
    part = make_partition(4, 4, (4, 4))
    pool = build_rotation_pool(make_partition(4, 4, (2, 2)))
    rotated = transform_integrals(integrals, rotation_matrix(pool, np.full(len(pool), 0.2)))
    before = casci(active_space(part), effective_active_hamiltonian(integrals, part)).energies[0]
    after = casci(active_space(part), effective_active_hamiltonian(rotated, part)).energies[0]
    assert after == pytest.approx(before, abs=1e-10)

"""
tests/test_excitation_pool.py
─────────────────────────────
Spin-adapted pool construction, pool counts and the UCC unitary.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.core.errors import PoolRankError
from app.services.excitation_pool import (
    UCCAnsatz,
    build_pool,
    count_complete_pool,
    parse_rank,
    pool_operator_images,
    pool_summary,
    sd_pool_size,
)
from app.services.fock_engine import active_space
from app.services.space_partition import make_partition


# ── counts ───────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("cas, sd, complete", [
    ((2, 2), 2, 2),
    ((4, 4), 14, 19),
    ((4, 6), 44, 104),
    ((6, 6), 54, 174),
])
def test_pool_counts(cas, sd, complete):
    n_elec, n_orb = cas
    part = make_partition(n_orb, n_elec, cas)
    assert len(build_pool(part, 2)) == sd
    assert sd_pool_size(part.n_occ_act, n_orb - part.n_occ_act) == sd
    assert count_complete_pool(part) == complete


def test_full_rank_pool_is_complete():
    part = make_partition(4, 4, (4, 4))
    pool = build_pool(part, parse_rank("full", part))
    assert len(pool) == count_complete_pool(part)
    assert pool_summary(pool)["single"] == 4


def test_pool_ordering_singles_first():
    part = make_partition(4, 4, (4, 4))
    kinds = [op.kind for op in build_pool(part, 2)]
    assert kinds[:4] == ["single"] * 4
    assert kinds.index("double-antisymmetric") > kinds.index("double-symmetric")


def test_higher_rank_images_are_orthonormal():
    part = make_partition(4, 4, (4, 4))
    pool = [op for op in build_pool(part, 4) if op.rank >= 3]
    images = pool_operator_images(pool, active_space(part))
    np.testing.assert_allclose(images.conj() @ images.T, np.eye(len(pool)), atol=1e-10)


def test_single_images_are_normalized():
    part = make_partition(4, 4, (4, 4))
    singles = [op for op in build_pool(part, 1)]
    images = pool_operator_images(singles, active_space(part))
    np.testing.assert_allclose(np.linalg.norm(images, axis=1), 1.0)


# ── rank parsing ─────────────────────────────────────────────────────────────

def test_parse_rank():
    part = make_partition(6, 6, (6, 6))
    assert parse_rank("sd") == 2
    assert parse_rank("SDTQ") == 4
    assert parse_rank("3") == 3
    assert parse_rank("full", part) == 6


def test_parse_rank_unknown():
    with pytest.raises(PoolRankError):
        parse_rank("sdx")


def test_rank_beyond_active_electrons():
    part = make_partition(2, 2, (2, 2))
    with pytest.raises(PoolRankError):
        build_pool(part, 3)


# ── UCC ──────────────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def ansatz():
    part = make_partition(4, 4, (4, 4))
    return UCCAnsatz(build_pool(part, 2), active_space(part))


def test_ucc_state_is_normalized(ansatz):
    theta = np.linspace(-0.3, 0.3, ansatz.size)
    assert np.linalg.norm(ansatz.state(theta)) == pytest.approx(1.0)


def test_ucc_adjoint_inverts(ansatz):
    theta = np.linspace(-0.2, 0.4, ansatz.size)
    ref = ansatz.space.reference_state()
    back = ansatz.apply(theta, ansatz.apply(theta, ref), adjoint=True)
    np.testing.assert_allclose(back, ref, atol=1e-10)


def test_ucc_zero_amplitudes_is_reference(ansatz):
    np.testing.assert_array_equal(ansatz.state(np.zeros(ansatz.size)), ansatz.space.reference_state())


def test_state_derivatives_match_finite_difference(ansatz):
    theta = np.linspace(-0.1, 0.2, ansatz.size)
    analytic = ansatz.state_derivatives(theta)
    step = 1e-6
    for k in (0, 5, ansatz.size - 1):
        shift = np.zeros_like(theta)
        shift[k] = step
        fd = (ansatz.state(theta + shift) - ansatz.state(theta - shift)) / (2 * step)
        np.testing.assert_allclose(analytic[k], fd, atol=1e-7)


@pytest.mark.parametrize("rank", [3, 4])
def test_higher_rank_ucc_state_is_singlet(rank):
    part = make_partition(6, 4, (4, 6))
    ucc = UCCAnsatz(build_pool(part, rank), active_space(part))
    theta = np.random.default_rng(rank).uniform(-0.5, 0.5, ucc.size)
    psi = ucc.state(theta)
    assert np.max(np.abs(psi - ucc.space.reference_state())) > 1e-2
    assert ucc.space.spin_square(psi) == pytest.approx(0.0, abs=1e-10)

"""
tests/test_space_partition.py
─────────────────────────────
Partitioning, orbital reordering and the frozen-core active Hamiltonian.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.core.errors import PartitionError
from app.services.dense_oracle import embedding_energy
from app.services.fock_engine import active_space
from app.services.self_check import synthetic_system
from app.services.space_partition import apply_ordering, effective_active_hamiltonian, make_partition


# ── make_partition ───────────────────────────────────────────────────────────

def test_default_partition_blocks():
    part = make_partition(6, 6, (2, 3))
    assert part.inactive == (0, 1)
    assert part.active == (2, 3, 4)
    assert part.virtual == (5,)
    assert part.occupied_active == (2,)
    assert part.unoccupied_active == (3, 4)
    assert part.n_elec == 6
    assert part.is_contiguous


def test_ordering_selects_orbitals():
    part = make_partition(4, 2, (2, 2), ordering=[1, 3, 0, 2])
    assert part.inactive == ()
    assert part.active == (1, 3)
    assert part.virtual == (0, 2)
    assert not part.is_contiguous


@pytest.mark.parametrize("n_elec, cas", [
    (4, (3, 2)),    # odd active electrons
    (5, (2, 2)),    # odd inactive electrons
    (4, (2, 5)),    # window beyond n_orb
    (4, (6, 4)),    # more active electrons than electrons
    (4, (4, 1)),    # active orbitals cannot hold them
])
def test_invalid_partitions(n_elec, cas):
    with pytest.raises(PartitionError):
        make_partition(4, n_elec, cas)


def test_ordering_must_be_permutation():
    with pytest.raises(PartitionError):
        make_partition(3, 2, (2, 2), ordering=[0, 0, 1])


# ── apply_ordering ───────────────────────────────────────────────────────────

def test_apply_ordering_moves_integrals():
    integrals, operators = synthetic_system(4, 2, seed=1)
    part = make_partition(4, 2, (2, 2), ordering=[2, 0, 1, 3])
    moved, moved_ops, contiguous = apply_ordering(integrals, part, operators)
    assert contiguous.active == (0, 1)
    assert moved.h[0, 1] == integrals.h[2, 0]
    assert moved.g[0, 0, 1, 1] == integrals.g[2, 2, 0, 0]
    assert moved_ops.matrices["z"][1, 0] == operators.matrices["z"][0, 2]


def test_apply_ordering_identity_is_noop(toy):
    integrals, operators = toy
    part = make_partition(4, 4, (2, 2))
    moved, moved_ops, contiguous = apply_ordering(integrals, part, operators)
    assert moved is integrals
    assert moved_ops is operators
    assert contiguous == part


# ── effective Hamiltonian ────────────────────────────────────────────────────

def test_frozen_core_energy_matches_full_space(toy):
    integrals, _ = toy
    part = make_partition(4, 4, (2, 2))
    ham = effective_active_hamiltonian(integrals, part)
    space = active_space(part)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    psi /= np.linalg.norm(psi)
    assert space.energy(ham, psi) == pytest.approx(embedding_energy(integrals, part, psi), abs=1e-10)


def test_all_active_has_no_frozen_dressing(h2):
    integrals, _ = h2
    part = make_partition(2, 2, (2, 2))
    ham = effective_active_hamiltonian(integrals, part)
    np.testing.assert_array_equal(ham.h_eff, integrals.h)
    assert ham.e_frozen == integrals.e_core

"""
app/services/space_partition.py
───────────────────────────────
Inactive / active / virtual partition and the effective active Hamiltonian.

Downstream code works in a frame where the three blocks are contiguous
(inactive first, then active, then virtual). `apply_ordering` moves the
integrals into that frame when an explicit orbital permutation is requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from app.core.errors import PartitionError
from app.services.integrals_io import IntegralSet, OneElectronOperatorSet
from app.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SpacePartition:
    inactive: Tuple[int, ...]
    active: Tuple[int, ...]
    virtual: Tuple[int, ...]
    n_act_elec: int

    @property
    def n_orb(self) -> int:
        return len(self.inactive) + len(self.active) + len(self.virtual)

    @property
    def n_act_orb(self) -> int:
        return len(self.active)

    @property
    def n_elec(self) -> int:
        return self.n_act_elec + 2 * len(self.inactive)

    @property
    def n_occ_act(self) -> int:
        """Spatial active orbitals doubly occupied in the reference (|v_i|)."""
        return self.n_act_elec // 2

    @property
    def occupied_active(self) -> Tuple[int, ...]:
        return self.active[: self.n_occ_act]

    @property
    def unoccupied_active(self) -> Tuple[int, ...]:
        return self.active[self.n_occ_act:]

    @property
    def is_contiguous(self) -> bool:
        return self.inactive + self.active + self.virtual == tuple(range(self.n_orb))

    def label(self) -> str:
        return f"({self.n_act_elec},{self.n_act_orb})"


@dataclass(frozen=True)
class ActiveHamiltonian:
    h_eff: np.ndarray
    g_act: np.ndarray
    e_frozen: float

    @property
    def n_orb(self) -> int:
        return self.h_eff.shape[0]


def make_partition(
    n_orb: int,
    n_elec: int,
    cas: Tuple[int, int],
    ordering: Sequence[int] | None = None,
) -> SpacePartition:
    """
    Lowest (n_elec − n_act_elec)/2 orbitals after `ordering` are inactive,
    the next n_act_orb are active, the rest virtual.

    Raises:
        PartitionError: odd inactive electron count, odd active electron count,
        or an active window that does not fit in n_orb.
    """
    n_act_elec, n_act_orb = cas
    order = tuple(range(n_orb)) if ordering is None else tuple(int(o) for o in ordering)
    if sorted(order) != list(range(n_orb)):
        raise PartitionError("Ordering is not a permutation of the orbitals", n_orb=n_orb)
    if n_act_elec < 0 or n_act_orb < 0:
        raise PartitionError("Active space counts must be non-negative", cas=cas)
    if n_act_elec > n_elec:
        raise PartitionError("More active electrons than electrons", n_act_elec=n_act_elec, n_elec=n_elec)
    if (n_elec - n_act_elec) % 2:
        raise PartitionError("Odd number of inactive electrons", n_elec=n_elec, n_act_elec=n_act_elec)
    if n_act_elec % 2:
        raise PartitionError("Closed-shell reference needs an even active electron count", n_act_elec=n_act_elec)
    if n_act_elec > 2 * n_act_orb:
        raise PartitionError("Active orbitals cannot hold the active electrons", cas=cas)
    n_inact = (n_elec - n_act_elec) // 2
    if n_inact + n_act_orb > n_orb:
        raise PartitionError("Active window exceeds the orbital count", n_orb=n_orb, cas=cas)

    partition = SpacePartition(
        inactive=order[:n_inact],
        active=order[n_inact:n_inact + n_act_orb],
        virtual=order[n_inact + n_act_orb:],
        n_act_elec=n_act_elec,
    )
    logger.info("Partition built", inactive=n_inact, active=n_act_orb,
                virtual=len(partition.virtual), n_act_elec=n_act_elec)
    return partition


def apply_ordering(
    integrals: IntegralSet,
    partition: SpacePartition,
    operators: OneElectronOperatorSet | None = None,
) -> Tuple[IntegralSet, OneElectronOperatorSet | None, SpacePartition]:
    """Permute tensors so the partition becomes contiguous; returns the partition in the new frame."""
    perm = np.array(partition.inactive + partition.active + partition.virtual, dtype=int)
    contiguous = SpacePartition(
        inactive=tuple(range(len(partition.inactive))),
        active=tuple(range(len(partition.inactive), len(partition.inactive) + partition.n_act_orb)),
        virtual=tuple(range(len(partition.inactive) + partition.n_act_orb, partition.n_orb)),
        n_act_elec=partition.n_act_elec,
    )
    if partition.is_contiguous:
        return integrals, operators, contiguous

    h = integrals.h[np.ix_(perm, perm)]
    g = integrals.g[np.ix_(perm, perm, perm, perm)]
    orbsym = tuple(integrals.orbsym[p] for p in perm) if integrals.orbsym else ()
    moved = integrals.replace(h=h, g=g, orbsym=orbsym)
    moved_ops = None
    if operators is not None:
        moved_ops = OneElectronOperatorSet(
            n_orb=operators.n_orb,
            matrices={k: v[np.ix_(perm, perm)] for k, v in operators.matrices.items()},
        )
    logger.info("Orbitals reordered", permutation=perm.tolist())
    return moved, moved_ops, contiguous


def frozen_core_hamiltonian(
    h: np.ndarray,
    g: np.ndarray,
    e_core: float,
    frozen: Sequence[int],
    kept: Sequence[int],
) -> ActiveHamiltonian:
    """Dress the `kept` block with doubly occupied `frozen` orbitals."""
    f = np.asarray(frozen, dtype=int)
    k = np.asarray(kept, dtype=int)
    h_eff = h[np.ix_(k, k)].copy()
    e_frozen = float(e_core)
    if f.size:
        coulomb = np.einsum("xyff->xy", g[np.ix_(k, k, f, f)])
        exchange = np.einsum("xffy->xy", g[np.ix_(k, f, f, k)])
        h_eff += 2.0 * coulomb - exchange
        g_ff = g[np.ix_(f, f, f, f)]
        e_frozen += 2.0 * float(np.trace(h[np.ix_(f, f)]))
        e_frozen += 2.0 * float(np.einsum("iijj->", g_ff)) - float(np.einsum("ijji->", g_ff))
    g_act = g[np.ix_(k, k, k, k)].copy()
    return ActiveHamiltonian(h_eff=h_eff, g_act=g_act, e_frozen=e_frozen)


def effective_active_hamiltonian(integrals: IntegralSet, partition: SpacePartition) -> ActiveHamiltonian:
    """h_eff(vw) = h(vw) + Σ_i [2 g(vw,ii) − g(vi,iw)]; e_frozen is the closed-shell inactive energy."""
    if partition.n_orb != integrals.n_orb:
        raise PartitionError("Partition does not match the integral set",
                             partition_orbs=partition.n_orb, n_orb=integrals.n_orb)
    return frozen_core_hamiltonian(
        integrals.h, integrals.g, integrals.e_core, partition.inactive, partition.active
    )


def effective_one_body(matrix: np.ndarray, frozen: Sequence[int], kept: Sequence[int]) -> Tuple[np.ndarray, float]:
    """One-electron operator restricted to `kept`, plus the frozen contribution Σ_f 2 m_ff."""
    f = np.asarray(frozen, dtype=int)
    k = np.asarray(kept, dtype=int)
    constant = 2.0 * float(np.sum(matrix[f, f])) if f.size else 0.0
    return matrix[np.ix_(k, k)].copy(), constant

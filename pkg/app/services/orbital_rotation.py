"""
app/services/orbital_rotation.py
────────────────────────────────
Orbital-rotation bookkeeping and the exp(−K) integral transformation.

A rotation pair (p, q) stands for κ_pq Ê⁻_pq = κ_pq (Ê_pq − Ê_qp); p is the
target orbital, q the source. The antisymmetric generator has K_pq = κ_pq,
K_qp = −κ_pq and the orbitals transform with C = exp(−K):

    h'_pq   = Σ C_ap C_bq h_ab
    g'_pqrs = Σ C_ap C_bq C_cr C_ds g_abcd

The four-index transform runs as four one-index passes. The κ-gradient at
κ = 0 is 2(F_pq − F_qp) with the generalized Fock matrix
F_pq = Σ_r D_pr h_qr + Σ_rst d_prst g_qrst over full-space RDMs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import expm, expm_frechet

from app.services.fock_engine import DensityMatrices
from app.services.integrals_io import IntegralSet
from app.services.space_partition import SpacePartition
from app.utils.logger import get_logger

logger = get_logger(__name__)

SCHEMES = ("naive", "reduced")


@dataclass(frozen=True)
class RotationPool:
    scheme: str
    pairs: Tuple[Tuple[int, int], ...]
    n_orb: int

    def __len__(self) -> int:
        return len(self.pairs)

    def externals(self, index: int, partition: SpacePartition) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """Inactive and virtual orbitals touched by pair `index`."""
        p, q = self.pairs[index]
        inactive = tuple(sorted({x for x in (p, q) if x in partition.inactive}))
        virtual = tuple(sorted({x for x in (p, q) if x in partition.virtual}))
        return inactive, virtual


@dataclass(frozen=True)
class KappaParameters:
    kappa: np.ndarray
    pool: RotationPool

    def __post_init__(self) -> None:
        if len(self.kappa) != len(self.pool):
            raise ValueError(f"kappa has {len(self.kappa)} entries, pool has {len(self.pool)}")


def build_rotation_pool(partition: SpacePartition, scheme: str = "naive") -> RotationPool:
    """
    naive:   ai, then av, then vi
    reduced: ai, then a v_i, then v_a i  ({v_i i, a v_a} removed)
    """
    inact, act, virt = partition.inactive, partition.active, partition.virtual
    if scheme == "naive":
        pairs = (
            [(a, i) for i in inact for a in virt]
            + [(a, v) for v in act for a in virt]
            + [(v, i) for i in inact for v in act]
        )
    elif scheme == "reduced":
        pairs = (
            [(a, i) for i in inact for a in virt]
            + [(a, v) for v in partition.occupied_active for a in virt]
            + [(v, i) for i in inact for v in partition.unoccupied_active]
        )
    else:
        raise ValueError(f"Unknown rotation scheme {scheme!r}; expected one of {SCHEMES}")
    return RotationPool(scheme=scheme, pairs=tuple(pairs), n_orb=partition.n_orb)


def kappa_matrix(pool: RotationPool, kappa: np.ndarray) -> np.ndarray:
    k = np.zeros((pool.n_orb, pool.n_orb))
    for (p, q), value in zip(pool.pairs, kappa):
        k[p, q] += value
        k[q, p] -= value
    return k


def rotation_matrix(pool: RotationPool, kappa: np.ndarray) -> np.ndarray:
    """C = exp(−K), orthogonal by construction (scaling-and-squaring Padé)."""
    return expm(-kappa_matrix(pool, kappa))


def transform_one_body(m: np.ndarray, c: np.ndarray) -> np.ndarray:
    return c.T @ m @ c


def transform_two_body(g: np.ndarray, c: np.ndarray) -> np.ndarray:
    g = np.einsum("ap,abcd->pbcd", c, g, optimize=True)
    g = np.einsum("bq,pbcd->pqcd", c, g, optimize=True)
    g = np.einsum("cr,pqcd->pqrd", c, g, optimize=True)
    return np.einsum("ds,pqrd->pqrs", c, g, optimize=True)


def transform_integrals(integrals: IntegralSet, c: np.ndarray) -> IntegralSet:
    return integrals.replace(h=transform_one_body(integrals.h, c), g=transform_two_body(integrals.g, c))


def rotate_integrals(integrals: IntegralSet, kappa: KappaParameters) -> IntegralSet:
    if not np.any(kappa.kappa):
        return integrals
    return transform_integrals(integrals, rotation_matrix(kappa.pool, kappa.kappa))


# ── Full-space densities and the generalized Fock matrix ─────────────────────

def full_space_densities(active: DensityMatrices, partition: SpacePartition) -> Tuple[np.ndarray, np.ndarray]:
    """Embed active RDMs with doubly occupied inactive orbitals; returns real (D, d)."""
    n = partition.n_orb
    inact = np.asarray(partition.inactive, dtype=int)
    act = np.asarray(partition.active, dtype=int)
    d_act = np.real(active.one)
    dd_act = np.real(active.two)

    D = np.zeros((n, n))
    D[inact, inact] = 2.0
    D[np.ix_(act, act)] = d_act

    d = np.zeros((n, n, n, n))
    d[np.ix_(act, act, act, act)] = dd_act
    for i in inact:
        for j in inact:
            d[i, i, j, j] += 4.0
            d[i, j, j, i] -= 2.0
        d[np.ix_([i], [i], act, act)] = 2.0 * d_act[None, None]
        d[np.ix_(act, act, [i], [i])] = 2.0 * d_act[:, :, None, None]
        # exchange: d_ivwi = d_wiiv = −D_wv
        d[np.ix_([i], act, act, [i])] = -d_act.T[None, :, :, None]
        d[np.ix_(act, [i], [i], act)] = -d_act.T[:, None, None, :]
    return D, d


def generalized_fock(h: np.ndarray, g: np.ndarray, D: np.ndarray, d: np.ndarray) -> np.ndarray:
    """F_pq = Σ_r D_pr h_qr + Σ_rst d_prst g_qrst."""
    return D @ h.T + np.einsum("prst,qrst->pq", d, g, optimize=True)


def orbital_gradient(
    integrals: IntegralSet,
    pool: RotationPool,
    D: np.ndarray,
    d: np.ndarray,
    kappa: np.ndarray | None = None,
) -> np.ndarray:
    """
    ∂E/∂κ for every pair of `pool`.

    `integrals` are the unrotated ones; D and d are the full-space RDMs in the
    rotated frame. At κ = 0 this is 2(F_pq − F_qp); otherwise the derivative
    of C = exp(−K) enters through its Fréchet adjoint.
    """
    if not len(pool):
        return np.zeros(0)
    h, g = integrals.h, integrals.g
    if kappa is None or not np.any(kappa):
        f = generalized_fock(h, g, D, d)
        return np.array([2.0 * (f[p, q] - f[q, p]) for p, q in pool.pairs])

    k = kappa_matrix(pool, kappa)
    c = expm(-k)
    g3 = np.einsum("bq,abcd->aqcd", c, g, optimize=True)
    g3 = np.einsum("cr,aqcd->aqrd", c, g3, optimize=True)
    g3 = np.einsum("ds,aqrd->aqrs", c, g3, optimize=True)
    dE_dC = 2.0 * (h @ c @ D) + 2.0 * np.einsum("aqrs,bqrs->ab", g3, d, optimize=True)
    # ⟨Γ, L(−K, −E)⟩ = −⟨L(K, Γ), E⟩ for the Fréchet derivative L of expm
    adj = expm_frechet(k, dE_dC, compute_expm=False)
    return np.array([-(adj[p, q] - adj[q, p]) for p, q in pool.pairs])

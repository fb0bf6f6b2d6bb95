"""
app/services/excitation_pool.py
───────────────────────────────
Spin-adapted active-space excitation operators Ĝ_n and the UCC unitary.

Pool ordering (deterministic):
  1. singles               (1/√2) Ê_ai
  2. symmetric doubles     (Ê_ai Ê_bj + Ê_aj Ê_bi) / (2√((1+δ_ab)(1+δ_ij))),  a ≤ b, i ≤ j
  3. antisymmetric doubles (Ê_ai Ê_bj − Ê_aj Ê_bi) / (2√3),                    a < b, i < j
  4. rank r ≥ 3            orthonormalized products of r singlet singles

a, b run over active orbitals empty in the reference (v_a), i, j over the
doubly occupied ones (v_i). All Ê_ai commute, so a rank-r product is fixed
by a multiset of (a, i) pairs. Rank-r generators are the combinations of
those products whose images on |CSF⟩ form an orthonormal basis of their
span; singular values below POOL_SVD_CUTOFF (relative) are culled. This is
one valid spin adaptation for triples and beyond; it spans the same space as
the explicit single and double operators at ranks 1 and 2.

Operator indices are relative to the active block; `matrix(space, offset)`
shifts them when the active block sits inside a larger window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from app.core.config import settings
from app.core.errors import ExpmConvergenceError, PoolRankError
from app.services.fock_engine import FockSpace, active_space
from app.services.space_partition import SpacePartition
from app.utils.logger import get_logger

logger = get_logger(__name__)

RANK_NAMES = {"s": 1, "sd": 2, "sdt": 3, "sdtq": 4}

Term = Tuple[complex, Tuple[Tuple[int, int], ...]]


@dataclass(frozen=True)
class GOperator:
    kind: str
    indices: Tuple[int, ...]
    terms: Tuple[Term, ...]
    rank: int

    def matrix(self, space: FockSpace, offset: int = 0) -> sp.csr_matrix:
        out = sp.csr_matrix((space.dim, space.dim), dtype=complex)
        for coef, factors in self.terms:
            prod = sp.identity(space.dim, dtype=complex, format="csr")
            for p, q in factors:
                prod = space.E(p + offset, q + offset) @ prod
            out = out + coef * prod
        return out.tocsr()

    @property
    def normalization(self) -> float:
        return float(abs(self.terms[0][0])) if self.terms else 0.0


@dataclass(frozen=True)
class ClusterParameters:
    theta: np.ndarray
    rank: int
    pool_size: int = field(default=0)

    def __post_init__(self) -> None:
        if self.pool_size and len(self.theta) != self.pool_size:
            raise ValueError(f"theta has {len(self.theta)} entries, pool has {self.pool_size}")


def parse_rank(rank: str | int, partition: SpacePartition | None = None) -> int:
    """'sd' → 2, 'full' → complete rank (n_act_elec), integers pass through."""
    if isinstance(rank, int):
        return rank
    key = str(rank).lower()
    if key == "full":
        if partition is None:
            raise PoolRankError("rank 'full' needs a partition")
        return max(partition.n_act_elec, 1)
    if key.isdigit():
        return int(key)
    if key not in RANK_NAMES:
        raise PoolRankError(f"Unknown rank {rank!r}", allowed=sorted(RANK_NAMES) + ["full"])
    return RANK_NAMES[key]


# ── Pool construction ────────────────────────────────────────────────────────

def _singles(occ: Sequence[int], vir: Sequence[int]) -> List[GOperator]:
    return [
        GOperator("single", (i, a), ((1.0 / math.sqrt(2.0), ((a, i),)),), 1)
        for i in occ for a in vir
    ]


def _doubles(occ: Sequence[int], vir: Sequence[int]) -> List[GOperator]:
    sym, anti = [], []
    for i, j in combinations_with_replacement(occ, 2):
        for a, b in combinations_with_replacement(vir, 2):
            norm = 1.0 / (2.0 * math.sqrt((1.0 + (a == b)) * (1.0 + (i == j))))
            sym.append(GOperator(
                "double-symmetric", (i, j, a, b),
                ((norm, ((a, i), (b, j))), (norm, ((a, j), (b, i)))), 2,
            ))
    for i, j in combinations(occ, 2):
        for a, b in combinations(vir, 2):
            norm = 1.0 / (2.0 * math.sqrt(3.0))
            anti.append(GOperator(
                "double-antisymmetric", (i, j, a, b),
                ((norm, ((a, i), (b, j))), (-norm, ((a, j), (b, i)))), 2,
            ))
    return sym + anti


def _higher_rank(space: FockSpace, occ: Sequence[int], vir: Sequence[int], rank: int) -> List[GOperator]:
    pairs = [(a, i) for i in occ for a in vir]
    monomials = list(combinations_with_replacement(pairs, rank))
    if not monomials:
        return []
    csf = space.reference_state()
    images = []
    for mono in monomials:
        v = csf
        for a, i in mono:
            v = space.apply_E(a, i, v)
        images.append(v)
    images_mat = np.array(images).T
    u, s, vh = np.linalg.svd(images_mat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return []
    keep = s > settings.POOL_SVD_CUTOFF * s[0]
    coeffs = (vh[keep].conj().T / s[keep])
    ops = []
    for k in range(coeffs.shape[1]):
        column = coeffs[:, k]
        # fix the overall phase so the largest coefficient is positive
        lead = int(np.argmax(np.abs(column)))
        column = column * (abs(column[lead]) / column[lead])
        terms = tuple(
            (complex(c) if abs(c.imag) > 0 else float(c.real), tuple(mono))
            for c, mono in zip(column, monomials) if abs(c) > 1e-14
        )
        ops.append(GOperator(f"rank-{rank}", (k,), terms, rank))
    return ops


def build_pool(partition: SpacePartition, rank: int) -> List[GOperator]:
    """
    Spin-adapted singlet excitation operators up to `rank`.

    Raises:
        PoolRankError: rank < 1 or rank exceeding n_act_elec.
    """
    if rank < 1:
        raise PoolRankError("Excitation rank must be at least 1", rank=rank)
    if rank > max(partition.n_act_elec, 1):
        raise PoolRankError("Excitation rank exceeds the active electron count",
                            rank=rank, n_act_elec=partition.n_act_elec)
    n_occ = partition.n_occ_act
    occ = list(range(n_occ))
    vir = list(range(n_occ, partition.n_act_orb))
    pool = _singles(occ, vir)
    if rank >= 2:
        pool += _doubles(occ, vir)
    if rank >= 3:
        space = active_space(partition)
        for r in range(3, rank + 1):
            pool += _higher_rank(space, occ, vir, r)
    logger.info("Pool built", cas=partition.label(), rank=rank, size=len(pool))
    return pool


def sd_pool_size(n_occ: int, n_vir: int) -> int:
    def pairs(m: int) -> int:
        return m * (m + 1) // 2

    return n_vir * n_occ + pairs(n_vir) * pairs(n_occ) + math.comb(n_vir, 2) * math.comb(n_occ, 2)


def count_complete_pool(partition: SpacePartition) -> int:
    """Weyl dimension of the singlet CASCI space minus the reference."""
    n, N = partition.n_act_orb, partition.n_act_elec
    half = N // 2
    weyl = math.comb(n + 1, half) * math.comb(n + 1, half + 1) // (n + 1)
    return weyl - 1


# ── UCC ──────────────────────────────────────────────────────────────────────

class UCCAnsatz:
    """
    |A(θ)⟩ = exp(−t̂(θ))|ψ⟩,  t̂ = T̂ − T̂†,  T̂ = Σ θ_n Ĝ_n.

    Pool matrices are built once per (space, offset); the exponential action
    is scipy's expm_multiply, never a Trotter product.
    """

    def __init__(self, pool: Sequence[GOperator], space: FockSpace, offset: int = 0) -> None:
        self.pool = list(pool)
        self.space = space
        self.offset = offset
        self.g_mats = [op.matrix(space, offset) for op in self.pool]
        self.t_mats = [(g - g.conj().T).tocsr() for g in self.g_mats]

    @property
    def size(self) -> int:
        return len(self.pool)

    def generator(self, theta: np.ndarray) -> sp.csr_matrix:
        t = sp.csr_matrix((self.space.dim, self.space.dim), dtype=complex)
        for value, t_n in zip(theta, self.t_mats):
            if value != 0.0:
                t = t + value * t_n
        return t.tocsr()

    def apply(self, theta: np.ndarray, v: np.ndarray, adjoint: bool = False) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if not np.any(theta):
            return v.copy()
        t = self.generator(theta)
        out = expm_multiply(t if adjoint else -t, v)
        residual = abs(np.linalg.norm(out) - np.linalg.norm(v))
        if residual > settings.EXPM_TOL:
            raise ExpmConvergenceError("Exponential action lost norm", residual=residual)
        return out

    def state(self, theta: np.ndarray) -> np.ndarray:
        return self.apply(theta, self.space.reference_state())

    def state_derivatives(self, theta: np.ndarray) -> np.ndarray:
        """(n_params, dim) array of ∂/∂θ_k exp(−t̂)|CSF⟩ via the block-triangular exponential."""
        dim = self.space.dim
        t = self.generator(theta)
        csf = self.space.reference_state()
        seed = np.concatenate([np.zeros(dim, dtype=complex), csf])
        out = np.empty((self.size, dim), dtype=complex)
        for k, t_k in enumerate(self.t_mats):
            block = sp.bmat([[-t, -t_k], [None, -t]], format="csr")
            out[k] = expm_multiply(block, seed)[:dim]
        return out


def apply_ucc(params: ClusterParameters, ansatz: UCCAnsatz, psi: np.ndarray) -> np.ndarray:
    return ansatz.apply(np.asarray(params.theta, dtype=float), psi)


def pool_operator_images(pool: Sequence[GOperator], space: FockSpace) -> np.ndarray:
    """(n_ops, dim) array of Ĝ_n|CSF⟩."""
    csf = space.reference_state()
    return np.array([op.matrix(space) @ csf for op in pool])


def pool_summary(pool: Sequence[GOperator]) -> Dict[str, int]:
    summary: Dict[str, int] = {}
    for op in pool:
        summary[op.kind] = summary.get(op.kind, 0) + 1
    return summary

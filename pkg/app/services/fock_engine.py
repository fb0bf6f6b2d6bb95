"""
app/services/fock_engine.py
───────────────────────────
Determinant-basis statevector engine.

Determinants are pairs of alpha/beta occupation bitmasks. Strings of each
spin are sorted ascending by mask value and the determinant index is
ia * n_beta_strings + ib, so a statevector reshapes to an (alpha, beta)
matrix. A determinant is A†(alpha) B†(beta)|vac⟩ with creators in increasing
orbital order inside each spin block.

Spin-summed operators:
    Ê_pq = a†_pα a_qα + a†_pβ a_qβ  =  Eα ⊗ 1 + 1 ⊗ Eβ

Hamiltonian action uses
    Ĥ = Σ h'_pq Ê_pq + ½ Σ g_pqrs Ê_pq Ê_rs + e,   h'_pq = h_pq − ½ Σ_r g_prrq

RDM normalization:
    D_pq     = ⟨Ê_pq⟩                              trace N
    d_pqrs   = ⟨Ê_pq Ê_rs⟩ − δ_qr D_ps             Σ d_pprr = N(N − 1)
    e_pqrstu = ⟨Ê_pq ê_rstu⟩ − δ_qr d_pstu − δ_qt d_rspu   Σ e_pprrtt = N(N − 1)(N − 2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp

from app.core.config import settings
from app.core.errors import DimensionOverflowError
from app.services.space_partition import ActiveHamiltonian, SpacePartition
from app.utils.logger import get_logger

logger = get_logger(__name__)


# ── Basis ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class DeterminantBasis:
    n_orb: int
    n_alpha: int
    n_beta: int
    alpha_strings: Tuple[int, ...]
    beta_strings: Tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.alpha_strings) * len(self.beta_strings)

    @property
    def dets(self) -> list[Tuple[int, int]]:
        return [(a, b) for a in self.alpha_strings for b in self.beta_strings]

    def index(self, alpha_mask: int, beta_mask: int) -> int:
        ia = _string_index(self.alpha_strings, alpha_mask)
        ib = _string_index(self.beta_strings, beta_mask)
        return ia * len(self.beta_strings) + ib


def _string_index(strings: Tuple[int, ...], mask: int) -> int:
    pos = int(np.searchsorted(np.asarray(strings, dtype=np.int64), mask))
    if pos >= len(strings) or strings[pos] != mask:
        raise KeyError(f"occupation mask {mask:b} not in basis")
    return pos


def _strings(n_orb: int, n_elec: int) -> Tuple[int, ...]:
    masks = [sum(1 << p for p in occ) for occ in combinations(range(n_orb), n_elec)]
    return tuple(sorted(masks))


def _parity_below(mask: int, p: int) -> int:
    return bin(mask & ((1 << p) - 1)).count("1") & 1


def _string_excitations(strings: Tuple[int, ...], n_orb: int) -> Dict[Tuple[int, int], sp.csr_matrix]:
    """a†_p a_q on one spin's strings, with the fermionic phase."""
    lookup = {s: n for n, s in enumerate(strings)}
    m = len(strings)
    ops: Dict[Tuple[int, int], sp.csr_matrix] = {}
    for p in range(n_orb):
        for q in range(n_orb):
            rows, cols, vals = [], [], []
            for col, s in enumerate(strings):
                if not (s >> q) & 1:
                    continue
                removed = s ^ (1 << q)
                if p != q and (removed >> p) & 1:
                    continue
                target = removed | (1 << p)
                sign = -1.0 if (_parity_below(s, q) ^ _parity_below(removed, p)) else 1.0
                rows.append(lookup[target])
                cols.append(col)
                vals.append(sign)
            ops[(p, q)] = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    return ops


class FockSpace:
    """Fixed (n_orb, n_alpha, n_beta) sector with cached excitation operators."""

    def __init__(self, n_orb: int, n_alpha: int, n_beta: int) -> None:
        dim = math.comb(n_orb, n_alpha) * math.comb(n_orb, n_beta)
        if dim > settings.MAX_DETERMINANTS:
            raise DimensionOverflowError(
                "Determinant space too large", n_orb=n_orb, n_alpha=n_alpha,
                n_beta=n_beta, dim=dim, limit=settings.MAX_DETERMINANTS,
            )
        self.n_orb = n_orb
        self.n_alpha = n_alpha
        self.n_beta = n_beta
        self.basis = DeterminantBasis(
            n_orb=n_orb,
            n_alpha=n_alpha,
            n_beta=n_beta,
            alpha_strings=_strings(n_orb, n_alpha),
            beta_strings=_strings(n_orb, n_beta),
        )
        self._ea = _string_excitations(self.basis.alpha_strings, n_orb)
        self._eb = (
            self._ea if n_beta == n_alpha
            else _string_excitations(self.basis.beta_strings, n_orb)
        )
        self._e_cache: Dict[Tuple[int, int], sp.csr_matrix] = {}
        self._shape = (len(self.basis.alpha_strings), len(self.basis.beta_strings))

    @property
    def dim(self) -> int:
        return self.basis.dim

    # ── single excitations ───────────────────────────────────────────────────

    def apply_E(self, p: int, q: int, v: np.ndarray) -> np.ndarray:
        mat = v.reshape(self._shape)
        out = self._ea[(p, q)] @ mat + (self._eb[(p, q)] @ mat.T).T
        return np.asarray(out).reshape(-1)

    def E(self, p: int, q: int) -> sp.csr_matrix:
        key = (p, q)
        if key not in self._e_cache:
            ma, mb = self._shape
            self._e_cache[key] = (
                sp.kron(self._ea[key], sp.identity(mb), format="csr")
                + sp.kron(sp.identity(ma), self._eb[key], format="csr")
            ).tocsr()
        return self._e_cache[key]

    def one_body(self, m: np.ndarray) -> sp.csr_matrix:
        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for (p, q), value in np.ndenumerate(m):
            if value != 0.0:
                out = out + value * self.E(p, q)
        return out.tocsr()

    def apply_one_body(self, m: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        for (p, q), value in np.ndenumerate(m):
            if value != 0.0:
                out += value * self.apply_E(p, q, v)
        return out

    def excitation_images(self, v: np.ndarray) -> np.ndarray:
        """(n, n, dim) array of Ê_pq|v⟩."""
        n = self.n_orb
        out = np.empty((n, n, self.dim), dtype=complex)
        for p in range(n):
            for q in range(n):
                out[p, q] = self.apply_E(p, q, v)
        return out

    # ── Hamiltonian ──────────────────────────────────────────────────────────

    def apply_hamiltonian(self, ham: ActiveHamiltonian, v: np.ndarray, constant: bool = True) -> np.ndarray:
        n = self.n_orb
        v = np.asarray(v, dtype=complex)
        h_prime = ham.h_eff - 0.5 * np.einsum("prrq->pq", ham.g_act)
        images = self.excitation_images(v)
        w = np.tensordot(ham.g_act, images, axes=([2, 3], [0, 1]))
        sigma = ham.e_frozen * v if constant else np.zeros_like(v)
        for p in range(n):
            for q in range(n):
                sigma = sigma + self.apply_E(p, q, 0.5 * w[p, q] + h_prime[p, q] * v)
        return sigma

    def hamiltonian_matrix(self, ham: ActiveHamiltonian) -> np.ndarray:
        cols = [self.apply_hamiltonian(ham, unit) for unit in np.eye(self.dim, dtype=complex)]
        return np.array(cols).T

    def energy(self, ham: ActiveHamiltonian, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.apply_hamiltonian(ham, v))))

    # ── states ───────────────────────────────────────────────────────────────

    def reference_state(self) -> np.ndarray:
        """Determinant with the lowest n_alpha / n_beta orbitals occupied."""
        v = np.zeros(self.dim, dtype=complex)
        v[self.basis.index((1 << self.n_alpha) - 1, (1 << self.n_beta) - 1)] = 1.0
        return v

    # ── spin ─────────────────────────────────────────────────────────────────

    def raising_operator(self) -> Tuple["FockSpace | None", sp.csr_matrix | None]:
        """Ŝ₊ = Σ_p a†_pα a_pβ into the (n_alpha + 1, n_beta − 1) sector."""
        if self.n_beta == 0 or self.n_alpha == self.n_orb:
            return None, None
        target = fock_space(self.n_orb, self.n_alpha + 1, self.n_beta - 1)
        rows, cols, vals = [], [], []
        for ia, a in enumerate(self.basis.alpha_strings):
            for ib, b in enumerate(self.basis.beta_strings):
                col = ia * self._shape[1] + ib
                for p in range(self.n_orb):
                    if not (b >> p) & 1 or (a >> p) & 1:
                        continue
                    b_new = b ^ (1 << p)
                    parity = (self.n_alpha + _parity_below(b, p) + _parity_below(a, p)) & 1
                    rows.append(target.basis.index(a | (1 << p), b_new))
                    cols.append(col)
                    vals.append(-1.0 if parity else 1.0)
        return target, sp.csr_matrix((vals, (rows, cols)), shape=(target.dim, self.dim))

    def spin_square_matrix(self) -> sp.csr_matrix:
        sz = 0.5 * (self.n_alpha - self.n_beta)
        _, s_plus = self.raising_operator()
        ident = sp.identity(self.dim, format="csr") * (sz * sz + sz)
        if s_plus is None:
            return ident
        return (s_plus.T @ s_plus + ident).tocsr()

    def spin_square(self, v: np.ndarray) -> float:
        sz = 0.5 * (self.n_alpha - self.n_beta)
        _, s_plus = self.raising_operator()
        raised = 0.0 if s_plus is None else float(np.linalg.norm(s_plus @ v) ** 2)
        return raised + (sz * sz + sz) * float(np.real(np.vdot(v, v)))


@lru_cache(maxsize=64)
def fock_space(n_orb: int, n_alpha: int, n_beta: int) -> FockSpace:
    space = FockSpace(n_orb, n_alpha, n_beta)
    logger.debug("Fock space built", n_orb=n_orb, n_alpha=n_alpha, n_beta=n_beta, dim=space.dim)
    return space


def active_space(partition: SpacePartition) -> FockSpace:
    n = partition.n_act_elec // 2
    return fock_space(partition.n_act_orb, n, n)


def enumerate_basis(partition: SpacePartition) -> DeterminantBasis:
    space = active_space(partition)
    logger.info("Basis enumerated", n_orb=partition.n_act_orb, n_dets=space.dim)
    return space.basis


def apply_E(space: FockSpace, p: int, q: int, psi: np.ndarray) -> np.ndarray:
    return space.apply_E(p, q, psi)


# ── Reduced density matrices ─────────────────────────────────────────────────

@dataclass(frozen=True)
class DensityMatrices:
    one: np.ndarray
    two: np.ndarray | None = None
    three: np.ndarray | None = None


def rdm(space: FockSpace, psi: np.ndarray, max_rank: int = 2) -> DensityMatrices:
    """Spin-summed active RDMs, see module docstring for the normalization."""
    if max_rank not in (1, 2, 3):
        raise ValueError("max_rank must be 1, 2 or 3")
    n = space.n_orb
    images = space.excitation_images(psi)
    one = np.einsum("k,pqk->pq", psi.conj(), images)
    if max_rank == 1:
        return DensityMatrices(one=one)

    delta = np.eye(n)
    # ⟨Ê_pq Ê_rs⟩ = ⟨Ê_qp ψ | Ê_rs ψ⟩
    pair = np.einsum("qpk,rsk->pqrs", images.conj(), images)
    two = pair - np.einsum("qr,ps->pqrs", delta, one)
    if max_rank == 2:
        return DensityMatrices(one=one, two=two)

    triple = np.empty((n,) * 6, dtype=complex)
    for r in range(n):
        for s in range(n):
            # ê_rstu ψ = Ê_rs Ê_tu ψ − δ_st Ê_ru ψ
            chained = np.array([[space.apply_E(r, s, images[t, u]) for u in range(n)] for t in range(n)])
            for t in range(n):
                chained[t] -= delta[s, t] * images[r]
            triple[:, :, r, s] = np.einsum("qpk,tuk->pqtu", images.conj(), chained)
    three = (
        triple
        - np.einsum("qr,pstu->pqrstu", delta, two)
        - np.einsum("qt,rspu->pqrstu", delta, two)
    )
    return DensityMatrices(one=one, two=two, three=three)


def rdm_energy(ham: ActiveHamiltonian, dm: DensityMatrices) -> float:
    """E = e + Σ h_pq D_pq + ½ Σ g_pqrs d_pqrs."""
    return float(np.real(
        ham.e_frozen
        + np.einsum("pq,pq->", ham.h_eff, dm.one)
        + 0.5 * np.einsum("pqrs,pqrs->", ham.g_act, dm.two)
    ))


# ── Exact diagonalization ────────────────────────────────────────────────────

@dataclass(frozen=True)
class CasciResult:
    energies: np.ndarray
    vectors: np.ndarray


def casci(space: FockSpace, ham: ActiveHamiltonian, singlets_only: bool = True) -> CasciResult:
    """Exact diagonalization in the sector; with `singlets_only` non-singlet roots are discarded."""
    hmat = space.hamiltonian_matrix(ham)
    hmat = 0.5 * (hmat + hmat.conj().T)
    if not singlets_only:
        energies, vectors = np.linalg.eigh(hmat)
        return CasciResult(energies=energies, vectors=vectors)

    s2 = space.spin_square_matrix().toarray()
    # Ĥ and Ŝ² commute; the shift moves every S > 0 multiplet above every singlet
    shift = 2.0 * float(np.max(np.sum(np.abs(hmat), axis=1))) + 1.0
    _, vectors = np.linalg.eigh(hmat + shift * s2)
    spins = np.real(np.einsum("ki,kl,li->i", vectors.conj(), s2, vectors))
    keep = np.abs(spins) < 1e-6
    vectors = vectors[:, keep]
    energies = np.real(np.einsum("ki,kl,li->i", vectors.conj(), hmat, vectors))
    order = np.argsort(energies, kind="stable")
    return CasciResult(energies=energies[order], vectors=vectors[:, order])

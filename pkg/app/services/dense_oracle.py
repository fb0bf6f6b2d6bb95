"""
app/services/dense_oracle.py
────────────────────────────
Brute-force reference in the full determinant space.

Every operator is an explicit dense matrix over all n_orb orbitals, the
transformed operators are formed literally (UXU†, UX|CSF⟩⟨0|, X|0⟩⟨0| − ⟨X⟩)
and the response matrices come from the generic commutator definitions

    A_ij = ⟨0|[X_i†, [Ĥ, X_j]]|0⟩     B_ij = ⟨0|[X_i†, [Ĥ, X_j†]]|0⟩
    Σ_ij = ⟨0|[X_i†, X_j]|0⟩          Δ_ij = ⟨0|[X_i†, X_j†]|0⟩

evaluated on the lower triangle and mirrored like the production builder.
Nothing here goes through the window contraction, so agreement pins it
down. Only usable when the full space has a few thousand determinants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np
from scipy.linalg import eigh, expm

from app.core.models import HERMITIFIABLE, MethodId
from app.services.excitation_pool import UCCAnsatz
from app.services.fock_engine import FockSpace, fock_space
from app.services.integrals_io import DIPOLE_LABELS, IntegralSet, OneElectronOperatorSet
from app.services.oo_vqe import GroundStateRecord
from app.services.orbital_rotation import build_rotation_pool
from app.services.qlr_matrices import TRANSFORMS, PropertyGradientVector, ResponseMatrices
from app.services.space_partition import ActiveHamiltonian, SpacePartition
from app.utils.logger import get_logger

logger = get_logger(__name__)

MAX_ORACLE_DIM = 4096


def full_space(integrals: IntegralSet) -> FockSpace:
    n = integrals.n_elec // 2
    return fock_space(integrals.n_orb, n, n)


def full_hamiltonian(integrals: IntegralSet) -> ActiveHamiltonian:
    return ActiveHamiltonian(h_eff=integrals.h, g_act=integrals.g, e_frozen=integrals.e_core)


def embed_active_state(psi: np.ndarray, partition: SpacePartition, full: FockSpace, active: FockSpace) -> np.ndarray:
    """Active-space vector → full space with inactive orbitals doubly occupied."""
    n_inact = len(partition.inactive)
    core = (1 << n_inact) - 1
    out = np.zeros(full.dim, dtype=complex)
    for k, (a, b) in enumerate(active.basis.dets):
        out[full.basis.index(core | (a << n_inact), core | (b << n_inact))] = psi[k]
    return out


def embedding_energy(integrals: IntegralSet, partition: SpacePartition, psi: np.ndarray) -> float:
    """⟨Ψ_emb|Ĥ_full|Ψ_emb⟩ for an active-space state."""
    n = partition.n_act_elec // 2
    active = fock_space(partition.n_act_orb, n, n)
    full = full_space(integrals)
    v = embed_active_state(psi, partition, full, active)
    return full.energy(full_hamiltonian(integrals), v)


@dataclass
class FCIReference:
    energies: np.ndarray
    states: np.ndarray
    spin: np.ndarray

    @property
    def singlets(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.spin) < 1e-6)

    @property
    def gaps(self) -> np.ndarray:
        idx = self.singlets
        return self.energies[idx[1:]] - self.energies[idx[0]]


class DenseOracle:
    def __init__(self, record: GroundStateRecord, operators: OneElectronOperatorSet | None = None) -> None:
        self.record = record
        self.operators = operators
        self.partition = record.partition
        self.space = full_space(record.integrals)
        if self.space.dim > MAX_ORACLE_DIM:
            raise ValueError(f"Full space has {self.space.dim} determinants; oracle limit is {MAX_ORACLE_DIM}")
        self.n_inact = len(self.partition.inactive)
        self.ansatz = UCCAnsatz(record.pool, self.space, offset=self.n_inact)
        self.c = self.space.reference_state()
        logger.debug("Dense oracle", dim=self.space.dim, n_orb=self.space.n_orb)

    # ── full-space objects ───────────────────────────────────────────────────

    @cached_property
    def H(self) -> np.ndarray:
        return self.space.hamiltonian_matrix(full_hamiltonian(self.record.integrals))

    @cached_property
    def U(self) -> np.ndarray:
        return expm(-self.ansatz.generator(self.record.theta).toarray())

    @cached_property
    def z(self) -> np.ndarray:
        return self.U @ self.c

    @property
    def energy(self) -> float:
        return float(np.real(np.vdot(self.z, self.H @ self.z)))

    def E(self, p: int, q: int) -> np.ndarray:
        return self.space.E(p, q).toarray()

    def q_matrices(self, scheme: str) -> List[np.ndarray]:
        pool = build_rotation_pool(self.partition, scheme)
        return [self.E(p, q) / math.sqrt(2.0) for p, q in pool.pairs]

    def g_matrices(self) -> List[np.ndarray]:
        return [g.toarray() for g in self.ansatz.g_mats]

    def dipole(self, label: str) -> np.ndarray | None:
        if self.operators is None or label not in self.operators.matrices:
            return None
        return -self.space.one_body(self.operators.matrices[label]).toarray()

    # ── transformations ──────────────────────────────────────────────────────

    def transform(self, x: np.ndarray, kind: str) -> np.ndarray:
        z, c, U = self.z, self.c, self.U
        if kind == "naive":
            return x
        if kind == "sc":
            return U @ x @ U.conj().T
        if kind == "st":
            return np.outer(U @ x @ c, z.conj())
        if kind == "proj":
            return np.outer(x @ z, z.conj()) - np.vdot(z, x @ z) * np.eye(len(z))
        raise ValueError(f"Unknown transformation {kind!r}")

    def operators_for(self, method: MethodId) -> Tuple[List[np.ndarray], int]:
        g_kind, q_kind, scheme = TRANSFORMS[MethodId(method)]
        qs = [self.transform(x, q_kind) for x in self.q_matrices(scheme)]
        gs = [self.transform(x, g_kind) for x in self.g_matrices()]
        return qs + gs, len(qs)

    # ── response matrices ────────────────────────────────────────────────────

    def matrices(self, method: MethodId, herm: bool = False) -> ResponseMatrices:
        method = MethodId(method)
        ops, n_q = self.operators_for(method)
        z, H = self.z, self.H
        hz = H @ z
        a = [x @ z for x in ops]
        b = [x.conj().T @ z for x in ops]
        ha = [H @ v for v in a]
        hb = [H @ v for v in b]
        size = len(ops)
        A = np.zeros((size, size), dtype=complex)
        B = np.zeros((size, size), dtype=complex)
        S = np.zeros((size, size), dtype=complex)
        D = np.zeros((size, size), dtype=complex)
        for i in range(size):
            for j in range(i + 1):
                xj = ops[j]
                A[i, j] = np.vdot(a[i], ha[j]) - np.vdot(a[i], xj @ hz) - np.vdot(hz, xj @ b[i]) + np.vdot(b[j], hb[i])
                B[i, j] = np.vdot(a[i], hb[j]) - np.vdot(a[i], xj.conj().T @ hz) - np.vdot(hz, xj.conj().T @ b[i]) + np.vdot(a[j], hb[i])
                S[i, j] = np.vdot(a[i], a[j]) - np.vdot(b[j], b[i])
                D[i, j] = np.vdot(a[i], b[j]) - np.vdot(a[j], b[i])

        b_gq_norm = None
        if herm:
            if method not in HERMITIFIABLE:
                raise ValueError(f"{method.value} has no hermitified variant")
            b_gq_norm = float(np.linalg.norm(B[n_q:, :n_q]))
            A[n_q:, :n_q] = self._hermitified_gq(method)
            B[n_q:, :n_q] = 0.0

        lower = np.tril(np.ones((size, size), dtype=bool), k=-1)
        A = np.where(lower, A, 0) + np.where(lower, A, 0).conj().T + np.diag(np.diag(A).real)
        S = np.where(lower, S, 0) + np.where(lower, S, 0).conj().T + np.diag(np.diag(S).real)
        B = np.where(lower, B, 0) + np.where(lower, B, 0).T + np.diag(np.diag(B))
        D = np.where(lower, D, 0) - np.where(lower, D, 0).T

        return ResponseMatrices(
            method=method,
            A=A,
            B=B,
            sigma=S,
            delta=D,
            index=tuple(("q", i) for i in range(n_q)) + tuple(("G", n) for n in range(size - n_q)),
            q_pool=build_rotation_pool(self.partition, TRANSFORMS[method][2]),
            n_g=size - n_q,
            e0=self.energy,
            herm=herm,
            b_gq_norm=b_gq_norm,
        )

    def _hermitified_gq(self, method: MethodId) -> np.ndarray:
        """⟨CSF|Ĝ_n†U†(Ĥq̂_μ + q̂_μ†Ĥ)|0⟩ element by element."""
        _, _, scheme = TRANSFORMS[method]
        qs = self.q_matrices(scheme)
        gs = self.g_matrices()
        z, H, U, c = self.z, self.H, self.U, self.c
        out = np.zeros((len(gs), len(qs)), dtype=complex)
        for n, g in enumerate(gs):
            ugc = U @ g @ c
            for mu, q in enumerate(qs):
                out[n, mu] = np.vdot(ugc, H @ (q @ z)) + np.vdot(ugc, q.conj().T @ (H @ z))
        return out

    def property_gradient(self, method: MethodId, label: str) -> PropertyGradientVector:
        ops, _ = self.operators_for(method)
        size = len(ops)
        mu = self.dipole(label)
        if mu is None:
            return PropertyGradientVector(label=label, z_part=np.zeros(size, complex), y_part=np.zeros(size, complex))
        z = self.z
        mz = mu @ z
        z_part = np.array([np.vdot(mz, x.conj().T @ z) - np.vdot(x @ z, mz) for x in ops])
        y_part = np.array([np.vdot(mz, x @ z) - np.vdot(x.conj().T @ z, mz) for x in ops])
        return PropertyGradientVector(label=label, z_part=z_part, y_part=y_part)

    def property_gradients(self, method: MethodId) -> Dict[str, PropertyGradientVector]:
        return {label: self.property_gradient(method, label) for label in DIPOLE_LABELS}

    # ── exact reference ──────────────────────────────────────────────────────

    def fci(self) -> FCIReference:
        energies, states = eigh(self.H)
        s2 = self.space.spin_square_matrix()
        spin = np.array([np.real(np.vdot(states[:, k], s2 @ states[:, k])) for k in range(len(energies))])
        return FCIReference(energies=energies, states=states, spin=spin)

    def fci_oscillator_strengths(self, reference: FCIReference | None = None) -> np.ndarray:
        """(2/3)(E_k − E_0) Σ_γ |⟨0|μ̂_γ|k⟩|² over singlet excited states."""
        ref = reference or self.fci()
        idx = ref.singlets
        ground = ref.states[:, idx[0]]
        f = np.zeros(len(idx) - 1)
        for label in DIPOLE_LABELS:
            mu = self.dipole(label)
            if mu is None:
                continue
            moments = ref.states[:, idx[1:]].conj().T @ (mu @ ground)
            f += np.abs(moments) ** 2
        return (2.0 / 3.0) * ref.gaps * f

    def fci_polarizability(self, omega: float = 0.0, reference: FCIReference | None = None) -> np.ndarray:
        ref = reference or self.fci()
        ground = ref.states[:, 0]
        others = ref.states[:, 1:]
        gaps = ref.energies[1:] - ref.energies[0]
        moments = []
        for label in DIPOLE_LABELS:
            mu = self.dipole(label)
            moments.append(np.zeros(len(gaps), complex) if mu is None else others.conj().T @ (mu @ ground))
        t = np.array(moments)  # (3, n_states): ⟨k|μ̂_γ|0⟩
        alpha = np.zeros((3, 3), dtype=complex)
        for k, w_k in enumerate(gaps):
            if w_k < 1e-10:
                continue
            alpha += np.outer(t[:, k].conj(), t[:, k]) / (w_k - omega) + np.outer(t[:, k], t[:, k].conj()) / (w_k + omega)
        return alpha.real

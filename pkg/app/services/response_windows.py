"""
app/services/response_windows.py
────────────────────────────────
Effective windows for expectation values that involve orbital rotations.

An orbital-rotation operator q̂_pq moves an electron across the
inactive/active/virtual boundary. Every expectation value the response
matrices need has the form ⟨bra|X̂|ket⟩ with X̂ ∈ {Ĥ, μ̂, 1} and both
states built from |0⟩ or |CSF⟩ by operators touching a handful of
inactive orbitals X_I and virtual orbitals X_V. Those states live in the
sector where every other inactive orbital is doubly occupied and every
other virtual is empty, and Ĥ projected on that sector is the frozen-core
Hamiltonian over the window

    [X_I][active][X_V]

with nα = nβ = |X_I| + n_occ_act. The contraction over the remaining
inactive and virtual orbitals is therefore exact, and the full
determinant space is never built.

Windows are cached by (X_I, X_V).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np
import scipy.sparse as sp

from app.services.excitation_pool import UCCAnsatz
from app.services.fock_engine import FockSpace, fock_space
from app.services.integrals_io import OneElectronOperatorSet
from app.services.oo_vqe import GroundStateRecord
from app.services.space_partition import ActiveHamiltonian, effective_one_body, frozen_core_hamiltonian
from app.utils.logger import get_logger

logger = get_logger(__name__)

Pair = Tuple[int, int]
WindowKey = Tuple[Tuple[int, ...], Tuple[int, ...]]

SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass
class ResponseWindow:
    key: WindowKey
    space: FockSpace
    ham: ActiveHamiltonian
    orbitals: Tuple[int, ...]
    n_xi: int
    z: np.ndarray
    c: np.ndarray
    record: GroundStateRecord
    operators: OneElectronOperatorSet | None = None
    _ansatz: UCCAnsatz | None = field(default=None, repr=False)
    _h_z: np.ndarray | None = field(default=None, repr=False)
    _dipoles: Dict[str, sp.csr_matrix] = field(default_factory=dict, repr=False)

    def local(self, p: int) -> int:
        return self.orbitals.index(p)

    def E(self, p: int, q: int) -> sp.csr_matrix:
        """Ê_pq in the window, p and q given as full-space orbital indices."""
        return self.space.E(self.local(p), self.local(q))

    def q(self, pair: Pair) -> sp.csr_matrix:
        return SQRT_HALF * self.E(*pair)

    def apply_q(self, pair: Pair, v: np.ndarray, adjoint: bool = False) -> np.ndarray:
        p, q = pair
        if adjoint:
            p, q = q, p
        return SQRT_HALF * self.space.apply_E(self.local(p), self.local(q), v)

    @property
    def ansatz(self) -> UCCAnsatz:
        if self._ansatz is None:
            self._ansatz = UCCAnsatz(self.record.pool, self.space, offset=self.n_xi)
        return self._ansatz

    def U(self, v: np.ndarray) -> np.ndarray:
        return self.ansatz.apply(self.record.theta, v)

    def G(self, n: int) -> sp.csr_matrix:
        return self.ansatz.g_mats[n]

    def H(self, v: np.ndarray) -> np.ndarray:
        return self.space.apply_hamiltonian(self.ham, v)

    @property
    def h_z(self) -> np.ndarray:
        if self._h_z is None:
            self._h_z = self.H(self.z)
        return self._h_z

    def dipole(self, label: str) -> sp.csr_matrix | None:
        """μ̂ = −Σ r_pq Ê_pq restricted to the window, frozen part folded into the constant."""
        if self.operators is None or label not in self.operators.matrices:
            return None
        if label not in self._dipoles:
            partition = self.record.partition
            frozen = [i for i in partition.inactive if i not in self.key[0]]
            block, constant = effective_one_body(self.operators.matrices[label], frozen, self.orbitals)
            mat = self.space.one_body(block) + constant * sp.identity(self.space.dim, format="csr")
            self._dipoles[label] = (-mat).tocsr()
        return self._dipoles[label]


class WindowCache:
    """Builds and memoizes ResponseWindows for one ground-state record."""

    def __init__(self, record: GroundStateRecord, operators: OneElectronOperatorSet | None = None) -> None:
        self.record = record
        self.operators = operators
        self.partition = record.partition
        self._windows: Dict[WindowKey, ResponseWindow] = {}
        self._embed_maps: Dict[Tuple[int, int], np.ndarray] = {}

    def externals(self, pairs: Iterable[Pair]) -> WindowKey:
        inact = set(self.partition.inactive)
        virt = set(self.partition.virtual)
        xi, xv = set(), set()
        for pair in pairs:
            for p in pair:
                if p in inact:
                    xi.add(p)
                elif p in virt:
                    xv.add(p)
        return tuple(sorted(xi)), tuple(sorted(xv))

    def active(self) -> ResponseWindow:
        return self.window(((), ()))

    def covering(self, *pairs: Pair) -> ResponseWindow:
        return self.window(self.externals(pairs))

    def window(self, key: WindowKey) -> ResponseWindow:
        if key not in self._windows:
            self._windows[key] = self._build(key)
        return self._windows[key]

    def transient(self, key: WindowKey) -> ResponseWindow:
        """A window that is not memoized; pair windows are visited once per build."""
        return self._windows.get(key) or self._build(key)

    def _embed_map(self, n_xi: int, space: FockSpace) -> np.ndarray:
        key = (n_xi, space.n_orb)
        if key not in self._embed_maps:
            act = self.record.space
            core = (1 << n_xi) - 1
            idx = np.array(
                [space.basis.index(core | (a << n_xi), core | (b << n_xi)) for a, b in act.basis.dets],
                dtype=int,
            )
            self._embed_maps[key] = idx
        return self._embed_maps[key]

    def embed(self, v: np.ndarray, n_xi: int, space: FockSpace) -> np.ndarray:
        out = np.zeros(space.dim, dtype=complex)
        out[self._embed_map(n_xi, space)] = v
        return out

    def _build(self, key: WindowKey) -> ResponseWindow:
        xi, xv = key
        part = self.partition
        ints = self.record.integrals
        orbitals = tuple(xi) + tuple(part.active) + tuple(xv)
        frozen = [i for i in part.inactive if i not in xi]
        ham = frozen_core_hamiltonian(ints.h, ints.g, ints.e_core, frozen, orbitals)
        n_occ = len(xi) + part.n_occ_act
        space = fock_space(len(orbitals), n_occ, n_occ)
        z = self.embed(self.record.psi, len(xi), space)
        c = self.embed(self.record.csf, len(xi), space)
        logger.debug("Window built", inactive=list(xi), virtual=list(xv), dim=space.dim)
        return ResponseWindow(
            key=key,
            space=space,
            ham=ham,
            orbitals=orbitals,
            n_xi=len(xi),
            z=z,
            c=c,
            record=self.record,
            operators=self.operators,
        )


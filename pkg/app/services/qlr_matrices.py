"""
app/services/qlr_matrices.py
────────────────────────────
Response matrices A, B, Σ (Δ = 0) for the eight operator choices and the
property-gradient vectors ⟨0|[μ̂, X̂_l†]|0⟩, ⟨0|[μ̂, X̂_l]|0⟩.

Operator transformations:
    naive   Ô
    SC      U Ô U†
    ST      U Ô |CSF⟩⟨0|
    proj    Ô |0⟩⟨0| − ⟨0|Ô|0⟩        (q̂: q̂|0⟩⟨0|, since q̂†|0⟩ = 0)

    method    G     q      q pool
    naive     naive naive  naive
    SC        SC    naive  naive
    ST        ST    naive  naive
    proj      proj  naive  naive
    all-SC    SC    SC     reduced
    all-ST    ST    ST     reduced
    all-proj  proj  proj   naive
    ST-proj   ST    proj   naive

Row/column order is q block first, then G block. Only the lower triangle
(qq with μ ≥ μ', Gq, GG with n ≥ n') is evaluated; A and Σ are mirrored as
Hermitian and B as symmetric. In the proj and all-proj Gq blocks of A the
product term ⟨0|Ĝ_n†|0⟩⟨0|Ĥq̂_μ'|0⟩ is kept for both methods; row indices
are n throughout.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import ContractionError, MethodConfigError
from app.core.models import HERMITIFIABLE, MethodId
from app.services.integrals_io import OneElectronOperatorSet
from app.services.oo_vqe import GroundStateRecord
from app.services.orbital_rotation import RotationPool, build_rotation_pool
from app.services.response_windows import Pair, ResponseWindow, WindowCache
from app.utils.logger import get_logger

logger = get_logger(__name__)

# (G transform, q transform, q pool scheme)
TRANSFORMS: Dict[MethodId, Tuple[str, str, str]] = {
    MethodId.naive: ("naive", "naive", "naive"),
    MethodId.SC: ("sc", "naive", "naive"),
    MethodId.ST: ("st", "naive", "naive"),
    MethodId.proj: ("proj", "naive", "naive"),
    MethodId.all_SC: ("sc", "sc", "reduced"),
    MethodId.all_ST: ("st", "st", "reduced"),
    MethodId.all_proj: ("proj", "proj", "naive"),
    MethodId.ST_proj: ("st", "proj", "naive"),
}


def q_scheme(method: MethodId) -> str:
    return TRANSFORMS[MethodId(method)][2]


@dataclass
class ResponseMatrices:
    method: MethodId
    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    delta: np.ndarray
    index: Tuple[Tuple[str, int], ...]
    q_pool: RotationPool
    n_g: int
    e0: float
    herm: bool = False
    b_gq_norm: float | None = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def n_q(self) -> int:
        return len(self.q_pool)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def structure_deviations(self) -> Dict[str, float]:
        def dev(m: np.ndarray) -> float:
            return float(np.max(np.abs(m))) if m.size else 0.0

        return {
            "a_hermiticity": dev(self.A - self.A.conj().T),
            "b_symmetry": dev(self.B - self.B.T),
            "sigma_hermiticity": dev(self.sigma - self.sigma.conj().T),
            "delta_max": dev(self.delta),
        }


@dataclass
class PropertyGradientVector:
    label: str
    z_part: np.ndarray
    y_part: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        """Stacked [⟨0|[μ̂, X̂_l†]|0⟩ ; ⟨0|[μ̂, X̂_l]|0⟩]."""
        return np.concatenate([self.z_part, self.y_part])


# ── Per-window vector cache ──────────────────────────────────────────────────

class _Vectors:
    def __init__(self, window: ResponseWindow) -> None:
        self.w = window
        self._memo: Dict[tuple, np.ndarray] = {}

    def _get(self, key: tuple, build: Callable[[], np.ndarray]) -> np.ndarray:
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    @property
    def z(self) -> np.ndarray:
        return self.w.z

    @property
    def c(self) -> np.ndarray:
        return self.w.c

    @property
    def hz(self) -> np.ndarray:
        return self.w.h_z

    def uhz(self) -> np.ndarray:
        """U†Ĥ|0⟩."""
        return self._get(("uhz",), lambda: self.w.ansatz.apply(self.w.record.theta, self.hz, adjoint=True))

    def q(self, pair: Pair, v: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return self.w.apply_q(pair, v, adjoint)

    def qz(self, pair: Pair) -> np.ndarray:
        return self._get(("qz", pair), lambda: self.q(pair, self.z))

    def hqz(self, pair: Pair) -> np.ndarray:
        return self._get(("hqz", pair), lambda: self.w.H(self.qz(pair)))

    def qc(self, pair: Pair) -> np.ndarray:
        return self._get(("qc", pair), lambda: self.q(pair, self.c))

    def uqc(self, pair: Pair) -> np.ndarray:
        return self._get(("uqc", pair), lambda: self.w.U(self.qc(pair)))

    def huqc(self, pair: Pair) -> np.ndarray:
        return self._get(("huqc", pair), lambda: self.w.H(self.uqc(pair)))

    def gmat(self, n: int):
        return self.w.G(n)

    def gdag(self, n: int):
        return self.w.ansatz.g_mats[n].conj().T

    def gz(self, n: int) -> np.ndarray:
        return self._get(("gz", n), lambda: self.gmat(n) @ self.z)

    def gdz(self, n: int) -> np.ndarray:
        return self._get(("gdz", n), lambda: self.gdag(n) @ self.z)

    def hgz(self, n: int) -> np.ndarray:
        return self._get(("hgz", n), lambda: self.w.H(self.gz(n)))

    def hgdz(self, n: int) -> np.ndarray:
        return self._get(("hgdz", n), lambda: self.w.H(self.gdz(n)))

    def ghz(self, n: int) -> np.ndarray:
        return self._get(("ghz", n), lambda: self.gmat(n) @ self.hz)

    def gdhz(self, n: int) -> np.ndarray:
        return self._get(("gdhz", n), lambda: self.gdag(n) @ self.hz)

    def gc(self, n: int) -> np.ndarray:
        return self._get(("gc", n), lambda: self.gmat(n) @ self.c)

    def ugc(self, n: int) -> np.ndarray:
        return self._get(("ugc", n), lambda: self.w.U(self.gc(n)))

    def hugc(self, n: int) -> np.ndarray:
        return self._get(("hugc", n), lambda: self.w.H(self.ugc(n)))

    def g_uhz(self, n: int) -> np.ndarray:
        return self._get(("g_uhz", n), lambda: self.gmat(n) @ self.uhz())

    def gd_uhz(self, n: int) -> np.ndarray:
        return self._get(("gd_uhz", n), lambda: self.gdag(n) @ self.uhz())

    def g_mean(self, n: int) -> complex:
        """⟨0|Ĝ_n|0⟩."""
        return np.vdot(self.z, self.gz(n))

    def gd_mean(self, n: int) -> complex:
        """⟨0|Ĝ_n†|0⟩."""
        return np.vdot(self.gz(n), self.z)


# ── Builder ──────────────────────────────────────────────────────────────────

class MatrixBuilder:
    def __init__(self, method: MethodId, record: GroundStateRecord, cache: WindowCache | None = None) -> None:
        self.method = MethodId(method)
        self.record = record
        self.cache = cache if cache is not None else WindowCache(record)
        self.g_kind, self.q_kind, scheme = TRANSFORMS[self.method]
        self.q_pool = build_rotation_pool(record.partition, scheme)
        self.n_q = len(self.q_pool)
        self.n_g = len(record.pool)
        self.e0 = record.energy
        self._active = _Vectors(self.cache.active())

    # ── qq ───────────────────────────────────────────────────────────────────

    def _qq_element(self, v: _Vectors, mu: Pair, nu: Pair, same: bool) -> Tuple[complex, complex, complex]:
        e0 = self.e0
        if self.q_kind == "naive":
            a = np.vdot(v.qz(mu), v.hqz(nu)) - np.vdot(v.qz(mu), v.q(nu, v.hz))
            b = -np.vdot(v.q(nu, v.qz(mu)), v.hz)
            s = np.vdot(v.qz(mu), v.qz(nu))
        elif self.q_kind == "proj":
            s = np.vdot(v.qz(mu), v.qz(nu))
            a = np.vdot(v.qz(mu), v.hqz(nu)) - s * e0
            b = 0.0
        elif self.q_kind == "st":
            s = 1.0 if same else 0.0
            a = np.vdot(v.uqc(mu), v.huqc(nu)) - s * e0
            b = 0.0
        else:  # sc
            s = 1.0 if same else 0.0
            a = np.vdot(v.uqc(mu), v.huqc(nu)) - np.vdot(v.qc(mu), v.q(nu, v.uhz()))
            b = -np.vdot(v.q(nu, v.qc(mu)), v.uhz())
        return a, b, s

    def qq_block(self, A: np.ndarray, B: np.ndarray, S: np.ndarray) -> None:
        pairs = self.q_pool.pairs
        buckets: Dict[tuple, List[Tuple[int, int]]] = {}
        for i in range(self.n_q):
            for j in range(i + 1):
                key = self.cache.externals((pairs[i], pairs[j]))
                buckets.setdefault(key, []).append((i, j))
        for key, members in buckets.items():
            v = _Vectors(self.cache.transient(key))
            for i, j in members:
                A[i, j], B[i, j], S[i, j] = self._qq_element(v, pairs[i], pairs[j], i == j)
        logger.debug("qq block", method=self.method.value, windows=len(buckets), n_q=self.n_q)

    # ── Gq ───────────────────────────────────────────────────────────────────

    def _gq_element(self, v: _Vectors, n: int, nu: Pair, hermitian: bool) -> Tuple[complex, complex]:
        g, q = self.g_kind, self.q_kind
        if g == "naive":
            a = np.vdot(v.gz(n), v.hqz(nu)) - np.vdot(v.hz, v.q(nu, v.gdz(n)))
            b = np.vdot(v.qz(nu), v.hgdz(n)) - np.vdot(v.q(nu, v.gz(n)), v.hz)
            return a, b
        if g == "proj":
            gd = v.gd_mean(n)
            a = np.vdot(v.gz(n), v.hqz(nu)) - gd * np.vdot(v.hz, v.qz(nu))
            if q == "proj":
                return a, 0.0
            b = -np.vdot(v.q(nu, v.gz(n)), v.hz) + np.vdot(v.qz(nu), v.hz) * gd
            return a, b
        # ST- and SC-transformed G
        if q == "naive" or q == "proj":
            a = np.vdot(v.ugc(n), v.hqz(nu))
            b_full = -np.vdot(v.q(nu, v.ugc(n)), v.hz) if (q == "naive" or hermitian) else 0.0
            if hermitian:
                # ⟨CSF|Ĝ†U†(Ĥq̂ + q̂†Ĥ)|0⟩
                return a - b_full, 0.0
            return a, b_full
        a = np.vdot(v.ugc(n), v.huqc(nu))
        if q == "st":
            return a, 0.0
        return a, -np.vdot(v.q(nu, v.gc(n)), v.uhz())

    def gq_block(self, A: np.ndarray, B: np.ndarray, hermitian: bool = False) -> float | None:
        """Fills rows G, columns q; returns ‖B^{Gq}‖_F of the unhermitified block when `hermitian`."""
        discarded = []
        for j, nu in enumerate(self.q_pool.pairs):
            v = _Vectors(self.cache.covering(nu))
            for n in range(self.n_g):
                A[self.n_q + n, j], B[self.n_q + n, j] = self._gq_element(v, n, nu, hermitian)
                if hermitian:
                    discarded.append(-np.vdot(v.q(nu, v.ugc(n)), v.hz))
        if hermitian:
            return float(np.linalg.norm(np.asarray(discarded))) if discarded else 0.0
        return None

    # ── GG ───────────────────────────────────────────────────────────────────

    def _gg_element(self, v: _Vectors, n: int, m: int) -> Tuple[complex, complex, complex]:
        e0 = self.e0
        g = self.g_kind
        if g == "naive":
            a = (
                np.vdot(v.gz(n), v.hgz(m)) - np.vdot(v.gz(n), v.ghz(m))
                - np.vdot(v.gdhz(m), v.gdz(n)) + np.vdot(v.gdz(m), v.hgdz(n))
            )
            b = (
                np.vdot(v.gz(n), v.hgdz(m)) - np.vdot(v.gz(n), v.gdhz(m))
                - np.vdot(v.ghz(m), v.gdz(n)) + np.vdot(v.gz(m), v.hgdz(n))
            )
            s = np.vdot(v.gz(n), v.gz(m)) - np.vdot(v.gdz(m), v.gdz(n))
            return a, b, s
        if g == "proj":
            gd_n, g_m, gd_m = v.gd_mean(n), v.g_mean(m), v.gd_mean(m)
            overlap = np.vdot(v.gz(n), v.gz(m))
            a = np.vdot(v.gz(n), v.hgz(m)) - overlap * e0 - gd_n * np.vdot(v.hz, v.gz(m)) + gd_n * g_m * e0
            b = np.vdot(v.gz(n), v.hz) * gd_m - gd_n * gd_m * e0
            s = overlap - gd_n * g_m
            return a, b, s
        same = 1.0 if n == m else 0.0
        if g == "st":
            return np.vdot(v.ugc(n), v.hugc(m)) - same * e0, 0.0, same
        # sc
        a = np.vdot(v.ugc(n), v.hugc(m)) - np.vdot(v.gc(n), v.g_uhz(m))
        b = np.vdot(v.gc(n), v.gd_uhz(m))
        return a, b, same

    def gg_block(self, A: np.ndarray, B: np.ndarray, S: np.ndarray) -> None:
        off = self.n_q
        for n in range(self.n_g):
            for m in range(n + 1):
                A[off + n, off + m], B[off + n, off + m], S[off + n, off + m] = self._gg_element(self._active, n, m)

    # ── assembly ─────────────────────────────────────────────────────────────

    def build(self, hermitian: bool = False) -> ResponseMatrices:
        size = self.n_q + self.n_g
        A = np.zeros((size, size), dtype=complex)
        B = np.zeros((size, size), dtype=complex)
        S = np.zeros((size, size), dtype=complex)
        timings: Dict[str, float] = {}

        t0 = time.perf_counter()
        self.qq_block(A, B, S)
        timings["qq"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        b_gq_norm = self.gq_block(A, B, hermitian)
        timings["gq"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        self.gg_block(A, B, S)
        timings["gg"] = time.perf_counter() - t0

        tol = settings.HERMITICITY_TOL
        imag_a = float(np.max(np.abs(np.diag(A).imag))) if size else 0.0
        imag_s = float(np.max(np.abs(np.diag(S).imag))) if size else 0.0
        if imag_a > tol or imag_s > tol:
            raise ContractionError(
                "Diagonal of A or Σ is not real", method=self.method.value, imag_a=imag_a, imag_sigma=imag_s
            )

        lower = np.tril(np.ones((size, size), dtype=bool), k=-1)
        A = np.where(lower, A, 0.0) + np.where(lower, A, 0.0).conj().T + np.diag(np.diag(A).real)
        S = np.where(lower, S, 0.0) + np.where(lower, S, 0.0).conj().T + np.diag(np.diag(S).real)
        B = np.where(lower, B, 0.0) + np.where(lower, B, 0.0).T + np.diag(np.diag(B))

        index = tuple(("q", i) for i in range(self.n_q)) + tuple(("G", n) for n in range(self.n_g))
        return ResponseMatrices(
            method=self.method,
            A=A,
            B=B,
            sigma=S,
            delta=np.zeros((size, size), dtype=complex),
            index=index,
            q_pool=self.q_pool,
            n_g=self.n_g,
            e0=self.e0,
            herm=hermitian,
            b_gq_norm=b_gq_norm,
            timings=timings,
        )

    # ── property gradients ───────────────────────────────────────────────────

    def property_gradient(self, label: str) -> PropertyGradientVector:
        z_part = np.zeros(self.n_q + self.n_g, dtype=complex)
        y_part = np.zeros(self.n_q + self.n_g, dtype=complex)
        if self.cache.operators is None or label not in self.cache.operators.matrices:
            logger.warning("Missing operator component, gradient set to zero", label=label, method=self.method.value)
            return PropertyGradientVector(label=label, z_part=z_part, y_part=y_part)

        for j, nu in enumerate(self.q_pool.pairs):
            w = self.cache.covering(nu)
            v = _Vectors(w)
            mz = w.dipole(label) @ v.z
            if self.q_kind in ("naive", "proj"):
                z_part[j] = -np.vdot(v.qz(nu), mz)
                y_part[j] = np.vdot(mz, v.qz(nu))
            else:
                z_part[j] = -np.vdot(v.uqc(nu), mz)
                y_part[j] = np.vdot(mz, v.uqc(nu))

        v = self._active
        mz = v.w.dipole(label) @ v.z
        mean = np.vdot(v.z, mz)
        for n in range(self.n_g):
            k = self.n_q + n
            if self.g_kind == "naive":
                z_part[k] = np.vdot(mz, v.gdz(n)) - np.vdot(v.gz(n), mz)
                y_part[k] = np.vdot(mz, v.gz(n)) - np.vdot(v.gdz(n), mz)
            elif self.g_kind == "proj":
                z_part[k] = mean * v.gd_mean(n) - np.vdot(v.gz(n), mz)
                y_part[k] = np.vdot(mz, v.gz(n)) - v.g_mean(n) * mean
            else:
                z_part[k] = -np.vdot(v.ugc(n), mz)
                y_part[k] = np.vdot(mz, v.ugc(n))
        return PropertyGradientVector(label=label, z_part=z_part, y_part=y_part)


# ── Public operations ────────────────────────────────────────────────────────

def build_matrices(
    method: MethodId,
    record: GroundStateRecord,
    herm: bool = False,
    cache: WindowCache | None = None,
    rank: int | None = None,
) -> ResponseMatrices:
    """
    Raises:
        MethodConfigError: herm on a method without Hadamard-class Gq blocks,
        or a rank that differs from the record's ansatz rank.
        ContractionError: diagonal of A or Σ not real beyond HERMITICITY_TOL.
    """
    method = MethodId(method)
    if herm and method not in HERMITIFIABLE:
        raise MethodConfigError("Hermitification is only defined for SC, ST and ST-proj", method=method.value)
    if rank is not None and rank != record.rank:
        raise MethodConfigError("Method rank differs from the ground-state ansatz rank", rank=rank, record_rank=record.rank)
    t0 = time.perf_counter()
    builder = MatrixBuilder(method, record, cache)
    matrices = builder.build(hermitian=herm)
    logger.info(
        "Response matrices built",
        method=method.value,
        herm=herm,
        n_q=builder.n_q,
        n_g=builder.n_g,
        seconds=round(time.perf_counter() - t0, 3),
    )
    return matrices


def hermitify(
    method: MethodId,
    matrices: ResponseMatrices,
    record: GroundStateRecord,
    cache: WindowCache | None = None,
) -> ResponseMatrices:
    """
    Replace A^{Gq} by ⟨CSF|Ĝ_n†U†(Ĥq̂_μ + q̂_μ†Ĥ)|0⟩ and zero B^{Gq}.

    The returned matrices carry ‖B^{Gq}‖_F of the discarded block; Σ, the qq
    and the GG blocks are reused unchanged.
    """
    method = MethodId(method)
    if method not in HERMITIFIABLE:
        raise MethodConfigError("Method has no Hadamard-class Gq block to hermitify", method=method.value)
    builder = MatrixBuilder(method, record, cache)
    size = matrices.size
    A_gq = np.zeros((size, size), dtype=complex)
    B_gq = np.zeros((size, size), dtype=complex)
    norm = builder.gq_block(A_gq, B_gq, hermitian=True)

    n_q = matrices.n_q
    A = matrices.A.copy()
    B = matrices.B.copy()
    A[n_q:, :n_q] = A_gq[n_q:, :n_q]
    A[:n_q, n_q:] = A_gq[n_q:, :n_q].conj().T
    B[n_q:, :n_q] = 0.0
    B[:n_q, n_q:] = 0.0
    logger.info("Hermitified", method=method.value, b_gq_norm=norm)
    return ResponseMatrices(
        method=method,
        A=A,
        B=B,
        sigma=matrices.sigma,
        delta=matrices.delta,
        index=matrices.index,
        q_pool=matrices.q_pool,
        n_g=matrices.n_g,
        e0=matrices.e0,
        herm=True,
        b_gq_norm=norm,
        timings=matrices.timings,
    )


def property_gradient(
    method: MethodId,
    record: GroundStateRecord,
    operators: OneElectronOperatorSet | None,
    label: str,
    cache: WindowCache | None = None,
) -> PropertyGradientVector:
    cache = cache if cache is not None else WindowCache(record, operators)
    if cache.operators is None and operators is not None:
        cache.operators = operators
    return MatrixBuilder(method, record, cache).property_gradient(label)

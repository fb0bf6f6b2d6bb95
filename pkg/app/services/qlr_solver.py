"""
app/services/qlr_solver.py
──────────────────────────
Generalized eigenvalue problem of linear response and the quantities derived
from its solutions.

    E2 = | A   B  |      S2 = | Σ   0   |
         | B*  A* |           | 0  −Σ*  |

E2 x = ω S2 x is solved after canonical orthogonalization against the
null space of Σ. Excitation vectors x = [Z; Y] are kept unnormalized; the
commutator norm ⟨0|[Ô_k, Ô_k†]|0⟩ = x† S2 x is stored separately.

Property-gradient convention: V = [⟨0|[μ̂, X̂†]|0⟩ ; ⟨0|[μ̂, X̂]|0⟩] and the
transition moment of state k is t_k = x_k† V. Polarizability is reported
positive at ω = 0:

    α_γδ(ω) = Σ_k [t_γ* t_δ / (ω_k − ω) + t_γ t_δ* / (ω_k + ω)] / ⟨k|k⟩
            = −⟨⟨μ̂_γ; μ̂_δ⟩⟩_ω
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Sequence, Tuple

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.errors import ComplexSpectrumError, MetricSingularError, ResonanceError, SingularResponseError
from app.core.models import MethodId
from app.services.integrals_io import DIPOLE_LABELS, OneElectronOperatorSet
from app.services.oo_vqe import GroundStateRecord
from app.services.qlr_matrices import PropertyGradientVector, ResponseMatrices, build_matrices, property_gradient
from app.services.response_windows import WindowCache
from app.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ExcitationSolution:
    method: MethodId
    omega: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    norm: np.ndarray
    dropped: int = 0
    f: np.ndarray | None = None

    @property
    def n_states(self) -> int:
        return len(self.omega)

    @property
    def vectors(self) -> np.ndarray:
        """(2n, n_states) stacked [Z; Y]."""
        return np.vstack([self.Z, self.Y])

    @property
    def flagged(self) -> List[int]:
        return [k for k, n in enumerate(self.norm) if n <= 0.0]

    @property
    def omega_ev(self) -> np.ndarray:
        return self.omega * settings.HARTREE_TO_EV


# ── Super-matrices ───────────────────────────────────────────────────────────

def supermatrices(matrices: ResponseMatrices) -> Tuple[np.ndarray, np.ndarray]:
    A, B, S, D = matrices.A, matrices.B, matrices.sigma, matrices.delta
    E2 = np.block([[A, B], [B.conj(), A.conj()]])
    S2 = np.block([[S, D], [-D.conj(), -S.conj()]])
    return E2, S2


def canonical_basis(sigma: np.ndarray, cutoff: float | None = None) -> np.ndarray:
    """
    T = U_kept |s_kept|^{-1/2} from Σ = U diag(s) U†, keeping |s| > cutoff.

    Raises:
        MetricSingularError: no eigenvalue of Σ survives the cutoff.
    """
    cutoff = settings.METRIC_CUTOFF if cutoff is None else cutoff
    s, u = np.linalg.eigh(sigma)
    keep = np.abs(s) > cutoff
    if not np.any(keep):
        raise MetricSingularError("Metric is numerically singular", size=len(s), max_eigenvalue=float(np.max(np.abs(s), initial=0.0)))
    removed = int(np.sum(~keep))
    if removed:
        logger.debug("Metric null directions removed", removed=removed, kept=int(np.sum(keep)))
    return u[:, keep] / np.sqrt(np.abs(s[keep]))


def _reduced(matrices: ResponseMatrices) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    E2, S2 = supermatrices(matrices)
    t = canonical_basis(matrices.sigma)
    m = t.shape[1]
    n = matrices.size
    t2 = np.zeros((2 * n, 2 * m), dtype=complex)
    t2[:n, :m] = t
    t2[n:, m:] = t.conj()
    e_r = t2.conj().T @ E2 @ t2
    s_r = t2.conj().T @ S2 @ t2
    return t2, e_r, s_r


def _orthogonalize_degenerate(w: np.ndarray, vecs: np.ndarray, s_r: np.ndarray) -> np.ndarray:
    """Rotates eigenvectors inside clusters of equal ω so that they are S-orthogonal."""
    order = np.argsort(w)
    vecs = vecs.copy()
    start = 0
    while start < len(order):
        stop = start + 1
        while stop < len(order) and abs(w[order[stop]] - w[order[start]]) < settings.IMAG_TOL:
            stop += 1
        if stop - start > 1:
            idx = order[start:stop]
            block = vecs[:, idx]
            metric = block.conj().T @ s_r @ block
            _, rot = np.linalg.eigh(0.5 * (metric + metric.conj().T))
            vecs[:, idx] = block @ rot
        start = stop
    return vecs


def _fix_phase(x: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(x)))
    if abs(x[k]) == 0.0:
        return x
    return x * (abs(x[k]) / x[k])


# ── Eigenproblem ─────────────────────────────────────────────────────────────

def solve(matrices: ResponseMatrices) -> ExcitationSolution:
    """
    Positive-ω branch of E2 x = ω S2 x, ascending.

    Roots pair as ±ω with opposite Σ-norms, and the excitation of a pair is
    its positive-norm member. On a stable ground state that member is the
    one with ω > 0, so the loop walks the ω > IMAG_TOL roots. If the
    reference is unstable the positive-norm member has ω < 0; the +ω member
    is then kept and flagged as negative-norm. States with |⟨k|k⟩| below
    NORM_CUTOFF are dropped and counted.

    Raises:
        MetricSingularError: Σ has no direction above METRIC_CUTOFF.
        ComplexSpectrumError: an eigenvalue has |Im ω| > IMAG_TOL.
    """
    n = matrices.size
    t2, e_r, s_r = _reduced(matrices)
    w, vecs = scipy.linalg.eig(e_r, s_r)
    imag = float(np.max(np.abs(w.imag))) if len(w) else 0.0
    if imag > settings.IMAG_TOL:
        raise ComplexSpectrumError("Response eigenvalues are complex", method=matrices.method.value, max_imag=imag)
    w = w.real
    vecs = _orthogonalize_degenerate(w, vecs, s_r)

    omegas: List[float] = []
    columns: List[np.ndarray] = []
    norms: List[float] = []
    dropped = 0
    for k in np.argsort(w):
        if w[k] <= settings.IMAG_TOL:
            continue
        y = vecs[:, k]
        norm = float(np.real(np.vdot(y, s_r @ y)))
        if abs(norm) < settings.NORM_CUTOFF:
            dropped += 1
            continue
        omegas.append(float(w[k]))
        columns.append(_fix_phase(t2 @ y))
        norms.append(norm)

    x = np.array(columns).T if columns else np.zeros((2 * n, 0), dtype=complex)
    solution = ExcitationSolution(
        method=matrices.method,
        omega=np.array(omegas),
        Z=x[:n],
        Y=x[n:],
        norm=np.array(norms),
        dropped=dropped,
    )
    if dropped:
        logger.warning("Low-norm states dropped", method=matrices.method.value, dropped=dropped)
    if solution.flagged:
        logger.warning("Non-positive norms", method=matrices.method.value, states=solution.flagged)
    logger.info(
        "Response solved",
        method=matrices.method.value,
        n_states=solution.n_states,
        lowest=float(solution.omega[0]) if solution.n_states else None,
    )
    return solution


# ── Properties ───────────────────────────────────────────────────────────────

def transition_moments(solution: ExcitationSolution, gradient: PropertyGradientVector) -> np.ndarray:
    """t_k = x_k† V for every retained state."""
    return solution.vectors.conj().T @ gradient.vector


def _moment_table(solution: ExcitationSolution, gradients: Mapping[str, PropertyGradientVector]) -> np.ndarray:
    """(n_states, 3) transition moments for x, y, z; absent components are zero."""
    table = np.zeros((solution.n_states, len(DIPOLE_LABELS)), dtype=complex)
    for col, label in enumerate(DIPOLE_LABELS):
        if label in gradients:
            table[:, col] = transition_moments(solution, gradients[label])
    return table


def oscillator_strengths(solution: ExcitationSolution, gradients: Mapping[str, PropertyGradientVector]) -> np.ndarray:
    """
    f_k = (2/3) ω_k Σ_γ |t_kγ|² / ⟨k|k⟩.

    Flagged states (non-positive norm) get NaN. The result is also stored
    on `solution.f`.
    """
    moments = _moment_table(solution, gradients)
    f = np.full(solution.n_states, np.nan)
    for k in range(solution.n_states):
        if solution.norm[k] > 0.0:
            f[k] = (2.0 / 3.0) * solution.omega[k] * float(np.sum(np.abs(moments[k]) ** 2)) / solution.norm[k]
    solution.f = f
    return f


def polarizability(
    solution: ExcitationSolution,
    gradients: Mapping[str, PropertyGradientVector],
    omega: float,
) -> np.ndarray:
    """
    Sum-over-states 3×3 polarizability at real frequency `omega` (Hartree).

    Raises:
        ResonanceError: |omega| within RESONANCE_TOL of a retained ω_k.
    """
    for w_k in solution.omega:
        if abs(abs(omega) - w_k) < settings.RESONANCE_TOL:
            raise ResonanceError("Frequency is resonant with an excitation", omega_k=float(w_k), omega=omega)
    moments = _moment_table(solution, gradients)
    alpha = np.zeros((3, 3), dtype=complex)
    for k in range(solution.n_states):
        if solution.norm[k] <= 0.0:
            continue
        t = moments[k]
        w_k = solution.omega[k]
        alpha += (np.outer(t.conj(), t) / (w_k - omega) + np.outer(t, t.conj()) / (w_k + omega)) / solution.norm[k]
    return alpha.real


def isotropic(alpha: np.ndarray) -> float:
    return float(np.trace(np.real(alpha)) / 3.0)


# ── Response function ────────────────────────────────────────────────────────

def linear_response_function(
    matrices: ResponseMatrices,
    grad_a: PropertyGradientVector,
    grad_b: PropertyGradientVector,
    omega: float,
) -> complex:
    """
    ⟨⟨Â; B̂⟩⟩_ω = −V_A† (E2 − ω S2)⁻¹ V_B, solved in the Σ-orthogonalized space.

    Raises:
        SingularResponseError: the shifted matrix cannot be inverted.
    """
    t2, e_r, s_r = _reduced(matrices)
    shifted = e_r - omega * s_r
    rhs = t2.conj().T @ grad_b.vector
    try:
        cond = np.linalg.cond(shifted)
        if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
            raise np.linalg.LinAlgError("ill-conditioned")
        beta = np.linalg.solve(shifted, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularResponseError("Shifted response matrix is singular", omega=omega, method=matrices.method.value) from exc
    return complex(-np.vdot(t2.conj().T @ grad_a.vector, beta))


def response_polarizability(
    matrices: ResponseMatrices,
    gradients: Mapping[str, PropertyGradientVector],
    omega: float,
    labels: Sequence[str] = DIPOLE_LABELS,
) -> np.ndarray:
    """α_γδ(ω) = −⟨⟨μ̂_γ; μ̂_δ⟩⟩_ω over the given components; absent ones stay zero."""
    alpha = np.zeros((len(labels), len(labels)))
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            if a in gradients and b in gradients:
                alpha[i, j] = -linear_response_function(matrices, gradients[a], gradients[b], omega).real
    return alpha


def response_function(
    method: MethodId,
    record: GroundStateRecord,
    operators: OneElectronOperatorSet,
    label_a: str,
    label_b: str,
    omega: float,
    herm: bool = False,
    cache: WindowCache | None = None,
) -> complex:
    """⟨⟨Â; B̂⟩⟩_ω for two operators of `operators`, building everything from the record."""
    cache = cache if cache is not None else WindowCache(record, operators)
    matrices = build_matrices(method, record, herm=herm, cache=cache)
    grad_a = property_gradient(method, record, operators, label_a, cache)
    grad_b = property_gradient(method, record, operators, label_b, cache)
    return linear_response_function(matrices, grad_a, grad_b, omega)

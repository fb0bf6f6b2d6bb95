"""
app/services/oo_vqe.py
──────────────────────
Orbital-optimized UCC ground state.

Schedule:
  1. θ-only BFGS at the orbitals the integral file encodes (plain UCC)
  2. joint (θ, κ) BFGS; the optimal κ is folded into the stored integrals
     and reset to zero; repeat until ‖∂E/∂θ‖∞ and ‖∂E/∂κ‖∞ fall below
     grad_tol at κ = 0, or max_macro is reached

A run that hits the iteration limits returns its best point with
converged=False instead of raising.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from app.core.models import OptimizerOptions
from app.services.excitation_pool import GOperator, UCCAnsatz, build_pool
from app.services.fock_engine import FockSpace, active_space, rdm
from app.services.integrals_io import IntegralSet
from app.services.orbital_rotation import (
    KappaParameters,
    RotationPool,
    build_rotation_pool,
    full_space_densities,
    orbital_gradient,
    rotate_integrals,
    rotation_matrix,
    transform_integrals,
)
from app.services.space_partition import ActiveHamiltonian, SpacePartition, effective_active_hamiltonian
from app.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class GroundStateRecord:
    theta: np.ndarray
    energy: float
    psi: np.ndarray
    integrals: IntegralSet
    partition: SpacePartition
    rank: int
    pool: Tuple[GOperator, ...]
    rotation: np.ndarray
    converged: bool
    theta_gradient_norm: float
    kappa_gradient_norm: float
    macro_iterations: int = 0
    n_kappa: int = 0
    energy_history: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def space(self) -> FockSpace:
        return active_space(self.partition)

    @property
    def csf(self) -> np.ndarray:
        return self.space.reference_state()

    def active_hamiltonian(self) -> ActiveHamiltonian:
        return effective_active_hamiltonian(self.integrals, self.partition)

    def ansatz(self) -> UCCAnsatz:
        return UCCAnsatz(self.pool, self.space)

    def spin_square(self) -> float:
        return self.space.spin_square(self.psi)


# ── Energy functional ────────────────────────────────────────────────────────

class EnergyFunctional:
    """E(θ, κ) over fixed base integrals; κ enters through exp(−K)."""

    def __init__(
        self,
        integrals: IntegralSet,
        partition: SpacePartition,
        ansatz: UCCAnsatz,
        rot_pool: RotationPool,
        options: OptimizerOptions,
    ) -> None:
        self.integrals = integrals
        self.partition = partition
        self.ansatz = ansatz
        self.rot_pool = rot_pool
        self.options = options
        self._ham_cache: Dict[bytes, ActiveHamiltonian] = {}
        self.evaluations = 0

    @property
    def n_theta(self) -> int:
        return self.ansatz.size

    @property
    def n_kappa(self) -> int:
        return len(self.rot_pool)

    def hamiltonian(self, kappa: np.ndarray | None = None) -> ActiveHamiltonian:
        kappa = np.zeros(self.n_kappa) if kappa is None else np.asarray(kappa, dtype=float)
        key = kappa.tobytes()
        if key not in self._ham_cache:
            if len(self._ham_cache) > 8:
                self._ham_cache.clear()
            rotated = rotate_integrals(self.integrals, KappaParameters(kappa, self.rot_pool))
            self._ham_cache[key] = effective_active_hamiltonian(rotated, self.partition)
        return self._ham_cache[key]

    def energy(self, theta: np.ndarray, kappa: np.ndarray | None = None) -> float:
        self.evaluations += 1
        psi = self.ansatz.state(np.asarray(theta, dtype=float))
        return self.ansatz.space.energy(self.hamiltonian(kappa), psi)

    def theta_gradient(self, theta: np.ndarray, kappa: np.ndarray | None = None) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if not self.n_theta:
            return np.zeros(0)
        ham = self.hamiltonian(kappa)
        space = self.ansatz.space
        if self.options.theta_gradient == "analytic":
            psi = self.ansatz.state(theta)
            h_psi = space.apply_hamiltonian(ham, psi)
            d_psi = self.ansatz.state_derivatives(theta)
            return 2.0 * np.real(d_psi.conj() @ h_psi)

        step = self.options.fd_step
        grad = np.empty(self.n_theta)
        for k in range(self.n_theta):
            shift = np.zeros_like(theta)
            shift[k] = step
            plus = space.energy(ham, self.ansatz.state(theta + shift))
            minus = space.energy(ham, self.ansatz.state(theta - shift))
            grad[k] = (plus - minus) / (2.0 * step)
        self.evaluations += 2 * self.n_theta
        return grad

    def kappa_gradient(self, theta: np.ndarray, kappa: np.ndarray | None = None) -> np.ndarray:
        if not self.n_kappa:
            return np.zeros(0)
        psi = self.ansatz.state(np.asarray(theta, dtype=float))
        dm = rdm(self.ansatz.space, psi, max_rank=2)
        D, d = full_space_densities(dm, self.partition)
        return orbital_gradient(self.integrals, self.rot_pool, D, d, kappa)

    def gradient(self, theta: np.ndarray, kappa: np.ndarray | None = None) -> Tuple[np.ndarray, np.ndarray]:
        return self.theta_gradient(theta, kappa), self.kappa_gradient(theta, kappa)

    # joint-vector adapters for scipy.optimize
    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[: self.n_theta], x[self.n_theta:]

    def joint_energy(self, x: np.ndarray) -> float:
        theta, kappa = self.split(x)
        return self.energy(theta, kappa)

    def joint_gradient(self, x: np.ndarray) -> np.ndarray:
        theta, kappa = self.split(x)
        return np.concatenate(self.gradient(theta, kappa))


def energy(
    theta: np.ndarray,
    integrals: IntegralSet,
    partition: SpacePartition,
    pool: Sequence[GOperator],
) -> float:
    """e_frozen + ⟨CSF|U(θ)† Ĥ_act U(θ)|CSF⟩."""
    space = active_space(partition)
    ansatz = UCCAnsatz(pool, space)
    ham = effective_active_hamiltonian(integrals, partition)
    return space.energy(ham, ansatz.state(np.asarray(theta, dtype=float)))


def gradient(functional: EnergyFunctional, theta: np.ndarray, kappa: np.ndarray | None = None) -> Tuple[np.ndarray, np.ndarray]:
    return functional.gradient(theta, kappa)


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


# ── Optimizer ────────────────────────────────────────────────────────────────

def optimize(
    integrals: IntegralSet,
    partition: SpacePartition,
    rank: int,
    options: OptimizerOptions | None = None,
) -> GroundStateRecord:
    """
    Minimize ⟨UCC(θ)|Ĥ(κ)|UCC(θ)⟩ over θ and κ.

    `integrals` must be in the contiguous frame of `partition`.
    """
    options = options or OptimizerOptions()
    started = time.perf_counter()
    pool = build_pool(partition, rank)
    space = active_space(partition)
    ansatz = UCCAnsatz(pool, space)
    rot_pool = build_rotation_pool(partition, "naive")
    if options.theta_only:
        rot_pool = RotationPool(scheme="naive", pairs=(), n_orb=partition.n_orb)

    current = integrals
    rotation = np.eye(partition.n_orb)
    if options.kappa_kick > 0.0 and len(rot_pool):
        rng = np.random.default_rng(options.seed)
        kick = rng.uniform(-options.kappa_kick, options.kappa_kick, len(rot_pool))
        c = rotation_matrix(rot_pool, kick)
        current = transform_integrals(current, c)
        rotation = rotation @ c
        logger.info("Initial orbital kick", magnitude=options.kappa_kick, seed=options.seed)

    functional = EnergyFunctional(current, partition, ansatz, rot_pool, options)
    bfgs = {"gtol": 0.1 * options.grad_tol, "maxiter": options.max_iter}

    # ── Stage 1: amplitudes only
    theta = np.zeros(ansatz.size)
    best = functional.energy(theta)
    history = [best]
    if ansatz.size:
        res = minimize(functional.energy, theta, jac=functional.theta_gradient, method="BFGS", options=bfgs)
        if res.fun <= best + 1e-12:
            theta, best = np.asarray(res.x, dtype=float), float(res.fun)
        history.append(best)
        logger.info("Amplitude stage done", energy=best, iterations=int(res.nit), n_theta=ansatz.size)

    # ── Stage 2: joint amplitudes + orbitals
    converged = False
    macro = 0
    stalled = False
    g_theta, g_kappa = functional.gradient(theta)
    while True:
        gt, gk = _inf_norm(g_theta), _inf_norm(g_kappa)
        if gt < options.grad_tol and gk < options.grad_tol:
            converged = True
            break
        # a BFGS run that could not move would only repeat itself
        if stalled or macro >= options.max_macro:
            break
        macro += 1
        x0 = np.concatenate([theta, np.zeros(functional.n_kappa)])
        res = minimize(functional.joint_energy, x0, jac=functional.joint_gradient, method="BFGS", options=bfgs)
        if res.fun > best + 1e-12:
            logger.warning("Macro step rejected", macro=macro, energy=float(res.fun), best=best)
            break
        theta, kappa = functional.split(np.asarray(res.x, dtype=float))
        if np.any(kappa):
            c = rotation_matrix(rot_pool, kappa)
            current = transform_integrals(current, c)
            rotation = rotation @ c
            functional = EnergyFunctional(current, partition, ansatz, rot_pool, options)
        previous, best = best, float(res.fun)
        history.append(best)
        g_theta, g_kappa = functional.gradient(theta)
        logger.info(
            "Macro iteration",
            macro=macro,
            energy=best,
            delta=best - previous,
            theta_grad=_inf_norm(g_theta),
            kappa_grad=_inf_norm(g_kappa),
        )
        stalled = res.nit == 0

    psi = ansatz.state(theta)
    e0 = space.energy(effective_active_hamiltonian(current, partition), psi)
    record = GroundStateRecord(
        theta=theta,
        energy=e0,
        psi=psi,
        integrals=current,
        partition=partition,
        rank=rank,
        pool=tuple(pool),
        rotation=rotation,
        converged=converged,
        theta_gradient_norm=_inf_norm(g_theta),
        kappa_gradient_norm=_inf_norm(g_kappa),
        macro_iterations=macro,
        n_kappa=len(rot_pool),
        energy_history=tuple(history),
    )
    log = logger.info if converged else logger.warning
    log(
        "Ground state" if converged else "Ground state not converged",
        energy=e0,
        converged=converged,
        macro=macro,
        theta_grad=record.theta_gradient_norm,
        kappa_grad=record.kappa_gradient_norm,
        seconds=round(time.perf_counter() - started, 3),
    )
    return record

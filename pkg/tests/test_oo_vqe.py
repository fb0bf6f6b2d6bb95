"""
tests/test_oo_vqe.py
────────────────────
Energy gradients and the orbital-optimized UCC ground state.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.core.models import OptimizerOptions
from app.services.excitation_pool import UCCAnsatz, build_pool
from app.services.fock_engine import active_space, casci
from app.services.oo_vqe import EnergyFunctional, optimize
from app.services.orbital_rotation import build_rotation_pool
from app.services.space_partition import make_partition


# ── gradients ────────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def functional(toy):
    integrals, _ = toy
    part = make_partition(4, 4, (2, 2))
    ansatz = UCCAnsatz(build_pool(part, 2), active_space(part))
    return EnergyFunctional(integrals, part, ansatz, build_rotation_pool(part), OptimizerOptions(theta_gradient="analytic"))


@pytest.mark.parametrize("kappa_scale", [0.0, 0.1])
def test_kappa_gradient_matches_finite_difference(functional, kappa_scale):
    theta = np.full(functional.n_theta, 0.1)
    kappa = np.linspace(-kappa_scale, kappa_scale, functional.n_kappa)
    analytic = functional.kappa_gradient(theta, kappa)
    step = 1e-5
    for k in range(functional.n_kappa):
        shift = np.zeros_like(kappa)
        shift[k] = step
        fd = (functional.energy(theta, kappa + shift) - functional.energy(theta, kappa - shift)) / (2 * step)
        assert analytic[k] == pytest.approx(fd, abs=1e-7)


def test_theta_gradient_analytic_matches_fd(functional):
    theta = np.full(functional.n_theta, 0.05)
    analytic = functional.theta_gradient(theta)
    fd = EnergyFunctional(
        functional.integrals, functional.partition, functional.ansatz, functional.rot_pool, OptimizerOptions(theta_gradient="fd")
    ).theta_gradient(theta)
    np.testing.assert_allclose(analytic, fd, atol=1e-7)


# ── optimize ─────────────────────────────────────────────────────────────────

def test_h2_ground_state_is_exact(h2_record):
    part = h2_record.partition
    reference = casci(active_space(part), h2_record.active_hamiltonian())
    assert h2_record.energy == pytest.approx(reference.energies[0], abs=1e-8)
    assert h2_record.n_kappa == 0
    assert h2_record.spin_square() == pytest.approx(0.0, abs=1e-8)


def test_toy_ground_state_converges(toy_record):
    assert toy_record.theta_gradient_norm < 1e-6
    assert toy_record.kappa_gradient_norm < 1e-6
    history = np.array(toy_record.energy_history)
    assert np.all(np.diff(history) <= 1e-12)
    np.testing.assert_allclose(toy_record.rotation.T @ toy_record.rotation, np.eye(4), atol=1e-10)


def test_orbital_optimization_lowers_energy(toy, toy_record):
    integrals, _ = toy
    plain = optimize(integrals, toy_record.partition, 2, OptimizerOptions(theta_only=True, grad_tol=1e-8, theta_gradient="analytic"))
    assert plain.n_kappa == 0
    assert toy_record.energy <= plain.energy + 1e-10


def test_kicked_start_recovers_ground_energy(toy, toy_record):
    integrals, _ = toy
    options = OptimizerOptions(grad_tol=1e-8, theta_gradient="analytic", kappa_kick=0.05, seed=7)
    kicked = optimize(integrals, toy_record.partition, 2, options)
    assert kicked.kappa_gradient_norm < 1e-6
    assert kicked.energy == pytest.approx(toy_record.energy, abs=1e-8)
    assert kicked.spin_square() == pytest.approx(0.0, abs=1e-8)


def test_iteration_limit_reports_not_converged(toy):
    integrals, _ = toy
    part = make_partition(4, 4, (2, 2))
    record = optimize(integrals, part, 2, OptimizerOptions(max_iter=1, max_macro=1, kappa_kick=0.3))
    assert not record.converged
    assert record.macro_iterations <= 1
    assert np.isfinite(record.energy)

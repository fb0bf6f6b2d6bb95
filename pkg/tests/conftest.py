"""
tests/conftest.py
─────────────────
Shared fixtures: the bundled H₂ system, seeded synthetic systems and cached
ground-state records (optimized once per session).
"""

import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

import pytest

from app.core.config import settings
from app.core.models import OptimizerOptions
from app.services.integrals_io import load_fcidump, load_property_integrals
from app.services.oo_vqe import optimize
from app.services.response_windows import WindowCache
from app.services.self_check import synthetic_system
from app.services.space_partition import make_partition

TIGHT = OptimizerOptions(grad_tol=1e-8, theta_gradient="analytic")


# ── H₂ ───────────────────────────────────────────────────────────────────────

@pytest.fixture(scope="session")
def h2_path():
    return settings.FIXTURES_DIR / "h2_sto3g.fcidump"


@pytest.fixture(scope="session")
def h2_dipoles_path():
    return settings.FIXTURES_DIR / "h2_sto3g.dipoles"


@pytest.fixture(scope="session")
def h2(h2_path, h2_dipoles_path):
    integrals = load_fcidump(h2_path)
    return integrals, load_property_integrals(h2_dipoles_path, n_orb=integrals.n_orb)


@pytest.fixture(scope="session")
def h2_record(h2):
    integrals, _ = h2
    partition = make_partition(integrals.n_orb, integrals.n_elec, (2, 2))
    return optimize(integrals, partition, 2, TIGHT)


# ── Synthetic systems ────────────────────────────────────────────────────────

@pytest.fixture(scope="session")
def toy():
    """4 orbitals, 4 electrons, seeded."""
    return synthetic_system(4, 4, seed=3)


@pytest.fixture(scope="session")
def toy_record(toy):
    """(2,2) active space: one inactive and one virtual orbital around it."""
    integrals, _ = toy
    partition = make_partition(4, 4, (2, 2))
    return optimize(integrals, partition, 2, TIGHT)


@pytest.fixture(scope="session")
def toy_cache(toy, toy_record):
    _, operators = toy
    return WindowCache(toy_record, operators)


@pytest.fixture(scope="session")
def toy_oracle(toy, toy_record):
    from app.services.dense_oracle import DenseOracle

    _, operators = toy
    return DenseOracle(toy_record, operators)

"""
app/core/config.py
──────────────────
All runtime configuration is sourced from environment variables.
Use a .env file locally to override any threshold below.

Numerical defaults are the values every test and result document assumes;
changing them changes what "converged" and "equal" mean downstream.
"""

from functools import lru_cache
from pathlib import Path
from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict

APP_ROOT = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    # ── App ──────────────────────────────────────────────────────────────────
    APP_VERSION: str = "1.0.0"
    ENV: str = "development"
    LOG_LEVEL: str = "INFO"
    CORS_ORIGINS: List[str] = ["*"]
    HOST: str = "127.0.0.1"
    PORT: int = 8000
    RELOAD: bool = True

    # ── Integrals ────────────────────────────────────────────────────────────
    SYMMETRY_TOL: float = 1e-10

    # ── Determinant engine ───────────────────────────────────────────────────
    # 2**26 determinants of complex128 is ~1 GiB per vector.
    MAX_DETERMINANTS: int = 2**26
    POOL_SVD_CUTOFF: float = 1e-10
    EXPM_TOL: float = 1e-10

    # ── Optimizer ────────────────────────────────────────────────────────────
    GRAD_TOL: float = 1e-7
    ENERGY_TOL: float = 1e-9
    FD_STEP: float = 1e-5
    OPT_MAX_ITER: int = 500
    OPT_MAX_MACRO: int = 30
    OPT_SEED: int = 7
    THETA_GRADIENT: str = "fd"
    KAPPA_KICK: float = 0.0

    # ── Response ─────────────────────────────────────────────────────────────
    METRIC_CUTOFF: float = 1e-10
    NORM_CUTOFF: float = 1e-8
    IMAG_TOL: float = 1e-8
    HERMITICITY_TOL: float = 1e-8
    STRUCTURE_TOL: float = 1e-10
    RESONANCE_TOL: float = 1e-6

    # ── Units / spectra ──────────────────────────────────────────────────────
    HARTREE_TO_EV: float = 27.211386245988
    BROADENING: str = "lorentzian"
    WIDTH_EV: float = 0.2
    GRID_POINTS: int = 2000
    GRID_PADDING_WIDTHS: float = 5.0

    # ── Paths ────────────────────────────────────────────────────────────────
    FIXTURES_DIR: Path = APP_ROOT / "fixtures"
    SCHEMA_PATH: Path = APP_ROOT / "schemas" / "result_document.v1.json"
    OUTPUT_DIR: Path = Path("qlr_out")


@lru_cache
def get_settings() -> Settings:
    return Settings()


settings = get_settings()

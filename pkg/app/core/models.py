"""
app/core/models.py
──────────────────
Pydantic v2 models for run configuration, API contracts and the result
document. The result document is the versioned JSON artifact written by
`run`; app/schemas/result_document.v1.json is generated from ResultDocument.
"""

from __future__ import annotations

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.config import settings

SCHEMA_VERSION = "1"


# ── Methods ──────────────────────────────────────────────────────────────────

class MethodId(str, Enum):
    naive = "naive"
    SC = "SC"
    ST = "ST"
    proj = "proj"
    all_SC = "all-SC"
    all_ST = "all-ST"
    all_proj = "all-proj"
    ST_proj = "ST-proj"


HERMITIFIABLE = frozenset({MethodId.SC, MethodId.ST, MethodId.ST_proj})

RANK_CHOICES = ("s", "sd", "sdt", "sdtq", "full")


# ── Configuration ────────────────────────────────────────────────────────────

class OptimizerOptions(BaseModel):
    grad_tol: float = Field(default_factory=lambda: settings.GRAD_TOL, gt=0)
    energy_tol: float = Field(default_factory=lambda: settings.ENERGY_TOL, gt=0)
    fd_step: float = Field(default_factory=lambda: settings.FD_STEP, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.OPT_MAX_ITER, ge=1)
    max_macro: int = Field(default_factory=lambda: settings.OPT_MAX_MACRO, ge=1)
    theta_gradient: Literal["fd", "analytic"] = Field(default_factory=lambda: settings.THETA_GRADIENT)
    kappa_kick: float = Field(default_factory=lambda: settings.KAPPA_KICK, ge=0)
    seed: int = Field(default_factory=lambda: settings.OPT_SEED)
    theta_only: bool = Field(False, description="Skip orbital optimization (plain VQE)")


class RunOptions(BaseModel):
    """Everything a run needs besides the integral sources."""

    active: Tuple[int, int] = Field(..., description="(active electrons, active orbitals)")
    rank: str = "sd"
    methods: List[MethodId] = Field(default_factory=lambda: [MethodId.naive], min_length=1)
    herm: bool = False
    ordering: Optional[List[int]] = None
    frequencies: List[float] = Field(default_factory=list, description="Polarizability frequencies (Hartree)")
    optimizer: OptimizerOptions = Field(default_factory=OptimizerOptions)

    @field_validator("active")
    @classmethod
    def active_space_valid(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        n, o = v
        if n <= 0 or o <= 0:
            raise ValueError("Active space counts must be positive")
        if n % 2:
            raise ValueError("Active electron count must be even")
        return v

    @field_validator("rank")
    @classmethod
    def rank_valid(cls, v: str) -> str:
        key = str(v).strip().lower()
        if key in RANK_CHOICES:
            return key
        if key.isdigit() and int(key) >= 1:
            return key
        raise ValueError(f"rank must be one of {RANK_CHOICES} or an integer >= 1")

    @field_validator("methods")
    @classmethod
    def methods_unique(cls, v: List[MethodId]) -> List[MethodId]:
        seen: List[MethodId] = []
        for m in v:
            if m not in seen:
                seen.append(m)
        return seen

    @model_validator(mode="after")
    def herm_only_where_defined(self) -> "RunOptions":
        if self.herm:
            bad = [m.value for m in self.methods if m not in HERMITIFIABLE]
            if bad:
                raise ValueError(f"herm is only defined for SC, ST and ST-proj; got {bad}")
        return self


class RunConfig(RunOptions):
    fcidump: str
    dipoles: Optional[str] = None
    broadening: Literal["lorentzian", "gaussian"] = Field(default_factory=lambda: settings.BROADENING)
    width_ev: float = Field(default_factory=lambda: settings.WIDTH_EV, gt=0)
    out: Optional[str] = None


# ── Result document ──────────────────────────────────────────────────────────

class ExcitationRow(BaseModel):
    index: int
    omega_hartree: float
    omega_ev: float
    norm: float
    oscillator_strength: Optional[float] = None
    flagged: bool = False


class PolarizabilityEntry(BaseModel):
    frequency: float
    route: Literal["sos", "response"]
    tensor: List[List[float]]
    isotropic: float


class MethodDiagnostics(BaseModel):
    a_hermiticity: float
    b_symmetry: float
    sigma_hermiticity: float
    delta_max: float
    b_gq_norm: Optional[float] = None
    dropped_states: int = 0
    nonpositive_norms: List[int] = Field(default_factory=list)
    n_q: int
    n_g: int
    complete_pool: int


class MethodResult(BaseModel):
    method: MethodId
    herm: bool = False
    excitations: List[ExcitationRow] = Field(default_factory=list)
    diagnostics: Optional[MethodDiagnostics] = None
    polarizabilities: List[PolarizabilityEntry] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)
    error: Optional[str] = None


class GroundStateSummary(BaseModel):
    energy: float
    converged: bool
    theta_gradient_norm: float
    kappa_gradient_norm: float
    macro_iterations: int
    n_theta: int
    n_kappa: int
    rank: int
    active: Tuple[int, int]
    spin_square: float


class ResultDocument(BaseModel):
    schema_version: Literal["1"] = SCHEMA_VERSION
    app_version: str = Field(default_factory=lambda: settings.APP_VERSION)
    n_orb: int
    n_elec: int
    ground_state: GroundStateSummary
    methods: List[MethodResult]
    timings: Dict[str, float] = Field(default_factory=dict)


# ── Spectra / resources / checks ─────────────────────────────────────────────

class Peak(BaseModel):
    omega_ev: float
    f: float


class SpectrumCurve(BaseModel):
    method: str
    broadening: Literal["lorentzian", "gaussian"]
    width_ev: float = Field(..., gt=0)
    energy_ev: List[float]
    intensity: List[float]
    peaks: List[Peak]


class ResourceRow(BaseModel):
    method: MethodId
    excitation_operator: str
    rotation_operator: str
    generic_terms: int
    feasibility: Literal["near-term", "near-term+decomposition", "Hadamard-test"]
    adjusted_terms: Optional[int] = None
    adjustment: Optional[Literal["herm", "decomp"]] = None


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class CheckReport(BaseModel):
    suite: str
    passed: bool
    results: List[CheckResult]


# ── API contracts ────────────────────────────────────────────────────────────

class RunRequest(RunOptions):
    fcidump_text: str = Field(..., min_length=1, description="FCIDUMP file contents")
    dipoles_text: Optional[str] = Field(None, description="Dipole sidecar contents")


class SpectrumRequest(BaseModel):
    document: ResultDocument
    broadening: Literal["lorentzian", "gaussian"] = Field(default_factory=lambda: settings.BROADENING)
    width_ev: float = Field(default_factory=lambda: settings.WIDTH_EV, gt=0)
    methods: Optional[List[MethodId]] = None

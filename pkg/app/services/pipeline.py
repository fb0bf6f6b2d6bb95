"""
app/services/pipeline.py
────────────────────────
Orchestrator: integrals → partition → oo-VQE → per-method response → result document.

Failure policy:
* Input, partition and ground-state errors propagate (nothing useful can be reported).
* A QLRError inside one method is recorded on that method's entry as
  "error[<module>]: <message>" and the remaining methods still run.
* A resonant or singular polarizability frequency is logged and skipped.
* A non-converged optimizer still yields a full document with converged=false.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from app.core.errors import QLRError, ResonanceError, SingularResponseError
from app.core.models import (
    ExcitationRow,
    GroundStateSummary,
    MethodDiagnostics,
    MethodId,
    MethodResult,
    PolarizabilityEntry,
    ResultDocument,
    RunConfig,
    RunOptions,
)
from app.core.config import settings
from app.services.excitation_pool import count_complete_pool, parse_rank
from app.services.integrals_io import (
    DIPOLE_LABELS,
    IntegralSet,
    OneElectronOperatorSet,
    parse_fcidump,
    parse_property_integrals,
    read_source,
    validate,
)
from app.services.oo_vqe import GroundStateRecord, optimize
from app.services.orbital_rotation import transform_one_body
from app.services.qlr_matrices import build_matrices, property_gradient
from app.services.qlr_solver import (
    ExcitationSolution,
    isotropic,
    oscillator_strengths,
    polarizability,
    response_polarizability,
    solve,
)
from app.services.response_windows import WindowCache
from app.services.space_partition import SpacePartition, apply_ordering, make_partition
from app.utils.logger import bind_context, get_logger

logger = get_logger(__name__)


@dataclass
class RunArtifacts:
    document: ResultDocument
    record: GroundStateRecord
    solutions: Dict[str, ExcitationSolution] = field(default_factory=dict)


def describe(error: QLRError) -> str:
    return f"error[{error.module}]: {error}"


# ── Stages ───────────────────────────────────────────────────────────────────

def load_inputs(fcidump_text: str, dipoles_text: str | None = None) -> Tuple[IntegralSet, OneElectronOperatorSet | None]:
    integrals = parse_fcidump(fcidump_text)
    operators = parse_property_integrals(dipoles_text, n_orb=integrals.n_orb) if dipoles_text else None
    validate(integrals, operators)
    if operators is None:
        logger.warning("No dipole integrals; oscillator strengths will be zero")
    else:
        missing = [label for label in DIPOLE_LABELS if label not in operators.matrices]
        if missing:
            logger.warning("Missing dipole components", missing=missing)
    return integrals, operators


def prepare(
    integrals: IntegralSet,
    operators: OneElectronOperatorSet | None,
    options: RunOptions,
) -> Tuple[IntegralSet, OneElectronOperatorSet | None, SpacePartition]:
    partition = make_partition(integrals.n_orb, integrals.n_elec, options.active, options.ordering)
    return apply_ordering(integrals, partition, operators)


def rotate_operators(operators: OneElectronOperatorSet | None, rotation: np.ndarray) -> OneElectronOperatorSet | None:
    """Carries property integrals into the optimized orbital frame."""
    if operators is None:
        return None
    return OneElectronOperatorSet(
        n_orb=operators.n_orb,
        matrices={label: transform_one_body(mat, rotation) for label, mat in operators.matrices.items()},
    )


def summarize_ground_state(record: GroundStateRecord, options: RunOptions) -> GroundStateSummary:
    return GroundStateSummary(
        energy=record.energy,
        converged=record.converged,
        theta_gradient_norm=record.theta_gradient_norm,
        kappa_gradient_norm=record.kappa_gradient_norm,
        macro_iterations=record.macro_iterations,
        n_theta=len(record.pool),
        n_kappa=record.n_kappa,
        rank=record.rank,
        active=tuple(options.active),
        spin_square=record.spin_square(),
    )


def _excitation_rows(solution: ExcitationSolution) -> List[ExcitationRow]:
    f = solution.f if solution.f is not None else np.full(solution.n_states, np.nan)
    return [
        ExcitationRow(
            index=k,
            omega_hartree=float(solution.omega[k]),
            omega_ev=float(solution.omega_ev[k]),
            norm=float(solution.norm[k]),
            oscillator_strength=None if math.isnan(f[k]) else float(f[k]),
            flagged=bool(solution.norm[k] <= 0.0),
        )
        for k in range(solution.n_states)
    ]


def run_method(
    method: MethodId,
    herm: bool,
    record: GroundStateRecord,
    operators: OneElectronOperatorSet | None,
    frequencies: List[float],
    cache: WindowCache,
) -> Tuple[MethodResult, ExcitationSolution | None]:
    timings: Dict[str, float] = {}
    try:
        # ── Step 1: response matrices
        t0 = time.perf_counter()
        matrices = build_matrices(method, record, herm=herm, cache=cache)
        timings["matrices"] = time.perf_counter() - t0

        # ── Step 2: eigenproblem
        t0 = time.perf_counter()
        solution = solve(matrices)
        timings["solve"] = time.perf_counter() - t0

        # ── Step 3: properties
        t0 = time.perf_counter()
        gradients = {
            label: property_gradient(method, record, operators, label, cache)
            for label in DIPOLE_LABELS
            if operators is not None and label in operators.matrices
        }
        oscillator_strengths(solution, gradients)
        entries: List[PolarizabilityEntry] = []
        for omega in frequencies:
            try:
                sos = polarizability(solution, gradients, omega)
                resp = response_polarizability(matrices, gradients, omega)
            except (ResonanceError, SingularResponseError) as e:
                logger.warning("Polarizability skipped", method=method.value, frequency=omega, error=str(e))
                continue
            entries.append(PolarizabilityEntry(frequency=omega, route="sos", tensor=sos.tolist(), isotropic=isotropic(sos)))
            entries.append(PolarizabilityEntry(frequency=omega, route="response", tensor=resp.tolist(), isotropic=isotropic(resp)))
        timings["properties"] = time.perf_counter() - t0

    except QLRError as e:
        logger.error("Method failed", method=method.value, herm=herm, error=str(e), module=e.module)
        return MethodResult(method=method, herm=herm, timings=timings, error=describe(e)), None

    deviations = matrices.structure_deviations()
    diagnostics = MethodDiagnostics(
        **deviations,
        b_gq_norm=matrices.b_gq_norm,
        dropped_states=solution.dropped,
        nonpositive_norms=solution.flagged,
        n_q=matrices.n_q,
        n_g=matrices.n_g,
        complete_pool=count_complete_pool(record.partition),
    )
    if max(deviations.values()) > settings.STRUCTURE_TOL:
        logger.warning("Structure deviation above tolerance", method=method.value, **deviations)
    result = MethodResult(
        method=method,
        herm=herm,
        excitations=_excitation_rows(solution),
        diagnostics=diagnostics,
        polarizabilities=entries,
        timings=timings,
    )
    return result, solution


# ── Full pipeline ────────────────────────────────────────────────────────────

def run_pipeline(
    integrals: IntegralSet,
    operators: OneElectronOperatorSet | None,
    options: RunOptions,
) -> RunArtifacts:
    """
    Full pipeline: partition → oo-VQE → (matrices → solve → properties) per method.

    Raises:
        QLRError: from parsing, partitioning or the ground-state optimization.
    """
    started = time.perf_counter()
    timings: Dict[str, float] = {}

    # ── Step 1: partition and contiguous frame
    integrals, operators, partition = prepare(integrals, operators, options)
    rank = parse_rank(options.rank, partition)

    # ── Step 2: ground state
    t0 = time.perf_counter()
    record = optimize(integrals, partition, rank, options.optimizer)
    timings["ground_state"] = time.perf_counter() - t0
    rotated = rotate_operators(operators, record.rotation)

    # ── Step 3: response per method
    cache = WindowCache(record, rotated)
    results: List[MethodResult] = []
    solutions: Dict[str, ExcitationSolution] = {}
    for method in options.methods:
        with bind_context(method=method.value, herm=options.herm):
            result, solution = run_method(method, options.herm, record, rotated, list(options.frequencies), cache)
        results.append(result)
        if solution is not None:
            solutions[method.value] = solution
    timings["response"] = time.perf_counter() - t0 - timings["ground_state"]
    timings["total"] = time.perf_counter() - started

    document = ResultDocument(
        n_orb=integrals.n_orb,
        n_elec=integrals.n_elec,
        ground_state=summarize_ground_state(record, options),
        methods=results,
        timings=timings,
    )
    logger.info(
        "Pipeline complete",
        energy=record.energy,
        converged=record.converged,
        methods=[m.value for m in options.methods],
        failed=[r.method.value for r in results if r.error],
        seconds=round(timings["total"], 3),
    )
    return RunArtifacts(document=document, record=record, solutions=solutions)


def run_from_text(fcidump_text: str, dipoles_text: str | None, options: RunOptions) -> RunArtifacts:
    integrals, operators = load_inputs(fcidump_text, dipoles_text)
    return run_pipeline(integrals, operators, options)


def run_from_config(config: RunConfig) -> RunArtifacts:
    dipoles_text = read_source(config.dipoles) if config.dipoles else None
    return run_from_text(read_source(config.fcidump), dipoles_text, config)


def write_document(document: ResultDocument, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "result.json"
    path.write_text(json.dumps(document.model_dump(mode="json"), indent=2), encoding="utf-8")
    logger.info("Result document written", path=str(path))
    return path


def read_document(path: str | Path) -> ResultDocument:
    return ResultDocument.model_validate_json(Path(path).read_text(encoding="utf-8"))

"""
app/services/resources.py
─────────────────────────
Measurement-resource classification of the eight response methods.

** Method    ->  R̂ (excitation)     ->  Q̂ (rotation)     -> terms -> feasibility -> adjusted
* naive      ->  Ĝ                  ->  q̂                ->  18   -> nt          -> -
* SC         ->  UĜU†               ->  q̂                ->   9   -> htc         -> herm: 16
* ST         ->  UĜ|CSF⟩⟨0|         ->  q̂                ->   7   -> htc         -> herm: 10
* proj       ->  Ĝ|0⟩⟨0| − ⟨Ĝ⟩      ->  q̂                ->  10   -> nt          -> -
* all-SC     ->  UĜU†               ->  Uq̂U†             ->   8   -> nt+decomp   -> decomp: 24
* all-ST     ->  UĜ|CSF⟩⟨0|         ->  Uq̂|CSF⟩⟨0|       ->   3   -> nt+decomp   -> decomp: 9
* all-proj   ->  Ĝ|0⟩⟨0| − ⟨Ĝ⟩      ->  q̂|0⟩⟨0|          ->   7   -> nt          -> -
* ST-proj    ->  UĜ|CSF⟩⟨0|         ->  q̂|0⟩⟨0|          ->   4   -> htc         -> herm: 8

"terms" counts the unique generic expectation values in the working equations
of E2/S2. Off-diagonal ⟨CSF|X_l†U†ÔUX_m|CSF⟩ elements need a Hadamard test
unless Ô is Hermitian, in which case

    Re M_lm = ½(⟨(X_l + X_m)†U†ÔU(X_l + X_m)⟩ − M_ll − M_mm)

which triples the term count.
"""

from __future__ import annotations

from typing import Callable, Iterable, List

import numpy as np

from app.core.models import MethodId, ResourceRow

_TABLE = {
    MethodId.naive: ("Ĝ", "q̂", 18, "near-term", None, None),
    MethodId.SC: ("UĜU†", "q̂", 9, "Hadamard-test", 16, "herm"),
    MethodId.ST: ("UĜ|CSF⟩⟨0|", "q̂", 7, "Hadamard-test", 10, "herm"),
    MethodId.proj: ("Ĝ|0⟩⟨0| − ⟨0|Ĝ|0⟩", "q̂", 10, "near-term", None, None),
    MethodId.all_SC: ("UĜU†", "Uq̂U†", 8, "near-term+decomposition", 24, "decomp"),
    MethodId.all_ST: ("UĜ|CSF⟩⟨0|", "Uq̂|CSF⟩⟨0|", 3, "near-term+decomposition", 9, "decomp"),
    MethodId.all_proj: ("Ĝ|0⟩⟨0| − ⟨0|Ĝ|0⟩", "q̂|0⟩⟨0|", 7, "near-term", None, None),
    MethodId.ST_proj: ("UĜ|CSF⟩⟨0|", "q̂|0⟩⟨0|", 4, "Hadamard-test", 8, "herm"),
}


def resource_estimate(method: MethodId) -> ResourceRow:
    excitation, rotation, terms, feasibility, adjusted, adjustment = _TABLE[MethodId(method)]
    return ResourceRow(
        method=MethodId(method),
        excitation_operator=excitation,
        rotation_operator=rotation,
        generic_terms=terms,
        feasibility=feasibility,
        adjusted_terms=adjusted,
        adjustment=adjustment,
    )


def resource_table(methods: Iterable[MethodId] | None = None) -> List[ResourceRow]:
    methods = list(MethodId) if methods is None else list(methods)
    return [resource_estimate(m) for m in methods]


def format_table(rows: List[ResourceRow]) -> str:
    header = f"{'method':<9} {'R':<20} {'Q':<13} {'terms':>5}  {'feasibility':<24} adjusted"
    lines = [header, "-" * len(header)]
    for row in rows:
        adjusted = f"{row.adjustment}: {row.adjusted_terms}" if row.adjustment else "-"
        lines.append(
            f"{row.method.value:<9} {row.excitation_operator:<20} {row.rotation_operator:<13} "
            f"{row.generic_terms:>5}  {row.feasibility:<24} {adjusted}"
        )
    return "\n".join(lines)


def hermitian_decomposition(expect: Callable[[np.ndarray], float], left: np.ndarray, right: np.ndarray) -> float:
    """
    Re⟨left|Ô|right⟩ from diagonal measurements only.

    `expect(v)` returns ⟨v|Ô|v⟩ for a Hermitian Ô; `left` and `right` are the
    prepared states UX_l|CSF⟩ and UX_m|CSF⟩.
    """
    return 0.5 * (expect(left + right) - expect(left) - expect(right))

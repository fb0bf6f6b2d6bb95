"""
app/core/errors.py
──────────────────
Exception hierarchy shared by every service module.

Each error names the module that raised it so that the CLI and the API can
report `error[<module>]: <message>` without inspecting the type.
"""

from __future__ import annotations

from typing import Any


class QLRError(Exception):
    """Base for all domain errors."""

    module: str = "qlr"

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.context = context

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        extra = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{base} ({extra})"


# ── integrals_io ─────────────────────────────────────────────────────────────

class IntegralParseError(QLRError):
    module = "integrals_io"

    def __init__(self, message: str, line: int | None = None, **context: Any) -> None:
        if line is not None:
            context = {"line": line, **context}
        super().__init__(message, **context)
        self.line = line


# ── space_partition ──────────────────────────────────────────────────────────

class PartitionError(QLRError):
    module = "space_partition"


# ── fock_engine ──────────────────────────────────────────────────────────────

class DimensionOverflowError(QLRError):
    module = "fock_engine"


class ExpmConvergenceError(QLRError):
    module = "fock_engine"


class PoolRankError(QLRError):
    module = "fock_engine"


# ── oo_vqe ───────────────────────────────────────────────────────────────────

class ConvergenceError(QLRError):
    module = "oo_vqe"


# ── qlr_engine ───────────────────────────────────────────────────────────────

class MethodConfigError(QLRError):
    module = "qlr_engine"


class ContractionError(QLRError):
    module = "qlr_engine"


class MetricSingularError(QLRError):
    module = "qlr_engine"


class ComplexSpectrumError(QLRError):
    module = "qlr_engine"


class ResonanceError(QLRError):
    module = "qlr_engine"

    def __init__(self, message: str, omega_k: float, **context: Any) -> None:
        super().__init__(message, omega_k=omega_k, **context)
        self.omega_k = omega_k


class SingularResponseError(QLRError):
    module = "qlr_engine"


# ── spectra_cli ──────────────────────────────────────────────────────────────

class SpectrumError(QLRError):
    module = "spectra_cli"


class FixtureMissingError(QLRError):
    module = "spectra_cli"

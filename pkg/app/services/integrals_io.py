"""
app/services/integrals_io.py
────────────────────────────
FCIDUMP and dipole-sidecar reading, writing and validation.

FCIDUMP body records are "value i j k l" with 1-based indices in chemist
notation:
  * i j k l all > 0   → g(ij|kl)
  * i j > 0, k = l = 0 → h_ij
  * all zero          → core energy
  * i > 0, rest zero  → orbital energy (accepted and ignored)

Entries written explicitly in the file always win over values implied by
permutational symmetry; among explicit entries the last one wins. A file that
spells out two permutations of one integral with different values therefore
parses, and `validate` reports the breach.

The dipole sidecar mirrors the same line discipline:

    NORB=2
    OPERATOR z
    0.5 1 2
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import IntegralParseError
from app.utils.logger import get_logger

logger = get_logger(__name__)

_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=")
_HEADER_END = ("&END", "/", "$END")
DIPOLE_LABELS = ("x", "y", "z")


# ── Domain types ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class IntegralSet:
    """MO-basis integrals in Hartree, chemist notation g[p,q,r,s] = (pq|rs)."""

    n_orb: int
    n_elec: int
    ms2: int
    h: np.ndarray
    g: np.ndarray
    e_core: float
    orbsym: Tuple[int, ...] = ()

    def replace(self, **changes) -> "IntegralSet":
        data = {
            "n_orb": self.n_orb,
            "n_elec": self.n_elec,
            "ms2": self.ms2,
            "h": self.h,
            "g": self.g,
            "e_core": self.e_core,
            "orbsym": self.orbsym,
        }
        data.update(changes)
        return IntegralSet(**data)


@dataclass(frozen=True)
class OneElectronOperatorSet:
    """⟨φ_p|r_γ|φ_q⟩ matrices in Bohr, keyed by label in file order."""

    n_orb: int
    matrices: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(self.matrices)

    def get(self, label: str) -> np.ndarray | None:
        return self.matrices.get(label)


@dataclass(frozen=True)
class ValidationReport:
    h_violation: float
    g_violation: float
    tolerance: float
    operator_violations: Dict[str, float] = field(default_factory=dict)

    @property
    def breaches(self) -> List[str]:
        names = []
        if self.h_violation > self.tolerance:
            names.append("one_electron_symmetry")
        if self.g_violation > self.tolerance:
            names.append("integral_symmetry")
        names.extend(
            f"operator_symmetry:{label}"
            for label, value in self.operator_violations.items()
            if value > self.tolerance
        )
        return names

    @property
    def ok(self) -> bool:
        return not self.breaches

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "h_violation": self.h_violation,
            "g_violation": self.g_violation,
            "operator_violations": dict(self.operator_violations),
            "tolerance": self.tolerance,
            "breaches": self.breaches,
        }


# ── Symmetry helpers ─────────────────────────────────────────────────────────

def _pair_partners(i: int, j: int) -> Tuple[Tuple[int, int], ...]:
    return ((i, j), (j, i))


def _quartet_partners(i: int, j: int, k: int, l: int) -> set[Tuple[int, int, int, int]]:
    return {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }


def _fill(tensor: np.ndarray, explicit: Mapping[tuple, float], partners) -> None:
    for key, value in explicit.items():
        for perm in partners(*key):
            if perm not in explicit:
                tensor[perm] = value
    for key, value in explicit.items():
        tensor[key] = value


def _to_float(token: str, line_no: int) -> float:
    try:
        return float(token.replace("D", "E").replace("d", "e"))
    except ValueError as e:
        raise IntegralParseError(f"Non-numeric value {token!r}", line=line_no) from e


def _to_index(token: str, line_no: int, n_orb: int) -> int:
    try:
        idx = int(token)
    except ValueError as e:
        raise IntegralParseError(f"Non-integer index {token!r}", line=line_no) from e
    if idx < 0 or idx > n_orb:
        raise IntegralParseError(f"Index {idx} out of range 0..{n_orb}", line=line_no)
    return idx


def _is_numeric_record(line: str) -> bool:
    tokens = line.split()
    if not tokens:
        return False
    try:
        for tok in tokens:
            float(tok.replace("D", "E").replace("d", "e"))
    except ValueError:
        return False
    return True


def _parse_namelist(text: str, line_no: int) -> Dict[str, List[str]]:
    text = re.sub(r"[&$]\s*FCI", " ", text, flags=re.IGNORECASE)
    for marker in _HEADER_END:
        text = text.replace(marker, " ")
    matches = list(_KEY.finditer(text))
    if not matches and text.strip():
        raise IntegralParseError("Malformed namelist header", line=line_no)
    values: Dict[str, List[str]] = {}
    for n, match in enumerate(matches):
        end = matches[n + 1].start() if n + 1 < len(matches) else len(text)
        raw = text[match.end():end]
        values[match.group(1).upper()] = [v for v in re.split(r"[,\s]+", raw) if v]
    return values


def _header_int(header: Mapping[str, List[str]], key: str, line_no: int, default: int | None = None) -> int:
    if key not in header or not header[key]:
        if default is not None:
            return default
        raise IntegralParseError(f"Missing {key} in header", line=line_no)
    try:
        return int(header[key][0])
    except ValueError as e:
        raise IntegralParseError(f"{key} must be an integer, got {header[key][0]!r}", line=line_no) from e


def _split_header(lines: List[str]) -> Tuple[str, int]:
    """Returns (header text, index of first body line)."""
    chunks = []
    for n, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if not chunks and _is_numeric_record(stripped):
            return "", n
        if chunks and _is_numeric_record(stripped):
            return " ".join(chunks), n
        chunks.append(stripped)
        upper = stripped.upper()
        if any(upper.endswith(m) or upper.startswith(m) for m in _HEADER_END):
            return " ".join(chunks), n + 1
    return " ".join(chunks), len(lines)


# ── FCIDUMP ──────────────────────────────────────────────────────────────────

def parse_fcidump(text: str | Iterable[str]) -> IntegralSet:
    """
    Parse FCIDUMP text into a symmetry-completed IntegralSet.

    Raises:
        IntegralParseError: malformed header, non-numeric token, index out of
        range, missing NORB/NELEC. The error carries the 1-based line number.
    """
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]
    header_text, body_start = _split_header(lines)
    header = _parse_namelist(header_text, 1)
    n_orb = _header_int(header, "NORB", 1)
    n_elec = _header_int(header, "NELEC", 1)
    ms2 = _header_int(header, "MS2", 1, default=0)
    if n_orb <= 0:
        raise IntegralParseError("NORB must be positive", line=1)
    orbsym = tuple(int(v) for v in header.get("ORBSYM", []) if v.lstrip("-").isdigit())

    h_explicit: Dict[Tuple[int, int], float] = {}
    g_explicit: Dict[Tuple[int, int, int, int], float] = {}
    e_core = 0.0

    for offset, line in enumerate(lines[body_start:]):
        line_no = body_start + offset + 1
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise IntegralParseError(f"Expected 5 fields, got {len(tokens)}", line=line_no)
        value = _to_float(tokens[0], line_no)
        i, j, k, l = (_to_index(t, line_no, n_orb) for t in tokens[1:])

        if i == j == k == l == 0:
            e_core = value
        elif k == 0 and l == 0 and i > 0 and j > 0:
            key2 = (i - 1, j - 1)
            h_explicit.pop(key2, None)
            h_explicit[key2] = value
        elif i > 0 and j == k == l == 0:
            continue
        elif min(i, j, k, l) > 0:
            key4 = (i - 1, j - 1, k - 1, l - 1)
            g_explicit.pop(key4, None)
            g_explicit[key4] = value
        else:
            raise IntegralParseError(f"Unrecognised index pattern {i} {j} {k} {l}", line=line_no)

    h = np.zeros((n_orb, n_orb))
    g = np.zeros((n_orb, n_orb, n_orb, n_orb))
    _fill(h, h_explicit, _pair_partners)
    _fill(g, g_explicit, _quartet_partners)

    logger.info("FCIDUMP parsed", n_orb=n_orb, n_elec=n_elec, ms2=ms2,
                h_entries=len(h_explicit), g_entries=len(g_explicit))
    return IntegralSet(n_orb=n_orb, n_elec=n_elec, ms2=ms2, h=h, g=g, e_core=e_core, orbsym=orbsym)


def write_fcidump(integrals: IntegralSet) -> str:
    """Canonical-permutation records with repr floats; parse(write(x)) is bit-identical for symmetric x."""
    n = integrals.n_orb
    orbsym = integrals.orbsym or (1,) * n
    out = [
        f"&FCI NORB={n},NELEC={integrals.n_elec},MS2={integrals.ms2},",
        "  ORBSYM=" + ",".join(str(s) for s in orbsym) + ",",
        "  ISYM=1,",
        "&END",
    ]
    g = integrals.g
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    value = float(g[i, j, k, l])
                    if value != 0.0:
                        out.append(f"{value!r} {i + 1} {j + 1} {k + 1} {l + 1}")
    for i in range(n):
        for j in range(i + 1):
            value = float(integrals.h[i, j])
            if value != 0.0:
                out.append(f"{value!r} {i + 1} {j + 1} 0 0")
    out.append(f"{float(integrals.e_core)!r} 0 0 0 0")
    return "\n".join(out) + "\n"


# ── Dipole sidecar ───────────────────────────────────────────────────────────

def parse_property_integrals(text: str | Iterable[str], n_orb: int | None = None) -> OneElectronOperatorSet:
    """
    Parse the dipole sidecar. `n_orb` is the companion FCIDUMP's NORB, if known.

    Raises:
        IntegralParseError: unknown section keyword, malformed record, or a
        NORB that disagrees with the companion FCIDUMP.
    """
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]
    declared: int | None = None
    current: str | None = None
    entries: Dict[str, Dict[Tuple[int, int], float]] = {}

    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if declared is None:
            header = _parse_namelist(line, line_no)
            declared = _header_int(header, "NORB", line_no)
            if n_orb is not None and declared != n_orb:
                raise IntegralParseError(
                    f"Sidecar NORB={declared} does not match FCIDUMP NORB={n_orb}", line=line_no
                )
            continue
        tokens = line.split()
        if not _is_numeric_record(line):
            if tokens[0].upper() != "OPERATOR" or len(tokens) != 2:
                raise IntegralParseError(f"Unknown section keyword {tokens[0]!r}", line=line_no)
            current = tokens[1].lower()
            entries.setdefault(current, {})
            continue
        if current is None:
            raise IntegralParseError("Record before any OPERATOR section", line=line_no)
        if len(tokens) != 3:
            raise IntegralParseError(f"Expected 3 fields, got {len(tokens)}", line=line_no)
        value = _to_float(tokens[0], line_no)
        i, j = (_to_index(t, line_no, declared) for t in tokens[1:])
        if i == 0 or j == 0:
            raise IntegralParseError("Operator indices are 1-based", line=line_no)
        section = entries[current]
        section.pop((i - 1, j - 1), None)
        section[(i - 1, j - 1)] = value

    if declared is None:
        raise IntegralParseError("Missing NORB header", line=1)

    matrices: Dict[str, np.ndarray] = {}
    for label, section in entries.items():
        mat = np.zeros((declared, declared))
        _fill(mat, section, _pair_partners)
        matrices[label] = mat

    missing = [lab for lab in DIPOLE_LABELS if lab not in matrices]
    if missing:
        logger.warning("Dipole components missing, treated as zero", missing=missing)
    return OneElectronOperatorSet(n_orb=declared, matrices=matrices)


def write_property_integrals(operators: OneElectronOperatorSet) -> str:
    out = [f"NORB={operators.n_orb}"]
    for label, mat in operators.matrices.items():
        out.append(f"OPERATOR {label}")
        for i in range(operators.n_orb):
            for j in range(i + 1):
                value = float(mat[i, j])
                if value != 0.0:
                    out.append(f"{value!r} {i + 1} {j + 1}")
    return "\n".join(out) + "\n"


# ── Validation ───────────────────────────────────────────────────────────────

def validate(integrals: IntegralSet, operators: OneElectronOperatorSet | None = None) -> ValidationReport:
    """Report-only: maximum permutational-symmetry violations."""
    h, g = integrals.h, integrals.g
    h_violation = float(np.max(np.abs(h - h.T))) if h.size else 0.0
    g_violation = 0.0
    if g.size:
        for axes in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            g_violation = max(g_violation, float(np.max(np.abs(g - g.transpose(axes)))))
    op_violations = {}
    if operators is not None:
        op_violations = {
            label: float(np.max(np.abs(mat - mat.T))) for label, mat in operators.matrices.items()
        }
    report = ValidationReport(
        h_violation=h_violation,
        g_violation=g_violation,
        tolerance=settings.SYMMETRY_TOL,
        operator_violations=op_violations,
    )
    if not report.ok:
        logger.warning("Integral symmetry breach", breaches=report.breaches,
                       h_violation=h_violation, g_violation=g_violation)
    return report


# ── File / stdin access ──────────────────────────────────────────────────────

def read_source(source: str | Path) -> str:
    """'-' reads standard input."""
    if str(source) == "-":
        return sys.stdin.read()
    return Path(source).read_text(encoding="utf-8")


def load_fcidump(source: str | Path) -> IntegralSet:
    return parse_fcidump(read_source(source))


def load_property_integrals(source: str | Path, n_orb: int | None = None) -> OneElectronOperatorSet:
    return parse_property_integrals(read_source(source), n_orb=n_orb)


def iter_dipole_matrices(operators: OneElectronOperatorSet | None, n_orb: int) -> Iterator[Tuple[str, np.ndarray]]:
    """Yields (label, matrix) for x, y, z; absent components are zero."""
    for label in DIPOLE_LABELS:
        mat = operators.get(label) if operators is not None else None
        yield label, (np.zeros((n_orb, n_orb)) if mat is None else mat)

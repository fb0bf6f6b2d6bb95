"""
app/cli.py
──────────
Command-line frontend.

    python -m app.cli run --fcidump h2.fcidump --dipoles h2.dipoles --active 2,2 --method naive --method ST
    python -m app.cli run --config run.env
    python -m app.cli spectrum --result qlr_out/result.json --broadening gaussian --width-ev 0.3
    python -m app.cli resources [--method SC --herm]
    python -m app.cli check [--suite fast|oracle|all]
    python -m app.cli validate --fcidump h2.fcidump [--dipoles h2.dipoles]
    python -m app.cli schema [--out app/schemas/result_document.v1.json]

The config file holds `key = value` lines (# comments) with keys named after
the long flags: fcidump, dipoles, active, rank, method (comma-separated),
herm, ordering, frequencies, broadening, width_ev, out, grad_tol,
max_macro, theta_gradient, kappa_kick, seed, theta_only. Flags override it.

Exit codes: 0 success, 1 error or failed check, 2 optimizer not converged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import dotenv_values
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import MethodConfigError, QLRError, SpectrumError
from app.core.models import HERMITIFIABLE, MethodId, ResultDocument, RunConfig
from app.services.integrals_io import load_fcidump, load_property_integrals, validate
from app.services.pipeline import describe, read_document, run_from_config, write_document
from app.services.resources import format_table, resource_table
from app.services.self_check import SUITES, run_checks
from app.services.spectra import spectra_from_document, write_spectrum
from app.utils.logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

_OPTIMIZER_KEYS = ("grad_tol", "max_macro", "theta_gradient", "kappa_kick", "seed", "theta_only")
_TRUE = {"1", "true", "yes", "on"}


# ── Config merging ───────────────────────────────────────────────────────────

def _split(value: str) -> List[str]:
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _as_bool(value: Any) -> bool:
    return value if isinstance(value, bool) else str(value).strip().lower() in _TRUE


def read_config_file(path: str | Path) -> Dict[str, Any]:
    """dotenv-style `key = value` file → dict of raw strings with normalized keys."""
    raw = dotenv_values(path)
    return {k.strip().lower().replace("-", "_"): v for k, v in raw.items() if v is not None}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge config file and flags into a validated RunConfig.

    Raises:
        MethodConfigError: any validation failure (unknown method, herm on a
        method without a hermitified variant, bad rank, width, active space).
    """
    values: Dict[str, Any] = read_config_file(args.config) if args.config else {}
    for key in ("fcidump", "dipoles", "active", "rank", "ordering", "frequencies", "broadening", "width_ev", "out", *_OPTIMIZER_KEYS):
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    if args.method:
        values["method"] = args.method
    if args.herm:
        values["herm"] = True

    data: Dict[str, Any] = {}
    try:
        if "fcidump" not in values:
            raise MethodConfigError("No FCIDUMP given (--fcidump or fcidump = ... in --config)")
        if "active" not in values:
            raise MethodConfigError("No active space given (--active n,o)")
        data["fcidump"] = values["fcidump"]
        data["dipoles"] = values.get("dipoles")
        data["active"] = tuple(int(v) for v in _split(values["active"]))
        if "rank" in values:
            data["rank"] = values["rank"]
        if "method" in values:
            methods = values["method"]
            methods = methods if isinstance(methods, list) else _split(methods)
            data["methods"] = [m for item in methods for m in _split(item)]
        data["herm"] = _as_bool(values.get("herm", False))
        if "ordering" in values:
            data["ordering"] = [int(v) for v in _split(values["ordering"])]
        if "frequencies" in values:
            data["frequencies"] = [float(v) for v in _split(values["frequencies"])]
        for key in ("broadening", "width_ev", "out"):
            if key in values:
                data[key] = values[key]
        optimizer = {k: values[k] for k in _OPTIMIZER_KEYS if k in values}
        if "theta_only" in optimizer:
            optimizer["theta_only"] = _as_bool(optimizer["theta_only"])
        data["optimizer"] = optimizer
        return RunConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise MethodConfigError(f"Invalid configuration: {where}: {first['msg']}") from e
    except ValueError as e:
        raise MethodConfigError(f"Invalid configuration: {e}") from e


# ── Output helpers ───────────────────────────────────────────────────────────

def format_document(document: ResultDocument) -> str:
    gs = document.ground_state
    lines = [
        f"E0 = {gs.energy:.10f} Eh  converged={gs.converged}  "
        f"|g_theta|={gs.theta_gradient_norm:.1e}  |g_kappa|={gs.kappa_gradient_norm:.1e}",
    ]
    for result in document.methods:
        name = f"H{result.method.value}" if result.herm else result.method.value
        if result.error:
            lines.append(f"\n[{name}] {result.error}")
            continue
        lines.append(f"\n[{name}]")
        lines.append(f"{'k':>3} {'omega / Eh':>14} {'omega / eV':>12} {'f':>12}")
        for row in result.excitations:
            f = "flagged" if row.oscillator_strength is None else f"{row.oscillator_strength:.6f}"
            lines.append(f"{row.index:>3} {row.omega_hartree:>14.8f} {row.omega_ev:>12.6f} {f:>12}")
        if result.diagnostics and result.diagnostics.b_gq_norm is not None:
            lines.append(f"    ||B^Gq|| = {result.diagnostics.b_gq_norm:.4f}")
    return "\n".join(lines)


# ── Subcommands ──────────────────────────────────────────────────────────────

def cmd_run(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    artifacts = run_from_config(config)
    document = artifacts.document
    out_dir = Path(config.out) if config.out else settings.OUTPUT_DIR
    write_document(document, out_dir)
    try:
        for curve in spectra_from_document(document, config.broadening, config.width_ev):
            write_spectrum(curve, out_dir)
    except SpectrumError as e:
        logger.warning("No spectrum written", error=str(e))
    print(format_document(document))

    failed = [r for r in document.methods if r.error]
    for result in failed:
        print(result.error, file=sys.stderr)
    if failed:
        return EXIT_ERROR
    if not document.ground_state.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_spectrum(args: argparse.Namespace) -> int:
    document = read_document(args.result)
    out_dir = Path(args.out) if args.out else Path(args.result).parent
    methods = [MethodId(m) for m in args.method] if args.method else None
    for curve in spectra_from_document(document, args.broadening, args.width_ev, methods):
        spectrum_path, peaks_path = write_spectrum(curve, out_dir)
        print(f"{curve.method}: {spectrum_path} {peaks_path}")
    return EXIT_OK


def cmd_resources(args: argparse.Namespace) -> int:
    methods = [MethodId(m) for m in args.method] if args.method else None
    rows = resource_table(methods)
    if args.herm:
        rows = [r for r in rows if r.method in HERMITIFIABLE]
    if args.json:
        print(json.dumps([r.model_dump(mode="json") for r in rows], indent=2, ensure_ascii=False))
    else:
        print(format_table(rows))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    suite = "oracle" if args.oracle else "fast" if args.fast else args.suite
    report = run_checks(suite, args.fixtures)
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status}  {result.name:<20} {result.detail}")
    print(f"\nsuite={report.suite} passed={report.passed}")
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_validate(args: argparse.Namespace) -> int:
    integrals = load_fcidump(args.fcidump)
    operators = load_property_integrals(args.dipoles, n_orb=integrals.n_orb) if args.dipoles else None
    report = validate(integrals, operators)
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_schema(args: argparse.Namespace) -> int:
    text = json.dumps(ResultDocument.model_json_schema(), indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info("Schema written", path=args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ── Parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlr", description="Classical emulator of near-term quantum linear response.")
    sub = parser.add_subparsers(dest="command", required=True)
    methods = [m.value for m in MethodId]

    run = sub.add_parser("run", help="ground state + response for the chosen methods")
    run.add_argument("--config", help="key = value file mirroring the flags")
    run.add_argument("--fcidump", help="FCIDUMP path ('-' for stdin)")
    run.add_argument("--dipoles", help="dipole sidecar path")
    run.add_argument("--active", help="active space as n,o")
    run.add_argument("--rank", help="sd, sdt, sdtq, full or an integer")
    run.add_argument("--method", action="append", choices=methods, help="repeatable")
    run.add_argument("--herm", action="store_true", help="hermitified SC/ST/ST-proj")
    run.add_argument("--ordering", help="comma-separated orbital permutation (0-based)")
    run.add_argument("--frequencies", help="comma-separated polarizability frequencies (Hartree)")
    run.add_argument("--broadening", choices=["lorentzian", "gaussian"])
    run.add_argument("--width-ev", dest="width_ev", type=float)
    run.add_argument("--out", help="output directory")
    run.add_argument("--grad-tol", dest="grad_tol", type=float)
    run.add_argument("--max-macro", dest="max_macro", type=int)
    run.add_argument("--theta-gradient", dest="theta_gradient", choices=["fd", "analytic"])
    run.add_argument("--kappa-kick", dest="kappa_kick", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--theta-only", dest="theta_only", action="store_true", help="skip orbital optimization")
    run.set_defaults(func=cmd_run)

    spectrum = sub.add_parser("spectrum", help="broadened spectra from a result document")
    spectrum.add_argument("--result", required=True)
    spectrum.add_argument("--broadening", choices=["lorentzian", "gaussian"], default=settings.BROADENING)
    spectrum.add_argument("--width-ev", dest="width_ev", type=float, default=settings.WIDTH_EV)
    spectrum.add_argument("--method", action="append", choices=methods)
    spectrum.add_argument("--out")
    spectrum.set_defaults(func=cmd_spectrum)

    resources = sub.add_parser("resources", help="measurement-resource table")
    resources.add_argument("--method", action="append", choices=methods)
    resources.add_argument("--herm", action="store_true", help="only methods with a hermitified variant")
    resources.add_argument("--json", action="store_true")
    resources.set_defaults(func=cmd_resources)

    check = sub.add_parser("check", help="self-check suites")
    check.add_argument("--suite", choices=SUITES, default="fast")
    check.add_argument("--fast", action="store_true")
    check.add_argument("--oracle", action="store_true")
    check.add_argument("--fixtures", help="fixture directory (defaults to the bundled one)")
    check.set_defaults(func=cmd_check)

    val = sub.add_parser("validate", help="integral symmetry report")
    val.add_argument("--fcidump", required=True)
    val.add_argument("--dipoles")
    val.set_defaults(func=cmd_validate)

    schema = sub.add_parser("schema", help="emit the result-document JSON schema")
    schema.add_argument("--out")
    schema.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QLRError as e:
        print(describe(e), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""
tests/test_integrals_io.py
──────────────────────────
FCIDUMP / dipole sidecar parsing, writing and symmetry validation.
Run with: pytest tests/ -v
"""

import numpy as np
import pytest

from app.core.errors import IntegralParseError
from app.services.integrals_io import (
    iter_dipole_matrices,
    parse_fcidump,
    parse_property_integrals,
    validate,
    write_fcidump,
    write_property_integrals,
)
from app.services.self_check import synthetic_system

HEADER = "&FCI NORB=2,NELEC=2,MS2=0,\n  ORBSYM=1,1,\n  ISYM=1,\n&END\n"


# ── parse_fcidump ────────────────────────────────────────────────────────────

def test_h2_header_and_core(h2):
    integrals, _ = h2
    assert integrals.n_orb == 2
    assert integrals.n_elec == 2
    assert integrals.ms2 == 0
    assert integrals.orbsym == (1, 5)
    assert integrals.e_core == pytest.approx(0.7143)


def test_h2_symmetry_completion(h2):
    integrals, _ = h2
    g = integrals.g
    for perm in [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0)]:
        assert g[perm] == pytest.approx(0.1813)
    assert g[1, 1, 0, 0] == pytest.approx(0.6636)
    assert integrals.h[1, 1] == pytest.approx(-0.4756)
    assert integrals.h[0, 1] == 0.0


def test_fortran_exponent_accepted():
    ints = parse_fcidump(HEADER + "1.0D-01 1 1 1 1\n-1.0d0 1 1 0 0\n")
    assert ints.g[0, 0, 0, 0] == pytest.approx(0.1)
    assert ints.h[0, 0] == pytest.approx(-1.0)


def test_orbital_energy_records_ignored():
    ints = parse_fcidump(HEADER + "-0.5 1 0 0 0\n0.25 0 0 0 0\n")
    assert not np.any(ints.h)
    assert ints.e_core == pytest.approx(0.25)


def test_explicit_entry_wins_over_implied_permutation():
    ints = parse_fcidump(HEADER + "0.3 1 2 1 2\n0.5 2 1 1 2\n")
    assert ints.g[0, 1, 0, 1] == pytest.approx(0.3)
    assert ints.g[1, 0, 0, 1] == pytest.approx(0.5)


def test_non_numeric_token_reports_line():
    with pytest.raises(IntegralParseError) as exc:
        parse_fcidump(HEADER + "0.3 1 1 1 1\nabc 1 1 1 1\n")
    assert exc.value.line == 6


def test_index_out_of_range():
    with pytest.raises(IntegralParseError):
        parse_fcidump(HEADER + "0.3 3 1 1 1\n")


def test_missing_norb():
    with pytest.raises(IntegralParseError):
        parse_fcidump("&FCI NELEC=2,\n&END\n0.1 1 1 1 1\n")


def test_write_then_parse_preserves_synthetic_integrals():
    integrals, _ = synthetic_system(3, 2, seed=5)
    again = parse_fcidump(write_fcidump(integrals))
    np.testing.assert_array_equal(again.h, integrals.h)
    np.testing.assert_array_equal(again.g, integrals.g)
    assert again.e_core == integrals.e_core


# ── validate ─────────────────────────────────────────────────────────────────

def test_h2_is_symmetric(h2):
    integrals, operators = h2
    report = validate(integrals, operators)
    assert report.ok
    assert report.breaches == []


def test_tampered_fixture_names_broken_symmetry(h2_path):
    text = h2_path.read_text(encoding="utf-8") + "  0.5  2  1  1  2\n"
    report = validate(parse_fcidump(text))
    assert not report.ok
    assert "integral_symmetry" in report.breaches
    assert report.g_violation == pytest.approx(0.5 - 0.1813)


def test_report_as_dict_lists_breaches():
    ints = parse_fcidump(HEADER + "0.3 1 2 1 2\n0.5 2 1 1 2\n")
    data = validate(ints).as_dict()
    assert data["breaches"] == ["integral_symmetry"]
    assert data["tolerance"] > 0


@pytest.mark.parametrize("target, breach", [
    ("h", "one_electron_symmetry"),
    ("g", "integral_symmetry"),
    ("z", "operator_symmetry:z"),
])
def test_small_perturbation_is_reported(target, breach):
    integrals, operators = synthetic_system(4, 4, seed=2)
    assert validate(integrals, operators).ok
    if target == "h":
        h = integrals.h.copy()
        h[0, 1] += 1e-6
        integrals = integrals.replace(h=h)
    elif target == "g":
        g = integrals.g.copy()
        g[0, 1, 2, 3] += 1e-6
        integrals = integrals.replace(g=g)
    else:
        operators.matrices["z"] = operators.matrices["z"].copy()
        operators.matrices["z"][0, 1] += 1e-6
    report = validate(integrals, operators)
    assert report.breaches == [breach]
    assert max([report.h_violation, report.g_violation, *report.operator_violations.values()]) == pytest.approx(1e-6, rel=1e-3)


# ── dipole sidecar ───────────────────────────────────────────────────────────

def test_h2_dipole_z(h2):
    _, operators = h2
    z = operators.matrices["z"]
    assert z[0, 1] == pytest.approx(0.9310)
    assert z[1, 0] == pytest.approx(0.9310)
    assert not np.any(operators.matrices["x"])


def test_missing_component_is_zero():
    ops = parse_property_integrals("NORB=2\nOPERATOR z\n0.4 1 2\n")
    mats = dict(iter_dipole_matrices(ops, 2))
    assert set(mats) == {"x", "y", "z"}
    assert not np.any(mats["x"])
    assert mats["z"][1, 0] == pytest.approx(0.4)


def test_sidecar_norb_mismatch():
    with pytest.raises(IntegralParseError):
        parse_property_integrals("NORB=3\nOPERATOR z\n0.4 1 2\n", n_orb=2)


def test_sidecar_unknown_keyword():
    with pytest.raises(IntegralParseError) as exc:
        parse_property_integrals("NORB=2\nMATRIX z\n0.4 1 2\n")
    assert exc.value.line == 2


def test_sidecar_write_then_parse(h2):
    _, operators = h2
    again = parse_property_integrals(write_property_integrals(operators), n_orb=2)
    np.testing.assert_array_equal(again.matrices["z"], operators.matrices["z"])

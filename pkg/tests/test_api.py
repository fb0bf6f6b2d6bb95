"""
tests/test_api.py
─────────────────
REST endpoints driven in-process through httpx's ASGI transport.
Run with: pytest tests/ -v
"""

import httpx
import pytest

from app.main import app

pytestmark = pytest.mark.asyncio


def _client() -> httpx.AsyncClient:
    return httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url="http://test")


def _run_body(h2_path, h2_dipoles_path, **overrides):
    body = {
        "fcidump_text": h2_path.read_text(),
        "dipoles_text": h2_dipoles_path.read_text(),
        "active": [2, 2],
        "methods": ["naive", "ST"],
        "optimizer": {"grad_tol": 1e-6},
    }
    body.update(overrides)
    return body


# ── basics ───────────────────────────────────────────────────────────────────

async def test_health():
    async with _client() as client:
        response = await client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


async def test_resources_filtered():
    async with _client() as client:
        response = await client.get("/api/v1/resources", params={"method": ["SC", "all-ST"]})
    assert response.status_code == 200
    rows = response.json()
    assert [r["method"] for r in rows] == ["SC", "all-ST"]
    assert rows[1]["generic_terms"] == 3


async def test_resources_all():
    async with _client() as client:
        response = await client.get("/api/v1/resources")
    assert len(response.json()) == 8


# ── run ──────────────────────────────────────────────────────────────────────

async def test_run_and_spectrum(h2_path, h2_dipoles_path):
    async with _client() as client:
        response = await client.post("/api/v1/run", json=_run_body(h2_path, h2_dipoles_path))
        assert response.status_code == 200
        document = response.json()
        assert document["schema_version"] == "1"
        assert [m["method"] for m in document["methods"]] == ["naive", "ST"]
        assert len(document["methods"][0]["excitations"]) == 2

        spectrum = await client.post("/api/v1/spectrum", json={"document": document, "broadening": "gaussian", "width_ev": 0.3})
    assert spectrum.status_code == 200
    curves = spectrum.json()
    assert [c["method"] for c in curves] == ["naive", "ST"]
    assert len(curves[0]["energy_ev"]) == len(curves[0]["intensity"])


@pytest.mark.parametrize("overrides, fragment", [
    ({"methods": ["naive"], "herm": True}, "herm"),
    ({"fcidump_text": "not an fcidump"}, "error[integrals_io]"),
    ({"active": [2, 4]}, "error[space_partition]"),
    ({"rank": "sdx"}, "rank"),
])
async def test_run_rejects_bad_requests(h2_path, h2_dipoles_path, overrides, fragment):
    async with _client() as client:
        response = await client.post("/api/v1/run", json=_run_body(h2_path, h2_dipoles_path, **overrides))
    assert response.status_code == 422
    assert fragment in response.text


async def test_spectrum_without_usable_method():
    document = {
        "n_orb": 2,
        "n_elec": 2,
        "ground_state": {
            "energy": -1.1, "converged": True, "theta_gradient_norm": 0.0, "kappa_gradient_norm": 0.0,
            "macro_iterations": 0, "n_theta": 2, "n_kappa": 0, "rank": 2, "active": [2, 2], "spin_square": 0.0,
        },
        "methods": [{"method": "naive", "error": "error[qlr_engine]: Metric is numerically singular"}],
    }
    async with _client() as client:
        response = await client.post("/api/v1/spectrum", json={"document": document})
    assert response.status_code == 422
    assert "error[spectra_cli]" in response.json()["detail"]

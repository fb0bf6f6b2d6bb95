"""
app/services/spectra.py
───────────────────────
Broadened absorption spectra from (ω_k, f_k) tables.

Profiles are area-normalized, so a peak contributes f_k to the integral
over energy:
    lorentzian  FWHM = width
    gaussian    σ = width / (2√(2 ln 2))
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from app.core.config import settings
from app.core.errors import SpectrumError
from app.core.models import MethodId, MethodResult, Peak, ResultDocument, SpectrumCurve
from app.utils.logger import get_logger

logger = get_logger(__name__)

BROADENINGS = ("lorentzian", "gaussian")


def lorentzian(x: np.ndarray, center: float, width: float) -> np.ndarray:
    gamma = 0.5 * width
    return gamma / (math.pi * ((x - center) ** 2 + gamma**2))


def gaussian(x: np.ndarray, center: float, width: float) -> np.ndarray:
    sigma = width / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return np.exp(-0.5 * ((x - center) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


_PROFILES = {"lorentzian": lorentzian, "gaussian": gaussian}


def peaks_from_result(result: MethodResult) -> List[Peak]:
    """Rows without an oscillator strength (flagged norms) are skipped."""
    return [
        Peak(omega_ev=row.omega_ev, f=row.oscillator_strength)
        for row in result.excitations
        if row.oscillator_strength is not None
    ]


def energy_grid(peaks: Sequence[Peak], width_ev: float, points: int | None = None) -> np.ndarray:
    points = points or settings.GRID_POINTS
    pad = settings.GRID_PADDING_WIDTHS * width_ev
    omegas = [p.omega_ev for p in peaks]
    return np.linspace(min(omegas) - pad, max(omegas) + pad, points)


def broaden(
    peaks: Sequence[Peak],
    broadening: str | None = None,
    width_ev: float | None = None,
    points: int | None = None,
    method: str = "",
) -> SpectrumCurve:
    """
    Raises:
        SpectrumError: no peaks, unknown profile or non-positive width.
    """
    broadening = broadening or settings.BROADENING
    width_ev = settings.WIDTH_EV if width_ev is None else width_ev
    if not peaks:
        raise SpectrumError("No peaks to broaden", method=method)
    if broadening not in _PROFILES:
        raise SpectrumError(f"Unknown broadening {broadening!r}; expected one of {BROADENINGS}")
    if width_ev <= 0:
        raise SpectrumError("Broadening width must be positive", width_ev=width_ev)

    grid = energy_grid(peaks, width_ev, points)
    profile = _PROFILES[broadening]
    intensity = np.zeros_like(grid)
    for peak in peaks:
        intensity += peak.f * profile(grid, peak.omega_ev, width_ev)
    return SpectrumCurve(
        method=method,
        broadening=broadening,
        width_ev=width_ev,
        energy_ev=grid.tolist(),
        intensity=np.clip(intensity, 0.0, None).tolist(),
        peaks=list(peaks),
    )


def integrated_intensity(curve: SpectrumCurve) -> float:
    return float(trapezoid(curve.intensity, curve.energy_ev))


def spectra_from_document(
    document: ResultDocument,
    broadening: str | None = None,
    width_ev: float | None = None,
    methods: Iterable[MethodId] | None = None,
) -> List[SpectrumCurve]:
    wanted = {MethodId(m) for m in methods} if methods else None
    curves = []
    for result in document.methods:
        if wanted is not None and result.method not in wanted:
            continue
        if result.error:
            logger.warning("Method skipped", method=result.method.value, error=result.error)
            continue
        label = f"H{result.method.value}" if result.herm else result.method.value
        curves.append(broaden(peaks_from_result(result), broadening, width_ev, method=label))
    if not curves:
        raise SpectrumError("No method in the document has a spectrum")
    return curves


def write_spectrum(curve: SpectrumCurve, directory: str | Path) -> Tuple[Path, Path]:
    """Writes <method>_spectrum.csv and <method>_peaks.csv; returns both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = curve.method or "spectrum"
    spectrum_path = directory / f"{stem}_spectrum.csv"
    peaks_path = directory / f"{stem}_peaks.csv"
    np.savetxt(
        spectrum_path,
        np.column_stack([curve.energy_ev, curve.intensity]),
        delimiter=",",
        header="energy_ev,intensity",
        comments="",
    )
    np.savetxt(
        peaks_path,
        np.array([[p.omega_ev, p.f] for p in curve.peaks]).reshape(-1, 2),
        delimiter=",",
        header="omega_ev,f",
        comments="",
    )
    logger.info("Spectrum written", method=curve.method, path=str(spectrum_path), points=len(curve.energy_ev))
    return spectrum_path, peaks_path

"""Frequency-analysis tooling over scenes: per-class low/high spectral curves
(1D DFT band split) and class-averaged 2D spectra of PCA component patches.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import SceneContainer, mirror_pad
from .imageio import write_pgm16


def class_mean_spectra(scene: SceneContainer) -> dict[int, np.ndarray]:
    """Mean spectrum per labeled class (float64, length B)."""
    out = {}
    pixels = scene.spectral.reshape(scene.bands, -1).astype(np.float64)
    labels = scene.labels.ravel()
    for cls in range(1, scene.class_count + 1):
        mask = labels == cls
        if not mask.any():
            warnings.warn(f"class {cls} has no labeled pixels; skipped", stacklevel=2)
            continue
        out[cls] = pixels[:, mask].mean(axis=1)
    return out


def split_spectrum_lowhigh(signal: np.ndarray, cutoff_bin: int) -> tuple[np.ndarray, np.ndarray]:
    """Band-split a 1-D signal: bins with min(k, B-k) <= cutoff_bin are low
    (DC always lands in low), the rest high. low + high == signal exactly."""
    b = signal.shape[0]
    spectrum = np.fft.fft(signal)
    k = np.arange(b)
    low_mask = np.minimum(k, b - k) <= cutoff_bin
    low = np.fft.ifft(np.where(low_mask, spectrum, 0)).real
    high = np.fft.ifft(np.where(low_mask, 0, spectrum)).real
    return low, high


def analyze_spectrum(scene: SceneContainer, cutoff_bin: int) -> list[tuple[int, int, float, float]]:
    """Rows (class, band, low_value, high_value) for every labeled class."""
    if cutoff_bin < 0:
        raise ValueError("cutoff_bin must be >= 0")
    rows = []
    for cls, spectrum in class_mean_spectra(scene).items():
        low, high = split_spectrum_lowhigh(spectrum, cutoff_bin)
        for band in range(scene.bands):
            rows.append((cls, band, float(low[band]), float(high[band])))
    return rows


def write_spectrum_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "band", "low_value", "high_value"])
        for row in rows:
            writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])


def pca_components(pixels: np.ndarray, n_components: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Covariance-eigendecomposition PCA.

    ``pixels`` is (features, samples). Components are returned as rows,
    ordered by descending eigenvalue, sign fixed so each component's
    largest-magnitude loading is positive. Returns (components, eigenvalues).
    """
    if pixels.ndim != 2:
        raise ValueError("pixels must be (features, samples)")
    centered = pixels - pixels.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / max(pixels.shape[1] - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    comps = eigvecs[:, order].T.copy()
    for i, comp in enumerate(comps):
        pivot = np.argmax(np.abs(comp))
        if comp[pivot] < 0:
            comps[i] = -comp
    return comps, eigvals[order]


@dataclass
class SpatialFrequencyResult:
    class_id: int
    component: int
    magnitude: np.ndarray  # (window, window), DC-centered mean |DFT|
    samples_used: int


def analyze_spatial_frequency(
    scene: SceneContainer,
    samples_per_class: int,
    window: int = 11,
    n_components: int = 3,
    seed: int = 0,
) -> list[SpatialFrequencyResult]:
    """Project to the top PCA components, then average DC-centered 2D DFT
    magnitudes of per-class sample patches."""
    if window % 2 != 1:
        raise ValueError("window must be odd")
    n_components = min(n_components, scene.bands)
    flat = scene.spectral.reshape(scene.bands, -1).astype(np.float64)
    comps, _ = pca_components(flat, n_components=n_components)
    projected = (comps @ flat).reshape(n_components, scene.height, scene.width)
    padded = mirror_pad(projected, window // 2)

    rng = np.random.default_rng(seed)
    results = []
    for cls in range(1, scene.class_count + 1):
        coords = np.argwhere(scene.labels == cls)
        if coords.shape[0] < samples_per_class:
            warnings.warn(
                f"class {cls}: only {coords.shape[0]} labeled pixels, "
                f"need {samples_per_class}; skipped",
                stacklevel=2,
            )
            continue
        chosen = coords[rng.choice(coords.shape[0], size=samples_per_class, replace=False)]
        for comp in range(n_components):
            acc = np.zeros((window, window))
            for r, c in chosen:
                patch = padded[comp, r : r + window, c : c + window]
                acc += np.abs(np.fft.fftshift(np.fft.fft2(patch)))
            results.append(
                SpatialFrequencyResult(
                    class_id=cls,
                    component=comp,
                    magnitude=acc / samples_per_class,
                    samples_used=samples_per_class,
                )
            )
    return results


def write_magnitude_pgms(results: list[SpatialFrequencyResult], out_dir: str | Path) -> list[Path]:
    """One 16-bit PGM per (class, component), magnitudes scaled to full range."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        peak = res.magnitude.max()
        scaled = res.magnitude / peak * 65535 if peak > 0 else res.magnitude
        path = out_dir / f"class{res.class_id}_pc{res.component + 1}.pgm"
        write_pgm16(path, np.round(scaled).astype(np.uint16))
        written.append(path)
    return written

"""Scene container I/O, synthetic scene generation, and patch extraction.

A scene on disk is a directory holding a human-readable manifest plus three
raw little-endian payloads:

* ``manifest.txt``   key: value lines (dims, band counts, class names)
* ``spectral.f32``   float32, band-sequential, row-major, 4*B*H*W bytes
* ``active.f32``     float32, band-sequential, row-major, 4*Ca*H*W bytes
* ``labels.u16``     uint16, row-major, 0 = unlabeled

Everything is bit-exact on a write/read round trip.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

MANIFEST_NAME = "manifest.txt"
SPECTRAL_NAME = "spectral.f32"
ACTIVE_NAME = "active.f32"
LABELS_NAME = "labels.u16"


class SceneFormatError(ValueError):
    """Raised when a scene directory does not match its manifest."""


@dataclass
class SceneContainer:
    spectral: np.ndarray  # (B, H, W) float32
    active: np.ndarray  # (Ca, H, W) float32
    labels: np.ndarray  # (H, W) uint16, 0 = unlabeled
    class_names: list[str]

    def __post_init__(self) -> None:
        if self.spectral.ndim != 3 or self.active.ndim != 3 or self.labels.ndim != 2:
            raise SceneFormatError("spectral/active must be 3-D, labels 2-D")
        if self.spectral.shape[1:] != self.labels.shape or self.active.shape[1:] != self.labels.shape:
            raise SceneFormatError("rasters and label map must share HxW")
        if self.labels.max(initial=0) > self.class_count:
            raise SceneFormatError("label map contains ids beyond class_count")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def bands(self) -> int:
        return self.spectral.shape[0]

    @property
    def active_channels(self) -> int:
        return self.active.shape[0]

    @property
    def class_count(self) -> int:
        return len(self.class_names)


def write_scene(scene: SceneContainer, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = "\n".join(
        [
            f"height: {scene.height}",
            f"width: {scene.width}",
            f"spectral_bands: {scene.bands}",
            f"active_channels: {scene.active_channels}",
            f"class_count: {scene.class_count}",
            f"class_names: {','.join(scene.class_names)}",
            "nodata_label: 0",
        ]
    )
    (path / MANIFEST_NAME).write_text(manifest + "\n")
    (path / SPECTRAL_NAME).write_bytes(
        np.ascontiguousarray(scene.spectral, dtype="<f4").tobytes()
    )
    (path / ACTIVE_NAME).write_bytes(np.ascontiguousarray(scene.active, dtype="<f4").tobytes())
    (path / LABELS_NAME).write_bytes(np.ascontiguousarray(scene.labels, dtype="<u2").tobytes())


def _parse_manifest(text: str) -> dict[str, str]:
    known = {
        "height",
        "width",
        "spectral_bands",
        "active_channels",
        "class_count",
        "class_names",
        "nodata_label",
    }
    out: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise SceneFormatError(f"malformed manifest line: {line!r}")
        key, value = line.split(":", 1)
        key = key.strip()
        if key not in known:
            warnings.warn(f"ignoring unknown manifest key {key!r}", stacklevel=3)
            continue
        out[key] = value.strip()
    missing = {"height", "width", "spectral_bands", "active_channels", "class_count"} - set(out)
    if missing:
        raise SceneFormatError(f"manifest missing keys: {sorted(missing)}")
    return out


def _read_payload(path: Path, dtype: str, count: int, what: str) -> np.ndarray:
    if not path.is_file():
        raise FileNotFoundError(f"missing payload {path}")
    raw = path.read_bytes()
    expected = count * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise SceneFormatError(
            f"{what} payload is {len(raw)} bytes, expected {expected} ({path})"
        )
    return np.frombuffer(raw, dtype=dtype).copy()


def read_scene(path: str | Path) -> SceneContainer:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing manifest {manifest_path}")
    meta = _parse_manifest(manifest_path.read_text())
    h, w = int(meta["height"]), int(meta["width"])
    bands, chans = int(meta["spectral_bands"]), int(meta["active_channels"])
    k = int(meta["class_count"])
    names = meta.get("class_names", "")
    class_names = names.split(",") if names else [f"class_{i + 1}" for i in range(k)]
    if len(class_names) != k:
        raise SceneFormatError("class_names count disagrees with class_count")
    spectral = _read_payload(path / SPECTRAL_NAME, "<f4", bands * h * w, "spectral").reshape(
        bands, h, w
    )
    active = _read_payload(path / ACTIVE_NAME, "<f4", chans * h * w, "active").reshape(chans, h, w)
    labels = _read_payload(path / LABELS_NAME, "<u2", h * w, "labels").reshape(h, w)
    return SceneContainer(spectral=spectral, active=active, labels=labels, class_names=class_names)


@dataclass
class SyntheticSceneSpec:
    """Recipe for a seeded multimodal scene: Voronoi-cell class regions with
    per-class spectral/active signatures plus Gaussian pixel noise."""

    height: int = 64
    width: int = 64
    bands: int = 8
    active_channels: int = 2
    classes: int = 4
    noise_std: float = 0.1
    spectral_prototypes: np.ndarray | None = None  # (K, B)
    active_prototypes: np.ndarray | None = None  # (K, Ca)
    min_class_share: float = 0.01
    sites_per_class: int = 3
    max_layout_retries: int = 50
    class_names: list[str] = field(default_factory=list)


def _voronoi_labels(spec: SyntheticSceneSpec, rng: np.random.Generator) -> np.ndarray:
    n_sites = spec.classes * spec.sites_per_class
    sites = np.stack(
        [rng.uniform(0, spec.height, n_sites), rng.uniform(0, spec.width, n_sites)], axis=1
    )
    site_class = np.tile(np.arange(1, spec.classes + 1), spec.sites_per_class)
    rows, cols = np.mgrid[0 : spec.height, 0 : spec.width]
    pts = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    d2 = ((pts[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
    return site_class[np.argmin(d2, axis=1)].reshape(spec.height, spec.width).astype(np.uint16)


def synth_scene(spec: SyntheticSceneSpec, seed: int) -> SceneContainer:
    """Deterministic synthetic scene; every class covers >= min_class_share."""
    if spec.classes < 2:
        raise ValueError("need at least two classes")
    if spec.noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    rng = np.random.default_rng(seed)
    protos_s = spec.spectral_prototypes
    if protos_s is None:
        # spread class signatures far apart relative to typical noise levels
        protos_s = rng.uniform(-1.0, 1.0, (spec.classes, spec.bands))
        protos_s += np.linspace(-1.0, 1.0, spec.classes)[:, None]
    protos_a = spec.active_prototypes
    if protos_a is None:
        protos_a = rng.uniform(-1.0, 1.0, (spec.classes, spec.active_channels))
        protos_a += np.linspace(1.0, -1.0, spec.classes)[:, None]
    protos_s = np.asarray(protos_s, dtype=np.float64)
    protos_a = np.asarray(protos_a, dtype=np.float64)
    if protos_s.shape != (spec.classes, spec.bands) or protos_a.shape != (
        spec.classes,
        spec.active_channels,
    ):
        raise ValueError("prototype shapes disagree with the scene spec")

    labels = None
    min_pixels = spec.min_class_share * spec.height * spec.width
    for _ in range(spec.max_layout_retries):
        candidate = _voronoi_labels(spec, rng)
        counts = np.bincount(candidate.ravel(), minlength=spec.classes + 1)[1:]
        if (counts >= min_pixels).all():
            labels = candidate
            break
    if labels is None:
        raise RuntimeError(
            f"no layout reached a {spec.min_class_share:.0%} share per class after "
            f"{spec.max_layout_retries} retries"
        )

    idx = labels.astype(np.int64) - 1
    spectral = protos_s[idx].transpose(2, 0, 1)
    active = protos_a[idx].transpose(2, 0, 1)
    if spec.noise_std > 0:
        spectral = spectral + rng.normal(0, spec.noise_std, spectral.shape)
        active = active + rng.normal(0, spec.noise_std, active.shape)
    names = spec.class_names or [f"class_{i + 1}" for i in range(spec.classes)]
    return SceneContainer(
        spectral=spectral.astype(np.float32),
        active=active.astype(np.float32),
        labels=labels,
        class_names=list(names),
    )


@dataclass(frozen=True)
class PatchTriple:
    """One sample: spectral patch, two spatial patches, zero-based center label."""

    x_spec: torch.Tensor  # (B, S, S)
    x_spat_p: torch.Tensor  # (B, S, S), spectral-modality spatial view
    x_spat_a: torch.Tensor  # (Ca, S, S)
    label: int


@dataclass(frozen=True)
class PatchBatch:
    x_spec: torch.Tensor  # (N, B, S, S)
    x_spat_a: torch.Tensor  # (N, Ca, S, S)
    labels: torch.Tensor  # (N,) int64

    @property
    def x_spat_p(self) -> torch.Tensor:
        # before band embedding the spatial view of the spectral modality is
        # the same raster patch; the model embeds the two branches separately
        return self.x_spec

    def __len__(self) -> int:
        return self.x_spec.shape[0]


def mirror_pad(raster: np.ndarray, margin: int) -> np.ndarray:
    """Reflect about the edge pixel (numpy 'reflect'); the padded border
    duplicates the row/column adjacent to the edge."""
    if margin == 0:
        return raster
    if min(raster.shape[-2:]) < 2:
        raise ValueError("mirror padding needs rasters of at least 2x2")
    pad = [(0, 0)] * (raster.ndim - 2) + [(margin, margin), (margin, margin)]
    return np.pad(raster, pad, mode="reflect")


def scene_arrays(scene: SceneContainer, standardize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Float64 rasters, optionally standardized per band over the whole scene."""
    spectral = scene.spectral.astype(np.float64)
    active = scene.active.astype(np.float64)
    if standardize:
        for arr in (spectral, active):
            mean = arr.mean(axis=(1, 2), keepdims=True)
            std = arr.std(axis=(1, 2), keepdims=True)
            arr -= mean
            arr /= np.where(std > 0, std, 1.0)
    return spectral, active


def split_labeled(
    scene: SceneContainer, samples_per_class: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """(train, eval) pixel coordinates, ``samples_per_class`` per class drawn
    uniformly without replacement under the seed; the rest evaluate."""
    rng = np.random.default_rng(seed)
    train, evaluation = [], []
    for cls in range(1, scene.class_count + 1):
        coords = np.argwhere(scene.labels == cls)  # row-major order
        if coords.shape[0] < samples_per_class:
            raise ValueError(
                f"class {cls} has {coords.shape[0]} labeled pixels, "
                f"need {samples_per_class}"
            )
        chosen = rng.choice(coords.shape[0], size=samples_per_class, replace=False)
        mask = np.zeros(coords.shape[0], dtype=bool)
        mask[chosen] = True
        train.append(coords[mask])
        evaluation.append(coords[~mask])
    return np.concatenate(train), np.concatenate(evaluation)


def extract_patches(
    scene: SceneContainer,
    window: int,
    coords: np.ndarray,
    standardize: bool = True,
):
    """Yield one :class:`PatchTriple` per (row, col) coordinate."""
    if window % 2 != 1 or window < 1:
        raise ValueError("window must be a positive odd integer")
    spectral, active = scene_arrays(scene, standardize=standardize)
    margin = window // 2
    spectral = mirror_pad(spectral, margin)
    active = mirror_pad(active, margin)
    for row, col in coords:
        r, c = int(row), int(col)
        spec_patch = torch.from_numpy(
            np.ascontiguousarray(spectral[:, r : r + window, c : c + window])
        )
        act_patch = torch.from_numpy(
            np.ascontiguousarray(active[:, r : r + window, c : c + window])
        )
        yield PatchTriple(
            x_spec=spec_patch,
            x_spat_p=spec_patch,
            x_spat_a=act_patch,
            # zero-based class index; unlabeled (0) becomes -1
            label=int(scene.labels[r, c]) - 1,
        )


def patch_batch(
    scene: SceneContainer,
    window: int,
    coords: np.ndarray,
    standardize: bool = True,
) -> PatchBatch:
    """Materialize patches for the given coordinates as stacked tensors."""
    triples = list(extract_patches(scene, window, coords, standardize=standardize))
    if not triples:
        raise ValueError("no coordinates to extract")
    return PatchBatch(
        x_spec=torch.stack([t.x_spec for t in triples]),
        x_spat_a=torch.stack([t.x_spat_a for t in triples]),
        labels=torch.tensor([t.label for t in triples], dtype=torch.int64),
    )


def all_pixel_coords(scene: SceneContainer) -> np.ndarray:
    rows, cols = np.mgrid[0 : scene.height, 0 : scene.width]
    return np.stack([rows.ravel(), cols.ravel()], axis=1)

"""Minimal netpbm writers: 16-bit PGM graymaps and 24-bit PPM pixmaps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

# class 0 (unlabeled) is black; classes 1.. take these colors, cycling with a
# shaded repeat if a scene ever exceeds the palette
CLASS_PALETTE = [
    (255, 0, 0),
    (0, 255, 0),
    (0, 0, 255),
    (255, 255, 0),
    (0, 255, 255),
    (255, 0, 255),
    (192, 192, 192),
    (128, 128, 128),
    (128, 0, 0),
    (128, 128, 0),
    (0, 128, 0),
    (128, 0, 128),
    (0, 128, 128),
    (70, 70, 255),
    (255, 165, 0),
]


def class_color(class_id: int) -> tuple[int, int, int]:
    if class_id == 0:
        return (0, 0, 0)
    idx = (class_id - 1) % len(CLASS_PALETTE)
    shade = (class_id - 1) // len(CLASS_PALETTE)
    r, g, b = CLASS_PALETTE[idx]
    fade = max(0.35, 1.0 - 0.3 * shade)
    return (int(r * fade), int(g * fade), int(b * fade))


def write_pgm16(path: str | Path, image: np.ndarray) -> None:
    """16-bit binary PGM (P5, maxval 65535, big-endian samples, row-major)."""
    if image.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    data = np.ascontiguousarray(image, dtype=">u2")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """24-bit binary PPM (P6, maxval 255, row-major)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("PPM image must be HxWx3")
    data = np.ascontiguousarray(rgb, dtype=np.uint8)
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def class_map_to_rgb(class_map: np.ndarray) -> np.ndarray:
    out = np.zeros((*class_map.shape, 3), dtype=np.uint8)
    for cls in np.unique(class_map):
        out[class_map == cls] = class_color(int(cls))
    return out


def read_pnm_header(raw: bytes) -> tuple[str, int, int, int, int]:
    """(magic, width, height, maxval, data offset); used by tests and tools."""
    fields: list[bytes] = []
    i = 0
    while len(fields) < 4:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(raw) and not raw[i : i + 1].isspace():
            i += 1
        fields.append(raw[start:i])
    i += 1  # single whitespace byte after maxval
    magic = fields[0].decode("ascii")
    return magic, int(fields[1]), int(fields[2]), int(fields[3]), i

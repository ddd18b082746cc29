"""Model parameter serialization.

File layout: a text manifest, one line per leaf (``path offset numel shape``),
terminated by a blank line, followed by the concatenated little-endian IEEE-754
float32 leaf payloads. Offsets are element offsets into the payload block,
shapes are comma-joined dims.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

MAGIC = "s2fin-params v1"


def save_params(model: nn.Module, path: str | Path) -> None:
    path = Path(path)
    lines = [MAGIC]
    blobs = []
    offset = 0
    for name, p in model.named_parameters():
        arr = p.detach().cpu().numpy().astype("<f4")
        shape = ",".join(str(d) for d in arr.shape) or "scalar"
        lines.append(f"{name} {offset} {arr.size} {shape}")
        blobs.append(arr.tobytes())
        offset += arr.size
    manifest = "\n".join(lines) + "\n\n"
    path.write_bytes(manifest.encode("utf-8") + b"".join(blobs))


def load_params(model: nn.Module, path: str | Path) -> None:
    """Restore leaves by path; shapes must match the model exactly."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing parameter file {path}")
    raw = path.read_bytes()
    header_end = raw.find(b"\n\n")
    if header_end < 0:
        raise ValueError(f"{path}: no manifest terminator found")
    lines = raw[:header_end].decode("utf-8").splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: not a parameter file (bad magic)")
    payload = np.frombuffer(raw[header_end + 2 :], dtype="<f4")

    entries = {}
    for line in lines[1:]:
        name, offset, numel, shape = line.split(" ")
        dims = () if shape == "scalar" else tuple(int(d) for d in shape.split(","))
        entries[name] = (int(offset), int(numel), dims)

    model_params = dict(model.named_parameters())
    missing = set(model_params) - set(entries)
    extra = set(entries) - set(model_params)
    if missing or extra:
        raise ValueError(
            f"{path}: parameter tree mismatch (missing={sorted(missing)}, extra={sorted(extra)})"
        )
    with torch.no_grad():
        for name, (offset, numel, dims) in entries.items():
            target = model_params[name]
            if tuple(target.shape) != dims:
                raise ValueError(
                    f"{path}: shape mismatch for {name}: file {dims}, model {tuple(target.shape)}"
                )
            chunk = payload[offset : offset + numel]
            if chunk.size != numel:
                raise ValueError(f"{path}: payload truncated at leaf {name}")
            target.copy_(torch.from_numpy(chunk.reshape(dims).astype(np.float64)))

"""SSAF attention fusion, the bidirectional state-space sequence mixer, and
the shared cross-feature gate.

The mixer is a reference bidirectional diagonal linear state-space block
standing in for the external Mamba citation: per direction
h_t = a * h_{t-1} + b * u_t, y_t = sum_state(c * h_t) + d * u_t, with
independent parameters per direction, a trainable elementwise gain vector per
direction, both directions summed, and two layers stacked with residuals.
Selective (input-dependent) state matrices are deliberately not modeled.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn


def center_pixel(x: Tensor) -> Tensor:
    """Channel vector at the spatial center: index (H//2, W//2), zero-based."""
    h, w = x.shape[-2:]
    return x[..., h // 2, w // 2]


class SsafBlock(nn.Module):
    """Gated fusion of a spatial-branch and a spectral-branch feature map."""

    def __init__(self, channels: int, dtype: torch.dtype = torch.float64):
        super().__init__()
        self.channels = channels
        # channel-vector path: 1D conv over the channel axis, kernel 3
        self.conv_spat = nn.Conv1d(2, 1, 3, padding=1, dtype=dtype)
        # spatial-map path: 7x7 conv, CBAM-style
        self.conv_spec = nn.Conv2d(2, 1, 7, padding=3, padding_mode="replicate", dtype=dtype)
        self.conv_gamma = nn.Conv2d(2 * channels, channels, 3, padding=1, dtype=dtype)
        self.conv_out = nn.Conv2d(channels, channels, 3, padding=1, dtype=dtype)

    def attention_scores(self, x_spat: Tensor, x_spec: Tensor) -> tuple[Tensor, Tensor]:
        """(channel vector from the spatial input, spatial map from the spectral input)."""
        if x_spat.shape != x_spec.shape:
            raise ValueError(f"shape mismatch: {tuple(x_spat.shape)} vs {tuple(x_spec.shape)}")
        mean_vec = x_spat.mean(dim=(-2, -1))
        cent_vec = center_pixel(x_spat)
        vec_in = torch.stack([mean_vec, cent_vec], dim=-2)
        atte_spat = torch.sigmoid(self.conv_spat(vec_in).squeeze(-2))
        map_in = torch.stack([x_spec.mean(dim=-3), x_spec.max(dim=-3).values], dim=-3)
        atte_spec = torch.sigmoid(self.conv_spec(map_in).squeeze(-3))
        return atte_spat, atte_spec

    def forward(self, x_spat: Tensor, x_spec: Tensor) -> Tensor:
        atte_spat, atte_spec = self.attention_scores(x_spat, x_spec)
        x_ss = x_spat + x_spec
        atte_fus = atte_spat.unsqueeze(-1).unsqueeze(-1) * atte_spec.unsqueeze(-3)
        gamma = torch.sigmoid(self.conv_gamma(torch.cat([x_ss, atte_fus], dim=-3)))
        mixed = x_ss + gamma * x_spec + (1 - gamma) * x_spat
        return torch.sigmoid(self.conv_out(mixed))


def diagonal_scan(u: Tensor, a: Tensor, b: Tensor, c: Tensor, d: Tensor, gain: Tensor) -> Tensor:
    """h_t = a*h_{t-1} + b*u_t, y_t = sum_state(c*h_t) + d*u_t, output y*gain.

    ``u`` is (..., T, dim); a/b/c are (..., dim, state) and d/gain broadcast
    against (..., T, dim), so stacking a leading axis runs several
    parameterizations in one loop. Kept as a per-step loop: the step tensors
    stay cache-resident, which beats materializing (T, dim, state) blocks.
    """
    steps = u.shape[-2]
    h = torch.zeros_like(a * u[..., 0, :, None])
    outputs = []
    for t in range(steps):
        h = a * h + b * u[..., t, :, None]
        outputs.append((c * h).sum(dim=-1))
    return (torch.stack(outputs, dim=-2) + d * u) * gain


class DirectionalScan(nn.Module):
    """Single-direction diagonal recurrence with a per-channel state bank."""

    def __init__(self, dim: int, state_dim: int, dtype: torch.dtype = torch.float64):
        super().__init__()
        self.a = nn.Parameter(torch.empty(dim, state_dim, dtype=dtype).uniform_(0.1, 0.9))
        self.b = nn.Parameter(torch.randn(dim, state_dim, dtype=dtype) / state_dim**0.5)
        self.c = nn.Parameter(torch.randn(dim, state_dim, dtype=dtype) / state_dim**0.5)
        self.d = nn.Parameter(torch.ones(dim, dtype=dtype))
        self.gain = nn.Parameter(torch.ones(dim, dtype=dtype))

    def forward(self, u: Tensor) -> Tensor:
        # u: (batch, T, dim)
        return diagonal_scan(u, self.a, self.b, self.c, self.d, self.gain)


class SsmLayer(nn.Module):
    """One bidirectional layer: projection, two opposite scans, residual."""

    def __init__(
        self,
        dim: int,
        state_dim: int = 16,
        expand: int = 2,
        residual: bool = True,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        inner = dim * expand
        self.residual = residual
        self.in_proj = nn.Linear(dim, inner, dtype=dtype)
        self.out_proj = nn.Linear(inner, dim, dtype=dtype)
        self.fwd = DirectionalScan(inner, state_dim, dtype=dtype)
        self.bwd = DirectionalScan(inner, state_dim, dtype=dtype)

    def forward(self, u: Tensor) -> Tensor:
        v = self.in_proj(u)
        # both directions share one loop via a stacked leading axis:
        # u (2, batch, T, dim), a/b/c (2, 1, dim, state), d/gain (2, 1, 1, dim)
        f, b = self.fwd, self.bwd
        y2 = diagonal_scan(
            torch.stack([v, v.flip(1)]),
            torch.stack([f.a, b.a]).unsqueeze(1),
            torch.stack([f.b, b.b]).unsqueeze(1),
            torch.stack([f.c, b.c]).unsqueeze(1),
            torch.stack([f.d, b.d]).reshape(2, 1, 1, -1),
            torch.stack([f.gain, b.gain]).reshape(2, 1, 1, -1),
        )
        out = self.out_proj(y2[0] + y2[1].flip(1))
        return u + out if self.residual else out


class SequenceMixer(nn.Module):
    """Depth-2 stack of bidirectional diagonal state-space layers.

    Feature patches are flattened to row-major token sequences, mixed, and
    reshaped back.
    """

    def __init__(
        self,
        dim: int,
        state_dim: int = 16,
        depth: int = 2,
        expand: int = 2,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        self.layers = nn.ModuleList(
            SsmLayer(dim, state_dim, expand, dtype=dtype) for _ in range(depth)
        )

    def forward(self, tokens: Tensor) -> Tensor:
        for layer in self.layers:
            tokens = layer(tokens)
        return tokens

    def forward_patch(self, x: Tensor) -> Tensor:
        """(batch, C, H, W) -> row-major tokens -> mix -> same shape."""
        batch, c, h, w = x.shape
        tokens = x.flatten(-2).transpose(-2, -1)
        return self.forward(tokens).transpose(-2, -1).reshape(batch, c, h, w)


class CrossFeatureGate(nn.Module):
    """One sigmoid channel gate shared by both streams.

    The gate input is the center pixel of the spatial stream plus the spatial
    mean of the fused stream; the resulting channel vector multiplies both
    feature maps.
    """

    def __init__(self, channels: int, dtype: torch.dtype = torch.float64):
        super().__init__()
        self.fc = nn.Linear(channels, channels, dtype=dtype)

    def forward(self, f_spat: Tensor, f_fus: Tensor) -> tuple[Tensor, Tensor]:
        if f_spat.shape != f_fus.shape:
            raise ValueError(f"shape mismatch: {tuple(f_spat.shape)} vs {tuple(f_fus.shape)}")
        gate = torch.sigmoid(self.fc(center_pixel(f_spat) + f_fus.mean(dim=(-2, -1))))
        gate = gate.unsqueeze(-1).unsqueeze(-1)
        return gate * f_spat, gate * f_fus

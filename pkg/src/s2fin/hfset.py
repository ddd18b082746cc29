"""High-frequency sparse enhancement block for the spectral branch.

Two paths: channelwise squared-ReLU attention produces sparse per-position
weights, and a trainable high-frequency filter rescales the per-pixel DFT
along the spectral (channel) axis. The hard cutoff rule has zero gradient
w.r.t. the cutoff, so training uses a sigmoid gate sigmoid(k*(|f| - cutoff));
a hard mode reproduces the exact piecewise rule for inference and tests.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn

from .sparse_attention import DepthwiseQkv, QkvTriple, sparsemax, squared_relu_attention
from .transforms import normalized_frequencies


class HighFreqFilter(nn.Module):
    """Trainable cutoff/gain pair with a fixed-steepness soft gate.

    cutoff is kept in [0, 0.5] and gain >= 0 by :meth:`clamp_` which the
    trainer calls after every optimizer step.
    """

    def __init__(
        self,
        cutoff_init: float = 0.5,
        gain_init: float = 0.05,
        gate_steepness: float = 50.0,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        self.f_cutoff = nn.Parameter(torch.tensor(cutoff_init, dtype=dtype))
        self.g_amp = nn.Parameter(torch.tensor(gain_init, dtype=dtype))
        self.gate_steepness = gate_steepness

    def gate(self, freqs: Tensor, hard: bool = False) -> Tensor:
        if hard:
            return (freqs >= self.f_cutoff).to(freqs.dtype)
        return torch.sigmoid(self.gate_steepness * (freqs - self.f_cutoff))

    @torch.no_grad()
    def clamp_(self) -> None:
        self.f_cutoff.clamp_(0.0, 0.5)
        self.g_amp.clamp_(min=0.0)


def highfreq_enhance(x_spec: Tensor, w: Tensor, filt: HighFreqFilter, hard: bool = False) -> Tensor:
    """Scale each spectral-axis DFT bin by gate(|f|) * g_amp * (w + 1).

    ``x_spec`` is (..., B, H, W) with the spectral axis at -3; ``w`` holds the
    sparse weights, either a spatial map broadcastable to (..., 1, H, W) or a
    per-band vector broadcastable to (..., B, 1, 1). A scalar 0 disables the
    sparse boost.
    """
    bands = x_spec.shape[-3]
    if bands < 2:
        raise ValueError("highfreq_enhance needs a spectral axis of length >= 2")
    freqs = normalized_frequencies(bands, dtype=x_spec.dtype).reshape(bands, 1, 1)
    gain = filt.gate(freqs, hard=hard) * filt.g_amp * (w + 1)
    z = torch.fft.fft(x_spec, dim=-3) * gain
    return torch.fft.ifft(z, dim=-3).real


class HfsetBlock(nn.Module):
    """Sparse-attention + high-frequency branches merged through FC, norm, residual.

    ``weight_mode`` selects what the sparse weights index: "spatial" (default)
    gives one weight per pixel, broadcast across that pixel's frequency bins;
    "spectral" gives one weight per band instead.
    """

    def __init__(
        self,
        channels: int,
        kernel_size: int = 3,
        cutoff_init: float = 0.5,
        gain_init: float = 0.05,
        gate_steepness: float = 50.0,
        weight_mode: str = "spatial",
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        if weight_mode not in ("spatial", "spectral"):
            raise ValueError(f"unknown weight_mode {weight_mode!r}")
        self.channels = channels
        self.weight_mode = weight_mode
        self.qkv = DepthwiseQkv(channels, kernel_size, dtype=dtype)
        self.filter = HighFreqFilter(cutoff_init, gain_init, gate_steepness, dtype=dtype)
        self.merge_fc = nn.Conv2d(2 * channels, channels, kernel_size=1, dtype=dtype)
        self.norm_weight = nn.Parameter(torch.ones(channels, dtype=dtype))
        self.norm_bias = nn.Parameter(torch.zeros(channels, dtype=dtype))
        self.norm_eps = 1e-5

    def _channel_norm(self, x: Tensor) -> Tensor:
        # per-channel standardization over spatial positions, trainable affine
        mean = x.mean(dim=(-2, -1), keepdim=True)
        var = x.var(dim=(-2, -1), unbiased=False, keepdim=True)
        y = (x - mean) / torch.sqrt(var + self.norm_eps)
        return y * self.norm_weight.view(-1, 1, 1) + self.norm_bias.view(-1, 1, 1)

    def sparse_branch(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Returns (x_sparse, w): attention output and sparse weights."""
        h, w_dim = x.shape[-2:]
        triple = self.qkv(x)
        flat = QkvTriple(
            q=triple.q.flatten(-2), k=triple.k.flatten(-2), v=triple.v.flatten(-2)
        )  # tokens = channels, dim = H*W
        x_sparse = squared_relu_attention(flat).reshape(x.shape)
        if self.weight_mode == "spatial":
            # tokens = positions, salience = mean over channels
            scores = x_sparse.flatten(-2).mean(dim=-2)
            weights = sparsemax(scores, dim=-1)
            w = weights.reshape(*x.shape[:-3], 1, h, w_dim)
        else:
            scores = x_sparse.flatten(-2).mean(dim=-1)
            weights = sparsemax(scores, dim=-1)
            w = weights.reshape(*x.shape[:-3], self.channels, 1, 1)
        return x_sparse, w

    def forward(self, x: Tensor, hard_gate: bool = False) -> Tensor:
        if x.shape[-3] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[-3]}")
        x_sparse, w = self.sparse_branch(x)
        x_hf = highfreq_enhance(x, w, self.filter, hard=hard_gate)
        merged = self.merge_fc(torch.cat([x_sparse, x_hf], dim=-3))
        return self._channel_norm(merged) + x

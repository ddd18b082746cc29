"""Squared-ReLU depthwise attention and the sparsemax threshold.

The sparsemax here is the exact simplex projection: support and threshold
follow the cumulative-sum rule, surviving weights are max(z_i - tau, 0), so
the weights always sum to one. Ties at the threshold are excluded (strict
inequality) and sorting is stable, lower original index first.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn


@dataclass(frozen=True)
class QkvTriple:
    q: Tensor
    k: Tensor
    v: Tensor

    def __post_init__(self) -> None:
        if not (self.q.shape == self.k.shape == self.v.shape):
            raise ValueError("Q, K, V must share a shape")


@dataclass(frozen=True)
class SparseWeights:
    """Simplex-projected weights plus the threshold that produced them."""

    w: Tensor
    tau: float
    support_size: int


class DepthwiseQkv(nn.Module):
    """One depthwise convolution expanding C -> 3C, split into Q, K, V.

    Grouped so each input channel produces its own (q, k, v) slice; with an
    identity kernel the three outputs replicate the input exactly.
    """

    def __init__(self, channels: int, kernel_size: int = 3, dtype: torch.dtype = torch.float64):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ValueError("depthwise kernel size must be odd for same-padding")
        self.channels = channels
        self.conv = nn.Conv2d(
            channels,
            3 * channels,
            kernel_size,
            padding=kernel_size // 2,
            groups=channels,
            dtype=dtype,
        )
        if self.conv.out_channels % 3 != 0:
            raise RuntimeError("depthwise expansion must yield channels divisible by 3")

    def forward(self, x: Tensor) -> QkvTriple:
        if x.shape[-3] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[-3]}")
        out = self.conv(x)
        # group c owns output channels 3c..3c+2
        out = out.reshape(*out.shape[:-3], self.channels, 3, *out.shape[-2:])
        return QkvTriple(q=out[..., 0, :, :], k=out[..., 1, :, :], v=out[..., 2, :, :])


def squared_relu_attention(qkv: QkvTriple) -> Tensor:
    """ReLU(Q K^T)^2 V on (..., tokens, dim) matrices; no softmax, no scale."""
    scores = torch.relu(qkv.q @ qkv.k.transpose(-2, -1))
    return scores.square() @ qkv.v


def sparsemax(z: Tensor, dim: int = -1) -> Tensor:
    """Batched sparsemax along ``dim``: Euclidean projection onto the simplex."""
    z = z.transpose(dim, -1)
    z_sorted, _ = torch.sort(z, dim=-1, descending=True, stable=True)
    cumsum = torch.cumsum(z_sorted, dim=-1)
    m = torch.arange(1, z.shape[-1] + 1, dtype=z.dtype, device=z.device)
    support = z_sorted > (cumsum - 1) / m
    m_hat = support.to(z.dtype).sum(dim=-1, keepdim=True)
    s_mhat = torch.gather(cumsum, -1, m_hat.long() - 1)
    tau = (s_mhat - 1) / m_hat
    return torch.clamp(z - tau, min=0).transpose(dim, -1)


def sparsemax_threshold(z: Tensor) -> SparseWeights:
    """Spec surface for a single score vector; exposes tau and the support size."""
    if z.ndim != 1 or z.shape[0] < 1:
        raise ValueError("sparsemax_threshold expects a nonempty 1-D vector")
    z_sorted, _ = torch.sort(z, descending=True, stable=True)
    cumsum = torch.cumsum(z_sorted, dim=0)
    m = torch.arange(1, z.shape[0] + 1, dtype=z.dtype)
    support = z_sorted > (cumsum - 1) / m
    m_hat = int(support.sum().item())
    tau = float((cumsum[m_hat - 1] - 1) / m_hat)
    w = torch.clamp(z - tau, min=0)
    return SparseWeights(w=w, tau=tau, support_size=m_hat)


def spatial_sparse_scores(features: Tensor) -> Tensor:
    """Token salience (mean over embedding dim) -> sparsemax weights.

    ``features`` is (..., M, dim); returns (..., M) weights summing to 1.
    """
    if features.shape[-2] < 1:
        raise ValueError("spatial_sparse_scores requires at least one token")
    return sparsemax(features.mean(dim=-1), dim=-1)

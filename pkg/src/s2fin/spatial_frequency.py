"""Two-level spatial-frequency fusion: DCT channel recalibration (low level)
and Fourier phase-resonance amplitude masking (high level).

AFCM rescales each channel by 1 + sigmoid(FC(high)) + sigmoid(FC(shared low)),
where the low-frequency profile is averaged across the two modalities and the
high-frequency profile stays modality-specific. HFRM decomposes both inputs
into amplitude/phase, boosts the amplitude mean where the phases agree, and
recomposes through a convolved fused phase.
"""

from __future__ import annotations

import math

import torch
from torch import Tensor, nn

from .transforms import FrequencyPartition, amp_phase_compose, dct2_2d, partition_spectrum


class Afcm(nn.Module):
    """Adaptive frequency channel recalibration over a modality pair.

    Channel profiles are the per-channel means of the partitioned DCT
    coefficients (frequency-channel-attention style), mapped through
    Linear(C, C) heads: one per modality for the high band, one shared head
    for the averaged low band.
    """

    def __init__(
        self,
        channels: int,
        height: int,
        width: int,
        cut_index: int = 4,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        self.partition = FrequencyPartition.manhattan(height, width, cut_index)
        if self.partition.n_low == 0 or self.partition.n_high == 0:
            raise ValueError("cut_index leaves an empty frequency band")
        self.fc_high_p = nn.Linear(channels, channels, dtype=dtype)
        self.fc_high_a = nn.Linear(channels, channels, dtype=dtype)
        self.fc_low_shared = nn.Linear(channels, channels, dtype=dtype)

    def _profiles(self, x: Tensor) -> tuple[Tensor, Tensor]:
        low, high = partition_spectrum(dct2_2d(x), self.partition)
        return low.mean(dim=-1), high.mean(dim=-1)

    def modulation_factors(self, x_p: Tensor, x_a: Tensor) -> tuple[Tensor, Tensor]:
        """Per-channel gains; each lies in (1, 3) since both sigmoids are in (0, 1)."""
        if x_p.shape[-2:] != x_a.shape[-2:]:
            raise ValueError(
                f"spatial dims differ: {tuple(x_p.shape[-2:])} vs {tuple(x_a.shape[-2:])}"
            )
        low_p, high_p = self._profiles(x_p)
        low_a, high_a = self._profiles(x_a)
        shared = torch.sigmoid(self.fc_low_shared((low_p + low_a) / 2))
        factor_p = torch.sigmoid(self.fc_high_p(high_p)) + shared + 1
        factor_a = torch.sigmoid(self.fc_high_a(high_a)) + shared + 1
        return factor_p, factor_a

    def forward(self, x_p: Tensor, x_a: Tensor) -> tuple[Tensor, Tensor]:
        factor_p, factor_a = self.modulation_factors(x_p, x_a)
        return x_p * factor_p.unsqueeze(-1).unsqueeze(-1), x_a * factor_a.unsqueeze(-1).unsqueeze(-1)


_RANK_QUANTUM = 1e-9


def top_fraction_mask(scores: Tensor, top_fraction: float) -> Tensor:
    """Keep the ceil(fraction * n) largest entries of the last axis, zero the rest.

    Ties break row-major (stable sort), lower index first. Ranking happens on
    scores quantized to 1e-9 of their range: conjugate-symmetric spectra
    produce analytically equal score pairs that differ only in rounding noise,
    and without quantization the noise, not the tie-break rule, would decide
    the selection.
    """
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must lie in (0, 1]")
    n = scores.shape[-1]
    n_top = math.ceil(top_fraction * n)
    with torch.no_grad():
        scale = scores.abs().amax(dim=-1, keepdim=True).clamp_min(torch.finfo(scores.dtype).tiny)
        ranking = torch.round(scores / (scale * _RANK_QUANTUM))
        order = torch.argsort(ranking, dim=-1, descending=True, stable=True)
    mask = torch.zeros_like(scores)
    mask.scatter_(-1, order[..., :n_top], 1.0)
    return scores * mask


def phase_resonance_amplitude(
    amp_p: Tensor,
    phase_p: Tensor,
    amp_a: Tensor,
    phase_a: Tensor,
    alpha: float,
    top_fraction: float,
) -> Tensor:
    """(alpha * Top<softmax(phase product)> + 1) * mean amplitude.

    All inputs are (..., C, H, W); the softmax runs over spatial positions of
    the channel-summed phase product scaled by 1/sqrt(C).
    """
    shapes = {tuple(t.shape) for t in (amp_p, phase_p, amp_a, phase_a)}
    if len(shapes) != 1:
        raise ValueError(f"amplitude/phase shapes differ: {sorted(shapes)}")
    c, h, w = amp_p.shape[-3:]
    score = (phase_p * phase_a).sum(dim=-3) / math.sqrt(c)
    soft = torch.softmax(score.flatten(-2), dim=-1)
    topped = top_fraction_mask(soft, top_fraction).reshape(*score.shape[:-2], 1, h, w)
    return (alpha * topped + 1) * (amp_p + amp_a) / 2


class AmplitudeAttention(nn.Module):
    """Channel max/avg pooling -> 7x7 conv -> linear -> spatial softmax.

    Replicate padding keeps constant inputs constant through the conv, so a
    constant amplitude map with a zeroed linear head yields the uniform map.
    """

    def __init__(self, height: int, width: int, kernel_size: int = 7, dtype: torch.dtype = torch.float64):
        super().__init__()
        self.height, self.width = height, width
        self.conv = nn.Conv2d(
            2, 1, kernel_size, padding=kernel_size // 2, padding_mode="replicate", dtype=dtype
        )
        self.fc = nn.Linear(height * width, height * width, dtype=dtype)

    def forward(self, amp: Tensor) -> Tensor:
        if amp.shape[-2:] != (self.height, self.width):
            raise ValueError(
                f"expected {self.height}x{self.width} maps, got {tuple(amp.shape[-2:])}"
            )
        pooled = torch.stack([amp.max(dim=-3).values, amp.mean(dim=-3)], dim=-3)
        squeezed = pooled.ndim == 3
        if squeezed:
            pooled = pooled.unsqueeze(0)
        scores = self.fc(self.conv(pooled).flatten(-3))
        out = torch.softmax(scores, dim=-1).reshape(-1, self.height, self.width)
        return out[0] if squeezed else out


class Hfrm(nn.Module):
    """High-frequency resonance mask over a fused/active feature pair."""

    def __init__(
        self,
        channels: int,
        height: int,
        width: int,
        alpha: float = 0.2,
        top_fraction: float = 0.1,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.alpha = alpha
        self.top_fraction = top_fraction
        self.amp_attention = AmplitudeAttention(height, width, dtype=dtype)
        self.conv_phase = nn.Conv2d(channels, channels, 3, padding=1, dtype=dtype)
        with torch.no_grad():
            # identity init: phase passes through untouched at the start
            self.conv_phase.weight.zero_()
            for c in range(channels):
                self.conv_phase.weight[c, c, 1, 1] = 1.0
            self.conv_phase.bias.zero_()

    def fuse_spectra(self, f_s: Tensor, f_a: Tensor) -> tuple[Tensor, Tensor]:
        """(fused amplitude, fused phase) of the output spectrum."""
        if f_s.shape != f_a.shape:
            raise ValueError(f"shape mismatch: {tuple(f_s.shape)} vs {tuple(f_a.shape)}")
        spec_p = torch.fft.fft2(f_s, dim=(-2, -1))
        spec_a = torch.fft.fft2(f_a, dim=(-2, -1))
        amp_p, phase_p = spec_p.abs(), torch.angle(spec_p)
        amp_a, phase_a = spec_a.abs(), torch.angle(spec_a)
        resonant = phase_resonance_amplitude(
            amp_p, phase_p, amp_a, phase_a, self.alpha, self.top_fraction
        )
        w_a = self.amp_attention(resonant)
        amp_fusion = (1 + w_a.unsqueeze(-3)) * (amp_p + amp_a) / 2
        phase_fusion = self.conv_phase((phase_p + phase_a) / 2)
        return amp_fusion, phase_fusion

    def forward(self, f_s: Tensor, f_a: Tensor) -> Tensor:
        fused = amp_phase_compose(*self.fuse_spectra(f_s, f_a))
        return torch.fft.ifft2(fused, dim=(-2, -1)).real

"""Exact discrete Fourier / cosine transforms and frequency bookkeeping.

All frequency-domain blocks in the network go through this module, so the
normalization conventions here are load-bearing:

* 1D/2D DFT: unnormalized forward, inverse carries 1/B (resp. 1/(H*W)).
* DCT-II: orthonormal scaling, sqrt(1/N) for the DC row and sqrt(2/N)
  otherwise; the inverse is the transpose transform.

Everything operates on trailing axes so arbitrary leading batch/channel
dimensions broadcast through. Inputs are expected in float64; transforms are
differentiable (the DCT is a plain matmul, the DFT uses torch.fft).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import torch
from torch import Tensor


@dataclass(frozen=True)
class ComplexSpectrum:
    """Amplitude/phase view of a complex spectrum.

    amplitude is elementwise >= 0, phase lies in (-pi, pi]. ``freq_dims``
    records which trailing axes are frequency axes (e.g. (-1,) for a 1D
    spectrum, (-2, -1) for a 2D one).
    """

    amplitude: Tensor
    phase: Tensor
    freq_dims: tuple[int, ...]

    @classmethod
    def from_complex(cls, z: Tensor, freq_dims: tuple[int, ...]) -> "ComplexSpectrum":
        return cls(amplitude=z.abs(), phase=torch.angle(z), freq_dims=freq_dims)

    def to_complex(self) -> Tensor:
        return amp_phase_compose(self.amplitude, self.phase)

    @property
    def shape(self) -> torch.Size:
        return self.amplitude.shape


def amp_phase_decompose(z: Tensor) -> tuple[Tensor, Tensor]:
    """Complex tensor -> (modulus, atan2 phase)."""
    return z.abs(), torch.angle(z)


def amp_phase_compose(amplitude: Tensor, phase: Tensor) -> Tensor:
    """Exact inverse of :func:`amp_phase_decompose`."""
    if amplitude.shape != phase.shape:
        raise ValueError(
            f"amplitude/phase shape mismatch: {tuple(amplitude.shape)} vs {tuple(phase.shape)}"
        )
    return torch.polar(amplitude, phase)


def dft_1d(signal: Tensor) -> ComplexSpectrum:
    """Unnormalized forward DFT along the last axis."""
    if signal.shape[-1] < 1:
        raise ValueError("dft_1d requires at least one sample along the last axis")
    return ComplexSpectrum.from_complex(torch.fft.fft(signal, dim=-1), freq_dims=(-1,))


def idft_1d(spectrum: ComplexSpectrum) -> Tensor:
    """Inverse DFT (1/B normalization); the imaginary residue is discarded."""
    return torch.fft.ifft(spectrum.to_complex(), dim=-1).real


def dft_2d(patch: Tensor) -> ComplexSpectrum:
    """Separable unnormalized 2D DFT over the last two axes (per channel)."""
    if patch.ndim < 2 or patch.shape[-1] < 1 or patch.shape[-2] < 1:
        raise ValueError("dft_2d requires a trailing HxW block with H, W >= 1")
    return ComplexSpectrum.from_complex(torch.fft.fft2(patch, dim=(-2, -1)), freq_dims=(-2, -1))


def idft_2d(spectrum: ComplexSpectrum) -> Tensor:
    """Inverse 2D DFT normalized by 1/(H*W); imaginary residue discarded."""
    return torch.fft.ifft2(spectrum.to_complex(), dim=(-2, -1)).real


def normalized_frequencies(n: int, dtype: torch.dtype = torch.float64) -> Tensor:
    """|f| = min(k, n-k)/n for bin k, in [0, 0.5]."""
    k = torch.arange(n, dtype=dtype)
    return torch.minimum(k, n - k) / n


@lru_cache(maxsize=32)
def _dct_matrix(n: int) -> Tensor:
    # Row u: C(u) * cos(pi*u*(i + 1/2)/n); orthonormal by construction.
    u = torch.arange(n, dtype=torch.float64).unsqueeze(1)
    i = torch.arange(n, dtype=torch.float64).unsqueeze(0)
    mat = torch.cos(torch.pi * u * (i + 0.5) / n)
    scale = torch.full((n, 1), (2.0 / n) ** 0.5, dtype=torch.float64)
    scale[0, 0] = (1.0 / n) ** 0.5
    return mat * scale


def dct2_2d(patch: Tensor) -> Tensor:
    """Orthonormal 2D DCT-II over the last two axes."""
    if patch.ndim < 2 or patch.shape[-1] < 1 or patch.shape[-2] < 1:
        raise ValueError("dct2_2d requires a trailing HxW block with H, W >= 1")
    dh = _dct_matrix(patch.shape[-2]).to(patch.dtype)
    dw = _dct_matrix(patch.shape[-1]).to(patch.dtype)
    return dh @ patch @ dw.T


def idct2_2d(coeffs: Tensor) -> Tensor:
    """Inverse of :func:`dct2_2d` (transpose transform)."""
    if coeffs.ndim < 2 or coeffs.shape[-1] < 1 or coeffs.shape[-2] < 1:
        raise ValueError("idct2_2d requires a trailing HxW block with H, W >= 1")
    dh = _dct_matrix(coeffs.shape[-2]).to(coeffs.dtype)
    dw = _dct_matrix(coeffs.shape[-1]).to(coeffs.dtype)
    return dh.T @ coeffs @ dw


@dataclass(frozen=True)
class FrequencyPartition:
    """Disjoint low/high index sets covering an HxW coefficient grid.

    A coefficient (h, w) is low-frequency iff h + w < cut_index. Index lists
    are stored in row-major order, which fixes the gather order of
    :func:`partition_spectrum`.
    """

    height: int
    width: int
    cut_index: int
    low_indices: Tensor  # (n_low, 2) int64
    high_indices: Tensor  # (n_high, 2) int64

    def __post_init__(self) -> None:
        n = self.low_indices.shape[0] + self.high_indices.shape[0]
        if n != self.height * self.width:
            raise ValueError("partition does not cover the coefficient grid")
        seen = {(int(h), int(w)) for h, w in self.low_indices.tolist()}
        seen |= {(int(h), int(w)) for h, w in self.high_indices.tolist()}
        if len(seen) != self.height * self.width:
            raise ValueError("low/high index sets overlap or miss grid entries")

    @classmethod
    def manhattan(cls, height: int, width: int, cut_index: int) -> "FrequencyPartition":
        low, high = [], []
        for h in range(height):
            for w in range(width):
                (low if h + w < cut_index else high).append((h, w))
        return cls(
            height=height,
            width=width,
            cut_index=cut_index,
            low_indices=torch.tensor(low, dtype=torch.int64).reshape(-1, 2),
            high_indices=torch.tensor(high, dtype=torch.int64).reshape(-1, 2),
        )

    @property
    def n_low(self) -> int:
        return self.low_indices.shape[0]

    @property
    def n_high(self) -> int:
        return self.high_indices.shape[0]


def partition_spectrum(coeffs: Tensor, part: FrequencyPartition) -> tuple[Tensor, Tensor]:
    """Gather coefficients into (low, high) vectors along the last axis."""
    if coeffs.shape[-2] != part.height or coeffs.shape[-1] != part.width:
        raise ValueError(
            f"partition is {part.height}x{part.width} but coefficients are "
            f"{coeffs.shape[-2]}x{coeffs.shape[-1]}"
        )
    low = coeffs[..., part.low_indices[:, 0], part.low_indices[:, 1]]
    high = coeffs[..., part.high_indices[:, 0], part.high_indices[:, 1]]
    return low, high


def scatter_partition(low: Tensor, high: Tensor, part: FrequencyPartition) -> Tensor:
    """Inverse of :func:`partition_spectrum`."""
    if low.shape[-1] != part.n_low or high.shape[-1] != part.n_high:
        raise ValueError("low/high vector lengths do not match the partition")
    shape = torch.broadcast_shapes(low.shape[:-1], high.shape[:-1]) + (part.height, part.width)
    out = low.new_zeros(shape)
    out[..., part.low_indices[:, 0], part.low_indices[:, 1]] = low
    out[..., part.high_indices[:, 0], part.high_indices[:, 1]] = high
    return out

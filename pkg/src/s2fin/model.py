"""Full network assembly: branch embeddings, the four fusion modules, the
sequence mixers, and the classifier head.

Dataflow per sample (spectral patch, spectral-modality spatial patch, active
patch):

    embed each input to ``embed_dim`` channels (1x1 conv)
    AFCM   on (spatial_p, spatial_a)          -> recalibrated pair
    HFSET  on spectral                        -> enhanced spectral features
    SSAF   on (afcm spectral-modality, hfset) -> fused features
    mixers on the spatial and fused paths     -> long-range features
    cross gate                                -> (f_s, f_fus)
    HFRM   on (f_s, afcm active output)       -> f_spat
    concat(GAP(f_fus), GAP(f_spat)) -> linear -> K logits

Any of the four fusion modules can be ablated; an ablated module contributes
no parameters and its primary input passes through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import torch
from torch import Tensor, nn

from .hfset import HfsetBlock
from .spatial_frequency import Afcm, Hfrm
from .spatial_spectral import CrossFeatureGate, SequenceMixer, SsafBlock

ABLATABLE_MODULES = ("afcm", "hfrm", "hfset", "ssaf")


@dataclass(frozen=True)
class ModelConfig:
    bands: int
    active_channels: int
    num_classes: int
    window: int = 11
    embed_dim: int = 64
    cut_index: int = 4
    alpha: float = 0.2
    top_fraction: float = 0.1
    state_dim: int = 16
    mixer_depth: int = 2
    mixer_expand: int = 2
    gate_steepness: float = 50.0
    f_cutoff_init: float = 0.5
    g_amp_init: float = 0.05
    hf_weight_mode: str = "spatial"
    # reserved trade-off knob reported alongside alpha; not wired to any
    # computation because no equation consumes it
    beta: float = 0.5
    disable: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.window % 2 != 1 or self.window < 1:
            raise ValueError("window must be a positive odd integer")
        unknown = set(self.disable) - set(ABLATABLE_MODULES)
        if unknown:
            raise ValueError(f"unknown modules in disable set: {sorted(unknown)}")

    def with_disabled(self, names) -> "ModelConfig":
        return replace(self, disable=frozenset(n.lower() for n in names))


class S2Fin(nn.Module):
    def __init__(self, config: ModelConfig, dtype: torch.dtype = torch.float64):
        super().__init__()
        self.config = config
        c, s = config.embed_dim, config.window
        self.embed_spec = nn.Conv2d(config.bands, c, 1, dtype=dtype)
        self.embed_spat_p = nn.Conv2d(config.bands, c, 1, dtype=dtype)
        self.embed_spat_a = nn.Conv2d(config.active_channels, c, 1, dtype=dtype)
        self.afcm = (
            None
            if "afcm" in config.disable
            else Afcm(c, s, s, cut_index=config.cut_index, dtype=dtype)
        )
        self.hfset = (
            None
            if "hfset" in config.disable
            else HfsetBlock(
                c,
                cutoff_init=config.f_cutoff_init,
                gain_init=config.g_amp_init,
                gate_steepness=config.gate_steepness,
                weight_mode=config.hf_weight_mode,
                dtype=dtype,
            )
        )
        self.ssaf = None if "ssaf" in config.disable else SsafBlock(c, dtype=dtype)
        self.hfrm = (
            None
            if "hfrm" in config.disable
            else Hfrm(
                c, s, s, alpha=config.alpha, top_fraction=config.top_fraction, dtype=dtype
            )
        )
        self.mixer_spat = SequenceMixer(
            c, config.state_dim, config.mixer_depth, config.mixer_expand, dtype=dtype
        )
        self.mixer_fus = SequenceMixer(
            c, config.state_dim, config.mixer_depth, config.mixer_expand, dtype=dtype
        )
        self.cross_gate = CrossFeatureGate(c, dtype=dtype)
        self.classifier = nn.Linear(2 * c, config.num_classes, dtype=dtype)

    def forward(self, x_spec: Tensor, x_spat_a: Tensor, x_spat_p: Tensor | None = None) -> Tensor:
        """Batched forward: (N, B, S, S), (N, Ca, S, S) -> (N, K) logits."""
        if x_spat_p is None:
            x_spat_p = x_spec
        spec = self.embed_spec(x_spec)
        spat_p = self.embed_spat_p(x_spat_p)
        spat_a = self.embed_spat_a(x_spat_a)

        if self.afcm is not None:
            spat_p, spat_a = self.afcm(spat_p, spat_a)
        if self.hfset is not None:
            spec = self.hfset(spec)
        fus = self.ssaf(spat_p, spec) if self.ssaf is not None else spec

        f_spat_p = self.mixer_spat.forward_patch(spat_p)
        f_fus_p = self.mixer_fus.forward_patch(fus)
        f_s, f_fus = self.cross_gate(f_spat_p, f_fus_p)

        f_spat = self.hfrm(f_s, spat_a) if self.hfrm is not None else f_s

        pooled = torch.cat([f_fus.mean(dim=(-2, -1)), f_spat.mean(dim=(-2, -1))], dim=-1)
        return self.classifier(pooled)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters() if p.requires_grad)

    def parameter_breakdown(self) -> dict[str, int]:
        """Trainable parameter totals keyed by top-level submodule."""
        out: dict[str, int] = {}
        for name, module in self.named_children():
            out[name] = sum(p.numel() for p in module.parameters() if p.requires_grad)
        return out

    @torch.no_grad()
    def clamp_constrained_(self) -> None:
        """Re-apply parameter range constraints after an optimizer step."""
        if self.hfset is not None:
            self.hfset.filter.clamp_()


def build_model(config: ModelConfig, seed: int | None = None) -> S2Fin:
    """Construct a model; with a seed the initialization is reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return S2Fin(config)

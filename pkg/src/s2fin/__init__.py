"""Spatial-spectral-frequency fusion network for multimodal remote sensing."""

from .model import ABLATABLE_MODULES, ModelConfig, S2Fin, build_model
from .train import RunResult, TrainConfig, ablation_run, evaluate, run_experiment

__all__ = [
    "ABLATABLE_MODULES",
    "ModelConfig",
    "S2Fin",
    "build_model",
    "RunResult",
    "TrainConfig",
    "ablation_run",
    "evaluate",
    "run_experiment",
]

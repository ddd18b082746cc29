"""Training loop, evaluation, and the ablation harness.

Adam with weight decay and a MultiStep learning-rate schedule, cross-entropy
on the center-pixel labels. Range-constrained parameters (the high-frequency
cutoff and gain) are re-clamped after every optimizer step. A non-finite loss
aborts immediately, naming the first parameter path whose gradient is
non-finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import PatchBatch, SceneContainer, patch_batch, split_labeled
from .metrics import ConfusionMatrix
from .model import ModelConfig, S2Fin, build_model


class TrainingDivergence(RuntimeError):
    """Raised when the loss goes non-finite during training."""

    def __init__(self, epoch: int, param_path: str | None):
        self.epoch = epoch
        self.param_path = param_path
        where = param_path if param_path is not None else "<no non-finite gradient found>"
        super().__init__(f"non-finite loss at epoch {epoch}; first non-finite gradient: {where}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    weight_decay: float = 4e-4
    lr_milestones: tuple[int, ...] = (160, 240)
    lr_gamma: float = 0.5
    epochs: int = 320
    batch_size: int = 64
    seed: int = 0
    samples_per_class: int = 10

    def __post_init__(self) -> None:
        if min(self.learning_rate, self.lr_gamma, self.epochs, self.batch_size) <= 0:
            raise ValueError("learning_rate, lr_gamma, epochs, batch_size must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)


def _first_nonfinite_gradient(model: nn.Module) -> str | None:
    for name, param in model.named_parameters():
        if param.grad is not None and not torch.isfinite(param.grad).all():
            return name
    return None


def train_on_batches(
    model: S2Fin,
    batch: PatchBatch,
    config: TrainConfig,
) -> TrainHistory:
    """Train in-place on one materialized patch set; returns per-epoch history."""
    if len(batch) == 0:
        raise ValueError("empty training set")
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=(0.9, 0.999),
        eps=1e-8,
        weight_decay=config.weight_decay,
    )
    scheduler = torch.optim.lr_scheduler.MultiStepLR(
        optimizer, milestones=list(config.lr_milestones), gamma=config.lr_gamma
    )
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    n = len(batch)
    for epoch in range(config.epochs):
        order = order_rng.permutation(n)
        epoch_loss = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = torch.from_numpy(order[start : start + config.batch_size].copy())
            optimizer.zero_grad()
            logits = model(batch.x_spec[idx], batch.x_spat_a[idx])
            labels = batch.labels[idx]
            loss = loss_fn(logits, labels)
            loss.backward()
            if not torch.isfinite(loss):
                raise TrainingDivergence(epoch, _first_nonfinite_gradient(model))
            optimizer.step()
            model.clamp_constrained_()
            epoch_loss += loss.item() * len(idx)
            correct += int((logits.argmax(dim=1) == labels).sum())
        history.loss.append(epoch_loss / n)
        history.accuracy.append(correct / n)
        history.learning_rate.append(optimizer.param_groups[0]["lr"])
        scheduler.step()
    return history


@torch.no_grad()
def predict_batches(model: S2Fin, batch: PatchBatch, chunk: int = 256) -> torch.Tensor:
    """Deterministic chunked argmax predictions (fixed reduction order)."""
    preds = []
    for start in range(0, len(batch), chunk):
        logits = model(
            batch.x_spec[start : start + chunk], batch.x_spat_a[start : start + chunk]
        )
        preds.append(logits.argmax(dim=1))
    return torch.cat(preds)


def evaluate(model: S2Fin, batch: PatchBatch) -> ConfusionMatrix:
    if len(batch) == 0:
        raise ValueError("empty evaluation set")
    preds = predict_batches(model, batch)
    cm = ConfusionMatrix(model.config.num_classes)
    cm.update(batch.labels.numpy(), preds.numpy())
    return cm


@dataclass
class RunResult:
    model: S2Fin
    history: TrainHistory
    confusion: ConfusionMatrix

    @property
    def oa(self) -> float:
        return self.confusion.overall_accuracy()


def run_experiment(
    scene: SceneContainer,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> RunResult:
    """Split the scene, train a fresh seeded model, evaluate on held-out pixels."""
    train_coords, eval_coords = split_labeled(
        scene, train_config.samples_per_class, train_config.seed
    )
    train_set = patch_batch(scene, model_config.window, train_coords)
    eval_set = patch_batch(scene, model_config.window, eval_coords)
    model = build_model(model_config, seed=train_config.seed)
    history = train_on_batches(model, train_set, train_config)
    return RunResult(model=model, history=history, confusion=evaluate(model, eval_set))


def ablation_run(
    scene: SceneContainer,
    model_config: ModelConfig,
    train_config: TrainConfig,
    disable: set[str] | frozenset[str] = frozenset(),
) -> RunResult:
    """Train/evaluate with the given modules replaced by identity pass-through."""
    return run_experiment(scene, model_config.with_disabled(disable), train_config)

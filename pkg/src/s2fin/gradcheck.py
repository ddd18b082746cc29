"""Finite-difference verification of analytic gradients.

For every trainable leaf a random subsample of coordinates is perturbed by
+-h and the central difference of the loss is compared against the autograd
value. Relative error uses a small magnitude floor so coordinates whose true
gradient sits below the finite-difference noise floor are compared at an
absolute scale instead of exploding the ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


@dataclass
class LeafReport:
    path: str
    max_rel_error: float
    checked_coords: int


@dataclass
class GradCheckReport:
    leaves: list[LeafReport]
    tolerance: float

    @property
    def failed(self) -> list[LeafReport]:
        return [leaf for leaf in self.leaves if leaf.max_rel_error > self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failed

    @property
    def max_rel_error(self) -> float:
        return max((leaf.max_rel_error for leaf in self.leaves), default=0.0)

    def summary(self) -> str:
        lines = [
            f"{'PASS' if self.passed else 'FAIL'} tolerance={self.tolerance:g} "
            f"max_rel_error={self.max_rel_error:.3e}"
        ]
        for leaf in self.leaves:
            mark = "ok " if leaf.max_rel_error <= self.tolerance else "BAD"
            lines.append(f"  {mark} {leaf.path}: {leaf.max_rel_error:.3e}")
        return "\n".join(lines)


def grad_check(
    model: nn.Module,
    loss_fn,
    tolerance: float = 1e-3,
    h: float = 1e-4,
    coords_per_leaf: int = 5,
    seed: int = 0,
    rel_floor: float = 1e-4,
) -> GradCheckReport:
    """Compare autograd gradients of ``loss_fn(model)`` with central differences.

    ``loss_fn`` must evaluate the model to a scalar and be deterministic.
    Raises immediately on a non-finite analytic gradient, naming the leaf.
    """
    params = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    if not params:
        raise ValueError("model has no trainable parameters")

    model.zero_grad()
    loss = loss_fn(model)
    loss.backward()
    analytic = {}
    for name, p in params:
        grad = torch.zeros_like(p) if p.grad is None else p.grad.detach().clone()
        if not torch.isfinite(grad).all():
            raise FloatingPointError(f"non-finite analytic gradient in leaf {name}")
        analytic[name] = grad

    rng = np.random.default_rng(seed)
    leaves = []
    with torch.no_grad():
        for name, p in params:
            n = p.numel()
            count = min(coords_per_leaf, n)
            coords = rng.choice(n, size=count, replace=False)
            flat = p.view(-1)
            worst = 0.0
            for coord in coords:
                original = flat[coord].item()
                flat[coord] = original + h
                plus = float(loss_fn(model))
                flat[coord] = original - h
                minus = float(loss_fn(model))
                flat[coord] = original
                fd = (plus - minus) / (2 * h)
                an = float(analytic[name].view(-1)[coord])
                rel = abs(fd - an) / max(abs(fd), abs(an), rel_floor)
                worst = max(worst, rel)
            leaves.append(LeafReport(path=name, max_rel_error=worst, checked_coords=count))
    return GradCheckReport(leaves=leaves, tolerance=tolerance)


def cross_entropy_loss_fn(x_spec: torch.Tensor, x_spat_a: torch.Tensor, labels: torch.Tensor):
    """Standard loss closure for checking a full classification model."""
    ce = nn.CrossEntropyLoss()

    def closure(model: nn.Module):
        return ce(model(x_spec, x_spat_a), labels)

    return closure

"""Reversible instance normalization.

Each input instance is standardized with its own mean and population
standard deviation; outputs are mapped back with the captured statistics.
The divisor is std + epsilon, so constant inputs normalize to zeros and
the reverse pass is exact.  Both directions stay inside the autograd
graph when used through the :class:`RevIN` module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

DEFAULT_EPS = 1e-5


@dataclass(frozen=True)
class InstanceStats:
    """Statistics captured by one normalization pass."""

    mean: float
    std: float
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if self.std < 0:
            raise ValueError(f"std must be >= 0, got {self.std}")


def normalize(values, epsilon: float = DEFAULT_EPS) -> tuple[np.ndarray, InstanceStats]:
    """Standardize a sequence, returning (normalized values, stats)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 1:
        raise ValueError("cannot normalize an empty sequence")
    if not np.isfinite(x).all():
        raise ValueError("cannot normalize non-finite values")
    mean = float(x.mean())
    std = float(x.std())
    return (x - mean) / (std + epsilon), InstanceStats(mean=mean, std=std, epsilon=epsilon)


def denormalize(values, stats: InstanceStats) -> np.ndarray:
    """Invert :func:`normalize` using the captured statistics."""
    x = np.asarray(values, dtype=np.float64)
    return x * (stats.std + stats.epsilon) + stats.mean


class RevIN(nn.Module):
    """Instance normalization layer with exact reversal.

    Statistics are reduced over the last dimension and handed back to the
    caller instead of being stored on the module, so concurrent forward
    passes over distinct instances never interfere.  The optional affine
    transform starts at identity (scale 1, shift 0).
    """

    def __init__(self, eps: float = DEFAULT_EPS, affine: bool = True):
        super().__init__()
        self.eps = eps
        self.affine = affine
        if affine:
            self.affine_weight = nn.Parameter(torch.ones(1))
            self.affine_bias = nn.Parameter(torch.zeros(1))

    def normalize(self, x: torch.Tensor) -> tuple[torch.Tensor, tuple[torch.Tensor, torch.Tensor]]:
        mean = x.mean(dim=-1, keepdim=True)
        std = x.std(dim=-1, keepdim=True, unbiased=False)
        y = (x - mean) / (std + self.eps)
        if self.affine:
            y = y * self.affine_weight + self.affine_bias
        return y, (mean, std)

    def denormalize(self, y: torch.Tensor, stats: tuple[torch.Tensor, torch.Tensor]) -> torch.Tensor:
        mean, std = stats
        if self.affine:
            y = (y - self.affine_bias) / self.affine_weight
        return y * (std + self.eps) + mean

    def forward(self, x: torch.Tensor, mode: str = "norm", stats=None):
        if mode == "norm":
            return self.normalize(x)
        if mode == "denorm":
            if stats is None:
                raise ValueError("denorm mode requires the stats from the matching norm pass")
            return self.denormalize(x, stats)
        raise ValueError(f"unknown mode {mode!r}")

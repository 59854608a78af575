"""Shared transformer-encoder stack over segment tokens.

Attention is full and bidirectional; masking for the self-supervised
tasks happens by token replacement upstream, never via attention masks.
Positions ride inside the tokens themselves, so no further positional
encoding is added here.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .core import TokenSequence

NORM_PLACEMENTS = ("pre", "post")


@dataclass
class BackboneConfig:
    num_layers: int = 2
    num_heads: int = 2
    model_dim: int = 64
    feedforward_dim: int = 128
    dropout: float = 0.0
    norm: str = "pre"

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.model_dim % self.num_heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.norm not in NORM_PLACEMENTS:
            raise ValueError(f"norm must be one of {NORM_PLACEMENTS}, got {self.norm!r}")


class EncoderLayer(nn.Module):
    """One encoder block with configurable pre/post layer-norm placement."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        d = config.model_dim
        self.norm_first = config.norm == "pre"
        self.self_attn = nn.MultiheadAttention(
            d, config.num_heads, dropout=config.dropout, batch_first=True
        )
        self.linear1 = nn.Linear(d, config.feedforward_dim)
        self.linear2 = nn.Linear(config.feedforward_dim, d)
        self.norm1 = nn.LayerNorm(d)
        self.norm2 = nn.LayerNorm(d)
        self.dropout = nn.Dropout(config.dropout)

    def _attend(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.self_attn(x, x, x, need_weights=False)
        return self.dropout(out)

    def _feed_forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.dropout(self.linear2(self.dropout(torch.relu(self.linear1(x)))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.norm_first:
            x = x + self._attend(self.norm1(x))
            x = x + self._feed_forward(self.norm2(x))
        else:
            x = self.norm1(x + self._attend(x))
            x = self.norm2(x + self._feed_forward(x))
        return x


class Backbone(nn.Module):
    """Stack of encoder layers mapping R tokens to R output embeddings."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.num_layers))
        self.final_norm = nn.LayerNorm(config.model_dim) if config.norm == "pre" else None

    def forward(self, tokens: TokenSequence | torch.Tensor) -> torch.Tensor:
        x = tokens.tokens if isinstance(tokens, TokenSequence) else tokens
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != self.config.model_dim:
            raise ValueError(
                f"expected (R, {self.config.model_dim}) tokens with R >= 1, got {tuple(x.shape)}"
            )
        x = x.unsqueeze(0)
        for layer in self.layers:
            x = layer(x)
        if self.final_norm is not None:
            x = self.final_norm(x)
        return x.squeeze(0)

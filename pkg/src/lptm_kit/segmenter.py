"""Per-domain adaptive segmentation.

A single-layer GRU encodes the normalized series into hidden states
z^(1..t).  A learned score s(i, j) = v . tanh(W1 z_i + W2 z_j + b) rates
every candidate segment up to a configurable span cap.  Selection keeps,
for each start i, the best-scoring end h(i), then greedily drops the
lowest-scoring segments while full coverage of 1..t survives.  Chosen
segments become tokens: a small self-attention over the segment's hidden
states is summed and concatenated with sinusoidal encodings of the start
position and the span, then projected to the backbone width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .core import Segment, SegmentSet, TokenSequence

PRUNE_MODES = ("score", "end_index")


def positional_encoding(position: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Sinusoidal encoding of a nonnegative integer position.

    Entry d holds sin(position / 10^(5d/dim)) for even d and
    cos(position / 10^(5(d-1)/dim)) for odd d; dim must be even.
    """
    if position < 0:
        raise ValueError(f"position must be >= 0, got {position}")
    if dim % 2 != 0:
        raise ValueError(f"dim must be even, got {dim}")
    even = torch.arange(0, dim, 2, dtype=torch.float64)
    angles = position / torch.pow(10.0, 5.0 * even / dim)
    out = torch.empty(dim, dtype=torch.float64)
    out[0::2] = torch.sin(angles)
    out[1::2] = torch.cos(angles)
    return out.to(dtype)


@dataclass
class SegmenterConfig:
    hidden_size: int = 50      # GRU hidden units
    score_dim: int = 50        # rows of W1/W2 and length of v
    model_dim: int = 64        # token width fed to the backbone
    pos_dim: int = 16          # width of each positional feature
    max_span: int = 64         # cap on end - start for candidate segments
    prune_by: str = "score"    # "score" or "end_index" (literal argmin-of-h variant)
    exhaustive_prune: bool = False
    fixed_patch_len: int | None = None  # uniform patching, bypasses scoring

    def __post_init__(self):
        if self.prune_by not in PRUNE_MODES:
            raise ValueError(f"prune_by must be one of {PRUNE_MODES}, got {self.prune_by!r}")
        if self.max_span < 1:
            raise ValueError(f"max_span must be >= 1, got {self.max_span}")
        if self.pos_dim % 2 != 0:
            raise ValueError(f"pos_dim must be even, got {self.pos_dim}")
        if self.fixed_patch_len is not None and self.fixed_patch_len < 1:
            raise ValueError("fixed_patch_len must be >= 1")


@dataclass(frozen=True)
class SegmentScores:
    """Detached score table for one series.

    ``values[i, j]`` (0-based) scores the segment covering steps
    i+1..j+1; entries outside the valid band are -inf in ``values`` and
    False in ``valid``.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "valid", np.asarray(self.valid, dtype=bool))
        if self.values.shape != self.valid.shape or self.values.ndim != 2:
            raise ValueError("values and valid must be equal square matrices")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def score(self, start: int, end: int) -> float:
        """Score of the 1-based inclusive segment (start, end)."""
        if not self.valid[start - 1, end - 1]:
            raise KeyError(f"segment ({start}, {end}) is not a scored candidate")
        return float(self.values[start - 1, end - 1])


def choose_segments(
    scores: SegmentScores,
    prune_by: str = "score",
    exhaustive: bool = False,
) -> SegmentSet:
    """Select a coverage-complete segment set from a score table.

    For each start i the best end h(i) is kept (ties to the smaller end),
    then segments are visited from lowest key upward and removed while
    every time-step stays covered.  The default stops at the first
    removal that would break coverage; ``exhaustive`` skips blocked
    segments and keeps pruning.  ``prune_by`` picks the removal key:
    the segment's score, or its end index.
    """
    if prune_by not in PRUNE_MODES:
        raise ValueError(f"prune_by must be one of {PRUNE_MODES}, got {prune_by!r}")
    t = scores.length
    if t < 2:
        raise ValueError(f"need at least 2 time-steps, got {t}")

    masked = np.where(scores.valid, scores.values, -np.inf)
    ends = np.empty(t - 1, dtype=int)
    for i in range(t - 1):
        if not scores.valid[i].any():
            raise ValueError(f"no candidate end for start {i + 1}")
        ends[i] = int(np.argmax(masked[i]))  # first max -> smallest end
    starts = np.arange(t - 1)
    seg_scores = scores.values[starts, ends]

    counts = np.zeros(t, dtype=int)
    for s, e in zip(starts, ends):
        counts[s : e + 1] += 1

    if prune_by == "score":
        order = sorted(range(t - 1), key=lambda k: (seg_scores[k], starts[k]))
    else:
        order = sorted(range(t - 1), key=lambda k: (ends[k], starts[k]))

    removed = np.zeros(t - 1, dtype=bool)
    for k in order:
        s, e = starts[k], ends[k]
        if (counts[s : e + 1] >= 2).all():
            counts[s : e + 1] -= 1
            removed[k] = True
        elif not exhaustive:
            break

    segments = [
        Segment(start=int(s) + 1, end=int(e) + 1, score=float(sc))
        for s, e, sc, gone in zip(starts, ends, seg_scores, removed)
        if not gone
    ]
    return SegmentSet(segments=tuple(segments), series_length=t)


def uniform_patches(t: int, patch_len: int) -> SegmentSet:
    """Fixed-length patching producing exactly ceil(t / patch_len) segments.

    A trailing single-step remainder is widened one step left (segments
    need at least two steps), which overlaps the previous patch but keeps
    the patch count.
    """
    if t < 2:
        raise ValueError(f"need at least 2 time-steps, got {t}")
    if patch_len < 1:
        raise ValueError(f"patch_len must be >= 1, got {patch_len}")
    segments = []
    for k in range(math.ceil(t / patch_len)):
        start = k * patch_len
        end = min((k + 1) * patch_len, t) - 1
        if end == start:
            start = end - 1
        segments.append(Segment(start=start + 1, end=end + 1))
    return SegmentSet(segments=tuple(segments), series_length=t)


@dataclass
class TokenizeResult:
    tokens: TokenSequence
    scores: SegmentScores | None
    hidden: torch.Tensor


class Segmenter(nn.Module):
    """Adaptive segmentation module for one dataset domain."""

    def __init__(self, config: SegmenterConfig):
        super().__init__()
        self.config = config
        h, s = config.hidden_size, config.score_dim
        self.gru = nn.GRU(input_size=1, hidden_size=h, num_layers=1, batch_first=True)
        self.score_w1 = nn.Linear(h, s, bias=False)
        self.score_w2 = nn.Linear(h, s, bias=False)
        self.score_b = nn.Parameter(torch.zeros(s))
        self.score_v = nn.Parameter(torch.randn(s) / math.sqrt(s))
        self.attn_q = nn.Linear(h, h, bias=False)
        self.attn_k = nn.Linear(h, h, bias=False)
        self.attn_v = nn.Linear(h, h, bias=False)
        self.token_proj = nn.Linear(h + 2 * config.pos_dim, config.model_dim)

    def encode(self, values: torch.Tensor) -> torch.Tensor:
        """GRU pass over a normalized series.

        Accepts (t,) or (batch, t) and returns (t, H) or (batch, t, H).
        """
        squeeze = values.ndim == 1
        x = values.reshape(1, -1, 1) if squeeze else values.unsqueeze(-1)
        hidden, _ = self.gru(x)
        return hidden[0] if squeeze else hidden

    def effective_span(self, t: int) -> int:
        return min(self.config.max_span, t - 1)

    def score_table(self, hidden: torch.Tensor, row_chunk: int = 64) -> torch.Tensor:
        """Full (t, t) score tensor; entries outside the band are -inf.

        Rows are processed in chunks to bound the transient
        (chunk, t, score_dim) activation.
        """
        t = hidden.shape[0]
        span = self.effective_span(t)
        left = self.score_w1(hidden)   # (t, S)
        right = self.score_w2(hidden)  # (t, S)
        rows = []
        for lo in range(0, t, row_chunk):
            hi = min(lo + row_chunk, t)
            pre = left[lo:hi, None, :] + right[None, :, :] + self.score_b
            rows.append(torch.tanh(pre) @ self.score_v)
        table = torch.cat(rows, dim=0)
        idx = torch.arange(t, device=table.device)
        band = (idx[None, :] > idx[:, None]) & (idx[None, :] - idx[:, None] <= span)
        return table.masked_fill(~band, float("-inf"))

    def score_pairs(self, hidden: torch.Tensor, segset: SegmentSet) -> torch.Tensor:
        """Differentiable scores of the given segments, in set order."""
        starts = torch.tensor([seg.start - 1 for seg in segset], device=hidden.device)
        ends = torch.tensor([seg.end - 1 for seg in segset], device=hidden.device)
        pre = self.score_w1(hidden[starts]) + self.score_w2(hidden[ends]) + self.score_b
        return torch.tanh(pre) @ self.score_v

    def get_scores(self, hidden: torch.Tensor) -> SegmentScores:
        """Detached score table for segment selection and export."""
        t = hidden.shape[0]
        with torch.no_grad():
            table = self.score_table(hidden).cpu().double().numpy()
        valid = np.isfinite(table)
        return SegmentScores(values=np.where(valid, table, -np.inf), valid=valid)

    def embed_segments(self, hidden: torch.Tensor, segset: SegmentSet) -> TokenSequence:
        """Token per segment: summed self-attention output plus position features."""
        dtype = hidden.dtype
        scale = 1.0 / math.sqrt(self.config.hidden_size)
        tokens = []
        for seg in segset:
            zs = hidden[seg.as_slice]
            q, k, v = self.attn_q(zs), self.attn_k(zs), self.attn_v(zs)
            attn = torch.softmax(q @ k.T * scale, dim=-1)
            pooled = (attn @ v).sum(dim=0)
            feats = torch.cat(
                [
                    pooled,
                    positional_encoding(seg.start, self.config.pos_dim, dtype=dtype),
                    positional_encoding(seg.end - seg.start, self.config.pos_dim, dtype=dtype),
                ]
            )
            tokens.append(self.token_proj(feats))
        return TokenSequence(
            tokens=torch.stack(tokens),
            segment_set=segset,
            mask_flags=(False,) * len(segset),
        )

    def tokenize(self, values: torch.Tensor) -> TokenizeResult:
        """Normalized series -> token sequence (plus score table when adaptive)."""
        hidden = self.encode(values)
        if self.config.fixed_patch_len is not None:
            segset = uniform_patches(hidden.shape[0], self.config.fixed_patch_len)
            return TokenizeResult(self.embed_segments(hidden, segset), None, hidden)
        scores = self.get_scores(hidden)
        segset = choose_segments(
            scores, prune_by=self.config.prune_by, exhaustive=self.config.exhaustive_prune
        )
        return TokenizeResult(self.embed_segments(hidden, segset), scores, hidden)


def format_segment_block(series_id: str, values: np.ndarray, segset: SegmentSet) -> str:
    """One export block: header, the series values, then `start end score` lines."""
    lines = [f"# series {series_id} length {len(values)}"]
    lines.append("# values " + " ".join(f"{v:.6g}" for v in values))
    for seg in segset:
        lines.append(f"{seg.start} {seg.end} {seg.score:.6f}")
    return "\n".join(lines) + "\n"

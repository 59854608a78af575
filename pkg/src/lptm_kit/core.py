"""Shared domain types: series, segments, token sequences.

Index convention: segment boundaries are 1-based and inclusive, so a
segment (start, end) covers time-steps {start, ..., end} of a length-t
series with 1 <= start < end <= t.  Array code converts at the edges via
:meth:`Segment.as_slice`.  All types here are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import LengthError

KINDS = ("pretrain", "forecast", "classify")


@dataclass(frozen=True)
class TimeSeries:
    """A univariate real-valued series with a domain label.

    ``target`` is a horizon array for forecast series, a class index for
    classification series, and None for pre-training windows.
    """

    values: np.ndarray
    domain_id: str
    kind: str = "pretrain"
    target: np.ndarray | int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.kind not in KINDS:
            raise ValueError(f"unknown series kind {self.kind!r}")

    @property
    def length(self) -> int:
        return len(self.values)


def validate_series(series: TimeSeries) -> TimeSeries:
    """Check series invariants and return the series unchanged.

    Raises LengthError for series shorter than 2 steps (the minimum a
    segment can cover) and ValueError for any non-finite entry.
    """
    if series.length < 2:
        raise LengthError(f"series must have at least 2 points, got {series.length}")
    if not np.isfinite(series.values).all():
        bad = int(np.flatnonzero(~np.isfinite(series.values))[0])
        raise ValueError(f"non-finite value at position {bad + 1}")
    return series


def as_float_tensor(values) -> torch.Tensor:
    """Copy values into a fresh float32 tensor (never shares memory)."""
    return torch.tensor(np.array(values, dtype=np.float64), dtype=torch.float32)


@dataclass(frozen=True, order=True)
class Segment:
    """A scored candidate segment covering steps start..end inclusive."""

    start: int
    end: int
    score: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not 1 <= self.start < self.end:
            raise ValueError(f"segment ({self.start}, {self.end}) must satisfy 1 <= start < end")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def as_slice(self) -> slice:
        """0-based half-open slice selecting this segment from an array."""
        return slice(self.start - 1, self.end)


@dataclass(frozen=True)
class SegmentSet:
    """Segments chosen for one series, sorted and coverage-complete.

    The constructor sorts by (start, end) and rejects sets that leave any
    time-step of 1..series_length uncovered.
    """

    segments: tuple[Segment, ...]
    series_length: int

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: (s.start, s.end)))
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("segment set must not be empty")
        if segs[-1].end > self.series_length:
            raise ValueError(
                f"segment end {segs[-1].end} exceeds series length {self.series_length}"
            )
        if not self.covered_mask().all():
            missing = int(np.flatnonzero(~self.covered_mask())[0]) + 1
            raise ValueError(f"time-step {missing} not covered by any segment")

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def covered_mask(self) -> np.ndarray:
        """Boolean mask over 1..series_length marking covered steps."""
        mask = np.zeros(self.series_length, dtype=bool)
        for seg in self.segments:
            mask[seg.as_slice] = True
        return mask

    @property
    def score_sum(self) -> float:
        return float(sum(seg.score for seg in self.segments))

    @property
    def mean_length(self) -> float:
        return float(np.mean([seg.length for seg in self.segments]))


@dataclass(frozen=True)
class TokenSequence:
    """Segment-token embeddings in segment order, one row per segment."""

    tokens: torch.Tensor
    segment_set: SegmentSet
    mask_flags: tuple[bool, ...]

    def __post_init__(self):
        if self.tokens.ndim != 2:
            raise ValueError(f"tokens must be (R, D), got shape {tuple(self.tokens.shape)}")
        if len(self.tokens) != len(self.segment_set):
            raise ValueError(
                f"{len(self.tokens)} tokens for {len(self.segment_set)} segments"
            )
        if len(self.mask_flags) != len(self.tokens):
            raise ValueError("mask_flags length must match token count")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def model_dim(self) -> int:
        return self.tokens.shape[1]

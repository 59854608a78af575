"""Corpus construction: synthetic families, CSV ingestion, sampling.

A corpus is a flat list of split series tagged with domain ids.  Splits
are contiguous (train, then validation, then test) so forecasting never
trains on the future.  All randomness flows through numpy's default
PCG64 generators; pass explicit seeds for reproducible corpora.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TimeSeries, validate_series
from .errors import CorpusError, LengthError, ParseError

SPLITS = ("train", "val", "test")
SYNTH_DOMAINS = ("sinusoid", "epidemic", "random_walk")


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous split fractions; must sum to 1."""

    train: float = 0.6
    val: float = 0.2
    test: float = 0.2

    def __post_init__(self):
        for name in SPLITS:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} fraction must be >= 0")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.train <= 0:
            raise ValueError("train fraction must be positive")


@dataclass(frozen=True)
class SplitSeries:
    """One series plus its split boundaries (train | val | test)."""

    series: TimeSeries
    train_end: int
    val_end: int

    def __post_init__(self):
        t = self.series.length
        if not 0 < self.train_end <= self.val_end <= t:
            raise ValueError(
                f"bad split bounds ({self.train_end}, {self.val_end}) for length {t}"
            )

    def piece(self, split: str) -> np.ndarray:
        if split == "train":
            return self.series.values[: self.train_end]
        if split == "val":
            return self.series.values[self.train_end : self.val_end]
        if split == "test":
            return self.series.values[self.val_end :]
        raise CorpusError(f"unknown split {split!r}; expected one of {SPLITS}")

    @property
    def domain_id(self) -> str:
        return self.series.domain_id


def split_series(series: TimeSeries, spec: SplitSpec | None = None) -> SplitSeries:
    """Cut one series into contiguous train/val/test pieces.

    Any piece with a nonzero fraction must receive at least two points;
    shorter series raise LengthError rather than producing unusable
    slivers.
    """
    spec = spec if spec is not None else SplitSpec()
    t = series.length
    train_end = int(math.floor(t * spec.train))
    val_end = train_end + int(math.floor(t * spec.val))
    out = SplitSeries(series=series, train_end=train_end, val_end=val_end)
    for name, frac in (("train", spec.train), ("val", spec.val), ("test", spec.test)):
        if frac > 0 and len(out.piece(name)) < 2:
            raise LengthError(
                f"{name} split of series with length {t} has fewer than 2 points"
            )
    return out


@dataclass
class Corpus:
    """Flat collection of split series, grouped by domain on demand."""

    items: list[SplitSeries] = field(default_factory=list)
    name: str = "corpus"
    norm_stats: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.items:
            raise CorpusError("corpus must contain at least one series")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def domains(self) -> tuple[str, ...]:
        return tuple(sorted({item.domain_id for item in self.items}))

    def by_domain(self, domain_id: str) -> list[SplitSeries]:
        found = [item for item in self.items if item.domain_id == domain_id]
        if not found:
            raise CorpusError(f"no series for domain {domain_id!r}")
        return found

    def merged(self, other: "Corpus") -> "Corpus":
        stats = dict(self.norm_stats)
        stats.update(other.norm_stats)
        return Corpus(
            items=self.items + other.items,
            name=f"{self.name}+{other.name}",
            norm_stats=stats,
        )


# -- synthetic families ---------------------------------------------------


def make_sinusoid(rng: np.random.Generator, length: int) -> np.ndarray:
    """Sine plus linear trend plus noise."""
    period = rng.uniform(12, 48)
    amp = rng.uniform(0.5, 3.0)
    phase = rng.uniform(0, 2 * np.pi)
    slope = rng.uniform(-0.02, 0.02)
    noise = rng.uniform(0.02, 0.15)
    t = np.arange(length, dtype=np.float64)
    return amp * np.sin(2 * np.pi * t / period + phase) + slope * t + noise * rng.standard_normal(length)


def make_epidemic(
    rng: np.random.Generator,
    length: int,
    period: int = 64,
    peak_width: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Seasonal series with sharp recurring outbreak peaks.

    Returns (values, peak_mask) where peak_mask is True within
    2 * peak_width steps of a peak center.  Peaks are tall and narrow
    relative to the smooth baseline, mimicking surveillance counts.
    """
    t = np.arange(length, dtype=np.float64)
    baseline = 0.4 * np.sin(2 * np.pi * t / period) + 0.5
    values = baseline.copy()
    mask = np.zeros(length, dtype=bool)
    first = rng.uniform(0.3, 0.7) * period
    centers = np.arange(first, length, period) + rng.normal(0, period * 0.05, size=len(np.arange(first, length, period)))
    for center in centers:
        height = rng.uniform(4.0, 9.0)
        width = peak_width * rng.uniform(0.7, 1.3)
        values += height * np.exp(-0.5 * ((t - center) / width) ** 2)
        mask |= np.abs(t - center) <= 2 * peak_width
    values += 0.05 * rng.standard_normal(length)
    return values, mask


def make_random_walk(rng: np.random.Generator, length: int) -> np.ndarray:
    """Random walk whose step volatility switches between regimes."""
    low, high = rng.uniform(0.05, 0.2), rng.uniform(0.6, 1.5)
    steps = np.empty(length, dtype=np.float64)
    pos = 0
    in_high = bool(rng.random() < 0.5)
    while pos < length:
        run = int(rng.geometric(1 / 40.0))
        run = min(max(run, 5), length - pos)
        sigma = high if in_high else low
        steps[pos : pos + run] = sigma * rng.standard_normal(run)
        pos += run
        in_high = not in_high
    return np.cumsum(steps)


_FAMILIES = {
    "sinusoid": lambda rng, n: make_sinusoid(rng, n),
    "epidemic": lambda rng, n: make_epidemic(rng, n)[0],
    "random_walk": lambda rng, n: make_random_walk(rng, n),
}


def synth_corpus(
    seed: int = 0,
    domains: tuple[str, ...] = SYNTH_DOMAINS,
    series_per_domain: int = 4,
    length: int = 512,
    split: SplitSpec | None = None,
) -> Corpus:
    """Multi-domain synthetic corpus for pre-training experiments."""
    rng = np.random.default_rng(seed)
    items = []
    for domain in domains:
        if domain not in _FAMILIES:
            raise CorpusError(f"unknown synthetic domain {domain!r}; have {sorted(_FAMILIES)}")
        for _ in range(series_per_domain):
            values = _FAMILIES[domain](rng, length)
            series = TimeSeries(values=values, domain_id=domain)
            validate_series(series)
            items.append(split_series(series, split))
    return Corpus(items=items, name=f"synth-{seed}")


def synth_classification(
    seed: int = 0, num_per_class: int = 12, length: int = 64, domain_id: str = "shapes"
) -> list[TimeSeries]:
    """Two-class toy set: smooth periodic (0) versus noisy walk (1)."""
    rng = np.random.default_rng(seed)
    out = []
    for label in (0, 1):
        for _ in range(num_per_class):
            if label == 0:
                values = make_sinusoid(rng, length)
            else:
                values = np.cumsum(rng.standard_normal(length) * 0.5)
            out.append(
                TimeSeries(values=values, domain_id=domain_id, kind="classify", target=label)
            )
    return out


# -- CSV ingestion ---------------------------------------------------------


def _parse_float(cell: str, line: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"cannot parse {cell!r} as a number", line=line) from None


def ingest_csv(
    path,
    domain_id: str = "csv",
    fmt: str = "columns",
    normalize: str = "train_zscore",
    split: SplitSpec | None = None,
) -> Corpus:
    """Read series from a CSV file into a corpus.

    ``columns`` format: each column is one series; an optional header
    row names them.  ``rows`` format: each row is ``id,v1,v2,...``.
    With ``normalize="train_zscore"`` every value is standardized by the
    mean and population std of the pooled train splits, so test data
    never leaks into the scaling; ``"none"`` keeps raw values.
    """
    if fmt not in ("columns", "rows"):
        raise ParseError(f"fmt must be 'columns' or 'rows', got {fmt!r}")
    if normalize not in ("train_zscore", "none"):
        raise ParseError(f"normalize must be 'train_zscore' or 'none', got {normalize!r}")
    with open(path, newline="") as handle:
        raw_rows = [(i, row) for i, row in enumerate(csv.reader(handle), start=1) if row]
    if not raw_rows:
        raise ParseError("file contains no data rows")

    named: list[tuple[str, np.ndarray]] = []
    if fmt == "rows":
        for line, row in raw_rows:
            if len(row) < 3:
                raise ParseError("row needs an id and at least two values", line=line)
            values = np.array([_parse_float(c, line) for c in row[1:]], dtype=np.float64)
            named.append((row[0].strip(), values))
    else:
        first_line, first_row = raw_rows[0]
        try:
            [float(c) for c in first_row]
            names = [f"series_{k + 1}" for k in range(len(first_row))]
            data_rows = raw_rows
        except ValueError:
            names = [c.strip() for c in first_row]
            data_rows = raw_rows[1:]
            if not data_rows:
                raise ParseError("header present but no data rows", line=first_line)
        width = len(names)
        columns: list[list[float]] = [[] for _ in range(width)]
        for line, row in data_rows:
            if len(row) != width:
                raise ParseError(
                    f"expected {width} columns, found {len(row)}", line=line
                )
            for k, cell in enumerate(row):
                columns[k].append(_parse_float(cell, line))
        named = [(name, np.array(col, dtype=np.float64)) for name, col in zip(names, columns)]

    items = []
    for name, values in named:
        if len(values) < 2:
            raise LengthError(f"series {name!r} has fewer than 2 points")
        series = TimeSeries(values=values, domain_id=domain_id)
        validate_series(series)
        items.append(split_series(series, split))

    corpus = Corpus(items=items, name=str(path))
    if normalize == "train_zscore":
        pooled = np.concatenate([item.piece("train") for item in items])
        mean = float(pooled.mean())
        std = float(pooled.std())
        if std < 1e-12:
            std = 1.0
        rescaled = []
        for item in items:
            series = TimeSeries(
                values=(item.series.values - mean) / std,
                domain_id=item.series.domain_id,
                kind=item.series.kind,
                target=item.series.target,
            )
            rescaled.append(
                SplitSeries(series=series, train_end=item.train_end, val_end=item.val_end)
            )
        corpus = Corpus(items=rescaled, name=corpus.name, norm_stats={domain_id: (mean, std)})
    return corpus


# -- sampling and truncation ------------------------------------------------


def sample_pretrain_batch(
    corpus: Corpus,
    batch_size: int,
    rng: np.random.Generator,
    window: int = 96,
    split: str = "train",
) -> list[TimeSeries]:
    """Draw windows uniformly over domains, then series, then position.

    The domain-first draw keeps small domains represented instead of
    letting long-series domains dominate the batch.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    domains = corpus.domains
    batch = []
    for _ in range(batch_size):
        domain = domains[int(rng.integers(len(domains)))]
        pool = corpus.by_domain(domain)
        item = pool[int(rng.integers(len(pool)))]
        piece = item.piece(split)
        if len(piece) < 2:
            raise CorpusError(
                f"split {split!r} of a series in domain {domain!r} is too short to sample"
            )
        size = min(window, len(piece))
        start = int(rng.integers(len(piece) - size + 1))
        batch.append(
            TimeSeries(values=piece[start : start + size].copy(), domain_id=domain)
        )
    return batch


def truncate_fraction(series: TimeSeries, percent: float) -> TimeSeries:
    """Keep the first floor(percent/100 * t) points, minimum two."""
    if not 0 < percent <= 100:
        raise ValueError(f"percent must be in (0, 100], got {percent}")
    keep = max(2, int(math.floor(percent / 100.0 * series.length)))
    return TimeSeries(
        values=series.values[:keep].copy(),
        domain_id=series.domain_id,
        kind=series.kind,
        target=series.target,
    )


def forecast_windows(
    values: np.ndarray,
    context: int,
    horizon: int,
    domain_id: str,
    stride: int = 1,
    limit: int | None = None,
) -> list[TimeSeries]:
    """Slice (context -> horizon) supervised examples from one array."""
    values = np.asarray(values, dtype=np.float64)
    if context < 2 or horizon < 1:
        raise ValueError("need context >= 2 and horizon >= 1")
    out = []
    last_start = len(values) - context - horizon
    for start in range(0, last_start + 1, stride):
        ctx = values[start : start + context]
        fut = values[start + context : start + context + horizon]
        out.append(
            TimeSeries(values=ctx.copy(), domain_id=domain_id, kind="forecast", target=fut.copy())
        )
        if limit is not None and len(out) >= limit:
            break
    if not out:
        raise LengthError(
            f"series of length {len(values)} cannot yield a ({context}, {horizon}) window"
        )
    return out

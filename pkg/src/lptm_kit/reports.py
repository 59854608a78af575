"""Report artifacts: JSONL logs, delimited tables, rendered figures.

Every CLI run directory gets machine-readable output (JSONL records and
tab-separated tables) plus matplotlib figures rendered straight to PNG
files; the Agg backend keeps this headless-safe.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import SegmentSet


class JsonlWriter:
    """Append structured records to a file and optionally to stdout."""

    def __init__(self, path=None, echo: bool = False):
        self.path = path
        self.echo = echo
        self._handle = open(path, "a") if path is not None else None

    def write(self, record: dict):
        line = json.dumps(record, sort_keys=True, default=_jsonable)
        if self._handle is not None:
            self._handle.write(line + "\n")
            self._handle.flush()
        if self.echo:
            print(line, flush=True)

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def write_table(path, rows, header: tuple[str, ...]):
    """Tab-separated table with a header row."""
    with open(path, "w") as handle:
        handle.write("\t".join(header) + "\n")
        for row in rows:
            handle.write("\t".join(str(cell) for cell in row) + "\n")


def plot_segments(values, segset: SegmentSet, path, title: str | None = None):
    """Series line with alternating shading over the chosen segments."""
    values = np.asarray(values, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(10, 3.2))
    ax.plot(np.arange(1, len(values) + 1), values, lw=1.0, color="black")
    for k, seg in enumerate(segset):
        color = "tab:blue" if k % 2 == 0 else "tab:orange"
        ax.axvspan(seg.start, seg.end, alpha=0.18, color=color, lw=0)
    ax.set_xlabel("time step")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_loss_curve(steps, losses, path, ylabel: str = "loss", title: str | None = None):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(steps, losses, lw=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_data_efficiency(reports, path, title: str | None = None):
    """Mean metric with a std band versus training-history share."""
    percents = [r.metadata.get("percent") for r in reports]
    means = [r.mean for r in reports]
    stds = [r.std for r in reports]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.errorbar(percents, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel("training history kept (%)")
    ax.set_ylabel(reports[0].metric if reports else "metric")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_forecast(context, target, predicted, path, title: str | None = None):
    """Context, truth, and forecast on one axis."""
    context = np.asarray(context, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    t0 = len(context)
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(np.arange(t0), context, color="black", lw=1.0, label="context")
    future_x = np.arange(t0, t0 + len(target))
    ax.plot(future_x, target, color="tab:green", lw=1.2, label="actual")
    ax.plot(future_x, predicted, color="tab:red", lw=1.2, ls="--", label="forecast")
    ax.axvline(t0 - 0.5, color="gray", ls=":", lw=1)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

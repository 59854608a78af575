"""Shared test helpers: independent oracles and numeric utilities.

The segment-selection oracle below is a deliberately naive transcription
of the selection procedure (argmax head per row, then repeated
argmin-removal with a coverage check), kept separate from the library's
optimized implementation so the two can disagree.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from acceptance_registry import LINES


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance summary")
        for line in LINES:
            terminalreporter.write_line(line)


def oracle_choose_segments(values, valid, prune_by="score", exhaustive=False):
    """Reference segment selection; returns a sorted list of (i, j, score).

    values/valid are (t, t) arrays; entry (i-1, j-1) scores segment
    (i, j).  For each start i pick the highest-scoring valid end (first
    one on ties), then repeatedly remove the argmin segment (by score or
    by end index, ties by start) whose removal keeps every time-step
    covered; stop at the first blocked removal unless exhaustive.
    """
    values = np.asarray(values, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    t = values.shape[0]
    segs = []
    for i in range(1, t):
        best_j, best_s = None, -math.inf
        for j in range(i + 1, t + 1):
            if valid[i - 1, j - 1] and values[i - 1, j - 1] > best_s:
                best_s = values[i - 1, j - 1]
                best_j = j
        assert best_j is not None, f"row {i} has no valid end"
        segs.append((i, best_j, best_s))

    remaining = set(range(len(segs)))
    blocked = set()

    def coverage_holds(without):
        counts = np.zeros(t, dtype=int)
        for k in remaining:
            if k == without:
                continue
            i, j, _ = segs[k]
            counts[i - 1 : j] += 1
        return bool((counts >= 1).all())

    if prune_by == "score":
        key = lambda k: (segs[k][2], segs[k][0])
    else:
        key = lambda k: (segs[k][1], segs[k][0])
    while True:
        candidates = [k for k in remaining if k not in blocked]
        if not candidates:
            break
        k = min(candidates, key=key)
        if coverage_holds(without=k):
            remaining.remove(k)
        elif exhaustive:
            blocked.add(k)
        else:
            break
    return sorted(segs[k] for k in remaining)


def finite_difference_grads(params, loss_fn, eps=1e-6):
    """Central-difference gradients for each tensor in ``params``.

    ``loss_fn`` must recompute the scalar loss from the current
    parameter values; tensors are perturbed in place and restored.
    """
    grads = []
    for param in params:
        grad = torch.zeros_like(param, dtype=torch.float64)
        flat = param.data.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.numel()):
            orig = flat[idx].item()
            with torch.no_grad():
                flat[idx] = orig + eps
                up = float(loss_fn())
                flat[idx] = orig - eps
                down = float(loss_fn())
                flat[idx] = orig
            gflat[idx] = (up - down) / (2 * eps)
        grads.append(grad)
    return grads


def relative_error(analytic, numeric) -> float:
    a = torch.cat([g.reshape(-1).double() for g in analytic])
    n = torch.cat([g.reshape(-1).double() for g in numeric])
    denom = max(float(a.norm()), float(n.norm()), 1e-12)
    return float((a - n).norm()) / denom


def band_valid_mask(t: int, span: int) -> np.ndarray:
    """Valid-score mask: end > start and end - start <= span."""
    valid = np.zeros((t, t), dtype=bool)
    for i in range(1, t + 1):
        for j in range(i + 1, min(i + span, t) + 1):
            valid[i - 1, j - 1] = True
    return valid

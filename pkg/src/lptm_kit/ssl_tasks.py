"""Self-supervised pre-training tasks and loop.

Two masking tasks drive pre-training: randmask hides each token
independently with probability gamma, lastmask hides the trailing
ceil(gamma * R) tokens.  Hidden tokens are replaced by one learnable mask
embedding.  A per-task single-layer GRU decoder, seeded from the masked
token's output embedding, unrolls the segment's values; the SSL loss is
the mean squared error over masked positions only.

The segment score function cannot receive gradient through the discrete
segment choice, so it is trained by regressing the summed scores of the
chosen segments onto -log of the realized SSL loss; that regression loss
is applied once every ``score_update_every`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .core import SegmentSet, TimeSeries, TokenSequence, as_float_tensor
from .errors import DomainError

MASK_TASKS = ("randmask", "lastmask")
FEEDBACK_MODES = ("free_running", "teacher_forced")


@dataclass(frozen=True)
class MaskPlan:
    """Which token positions (1-based) one task hides."""

    masked_positions: tuple[int, ...]
    task: str
    gamma: float

    def __post_init__(self):
        if self.task not in MASK_TASKS:
            raise ValueError(f"task must be one of {MASK_TASKS}, got {self.task!r}")
        positions = tuple(sorted(set(int(p) for p in self.masked_positions)))
        object.__setattr__(self, "masked_positions", positions)
        if positions and positions[0] < 1:
            raise ValueError("token positions are 1-based")

    def __len__(self) -> int:
        return len(self.masked_positions)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def plan_randmask(num_tokens: int, gamma: float, rng=None) -> MaskPlan:
    """Mask each token independently with probability gamma.

    A draw that masks nothing falls back to masking the first token so
    the reconstruction loss is always defined.
    """
    if num_tokens < 1:
        raise ValueError(f"num_tokens must be >= 1, got {num_tokens}")
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must be in [0, 1], got {gamma}")
    draws = _as_generator(rng).random(num_tokens) < gamma
    positions = tuple(int(i) + 1 for i in np.flatnonzero(draws))
    if not positions:
        positions = (1,)
    return MaskPlan(masked_positions=positions, task="randmask", gamma=gamma)


def plan_lastmask(num_tokens: int, gamma: float) -> MaskPlan:
    """Mask exactly ceil(gamma * num_tokens) trailing tokens."""
    if num_tokens < 1:
        raise ValueError(f"num_tokens must be >= 1, got {num_tokens}")
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must be in (0, 1], got {gamma}")
    count = math.ceil(gamma * num_tokens)
    positions = tuple(range(num_tokens - count + 1, num_tokens + 1))
    return MaskPlan(masked_positions=positions, task="lastmask", gamma=gamma)


def apply_mask(
    tokens: TokenSequence, plan: MaskPlan, mask_embedding: torch.Tensor
) -> TokenSequence:
    """Replace planned token vectors with the mask embedding."""
    if plan.masked_positions and plan.masked_positions[-1] > len(tokens):
        raise ValueError(
            f"plan masks position {plan.masked_positions[-1]} but only {len(tokens)} tokens exist"
        )
    out = tokens.tokens.clone()
    flags = list(tokens.mask_flags)
    for pos in plan.masked_positions:
        out[pos - 1] = mask_embedding
        flags[pos - 1] = True
    return TokenSequence(tokens=out, segment_set=tokens.segment_set, mask_flags=tuple(flags))


class SegmentReconstructor(torch.nn.Module):
    """Single-layer GRU that unrolls a masked segment's values.

    The masked token's output embedding initializes the hidden state;
    each step consumes the previously emitted scalar (or the previous
    ground-truth value under teacher forcing) and emits one value.
    """

    def __init__(self, model_dim: int):
        super().__init__()
        self.cell = torch.nn.GRUCell(1, model_dim)
        self.out = torch.nn.Linear(model_dim, 1)

    def decode(
        self,
        init_hidden: torch.Tensor,
        length: int,
        truth: torch.Tensor | None = None,
        feedback: str = "free_running",
    ) -> torch.Tensor:
        if feedback not in FEEDBACK_MODES:
            raise ValueError(f"feedback must be one of {FEEDBACK_MODES}, got {feedback!r}")
        if feedback == "teacher_forced" and truth is None:
            raise ValueError("teacher_forced decoding requires the truth sequence")
        hidden = init_hidden.reshape(1, -1)
        step_in = torch.zeros(1, 1, dtype=init_hidden.dtype, device=init_hidden.device)
        emitted = []
        for k in range(length):
            hidden = self.cell(step_in, hidden)
            value = self.out(hidden)
            emitted.append(value.reshape(()))
            if feedback == "teacher_forced":
                step_in = truth[k].reshape(1, 1)
            else:
                step_in = value.detach().reshape(1, 1)
        return torch.stack(emitted)


@dataclass
class SSLOutcome:
    """Losses from one masked-reconstruction pass."""

    loss_ssl: torch.Tensor
    per_segment: dict[tuple[int, int], float] = field(default_factory=dict)
    masked_truth: np.ndarray | None = None
    degenerate: bool = False
    loss_g: float | None = None


def decode_masked(
    outputs: torch.Tensor,
    segset: SegmentSet,
    plan: MaskPlan,
    decoder: SegmentReconstructor,
    normalized_truth: torch.Tensor,
    feedback: str = "free_running",
) -> SSLOutcome:
    """Reconstruct each masked segment and average the squared errors.

    The mean runs over every masked scalar position, so longer segments
    weigh proportionally to their length.
    """
    if len(plan.masked_positions) == 0:
        zero = torch.zeros((), dtype=outputs.dtype, device=outputs.device)
        return SSLOutcome(loss_ssl=zero, degenerate=True, masked_truth=np.empty(0))
    squared = []
    per_segment = {}
    truths = []
    for pos in plan.masked_positions:
        seg = segset.segments[pos - 1]
        target = normalized_truth[seg.as_slice]
        pred = decoder.decode(outputs[pos - 1], seg.length, truth=target, feedback=feedback)
        err = (pred - target) ** 2
        squared.append(err)
        per_segment[(seg.start, seg.end)] = float(err.mean().detach())
        truths.append(target.detach().cpu().numpy())
    loss = torch.cat(squared).mean()
    return SSLOutcome(
        loss_ssl=loss, per_segment=per_segment, masked_truth=np.concatenate(truths)
    )


def score_loss(score_sum, loss_ssl, eps_log: float = 1e-8):
    """Squared gap between summed segment scores and -log(SSL loss).

    ``loss_ssl`` enters as a constant: no gradient flows from here back
    into the reconstruction path.
    """
    if isinstance(loss_ssl, torch.Tensor):
        target = torch.log(loss_ssl.detach() + eps_log)
    else:
        target = math.log(float(loss_ssl) + eps_log)
    return (score_sum + target) ** 2


@dataclass
class PretrainConfig:
    steps: int = 500
    batch_size: int = 8
    window: int = 96
    lr: float = 1e-3
    gamma_randmask: float = 0.2
    gamma_lastmask: float = 0.4
    tasks: tuple[str, ...] = MASK_TASKS
    score_update_every: int = 10
    eps_log: float = 1e-8
    decoder_feedback: str = "free_running"
    eval_every: int = 50
    patience: int = 50
    val_windows: int = 8

    def __post_init__(self):
        self.tasks = tuple(self.tasks)
        for task in self.tasks:
            if task not in MASK_TASKS:
                raise ValueError(f"unknown SSL task {task!r}")
        if self.decoder_feedback not in FEEDBACK_MODES:
            raise ValueError(f"unknown decoder_feedback {self.decoder_feedback!r}")

    def gamma_for(self, task: str) -> float:
        return self.gamma_randmask if task == "randmask" else self.gamma_lastmask


@dataclass
class StepRecord:
    """One training-log line."""

    step: int
    loss_ssl: float
    task_losses: dict[str, float]
    loss_g: float
    score_update: bool
    mean_segments: float
    val_loss: float | None = None

    def to_dict(self) -> dict:
        rec = {
            "step": self.step,
            "loss_ssl": self.loss_ssl,
            "loss_g": self.loss_g,
            "score_update": self.score_update,
            "mean_segments": self.mean_segments,
        }
        for task, value in self.task_losses.items():
            rec[f"loss_{task}"] = value
        if self.val_loss is not None:
            rec["val_loss"] = self.val_loss
        return rec


def _series_losses(model, series: TimeSeries, config: PretrainConfig, rng) -> tuple:
    """Forward both SSL tasks for one series.

    Returns (total SSL loss, per-task losses, differentiable score sum or
    None for fixed patching, segment count, per-task masked truths).
    """
    x = as_float_tensor(series.values)
    y, _ = model.revin.normalize(x)
    seg = model.segmenter_for(series.domain_id)
    result = seg.tokenize(y)
    num_tokens = len(result.tokens)
    task_losses = {}
    truths = {}
    for task in config.tasks:
        if task == "randmask":
            plan = plan_randmask(num_tokens, config.gamma_randmask, rng)
        else:
            plan = plan_lastmask(num_tokens, config.gamma_lastmask)
        masked = apply_mask(result.tokens, plan, model.mask_embedding)
        outputs = model.backbone(masked)
        outcome = decode_masked(
            outputs,
            result.tokens.segment_set,
            plan,
            model.decoders[task],
            y,
            feedback=config.decoder_feedback,
        )
        task_losses[task] = outcome.loss_ssl
        truths[task] = outcome.masked_truth
    total = sum(task_losses.values())
    score_sum = None
    if result.scores is not None:
        score_sum = seg.score_pairs(result.hidden, result.tokens.segment_set).sum()
    return total, task_losses, score_sum, num_tokens, truths


class Pretrainer:
    """Adam-driven SSL loop over a multi-domain corpus."""

    def __init__(self, model, corpus, config: PretrainConfig, seed: int = 0):
        from .data import sample_pretrain_batch  # local import to avoid a cycle

        self._sample = sample_pretrain_batch
        self.model = model
        self.corpus = corpus
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
        self.val_batch = self._sample(
            corpus,
            config.val_windows,
            np.random.default_rng(seed + 1),
            window=config.window,
            split="val",
        )

    def ssl_step(self, batch: list[TimeSeries]) -> StepRecord:
        """One optimizer step: SSL loss always, score loss on schedule."""
        self.model.train()
        series_losses = []
        task_totals = {task: 0.0 for task in self.config.tasks}
        score_terms = []
        token_counts = []
        for series in batch:
            total, task_losses, score_sum, num_tokens, _ = _series_losses(
                self.model, series, self.config, self.rng
            )
            series_losses.append(total)
            token_counts.append(num_tokens)
            for task, value in task_losses.items():
                task_totals[task] += float(value.detach()) / len(batch)
            if score_sum is not None:
                score_terms.append(score_loss(score_sum, total, self.config.eps_log))

        loss_ssl = torch.stack(series_losses).mean()
        self.model.step += 1
        update_scores = bool(
            score_terms and self.model.step % self.config.score_update_every == 0
        )
        loss_g = torch.stack(score_terms).mean() if score_terms else None
        loss = loss_ssl + loss_g if update_scores else loss_ssl

        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()

        return StepRecord(
            step=self.model.step,
            loss_ssl=float(loss_ssl.detach()),
            task_losses=task_totals,
            loss_g=float(loss_g.detach()) if loss_g is not None else 0.0,
            score_update=update_scores,
            mean_segments=float(np.mean(token_counts)),
        )

    def evaluate(self, batch: list[TimeSeries] | None = None, seed: int = 9999) -> float:
        loss, _ = self.evaluate_detailed(batch, seed=seed)
        return loss

    def evaluate_detailed(
        self, batch: list[TimeSeries] | None = None, seed: int = 9999
    ) -> tuple[float, list[dict]]:
        """Held-out SSL loss plus per-window detail records.

        Each record holds the window's total loss, the per-task losses,
        and the per-task masked truth values (so an external baseline
        can be computed over exactly the values the model was scored
        on).  Mask draws come from a fixed local generator so repeated
        evaluations are comparable.
        """
        batch = self.val_batch if batch is None else batch
        rng = np.random.default_rng(seed)
        self.model.eval()
        details = []
        with torch.no_grad():
            for series in batch:
                total, task_losses, _, _, truths = _series_losses(
                    self.model, series, self.config, rng
                )
                details.append(
                    {
                        "loss": float(total),
                        "task_losses": {k: float(v) for k, v in task_losses.items()},
                        "truths": truths,
                    }
                )
        mean_loss = float(np.mean([d["loss"] for d in details]))
        return mean_loss, details

    def train(self, steps: int | None = None, log_fn=None) -> list[StepRecord]:
        """Run the loop with early stopping on held-out SSL loss."""
        steps = self.config.steps if steps is None else steps
        records = []
        best = math.inf
        stale = 0
        for _ in range(steps):
            batch = self._sample(
                self.corpus, self.config.batch_size, self.rng, window=self.config.window
            )
            record = self.ssl_step(batch)
            if self.config.eval_every and record.step % self.config.eval_every == 0:
                record.val_loss = self.evaluate()
                if record.val_loss < best - 1e-9:
                    best = record.val_loss
                    stale = 0
                else:
                    stale += 1
            records.append(record)
            if log_fn is not None:
                log_fn(record.to_dict())
            if stale > self.config.patience:
                break
        return records

"""Task heads, zero-shot forecasting, and two-stage fine-tuning.

Zero-shot forecasting reuses the pre-training machinery: placeholder
mask-embedding tokens are appended for the future window and decoded by
the trailing-mask reconstructor, so a pre-trained model can forecast
without any head.  Fine-tuning first fits only the head on a frozen
base (linear probing), then unfreezes everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .core import TimeSeries, as_float_tensor
from .errors import ConfigError

TASKS = ("forecast", "classify")


class ForecastHead(torch.nn.Module):
    """Learned horizon queries cross-attend to the encoded context.

    One query token per forecast step passes through a small transformer
    decoder over the backbone outputs; a final linear layer emits one
    normalized value per step.
    """

    def __init__(self, horizon: int, model_dim: int, num_layers: int = 4, num_heads: int = 2):
        super().__init__()
        if horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon
        self.queries = torch.nn.Parameter(torch.randn(horizon, model_dim) * 0.02)
        layer = torch.nn.TransformerDecoderLayer(
            d_model=model_dim,
            nhead=num_heads,
            dim_feedforward=2 * model_dim,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.decoder = torch.nn.TransformerDecoder(layer, num_layers=num_layers)
        self.out = torch.nn.Linear(model_dim, 1)

    def forward(self, outputs: torch.Tensor) -> torch.Tensor:
        memory = outputs.unsqueeze(0)
        tgt = self.queries.unsqueeze(0)
        decoded = self.decoder(tgt, memory)
        return self.out(decoded).reshape(self.horizon)


class ClassifyHead(torch.nn.Module):
    """Mean-pool the token outputs, then one linear layer to logits."""

    def __init__(self, num_classes: int, model_dim: int):
        super().__init__()
        if num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
        self.num_classes = num_classes
        self.linear = torch.nn.Linear(model_dim, num_classes)

    def forward(self, outputs: torch.Tensor) -> torch.Tensor:
        pooled = outputs.mean(dim=0)
        return self.linear(pooled)


def zero_shot_forecast(model, values, domain_id: str, horizon: int) -> np.ndarray:
    """Forecast without a head by decoding appended mask placeholders.

    The number of placeholder tokens is ceil(horizon / mean segment
    length of the context); each placeholder is unrolled by the
    trailing-mask decoder and the concatenation is truncated to the
    horizon.  No parameter changes: runs entirely under no_grad.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if isinstance(values, TimeSeries):
        domain_id = values.domain_id
        values = values.values
    model.eval()
    with torch.no_grad():
        x = as_float_tensor(values)
        normalized, stats = model.revin.normalize(x)
        segmenter = model.segmenter_for(domain_id)
        result = segmenter.tokenize(normalized)
        mean_len = result.tokens.segment_set.mean_length
        num_extra = max(1, math.ceil(horizon / mean_len))
        # spread the horizon across the placeholders as evenly as possible
        base, rem = divmod(horizon, num_extra)
        lengths = [base + 1 if k < rem else base for k in range(num_extra)]
        lengths = [length for length in lengths if length > 0]
        placeholders = model.mask_embedding.expand(len(lengths), model.model_dim)
        extended = torch.cat([result.tokens.tokens, placeholders], dim=0)
        outputs = model.backbone(extended)
        decoder = model.decoders["lastmask"]
        pieces = []
        num_context = len(result.tokens)
        for k, length in enumerate(lengths):
            pieces.append(decoder.decode(outputs[num_context + k], length))
        pred_norm = torch.cat(pieces)[:horizon]
        pred = model.revin.denormalize(pred_norm, stats)
    return pred.detach().cpu().numpy().astype(np.float64)


@dataclass
class FineTuneConfig:
    task: str = "forecast"
    horizon: int = 24
    num_classes: int = 2
    stage1_epochs: int = 5
    stage2_epochs: int = 5
    lr: float = 1e-3
    batch_size: int = 8
    linear_probe: bool = True

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.linear_probe and self.stage1_epochs <= 0:
            raise ConfigError("linear probing requested but stage1_epochs is 0")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


@dataclass
class FineTuneResult:
    task: str
    stage1_losses: list[float] = field(default_factory=list)
    stage2_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    stage1_base_grad_norm: float = 0.0

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "stage1_losses": self.stage1_losses,
            "stage2_losses": self.stage2_losses,
            "val_losses": self.val_losses,
            "stage1_base_grad_norm": self.stage1_base_grad_norm,
        }


def _series_loss(model, series: TimeSeries, task: str) -> torch.Tensor:
    encoded = model.encode_series(series.values, series.domain_id)
    if task == "forecast":
        pred_norm = model.heads["forecast"](encoded.outputs)
        pred = model.revin.denormalize(pred_norm, encoded.stats)
        target = as_float_tensor(series.target)
        if target.numel() != pred.numel():
            raise ConfigError(
                f"target length {target.numel()} != head horizon {pred.numel()}"
            )
        return torch.mean((pred - target) ** 2)
    logits = model.heads["classify"](encoded.outputs)
    target = torch.as_tensor(int(series.target))
    return torch.nn.functional.cross_entropy(logits.unsqueeze(0), target.unsqueeze(0))


def _run_epoch(model, series_list, task, optimizer, batch_size, rng) -> tuple[float, float]:
    """One pass over the data; returns (mean loss, max base-param grad norm)."""
    order = rng.permutation(len(series_list))
    losses = []
    worst_base_grad = 0.0
    for lo in range(0, len(order), batch_size):
        chunk = [series_list[i] for i in order[lo : lo + batch_size]]
        batch_loss = torch.stack([_series_loss(model, s, task) for s in chunk]).mean()
        optimizer.zero_grad()
        batch_loss.backward()
        for param in model.base_parameters():
            if param.grad is not None:
                worst_base_grad = max(worst_base_grad, float(param.grad.norm()))
        optimizer.step()
        losses.append(float(batch_loss.detach()))
    return float(np.mean(losses)), worst_base_grad


def fine_tune(
    model,
    train_series: list[TimeSeries],
    config: FineTuneConfig,
    val_series: list[TimeSeries] | None = None,
    seed: int = 0,
    log_fn=None,
) -> FineTuneResult:
    """Two-stage adaptation: head-only first, then the full model.

    Stage 1 freezes every non-head parameter via requires_grad, so the
    base receives no gradient at all while the head settles; stage 2
    unfreezes everything and trains jointly at the same learning rate.
    """
    if not train_series:
        raise ConfigError("fine_tune requires at least one training series")
    for series in train_series:
        model.ensure_domain(series.domain_id)
    if config.task == "forecast" and "forecast" not in model.heads:
        model.add_forecast_head(config.horizon)
    if config.task == "classify" and "classify" not in model.heads:
        model.add_classify_head(config.num_classes)

    rng = np.random.default_rng(seed)
    result = FineTuneResult(task=config.task)

    def record(stage: int, epoch: int, loss: float):
        if val_series:
            with torch.no_grad():
                val = float(
                    torch.stack(
                        [_series_loss(model, s, config.task) for s in val_series]
                    ).mean()
                )
            result.val_losses.append(val)
        else:
            val = None
        if log_fn is not None:
            log_fn({"stage": stage, "epoch": epoch, "loss": loss, "val_loss": val})

    stage1_epochs = config.stage1_epochs if config.linear_probe else 0
    if stage1_epochs > 0:
        for param in model.base_parameters():
            param.requires_grad_(False)
            param.grad = None  # drop stale grads so frozen really means zero
        head_params = [p for p in model.head_parameters() if p.requires_grad]
        optimizer = torch.optim.Adam(head_params, lr=config.lr)
        for epoch in range(stage1_epochs):
            loss, base_grad = _run_epoch(
                model, train_series, config.task, optimizer, config.batch_size, rng
            )
            result.stage1_losses.append(loss)
            result.stage1_base_grad_norm = max(result.stage1_base_grad_norm, base_grad)
            record(1, epoch + 1, loss)
        for param in model.base_parameters():
            param.requires_grad_(True)

    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    for epoch in range(config.stage2_epochs):
        loss, _ = _run_epoch(
            model, train_series, config.task, optimizer, config.batch_size, rng
        )
        result.stage2_losses.append(loss)
        record(2, epoch + 1, loss)
    return result

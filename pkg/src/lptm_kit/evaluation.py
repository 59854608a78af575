"""Evaluation protocols: metrics, zero-shot rollouts, sweeps, ablations.

Zero-shot forecasting walks origins through the last fifth of each
series only; everything before an origin is context, nothing after it
is ever revealed.  The protocol also fingerprints model parameters
before and after so accidental adaptation shows up in the report.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .checkpoint import parameter_checksums
from .core import TimeSeries, as_float_tensor
from .data import Corpus, SplitSeries, forecast_windows, synth_corpus, truncate_fraction
from .errors import ConfigError, LengthError
from .heads import FineTuneConfig, fine_tune, zero_shot_forecast
from .model import LPTMModel, ModelConfig
from .ssl_tasks import PretrainConfig, Pretrainer

ABLATIONS = ("no_segment", "no_pretrain", "no_linprob", "only_randmask", "only_lastmask")


def rmse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("rmse of empty arrays is undefined")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def accuracy(predicted_labels, actual_labels) -> float:
    predicted = np.asarray(predicted_labels)
    actual = np.asarray(actual_labels)
    if predicted.shape != actual.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("accuracy of empty arrays is undefined")
    return float(np.mean(predicted == actual))


@dataclass(frozen=True)
class EvalReport:
    """Per-run metric values with their mean and population spread."""

    metric: str
    values: tuple[float, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("a report needs at least one value")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "values": list(self.values),
            "mean": self.mean,
            "std": self.std,
            "metadata": self.metadata,
        }


def zero_shot_protocol(
    model,
    items: list[SplitSeries],
    horizon: int,
    stride: int | None = None,
    forecast_fn=None,
) -> EvalReport:
    """Rolling-origin forecast error over the last 20% of each series.

    Origins start at floor(0.8 * t) and advance by ``stride`` (default:
    the horizon, so target windows tile without overlap).  The context
    passed to ``forecast_fn`` is everything before the origin.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    stride = horizon if stride is None else stride
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    forecast_fn = zero_shot_forecast if forecast_fn is None else forecast_fn

    before = parameter_checksums(model)
    values = []
    origins = []
    for item in items:
        series = item.series
        t = series.length
        boundary = int(math.floor(0.8 * t))
        for origin in range(max(boundary, 2), t - horizon + 1, stride):
            context = series.values[:origin]
            target = series.values[origin : origin + horizon]
            pred = forecast_fn(model, context, series.domain_id, horizon)
            values.append(rmse(pred, target))
            origins.append({"domain": series.domain_id, "origin": origin, "length": t})
    if not values:
        raise LengthError(
            f"no series is long enough for a horizon-{horizon} forecast in its last 20%"
        )
    after = parameter_checksums(model)
    return EvalReport(
        metric="rmse",
        values=tuple(values),
        metadata={
            "protocol": "zero_shot_last20",
            "horizon": horizon,
            "stride": stride,
            "origins": origins,
            "params_unchanged": before == after,
        },
    )


def data_efficiency_sweep(
    run_fn,
    fractions: tuple[float, ...] = (5, 10, 20, 50, 100),
    seeds: tuple[int, ...] = (0, 1, 2),
    metric: str = "rmse",
) -> list[EvalReport]:
    """Metric versus share of training history kept.

    ``run_fn(percent, seed)`` must train on the first ``percent`` of the
    available history and return one metric value; this function only
    organizes the grid.
    """
    reports = []
    for percent in fractions:
        values = [float(run_fn(percent, seed)) for seed in seeds]
        reports.append(
            EvalReport(metric=metric, values=tuple(values), metadata={"percent": percent})
        )
    return reports


# -- ablations ---------------------------------------------------------------


def apply_ablation(
    name: str,
    model_config: ModelConfig,
    pretrain_config: PretrainConfig,
    finetune_config: FineTuneConfig,
    patch_len: int = 8,
):
    """Return configs rewritten for one named ablation."""
    if name == "no_segment":
        segmenter = dataclasses.replace(model_config.segmenter, fixed_patch_len=patch_len)
        model_config = dataclasses.replace(model_config, segmenter=segmenter)
    elif name == "no_pretrain":
        pretrain_config = dataclasses.replace(pretrain_config, steps=0)
    elif name == "no_linprob":
        finetune_config = dataclasses.replace(finetune_config, linear_probe=False)
    elif name == "only_randmask":
        pretrain_config = dataclasses.replace(pretrain_config, tasks=("randmask",))
    elif name == "only_lastmask":
        pretrain_config = dataclasses.replace(pretrain_config, tasks=("lastmask",))
    else:
        raise ConfigError(f"unknown ablation {name!r}; expected one of {ABLATIONS}")
    return model_config, pretrain_config, finetune_config


@dataclass
class AblationResult:
    name: str
    test_rmse: float
    pretrain_steps: int
    mean_tokens: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "test_rmse": self.test_rmse,
            "pretrain_steps": self.pretrain_steps,
            "mean_tokens": self.mean_tokens,
            **self.details,
        }


def run_ablation(
    name: str | None,
    seed: int = 0,
    corpus: Corpus | None = None,
    pretrain_steps: int = 40,
    context: int = 48,
    horizon: int = 16,
) -> AblationResult:
    """Small end-to-end pipeline with one ablation applied.

    Pre-train on the synthetic corpus, fine-tune a forecast head on one
    domain, report test RMSE.  ``name=None`` runs the unablated
    pipeline with the same budget.
    """
    model_cfg = ModelConfig()
    pre_cfg = PretrainConfig(
        steps=pretrain_steps, batch_size=4, window=64, eval_every=0, val_windows=2
    )
    ft_cfg = FineTuneConfig(
        task="forecast", horizon=horizon, stage1_epochs=1, stage2_epochs=1
    )
    if name is not None:
        model_cfg, pre_cfg, ft_cfg = apply_ablation(name, model_cfg, pre_cfg, ft_cfg)

    torch.manual_seed(seed)
    if corpus is None:
        # test split must hold at least one context+horizon window
        corpus = synth_corpus(seed, series_per_domain=2, length=512)
    model = LPTMModel(model_cfg, domains=corpus.domains)

    records = []
    if pre_cfg.steps > 0:
        records = Pretrainer(model, corpus, pre_cfg, seed=seed).train()

    target_domain = corpus.domains[0]
    item = corpus.by_domain(target_domain)[0]
    train_windows = forecast_windows(
        item.piece("train"), context, horizon, target_domain, stride=8, limit=16
    )
    fit = fine_tune(model, train_windows, ft_cfg, seed=seed)

    test_windows = forecast_windows(
        item.piece("test"), context, horizon, target_domain, stride=horizon, limit=8
    )
    errs = [rmse(model.forecast(w.values, target_domain), w.target) for w in test_windows]

    sample = test_windows[0].values
    tokens = model.segmenter_for(target_domain).tokenize(as_float_tensor(sample))
    return AblationResult(
        name=name if name is not None else "full",
        test_rmse=float(np.mean(errs)),
        pretrain_steps=len(records),
        mean_tokens=float(len(tokens.tokens)),
        details={
            "final_pretrain_loss": records[-1].loss_ssl if records else None,
            "stage1_losses": fit.stage1_losses,
            "stage2_losses": fit.stage2_losses,
            "context": context,
            "horizon": horizon,
        },
    )


def truncated_training_run(
    percent: float,
    seed: int,
    corpus: Corpus | None = None,
    context: int = 48,
    horizon: int = 16,
    pretrain_steps: int = 30,
) -> float:
    """Data-efficiency hook: fine-tune on the first ``percent`` of history.

    The default corpus is long enough that even a 5% truncation still
    yields at least one (context, horizon) window.
    """
    torch.manual_seed(seed)
    if corpus is None:
        corpus = synth_corpus(seed, series_per_domain=1, length=4096)
    model = LPTMModel(ModelConfig(), domains=corpus.domains)
    pre_cfg = PretrainConfig(
        steps=pretrain_steps, batch_size=4, window=64, eval_every=0, val_windows=2
    )
    if pre_cfg.steps > 0:
        Pretrainer(model, corpus, pre_cfg, seed=seed).train()

    domain = corpus.domains[0]
    item = corpus.by_domain(domain)[0]
    train_piece = item.piece("train")
    truncated = truncate_fraction(
        TimeSeries(values=train_piece, domain_id=domain), percent
    )
    windows = forecast_windows(
        truncated.values, context, horizon, domain, stride=4, limit=16
    )
    fine_tune(
        model,
        windows,
        FineTuneConfig(task="forecast", horizon=horizon, stage1_epochs=1, stage2_epochs=1),
        seed=seed,
    )
    test_windows = forecast_windows(
        item.piece("test"), context, horizon, domain, stride=horizon, limit=8
    )
    errs = [rmse(model.forecast(w.values, domain), w.target) for w in test_windows]
    return float(np.mean(errs))

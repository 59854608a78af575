"""Command line entry point.

Subcommands: ``pretrain``, ``finetune``, ``evaluate``, ``segment``.
Every run writes a directory of artifacts (JSONL log, delimited tables,
PNG figures, checkpoints) and streams the same JSONL records to stdout.

Exit codes: 0 success, 1 configuration problem, 2 data problem,
3 checkpoint problem.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, make_corpus
from .core import TimeSeries, as_float_tensor
from .data import forecast_windows, ingest_csv, synth_classification
from .errors import (
    ChecksumError,
    ConfigError,
    CorpusError,
    DomainError,
    LengthError,
    ParseError,
)
from .evaluation import (
    data_efficiency_sweep,
    rmse,
    run_ablation,
    truncated_training_run,
    zero_shot_protocol,
)
from .heads import fine_tune, zero_shot_forecast
from .model import LPTMModel
from .reports import (
    JsonlWriter,
    plot_data_efficiency,
    plot_forecast,
    plot_loss_curve,
    plot_segments,
    write_table,
)
from .segmenter import format_segment_block
from .ssl_tasks import Pretrainer

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_CHECKPOINT = 3

PROTOCOLS = ("zero_shot", "finetune", "data_efficiency", "ablations")


def _apply_thread_env():
    raw = os.environ.get("LPTM_KIT_THREADS")
    if raw is None or raw == "":
        return
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"LPTM_KIT_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"LPTM_KIT_THREADS must be >= 1, got {threads}")
    torch.set_num_threads(threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lptm-kit",
        description="Pre-train, adapt, and evaluate segment-tokenized time-series models.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="run directory for artifacts")
    common.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, repeatable (e.g. pretrain.steps=200)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", parents=[common], help="self-supervised pre-training")
    p.add_argument("--checkpoint", help="resume from this checkpoint")

    p = sub.add_parser("finetune", parents=[common], help="two-stage task adaptation")
    p.add_argument("--checkpoint", help="start from this pre-trained checkpoint")
    p.add_argument("--domain", help="corpus domain to adapt on (default: first)")

    p = sub.add_parser("evaluate", parents=[common], help="run an evaluation protocol")
    p.add_argument("--checkpoint", help="model to evaluate")
    p.add_argument("--protocol", choices=PROTOCOLS, help="override evaluation.protocol")

    p = sub.add_parser("segment", parents=[common], help="tokenize a series, dump segments")
    p.add_argument("--checkpoint", help="use this model's segmenters")
    p.add_argument("--csv", help="segment the first series of this CSV file")
    p.add_argument("--domain", help="domain whose segmenter to use")
    return parser


def _run_dir(args) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path("lptm-runs") / f"{args.command}-{stamp}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_cfg(args) -> RunConfig:
    try:
        return load_config(args.config, args.override)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def _load_model(path: str) -> LPTMModel:
    try:
        return load_checkpoint(path)
    except FileNotFoundError as exc:
        raise ChecksumError(str(exc)) from None


def _build_corpus(cfg: RunConfig, seed: int):
    try:
        return make_corpus(cfg.data, seed)
    except FileNotFoundError as exc:
        raise CorpusError(str(exc)) from None


def _cmd_pretrain(args, cfg: RunConfig, seed: int, out: Path, log: JsonlWriter) -> int:
    corpus = _build_corpus(cfg, seed)
    if args.checkpoint:
        model = _load_model(args.checkpoint)
        for domain in corpus.domains:
            model.ensure_domain(domain)
    else:
        model = LPTMModel(cfg.model, domains=corpus.domains)
    trainer = Pretrainer(model, corpus, cfg.pretrain, seed=seed)
    records = trainer.train(log_fn=lambda rec: log.write({"event": "pretrain_step", **rec}))

    ckpt = out / "model.lptm"
    save_checkpoint(model, ckpt)
    steps = [r.step for r in records]
    losses = [r.loss_ssl for r in records]
    write_table(out / "losses.tsv", zip(steps, losses), header=("step", "loss_ssl"))
    if records:
        plot_loss_curve(steps, losses, out / "loss_curve.png", ylabel="ssl loss")
    log.write(
        {
            "event": "done",
            "steps": len(records),
            "final_loss": losses[-1] if losses else None,
            "checkpoint": str(ckpt),
        }
    )
    return EXIT_OK


def _cmd_finetune(args, cfg: RunConfig, seed: int, out: Path, log: JsonlWriter) -> int:
    corpus = _build_corpus(cfg, seed)
    if args.checkpoint:
        model = _load_model(args.checkpoint)
    else:
        model = LPTMModel(cfg.model, domains=corpus.domains)
        log.write({"event": "note", "message": "no checkpoint given; starting from scratch"})

    task = cfg.finetune.task
    if task == "classify":
        labeled = synth_classification(seed)
        for series in labeled:
            model.ensure_domain(series.domain_id)
        split = int(0.8 * len(labeled))
        train_set, val_set = labeled[:split], labeled[split:]
    else:
        domain = args.domain or corpus.domains[0]
        item = corpus.by_domain(domain)[0]
        train_set = forecast_windows(
            item.piece("train"), cfg.evaluation.context, cfg.finetune.horizon, domain, stride=4
        )
        val_set = forecast_windows(
            item.piece("val"), cfg.evaluation.context, cfg.finetune.horizon, domain,
            stride=cfg.finetune.horizon, limit=8,
        )
    result = fine_tune(
        model,
        train_set,
        cfg.finetune,
        val_series=val_set,
        seed=seed,
        log_fn=lambda rec: log.write({"event": "finetune_epoch", **rec}),
    )
    ckpt = out / "model_finetuned.lptm"
    save_checkpoint(model, ckpt)
    curve = result.stage1_losses + result.stage2_losses
    write_table(
        out / "finetune_losses.tsv",
        zip(range(1, len(curve) + 1), curve),
        header=("epoch", "train_loss"),
    )
    if curve:
        plot_loss_curve(range(1, len(curve) + 1), curve, out / "finetune_curve.png")
    log.write({"event": "done", "result": result.to_dict(), "checkpoint": str(ckpt)})
    return EXIT_OK


def _cmd_evaluate(args, cfg: RunConfig, seed: int, out: Path, log: JsonlWriter) -> int:
    protocol = args.protocol or cfg.evaluation.protocol
    corpus = _build_corpus(cfg, seed)

    if protocol == "zero_shot":
        if args.checkpoint:
            model = _load_model(args.checkpoint)
        else:
            model = LPTMModel(cfg.model, domains=corpus.domains)
            log.write({"event": "note", "message": "evaluating an untrained model"})
        report = zero_shot_protocol(
            model, list(corpus), cfg.evaluation.horizon, stride=cfg.evaluation.stride
        )
        write_table(
            out / "report.tsv",
            [(o["domain"], o["origin"], v) for o, v in zip(report.metadata["origins"], report.values)],
            header=("domain", "origin", "rmse"),
        )
        item = corpus.items[0]
        origin = report.metadata["origins"][0]["origin"]
        context = item.series.values[:origin]
        target = item.series.values[origin : origin + cfg.evaluation.horizon]
        pred = zero_shot_forecast(model, context, item.domain_id, cfg.evaluation.horizon)
        plot_forecast(context[-3 * cfg.evaluation.horizon :], target, pred, out / "forecast.png")
        log.write({"event": "report", **report.to_dict()})
    elif protocol == "finetune":
        result = run_ablation(None, seed=seed, corpus=corpus, horizon=cfg.evaluation.horizon)
        write_table(
            out / "report.tsv",
            [(result.name, result.test_rmse)],
            header=("pipeline", "test_rmse"),
        )
        log.write({"event": "report", **result.to_dict()})
    elif protocol == "data_efficiency":
        # the sweep needs history long enough for 5% to hold one window
        sweep_corpus = corpus if cfg.data.source == "csv" or cfg.data.length >= 2048 else None
        if sweep_corpus is None:
            log.write({"event": "note", "message": "using the long default sweep corpus"})
        reports = data_efficiency_sweep(
            lambda pct, sd: truncated_training_run(
                pct, sd, corpus=sweep_corpus, horizon=cfg.evaluation.horizon
            ),
            fractions=cfg.evaluation.fractions,
            seeds=cfg.evaluation.seeds,
        )
        write_table(
            out / "report.tsv",
            [(r.metadata["percent"], r.mean, r.std) for r in reports],
            header=("percent", "mean_rmse", "std_rmse"),
        )
        plot_data_efficiency(reports, out / "data_efficiency.png")
        for report in reports:
            log.write({"event": "report", **report.to_dict()})
    else:  # ablations
        rows = []
        for name in cfg.evaluation.ablations:
            result = run_ablation(name, seed=seed, corpus=corpus, horizon=cfg.evaluation.horizon)
            rows.append((result.name, result.test_rmse, result.mean_tokens))
            log.write({"event": "ablation", **result.to_dict()})
        write_table(out / "report.tsv", rows, header=("ablation", "test_rmse", "mean_tokens"))
    return EXIT_OK


def _cmd_segment(args, cfg: RunConfig, seed: int, out: Path, log: JsonlWriter) -> int:
    if args.csv:
        corpus = ingest_csv(args.csv, domain_id=args.domain or "csv", normalize="none")
        item = corpus.items[0]
        values = item.series.values
        domain = item.domain_id
        series_id = f"{Path(args.csv).name}:1"
    else:
        corpus = _build_corpus(cfg, seed)
        domain = args.domain or corpus.domains[0]
        values = corpus.by_domain(domain)[0].piece("train")
        series_id = f"{domain}:1"

    if args.checkpoint:
        model = _load_model(args.checkpoint)
    else:
        model = LPTMModel(cfg.model)
        log.write({"event": "note", "message": "no checkpoint given; using a fresh segmenter"})
    if domain not in model.domains:
        model.ensure_domain(domain)
        log.write({"event": "note", "message": f"new domain {domain!r}: untrained segmenter"})

    x = as_float_tensor(values)
    normalized, _ = model.revin.normalize(x)
    result = model.segmenter_for(domain).tokenize(normalized)
    segset = result.tokens.segment_set

    block = format_segment_block(series_id, values, segset)
    (out / "segments.txt").write_text(block)
    plot_segments(values, segset, out / "segments.png", title=series_id)
    log.write(
        {
            "event": "done",
            "series": series_id,
            "num_segments": len(segset),
            "mean_length": segset.mean_length,
        }
    )
    return EXIT_OK


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "evaluate": _cmd_evaluate,
    "segment": _cmd_segment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_env()
        cfg = _load_cfg(args)
        seed = args.seed if args.seed is not None else cfg.seed
        out = _run_dir(args)
        torch.manual_seed(seed)
        with JsonlWriter(out / "log.jsonl", echo=True) as log:
            log.write(
                {
                    "event": "start",
                    "command": args.command,
                    "seed": seed,
                    "out": str(out),
                    "config": cfg.to_dict(),
                }
            )
            return _COMMANDS[args.command](args, cfg, seed, out, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, CorpusError, LengthError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ChecksumError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

import numpy as np
import pytest
import torch

from lptm_kit import (
    ABLATIONS,
    BackboneConfig,
    ConfigError,
    EvalReport,
    FineTuneConfig,
    LPTMModel,
    LengthError,
    ModelConfig,
    PretrainConfig,
    SegmenterConfig,
    accuracy,
    apply_ablation,
    data_efficiency_sweep,
    rmse,
    run_ablation,
    synth_corpus,
    zero_shot_protocol,
)


def tiny_model(domains):
    cfg = ModelConfig(
        segmenter=SegmenterConfig(hidden_size=8, score_dim=6, model_dim=16, pos_dim=4, max_span=8),
        backbone=BackboneConfig(num_layers=1, num_heads=2, model_dim=16, feedforward_dim=32),
    )
    return LPTMModel(cfg, domains=domains)


def test_rmse_and_accuracy():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    assert accuracy([1, 0, 1], [1, 1, 1]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_eval_report_population_std():
    report = EvalReport(metric="rmse", values=(1.0, 2.0, 3.0))
    assert report.mean == 2.0
    assert report.std == pytest.approx(np.sqrt(2 / 3))  # ddof=0
    d = report.to_dict()
    assert d["values"] == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        EvalReport(metric="rmse", values=())


def test_zero_shot_protocol_origins_and_param_fingerprint():
    corpus = synth_corpus(0, series_per_domain=1, length=100)
    model = tiny_model(corpus.domains)
    report = zero_shot_protocol(model, corpus.items, horizon=5)
    assert report.metadata["protocol"] == "zero_shot_last20"
    assert report.metadata["params_unchanged"] is True
    for rec in report.metadata["origins"]:
        assert rec["origin"] >= int(0.8 * rec["length"])
        assert rec["origin"] + 5 <= rec["length"]
    # default stride equals the horizon: origins 80, 85, 90, 95 per series
    per_series = [r for r in report.metadata["origins"] if r["domain"] == "sinusoid"]
    assert [r["origin"] for r in per_series] == [80, 85, 90, 95]
    assert len(report.values) == len(report.metadata["origins"])


def test_zero_shot_protocol_respects_custom_forecaster():
    corpus = synth_corpus(0, domains=("sinusoid",), series_per_domain=1, length=100)
    model = tiny_model(corpus.domains)
    seen = []

    def fake(model_, context, domain_id, horizon):
        seen.append(len(context))
        return np.zeros(horizon)

    report = zero_shot_protocol(model, corpus.items, horizon=10, stride=10, forecast_fn=fake)
    assert seen == [80, 90]
    assert report.metadata["stride"] == 10


def test_zero_shot_protocol_too_short():
    corpus = synth_corpus(0, domains=("sinusoid",), series_per_domain=1, length=100)
    model = tiny_model(corpus.domains)
    with pytest.raises(LengthError):
        zero_shot_protocol(model, corpus.items, horizon=50)
    with pytest.raises(ValueError):
        zero_shot_protocol(model, corpus.items, horizon=0)


def test_data_efficiency_sweep_grid():
    calls = []

    def run_fn(percent, seed):
        calls.append((percent, seed))
        return percent / 100 + seed

    reports = data_efficiency_sweep(run_fn, fractions=(10, 50), seeds=(0, 1))
    assert [r.metadata["percent"] for r in reports] == [10, 50]
    assert reports[0].values == (0.1, 1.1)
    assert calls == [(10, 0), (10, 1), (50, 0), (50, 1)]


def test_apply_ablation_rewrites_configs():
    model_cfg = ModelConfig()
    pre_cfg = PretrainConfig()
    ft_cfg = FineTuneConfig()

    m, p, f = apply_ablation("no_segment", model_cfg, pre_cfg, ft_cfg, patch_len=8)
    assert m.segmenter.fixed_patch_len == 8
    assert model_cfg.segmenter.fixed_patch_len is None  # originals untouched

    m, p, f = apply_ablation("no_pretrain", model_cfg, pre_cfg, ft_cfg)
    assert p.steps == 0

    m, p, f = apply_ablation("no_linprob", model_cfg, pre_cfg, ft_cfg)
    assert f.linear_probe is False

    m, p, f = apply_ablation("only_randmask", model_cfg, pre_cfg, ft_cfg)
    assert p.tasks == ("randmask",)

    m, p, f = apply_ablation("only_lastmask", model_cfg, pre_cfg, ft_cfg)
    assert p.tasks == ("lastmask",)

    with pytest.raises(ConfigError):
        apply_ablation("no_coffee", model_cfg, pre_cfg, ft_cfg)


def test_ablation_names_cover_registry():
    assert set(ABLATIONS) == {
        "no_segment",
        "no_pretrain",
        "no_linprob",
        "only_randmask",
        "only_lastmask",
    }


def test_run_ablation_no_pretrain_smoke():
    torch.manual_seed(0)
    result = run_ablation("no_pretrain", seed=0, pretrain_steps=2)
    assert result.name == "no_pretrain"
    assert result.pretrain_steps == 0
    assert result.test_rmse >= 0.0
    assert result.details["final_pretrain_loss"] is None


def test_run_ablation_no_segment_fixes_token_count():
    torch.manual_seed(0)
    result = run_ablation("no_segment", seed=0, pretrain_steps=1, context=48, horizon=16)
    assert result.mean_tokens == 6.0  # ceil(48 / 8) fixed patches
    assert result.pretrain_steps == 1

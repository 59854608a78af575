import pytest

from lptm_kit import (
    ConfigError,
    DataConfig,
    EvalConfig,
    RunConfig,
    load_config,
    make_corpus,
)
from lptm_kit.config import apply_overrides, build_config


def test_defaults_round_trip():
    cfg = load_config()
    assert cfg.seed == 0
    assert cfg.model.segmenter.model_dim == cfg.model.backbone.model_dim
    assert cfg.pretrain.steps == 500
    assert cfg.data.source == "synthetic"
    assert cfg.evaluation.protocol == "zero_shot"
    d = cfg.to_dict()
    assert d["pretrain"]["score_update_every"] == 10


def test_yaml_file_and_nesting(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "seed: 7\n"
        "pretrain:\n"
        "  steps: 25\n"
        "  gamma_randmask: 0.3\n"
        "model:\n"
        "  segmenter:\n"
        "    max_span: 12\n"
        "    model_dim: 32\n"
        "  backbone:\n"
        "    model_dim: 32\n"
        "data:\n"
        "  length: 256\n"
    )
    cfg = load_config(path)
    assert cfg.seed == 7
    assert cfg.pretrain.steps == 25
    assert cfg.model.segmenter.max_span == 12
    assert cfg.model.backbone.model_dim == 32
    assert cfg.data.length == 256


def test_unknown_keys_rejected_with_path(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("pretrain:\n  stepz: 25\n")
    with pytest.raises(ConfigError, match="pretrain.'stepz'"):
        load_config(path)
    path.write_text("model:\n  segmenter:\n    maxspan: 3\n")
    with pytest.raises(ConfigError, match="model.segmenter.'maxspan'"):
        load_config(path)
    path.write_text("verbose: true\n")
    with pytest.raises(ConfigError, match="'verbose'"):
        load_config(path)


def test_non_mapping_rejected(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("- just\n- a\n- list\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(path)
    with pytest.raises(ConfigError, match="mapping"):
        build_config(RunConfig, {"pretrain": [1, 2]})


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError):
        build_config(RunConfig, {"model": {"segmenter": {"max_span": -1}}})
    with pytest.raises(ConfigError):
        build_config(RunConfig, {"data": {"source": "parquet"}})
    with pytest.raises(ConfigError):
        build_config(RunConfig, {"evaluation": {"protocol": "vibe_check"}})
    with pytest.raises(ConfigError):
        build_config(RunConfig, {"evaluation": {"ablations": ["no_coffee"]}})
    with pytest.raises(ConfigError):
        DataConfig(source="csv")  # csv_path required
    with pytest.raises(ConfigError):
        DataConfig(train_frac=0.9, val_frac=0.3, test_frac=0.2).split_spec()


def test_overrides_apply_before_validation(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("pretrain:\n  steps: 25\n")
    cfg = load_config(path, overrides=["pretrain.steps=50", "seed=3", "data.length=128"])
    assert cfg.pretrain.steps == 50
    assert cfg.seed == 3
    assert cfg.data.length == 128
    # yaml typing: strings, floats, bools all parse naturally
    cfg = load_config(None, overrides=["finetune.task=classify", "pretrain.lr=0.01"])
    assert cfg.finetune.task == "classify"
    assert cfg.pretrain.lr == 0.01


def test_override_syntax_errors():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no_equals_sign"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["=5"])
    with pytest.raises(ConfigError):
        apply_overrides({"a": 1}, ["a.b=2"])
    with pytest.raises(ConfigError, match="stepz"):
        load_config(None, overrides=["pretrain.stepz=1"])


def test_eval_config_tuples():
    cfg = EvalConfig(fractions=[10, 50], seeds=[0], ablations=["no_segment"])
    assert cfg.fractions == (10, 50)
    assert cfg.seeds == (0,)
    assert cfg.ablations == ("no_segment",)


def test_make_corpus_synthetic_and_csv(tmp_path):
    corpus = make_corpus(DataConfig(series_per_domain=1, length=96), seed=0)
    assert len(corpus) == 3
    assert all(item.series.length == 96 for item in corpus)

    csv = tmp_path / "vals.csv"
    csv.write_text("\n".join(str(i) for i in range(1, 21)) + "\n")
    cfg = DataConfig(source="csv", csv_path=str(csv), csv_domain="meter")
    corpus = make_corpus(cfg, seed=0)
    assert corpus.domains == ("meter",)
    assert len(corpus) == 1

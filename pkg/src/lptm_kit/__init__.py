"""Segment-tokenized time-series pre-training toolkit.

Series are normalized per instance, cut into adaptive variable-length
segments, embedded as tokens, and fed to a transformer encoder that is
pre-trained by masked reconstruction across domains.  The package also
ships zero-shot forecasting, two-stage fine-tuning, evaluation
protocols, a binary checkpoint format, and the ``lptm-kit`` CLI.
"""

from .backbone import Backbone, BackboneConfig, EncoderLayer
from .checkpoint import load_checkpoint, parameter_checksums, read_header, save_checkpoint
from .core import Segment, SegmentSet, TimeSeries, TokenSequence, validate_series
from .data import (
    Corpus,
    SplitSeries,
    SplitSpec,
    forecast_windows,
    ingest_csv,
    make_epidemic,
    make_random_walk,
    make_sinusoid,
    sample_pretrain_batch,
    split_series,
    synth_classification,
    synth_corpus,
    truncate_fraction,
)
from .errors import (
    ChecksumError,
    ConfigError,
    CorpusError,
    DomainError,
    LengthError,
    ParseError,
)
from .evaluation import (
    ABLATIONS,
    AblationResult,
    EvalReport,
    accuracy,
    apply_ablation,
    data_efficiency_sweep,
    rmse,
    run_ablation,
    zero_shot_protocol,
)
from .heads import ClassifyHead, FineTuneConfig, FineTuneResult, ForecastHead, fine_tune, zero_shot_forecast
from .model import EncodeResult, LPTMModel, ModelConfig
from .revin import RevIN, denormalize, normalize
from .segmenter import (
    Segmenter,
    SegmenterConfig,
    SegmentScores,
    choose_segments,
    format_segment_block,
    positional_encoding,
    uniform_patches,
)
from .ssl_tasks import (
    MaskPlan,
    PretrainConfig,
    Pretrainer,
    SegmentReconstructor,
    SSLOutcome,
    apply_mask,
    decode_masked,
    plan_lastmask,
    plan_randmask,
    score_loss,
)
from .config import DataConfig, EvalConfig, RunConfig, load_config, make_corpus
from .reports import (
    JsonlWriter,
    plot_data_efficiency,
    plot_forecast,
    plot_loss_curve,
    plot_segments,
    write_table,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS",
    "AblationResult",
    "Backbone",
    "BackboneConfig",
    "ChecksumError",
    "ClassifyHead",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "DataConfig",
    "DomainError",
    "EncodeResult",
    "EncoderLayer",
    "EvalConfig",
    "EvalReport",
    "FineTuneConfig",
    "FineTuneResult",
    "ForecastHead",
    "JsonlWriter",
    "LPTMModel",
    "LengthError",
    "MaskPlan",
    "ModelConfig",
    "ParseError",
    "PretrainConfig",
    "Pretrainer",
    "RevIN",
    "RunConfig",
    "SSLOutcome",
    "Segment",
    "SegmentReconstructor",
    "SegmentScores",
    "SegmentSet",
    "Segmenter",
    "SegmenterConfig",
    "SplitSeries",
    "SplitSpec",
    "TimeSeries",
    "TokenSequence",
    "accuracy",
    "apply_ablation",
    "apply_mask",
    "choose_segments",
    "data_efficiency_sweep",
    "decode_masked",
    "denormalize",
    "fine_tune",
    "forecast_windows",
    "format_segment_block",
    "ingest_csv",
    "load_checkpoint",
    "load_config",
    "make_corpus",
    "make_epidemic",
    "make_random_walk",
    "make_sinusoid",
    "normalize",
    "parameter_checksums",
    "plan_lastmask",
    "plan_randmask",
    "plot_data_efficiency",
    "plot_forecast",
    "plot_loss_curve",
    "plot_segments",
    "positional_encoding",
    "read_header",
    "rmse",
    "run_ablation",
    "sample_pretrain_batch",
    "save_checkpoint",
    "score_loss",
    "split_series",
    "synth_classification",
    "synth_corpus",
    "truncate_fraction",
    "uniform_patches",
    "validate_series",
    "write_table",
    "zero_shot_forecast",
    "zero_shot_protocol",
]

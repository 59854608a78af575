"""Model aggregate: normalization, per-domain tokenizers, shared backbone.

One mask embedding and one decoder per masking task are shared across
domains; each domain gets its own segmenter so segment boundaries can
adapt to domain-specific shapes.  Task heads hang off a ModuleDict and
are added on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .backbone import Backbone, BackboneConfig
from .core import TimeSeries, TokenSequence, as_float_tensor
from .errors import ConfigError, DomainError
from .revin import RevIN
from .segmenter import Segmenter, SegmenterConfig
from .ssl_tasks import MASK_TASKS, SegmentReconstructor


@dataclass
class ModelConfig:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    revin_affine: bool = True
    revin_eps: float = 1e-5

    def __post_init__(self):
        if self.segmenter.model_dim != self.backbone.model_dim:
            raise ConfigError(
                "segmenter model_dim "
                f"{self.segmenter.model_dim} != backbone model_dim {self.backbone.model_dim}"
            )

    def to_dict(self) -> dict:
        return {
            "segmenter": vars(self.segmenter).copy(),
            "backbone": vars(self.backbone).copy(),
            "revin_affine": self.revin_affine,
            "revin_eps": self.revin_eps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(
            segmenter=SegmenterConfig(**data["segmenter"]),
            backbone=BackboneConfig(**data["backbone"]),
            revin_affine=data.get("revin_affine", True),
            revin_eps=data.get("revin_eps", 1e-5),
        )


@dataclass
class EncodeResult:
    """Everything downstream consumers need from one encoded series."""

    outputs: torch.Tensor
    tokens: TokenSequence
    normalized: torch.Tensor
    stats: tuple[torch.Tensor, torch.Tensor]
    hidden: torch.Tensor | None


def _check_domain_id(domain_id: str) -> str:
    if not isinstance(domain_id, str) or not domain_id:
        raise DomainError(f"domain_id must be a non-empty string, got {domain_id!r}")
    if "." in domain_id:
        raise DomainError(f"domain_id may not contain '.': {domain_id!r}")
    return domain_id


class LPTMModel(torch.nn.Module):
    """Pre-trainable time-series model with adaptive segmentation."""

    def __init__(self, config: ModelConfig | None = None, domains: tuple[str, ...] = ()):
        super().__init__()
        self.config = config if config is not None else ModelConfig()
        self.revin = RevIN(eps=self.config.revin_eps, affine=self.config.revin_affine)
        self.segmenters = torch.nn.ModuleDict()
        self.backbone = Backbone(self.config.backbone)
        dim = self.config.backbone.model_dim
        self.mask_embedding = torch.nn.Parameter(torch.randn(dim) * 0.02)
        self.decoders = torch.nn.ModuleDict(
            {task: SegmentReconstructor(dim) for task in MASK_TASKS}
        )
        self.heads = torch.nn.ModuleDict()
        self.head_specs: dict[str, dict] = {}
        self.step = 0
        for domain in domains:
            self.ensure_domain(domain)

    @property
    def model_dim(self) -> int:
        return self.config.backbone.model_dim

    def ensure_domain(self, domain_id: str) -> Segmenter:
        """Create the domain's segmenter on first use."""
        _check_domain_id(domain_id)
        if domain_id not in self.segmenters:
            self.segmenters[domain_id] = Segmenter(self.config.segmenter)
        return self.segmenters[domain_id]

    def segmenter_for(self, domain_id: str) -> Segmenter:
        _check_domain_id(domain_id)
        if domain_id not in self.segmenters:
            known = sorted(self.segmenters.keys())
            raise DomainError(f"unknown domain {domain_id!r}; known domains: {known}")
        return self.segmenters[domain_id]

    @property
    def domains(self) -> tuple[str, ...]:
        return tuple(sorted(self.segmenters.keys()))

    def encode_series(self, values, domain_id: str) -> EncodeResult:
        """Normalize, tokenize, and run the backbone for one series."""
        if isinstance(values, TimeSeries):
            domain_id = values.domain_id
            values = values.values
        x = as_float_tensor(values)
        normalized, stats = self.revin.normalize(x)
        segmenter = self.segmenter_for(domain_id)
        result = segmenter.tokenize(normalized)
        outputs = self.backbone(result.tokens)
        return EncodeResult(
            outputs=outputs,
            tokens=result.tokens,
            normalized=normalized,
            stats=stats,
            hidden=result.hidden,
        )

    # -- heads ---------------------------------------------------------

    def add_forecast_head(self, horizon: int, num_layers: int = 4, num_heads: int | None = None):
        from .heads import ForecastHead

        if num_heads is None:
            num_heads = self.config.backbone.num_heads
        head = ForecastHead(
            horizon=horizon,
            model_dim=self.model_dim,
            num_layers=num_layers,
            num_heads=num_heads,
        )
        self.heads["forecast"] = head
        self.head_specs["forecast"] = {
            "horizon": horizon,
            "num_layers": num_layers,
            "num_heads": num_heads,
        }
        return head

    def add_classify_head(self, num_classes: int):
        from .heads import ClassifyHead

        head = ClassifyHead(num_classes=num_classes, model_dim=self.model_dim)
        self.heads["classify"] = head
        self.head_specs["classify"] = {"num_classes": num_classes}
        return head

    def forecast(self, values, domain_id: str) -> np.ndarray:
        """Denormalized point forecast from the fitted forecast head."""
        if "forecast" not in self.heads:
            raise ConfigError("no forecast head attached; call add_forecast_head first")
        encoded = self.encode_series(values, domain_id)
        pred_norm = self.heads["forecast"](encoded.outputs)
        pred = self.revin.denormalize(pred_norm, encoded.stats)
        return pred.detach().cpu().numpy().astype(np.float64)

    def classify(self, values, domain_id: str) -> torch.Tensor:
        if "classify" not in self.heads:
            raise ConfigError("no classify head attached; call add_classify_head first")
        encoded = self.encode_series(values, domain_id)
        return self.heads["classify"](encoded.outputs)

    # -- parameter bookkeeping ------------------------------------------

    def head_parameters(self):
        for head in self.heads.values():
            yield from head.parameters()

    def base_parameters(self):
        """Everything that is not a task head."""
        head_ids = {id(p) for p in self.head_parameters()}
        for param in self.parameters():
            if id(param) not in head_ids:
                yield param

    def hyperparams(self) -> dict:
        """Reconstruction record stored in checkpoints."""
        return {
            "config": self.config.to_dict(),
            "domains": list(self.domains),
            "heads": {name: dict(spec) for name, spec in self.head_specs.items()},
            "step": self.step,
        }

    @classmethod
    def from_hyperparams(cls, record: dict) -> "LPTMModel":
        model = cls(
            config=ModelConfig.from_dict(record["config"]),
            domains=tuple(record.get("domains", ())),
        )
        heads = record.get("heads", {})
        if "forecast" in heads:
            model.add_forecast_head(**heads["forecast"])
        if "classify" in heads:
            model.add_classify_head(**heads["classify"])
        model.step = int(record.get("step", 0))
        return model

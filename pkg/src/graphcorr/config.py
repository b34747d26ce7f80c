"""Experiment configuration: one flat JSON object, strictly validated.

Unknown keys are rejected by name so a typo cannot silently fall back to a
default.  `hidden_dim`, `learning_rate`, and `epochs` default per model
kind; everything else has a global default.  `resolved()` returns the full
snapshot (every key filled in), and re-running from that snapshot
reproduces the run bit for bit.
"""

import json
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .models import MODEL_DEFAULTS, ClassifierConfig
from .pipeline import GraphCorrSettings
from .training import CVPlan, OptimizerSettings

_BOOL_KEYS = {"residual", "node_embedder", "windowing"}
_INT_KEYS = {"window_size", "stride", "max_lag", "filter_count", "embed_dim",
             "head_count", "hidden_dim", "head_layers", "epochs", "batch_size",
             "outer_folds", "seed"}
_FLOAT_KEYS = {"edge_percent", "dropout", "learning_rate",
               "train_fraction", "val_fraction", "test_fraction"}
_ENUM_KEYS = {
    "model": ("sage", "gcn"),
    "variant": ("vanilla", "augmented"),
    "edge_rank": ("signed", "absolute"),
    "lag_filter": ("full", "zero_lag_only"),
    "pool": ("mean", "max"),
}
_PATH_KEYS = {"group_map"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | set(_ENUM_KEYS) | _PATH_KEYS

_GLOBAL_DEFAULTS = {
    "model": "sage",
    "variant": "augmented",
    "window_size": 50,
    "stride": 30,
    "max_lag": 5,
    "filter_count": 3,
    "embed_dim": 32,
    "head_count": 4,
    "edge_percent": 2.0,
    "edge_rank": "signed",
    "residual": False,
    "node_embedder": True,
    "lag_filter": "full",
    "windowing": True,
    "dropout": 0.5,
    "pool": "mean",
    "head_layers": 1,
    "batch_size": 12,
    "outer_folds": 5,
    "train_fraction": 0.70,
    "val_fraction": 0.10,
    "test_fraction": 0.20,
    "seed": 0,
    "group_map": None,
}


def _check_type(key, value):
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key} must be a boolean, got {value!r}")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{key} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{key} must be a number, got {value!r}")
        return float(value)
    if key in _ENUM_KEYS:
        if value not in _ENUM_KEYS[key]:
            raise ConfigurationError(
                f"{key} must be one of {list(_ENUM_KEYS[key])}, got {value!r}")
        return value
    if value is not None and not isinstance(value, str):
        raise ConfigurationError(f"{key} must be a path string, got {value!r}")
    return value


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        unknown = sorted(set(data) - _ALL_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        resolved = dict(_GLOBAL_DEFAULTS)
        for key, value in data.items():
            resolved[key] = _check_type(key, value)
        model_hidden, model_lr, model_epochs = MODEL_DEFAULTS[resolved["model"]]
        resolved.setdefault("hidden_dim", model_hidden)
        resolved.setdefault("learning_rate", model_lr)
        resolved.setdefault("epochs", model_epochs)
        if resolved["lag_filter"] == "zero_lag_only":
            if "filter_count" in data and data["filter_count"] != 1:
                raise ConfigurationError(
                    "lag_filter 'zero_lag_only' fixes filter_count to 1; "
                    f"got explicit filter_count {data['filter_count']}")
            resolved["filter_count"] = 1
        cfg = cls(resolved)
        cfg.classifier_config()
        cfg.cv_plan()
        cfg.optimizer()
        if resolved["variant"] == "augmented":
            cfg.settings()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc
        cfg = cls.from_dict(data)
        gmap = cfg.values.get("group_map")
        if gmap is not None and not os.path.isabs(gmap):
            cfg.values["group_map"] = os.path.normpath(
                os.path.join(os.path.dirname(os.path.abspath(path)), gmap))
        return cfg

    def resolved(self) -> dict:
        return {k: self.values[k] for k in sorted(self.values)}

    def write_resolved(self, path):
        with open(path, "w") as fh:
            json.dump(self.resolved(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def variant(self) -> str:
        return self.values["variant"]

    @property
    def group_map(self):
        return self.values.get("group_map")

    def settings(self) -> GraphCorrSettings | None:
        """Feature-extraction settings; None for the vanilla variant."""
        if self.values["variant"] == "vanilla":
            return None
        v = self.values
        return GraphCorrSettings(
            window_size=v["window_size"], stride=v["stride"], max_lag=v["max_lag"],
            filter_count=v["filter_count"], embed_dim=v["embed_dim"],
            head_count=v["head_count"], edge_percent=v["edge_percent"],
            edge_rank=v["edge_rank"], residual=v["residual"],
            node_embedder=v["node_embedder"], lag_filter=v["lag_filter"],
            windowing=v["windowing"]).validate()

    def classifier_config(self) -> ClassifierConfig:
        v = self.values
        return ClassifierConfig(kind=v["model"], hidden_dim=v["hidden_dim"],
                                dropout=v["dropout"], pool=v["pool"],
                                head_layers=v["head_layers"]).validate()

    def cv_plan(self) -> CVPlan:
        v = self.values
        return CVPlan(outer_folds=v["outer_folds"], train_frac=v["train_fraction"],
                      val_frac=v["val_fraction"],
                      test_frac=v["test_fraction"]).validate()

    def optimizer(self) -> OptimizerSettings:
        v = self.values
        return OptimizerSettings(learning_rate=v["learning_rate"], epochs=v["epochs"],
                                 batch_size=v["batch_size"]).validate()

"""End-to-end wiring: subject signals -> features -> classifier logits.

``prepare_subject`` computes everything that does not depend on learnable
parameters (static FC, graph topology, windowed FC, lag correlation
profiles, propagation matrices); these constants are cached per subject and
reused across epochs, folds, and paired variants.  The model objects own a
ParameterStore and run the differentiable part of the pipeline.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .embedder import EmbedderParams, embed_all
from .errors import ConfigurationError
from .fusion import aggregate_and_fuse, messages
from .lagfilter import LagFilterParams, lag_activations, lag_xcorr, pad_signals
from .models import (ClassifierConfig, ClassifierParams, classify,
                     gcn_norm_adjacency, neighbor_mean_matrix)
from .params import ParameterStore
from .signals import (GraphTopology, TimeSeriesMatrix, form_graph,
                      single_window, static_fc, window_signals, windowed_fc)


@dataclass
class GraphCorrSettings:
    """Feature-extraction settings shared by a run's subjects."""

    window_size: int = 50
    stride: int = 30
    max_lag: int = 5
    filter_count: int = 3
    embed_dim: int = 32
    head_count: int = 4
    edge_percent: float = 2.0
    edge_rank: str = "signed"
    residual: bool = False
    node_embedder: bool = True
    lag_filter: str = "full"          # "full" | "zero_lag_only"
    windowing: bool = True

    def validate(self):
        if self.lag_filter not in ("full", "zero_lag_only"):
            raise ConfigurationError(
                f"lag_filter must be 'full' or 'zero_lag_only', got {self.lag_filter!r}")
        if self.lag_filter == "zero_lag_only" and self.filter_count != 1:
            raise ConfigurationError(
                "zero_lag_only fixes the filter bank to one zero-lag filter; "
                f"filter_count must be 1, got {self.filter_count}")
        if self.edge_rank not in ("signed", "absolute"):
            raise ConfigurationError(
                f"edge_rank must be 'signed' or 'absolute', got {self.edge_rank!r}")
        if self.max_lag < 0:
            raise ConfigurationError(f"max_lag must be >= 0, got {self.max_lag}")
        if self.filter_count < 1:
            raise ConfigurationError(f"filter_count must be >= 1, got {self.filter_count}")
        return self


@dataclass
class SubjectFeatures:
    """Parameter-free per-subject constants."""

    subject_id: str
    label: int
    sfc: np.ndarray
    topo: GraphTopology
    fc: np.ndarray | None = None        # (R, R, W) windowed connectivity
    rho: np.ndarray | None = None       # (E_n, W, 2m+1) lag profiles
    window_signals: np.ndarray | None = None  # (R, T_w, W) raw windowed frames
    window_size: int = 0
    stride: int = 0
    _mix: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return self.sfc.shape[0]

    @property
    def window_count(self) -> int:
        return 0 if self.fc is None else self.fc.shape[2]

    def mix_matrix(self, kind: str) -> np.ndarray:
        if kind not in self._mix:
            self._mix[kind] = (gcn_norm_adjacency(self.topo) if kind == "gcn"
                               else neighbor_mean_matrix(self.topo))
        return self._mix[kind]


def prepare_subject(ts: TimeSeriesMatrix,
                    settings: GraphCorrSettings | None) -> SubjectFeatures:
    """Compute the constants the models consume.

    With ``settings=None`` only the static path (vanilla variant) is built.
    """
    sfc = static_fc(ts)
    percent = settings.edge_percent if settings is not None else 2.0
    rank = settings.edge_rank if settings is not None else "signed"
    topo = form_graph(sfc, percent, rank)
    feat = SubjectFeatures(ts.subject_id, ts.label, sfc, topo)
    if settings is None:
        return feat
    settings.validate()
    fs = (window_signals(ts, settings.window_size, settings.stride)
          if settings.windowing else single_window(ts))
    feat.fc = windowed_fc(fs)
    feat.window_signals = fs.signals
    feat.window_size = fs.window_size
    feat.stride = fs.stride
    feat.rho = lag_xcorr(pad_signals(fs, settings.max_lag), topo, settings.max_lag)
    return feat


class VanillaModel:
    """Classifier on rows of the static connectivity matrix."""

    variant = "vanilla"

    def __init__(self, clf_cfg: ClassifierConfig, node_count: int,
                 rng: np.random.Generator):
        self.cfg = clf_cfg.validate()
        self.node_count = node_count
        self.store = ParameterStore()
        self.clf = ClassifierParams(self.store, clf_cfg, node_count, rng)

    def forward(self, feat: SubjectFeatures, training: bool = False,
                dropout_rng: np.random.Generator | None = None,
                features_override: Tensor | None = None):
        x = features_override if features_override is not None else Tensor(feat.sfc)
        return classify(x, feat.topo, self.cfg, self.clf, training=training,
                        dropout_rng=dropout_rng, mix=feat.mix_matrix(self.cfg.kind))


class AugmentedModel:
    """Full pipeline: embedder + lag filter + fusion feeding the classifier."""

    variant = "augmented"

    def __init__(self, settings: GraphCorrSettings, clf_cfg: ClassifierConfig,
                 node_count: int, rng: np.random.Generator):
        settings.validate()
        self.settings = settings
        self.cfg = clf_cfg.validate()
        self.node_count = node_count
        self.store = ParameterStore()
        self.embedder = None
        if settings.node_embedder:
            self.embedder = EmbedderParams(self.store, node_count, settings.embed_dim,
                                           settings.head_count, rng)
        if settings.lag_filter == "zero_lag_only":
            self.lag = LagFilterParams.zero_lag_only(self.store, settings.max_lag)
        else:
            self.lag = LagFilterParams(self.store, settings.max_lag,
                                       settings.filter_count, rng)
        embed_width = settings.embed_dim if settings.node_embedder else node_count
        self.out_width = embed_width * (self.lag.filter_count + 1)
        self.clf = ClassifierParams(self.store, clf_cfg, self.out_width, rng)

    def fused_features(self, feat: SubjectFeatures,
                       fc_override: Tensor | None = None) -> Tensor:
        """Differentiable feature construction, (R, D_eff * (k+1)).

        ``fc_override`` substitutes the windowed-FC constant with a gradient
        leaf of the same shape (used for saliency maps).
        """
        if feat.fc is None or feat.rho is None:
            raise ConfigurationError(
                f"subject {feat.subject_id!r} was prepared without windowed features")
        fc = fc_override if fc_override is not None else Tensor(feat.fc)
        if self.embedder is not None:
            emb = embed_all(fc, self.embedder, residual=self.settings.residual)
        else:
            emb = fc  # ablation: raw windowed connectivity as embeddings
        lag = lag_activations(feat.rho, self.lag)
        mes = messages(emb, lag, feat.topo)
        return aggregate_and_fuse(mes, emb, feat.topo)

    def forward(self, feat: SubjectFeatures, training: bool = False,
                dropout_rng: np.random.Generator | None = None,
                fc_override: Tensor | None = None):
        out = self.fused_features(feat, fc_override=fc_override)
        return classify(out, feat.topo, self.cfg, self.clf, training=training,
                        dropout_rng=dropout_rng, mix=feat.mix_matrix(self.cfg.kind))


def build_model(settings: GraphCorrSettings | None, clf_cfg: ClassifierConfig,
                node_count: int, rng: np.random.Generator):
    if settings is None:
        return VanillaModel(clf_cfg, node_count, rng)
    return AugmentedModel(settings, clf_cfg, node_count, rng)

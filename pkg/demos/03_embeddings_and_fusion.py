"""
Node embeddings, lag responses, and the fused feature block
===========================================================

Walks one subject through the augmented feature path and prints every
intermediate shape: windowed FC -> attention embeddings -> lag filter
responses -> per-edge messages -> the fused (R, D * (k + 1)) block the
classifier consumes.
"""

import numpy as np

from graphcorr import (ClassifierConfig, GraphCorrSettings, Tensor,
                       TimeSeriesMatrix, build_model, no_grad,
                       prepare_subject, substream)
from graphcorr.embedder import embed_all
from graphcorr.lagfilter import lag_activations

rng = substream(5, "demo", "subject")
r, t = 40, 1200
ts = TimeSeriesMatrix(rng.normal(size=(r, t)), subject_id="s0", label=0)

settings = GraphCorrSettings(window_size=50, stride=30, max_lag=5,
                             filter_count=3, embed_dim=32, head_count=4,
                             edge_percent=10.0)
feat = prepare_subject(ts, settings)
print("windowed FC:", feat.fc.shape, " lagged xcorr:", feat.rho.shape)
print("graph:", len(feat.topo.edges), "directed edges over", r, "nodes")

model = build_model(settings, ClassifierConfig(kind="gcn", hidden_dim=16),
                    node_count=r, rng=substream(5, "demo", "init"))
with no_grad():
    emb = embed_all(Tensor(feat.fc), model.embedder)
    lag = lag_activations(feat.rho, model.lag)
    fused = model.fused_features(feat)
print("embeddings:", emb.shape, " (nodes x embed_dim x windows)")
print("lag responses:", lag.shape, " (edges x windows x filters)")
print("fused block:", fused.shape,
      f" = (R, D * (k + 1)) = ({r}, {settings.embed_dim} * "
      f"{settings.filter_count + 1})")

# the classifier head sees one vector per node; a forward pass gives the
# two-class logits for the subject
with no_grad():
    logits, pred = model.forward(feat)
print("logits:", np.round(logits.values, 3), " predicted class:", pred)
print("trainable parameters:",
      sum(t.values.size for _, t in model.store.trainable()))

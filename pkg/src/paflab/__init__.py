"""Popularity-Amongst-Friends collaborative filtering and its simulation lab."""

from paflab.observed import ObservedMatrix
from paflab.synthetic import (
    LatentModel,
    ModelParams,
    apply_channels,
    erasure_prob,
    generate_latent,
)
from paflab.paf import (
    Recommendation,
    predict_entry,
    recommend,
    recommend_global,
    similarities,
    similarity,
    top_neighbors,
)

__version__ = "0.1.0"

__all__ = [
    "LatentModel",
    "ModelParams",
    "ObservedMatrix",
    "Recommendation",
    "__version__",
    "apply_channels",
    "erasure_prob",
    "generate_latent",
    "predict_entry",
    "recommend",
    "recommend_global",
    "similarities",
    "similarity",
    "top_neighbors",
]

"""Chain-of-embedding consistency metrics.

A chain is the list of per-layer sentence embeddings h_0..h_L, where h_l
is the running mean over generated positions of the layer-l hidden
state. Its scalar feature measures the curvature of the layer-to-layer
path: the mean over adjacent layer pairs of the normalized Euclidean
step minus the normalized angular step,

    F = (1/L) * sum_l [ |h_l - h_{l+1}| / |h_0 - h_L|
                        - angle(h_l, h_{l+1}) / angle(h_0, h_L) ],

with angle(u, v) = arccos of the cosine similarity, clamped to [-1, 1]
before arccos. Only generated positions contribute to the means; prompt
positions are identical across parallel samples and would only dilute
the differences being measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateChainError, InsufficientSamplesError


@dataclass(frozen=True)
class CoEChain:
    """Running-mean layer embeddings over ``count`` generated positions."""

    embeddings: np.ndarray  # shape (L+1, d)
    count: int

    def __post_init__(self) -> None:
        if self.embeddings.ndim != 2:
            raise ValueError("embeddings must be a (layers, dim) array")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class CoEFeature:
    value: float


def chain_from_hidden(hidden: Sequence[np.ndarray]) -> CoEChain:
    """Start a chain from the hidden states of the first generated position."""
    stacked = np.array([np.asarray(h, dtype=np.float64) for h in hidden])
    return CoEChain(embeddings=stacked, count=1)


def update_chain(chain: CoEChain, hidden: Sequence[np.ndarray]) -> CoEChain:
    """Fold one more position into the running means.

    Each h_l becomes (t*h_l + z_l) / (t+1); the result equals the batch
    mean of the full history to floating-point accuracy.
    """
    stacked = np.array([np.asarray(h, dtype=np.float64) for h in hidden])
    if stacked.shape != chain.embeddings.shape:
        raise ValueError(
            f"hidden shape {stacked.shape} does not match chain {chain.embeddings.shape}"
        )
    t = chain.count
    merged = (t * chain.embeddings + stacked) / (t + 1)
    return CoEChain(embeddings=merged, count=t + 1)


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateChainError("zero-norm embedding in angle computation")
    cosine = float(np.dot(u, v) / (nu * nv))
    return float(np.arccos(min(1.0, max(-1.0, cosine))))


def coe_feature(chain: CoEChain) -> CoEFeature:
    """Scalar curvature feature of a chain.

    Degenerate chains raise: coincident endpoints (the normalizing
    distance is zero) or a zero-norm embedding where an angle is needed.
    A straight same-direction chain has endpoint angle 0 with nonzero
    endpoint distance; the angular terms are then defined as 0, the
    limiting value for a chain flattening onto a ray.
    """
    h = chain.embeddings
    num_layers = h.shape[0] - 1
    if num_layers < 1:
        raise DegenerateChainError("a chain needs at least two layer embeddings")

    end_dist = float(np.linalg.norm(h[0] - h[num_layers]))
    if end_dist == 0.0:
        raise DegenerateChainError("chain endpoints coincide")
    end_angle = _angle(h[0], h[num_layers])

    total = 0.0
    for l in range(num_layers):
        step_dist = float(np.linalg.norm(h[l] - h[l + 1]))
        total += step_dist / end_dist
        if end_angle > 0.0:
            total -= _angle(h[l], h[l + 1]) / end_angle
    return CoEFeature(value=total / num_layers)


def pair_distance(a: CoEChain, b: CoEChain) -> float:
    """Squared difference of the two chains' features."""
    return (coe_feature(a).value - coe_feature(b).value) ** 2


def consistency_scores(chains: Sequence[CoEChain]) -> np.ndarray:
    """Average feature distance from each chain to all the others.

    The lowest score marks the sample most consistent with the rest.
    """
    n = len(chains)
    if n < 2:
        raise InsufficientSamplesError("consistency needs at least two chains")
    features = np.array([coe_feature(c).value for c in chains])
    return scores_from_features(features)


def scores_from_features(features: np.ndarray) -> np.ndarray:
    """Pairwise mean squared feature distances, given features directly."""
    n = features.size
    if n < 2:
        raise InsufficientSamplesError("consistency needs at least two features")
    diffs = features[:, None] - features[None, :]
    sq = diffs**2
    return (sq.sum(axis=1)) / (n - 1)


def argmin_select(scores: Sequence[float]) -> int:
    """Index of the minimum score; ties break toward the lowest index."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("scores must be non-empty")
    return int(np.argmin(arr))

"""Logit-to-token sampling: temperature, then top-k, then top-p.

Ordering of the three filters is fixed as temperature -> top-k -> top-p,
the convention of mainstream inference libraries. All ties in the
probability ordering break toward the lower token id so results are
platform-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySupportError

# Namespaces for deriving independent random substreams from one seed.
STREAM_NS = 0
CONTROL_NS = 1
QUESTION_NS = 2


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (seed, namespace, ...) path.

    Stream i of a decode uses path (STREAM_NS, i); controller-internal
    draws use (CONTROL_NS,), so adding streams never shifts other draws.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(*parts: int) -> int:
    """Collapse a key path into a single reproducible 32-bit seed."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


@dataclass(frozen=True)
class SamplingParams:
    """Sampling strategy stack. Defaults: k=20, p=0.95, temperature 0.7."""

    top_k: int = 20
    top_p: float = 0.95
    temperature: float = 0.7
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")

    def stream(self, index: int) -> np.random.Generator:
        """Per-sample random stream, independent of how many samples run."""
        return derive_rng(self.seed, STREAM_NS, index)


@dataclass(frozen=True)
class TokenDistribution:
    """Renormalized distribution over the retained token support.

    ``probs`` has full vocabulary length and is exactly zero outside
    ``support`` (ascending token ids).
    """

    probs: np.ndarray
    support: np.ndarray


def transform_logits(logits: np.ndarray, params: SamplingParams) -> TokenDistribution:
    """Apply temperature, top-k, then top-p, and renormalize.

    Raises EmptySupportError when no logit is finite.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError("logits must be one-dimensional")
    if not np.any(np.isfinite(logits)):
        raise EmptySupportError("no finite logits to sample from")

    scaled = logits / params.temperature
    scaled = scaled - np.max(scaled[np.isfinite(scaled)])
    with np.errstate(over="ignore"):
        weights = np.exp(scaled)
    weights[~np.isfinite(logits)] = 0.0
    probs = weights / weights.sum()

    # Descending probability, lower id first on ties.
    order = np.lexsort((np.arange(probs.size), -probs))
    kept = order[: min(params.top_k, probs.size)]
    kept = kept[probs[kept] > 0.0]
    if kept.size == 0:
        raise EmptySupportError("top-k retained no positive-probability token")

    cumulative = np.cumsum(probs[kept])
    cut = int(np.searchsorted(cumulative, params.top_p, side="left"))
    cut = min(cut, kept.size - 1)
    support = np.sort(kept[: cut + 1])

    out = np.zeros_like(probs)
    out[support] = probs[support] / probs[support].sum()
    return TokenDistribution(probs=out, support=support)


def sample_token(dist: TokenDistribution, stream: np.random.Generator) -> int:
    """Draw one token id by inverse CDF over the support.

    The CDF is walked in (descending probability, ascending id) order so a
    given uniform draw maps to the same token on every platform.
    """
    support = dist.support
    p = dist.probs[support]
    order = np.lexsort((support, -p))
    cumulative = np.cumsum(p[order])
    u = stream.random()
    idx = int(np.searchsorted(cumulative, u, side="right"))
    idx = min(idx, support.size - 1)
    return int(support[order[idx]])


def greedy_token(logits: np.ndarray) -> int:
    """Argmax token; lowest id wins ties."""
    return int(np.argmax(logits))

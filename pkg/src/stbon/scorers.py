"""Pairwise consistency scorers used for early self-estimation.

The default scorer compares samples by their chain-of-embedding
features. The semantic and string variants replace the pairwise
distance with, respectively, the squared Euclidean distance between
last-layer sentence embeddings and the reciprocal LCS F-measure of the
token sequences; they exist to measure how much the layer-chain feature
itself contributes.
"""

from __future__ import annotations

import numpy as np

from .coe import CoEChain, coe_feature
from .errors import DegenerateChainError

STRING_DISTANCE_SENTINEL = 1e6


def rouge_l_f(a: tuple[int, ...], b: tuple[int, ...]) -> float:
    """LCS-based F1 over two token-id sequences."""
    if len(a) == 0 and len(b) == 0:
        return 1.0
    if len(a) == 0 or len(b) == 0:
        return 0.0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    lcs = prev[-1]
    if lcs == 0:
        return 0.0
    precision = lcs / len(a)
    recall = lcs / len(b)
    return 2.0 * precision * recall / (precision + recall)


class CoEScorer:
    """Squared difference of chain-of-embedding features."""

    kind = "coe"

    def fingerprint(self, chain: CoEChain | None, tokens: tuple[int, ...]):
        if chain is None:
            raise DegenerateChainError("no generated positions yet")
        return coe_feature(chain).value

    def distance(self, fa, fb) -> float:
        return float((fa - fb) ** 2)


class SemanticScorer:
    """Squared Euclidean distance of last-layer sentence embeddings."""

    kind = "semantic"

    def fingerprint(self, chain: CoEChain | None, tokens: tuple[int, ...]):
        if chain is None:
            raise DegenerateChainError("no generated positions yet")
        return chain.embeddings[-1]

    def distance(self, fa, fb) -> float:
        diff = fa - fb
        return float(np.dot(diff, diff))


class StringScorer:
    """Reciprocal LCS F-measure over generated token ids."""

    kind = "string"

    def fingerprint(self, chain: CoEChain | None, tokens: tuple[int, ...]):
        return tokens

    def distance(self, fa, fb) -> float:
        f = rouge_l_f(fa, fb)
        return 1.0 / f if f > 0.0 else STRING_DISTANCE_SENTINEL


SCORERS = {"coe": CoEScorer, "semantic": SemanticScorer, "string": StringScorer}


def make_scorer(kind: str):
    try:
        return SCORERS[kind]()
    except KeyError:
        raise ValueError(f"unknown scorer kind {kind!r}; expected one of {sorted(SCORERS)}") from None

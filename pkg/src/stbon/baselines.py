"""Full-generation best-of-N reference selectors.

Covers the classic unsupervised pipeline: generate all N samples to
completion, then pick one either by majority vote over extracted answers
or by the chain-of-embedding consistency score applied to the completed
chains. Reward-model selectors are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np

from .coe import CoEChain, argmin_select, consistency_scores
from .costs import SlotLedger
from .interface import Model, TokenSequence
from .sampling import SamplingParams
from .scorers import STRING_DISTANCE_SENTINEL, rouge_l_f
from .streams import make_streams, run_streams_to_completion

AnswerLabel = Hashable
AnswerExtractor = Callable[[TokenSequence], AnswerLabel]


@dataclass
class FullBonResult:
    sequences: tuple[TokenSequence, ...]  # generated tokens per sample
    chains: tuple[CoEChain | None, ...] | None
    ledger: SlotLedger
    capped: tuple[bool, ...]


def full_bon_generate(
    model: Model,
    sampling: SamplingParams,
    n: int,
    max_len: int,
    prompt: TokenSequence,
    *,
    want_chains: bool = False,
) -> FullBonResult:
    """Generate N independent samples to eos or the length cap.

    Sample i uses the same derived substream as stream i of the
    early-truncating decoder, so the two share prefixes under equal seeds.
    """
    prompt = tuple(int(t) for t in prompt)
    streams = make_streams(sampling, n)
    ledger = SlotLedger()
    run_streams_to_completion(model, prompt, streams, sampling, max_len, ledger)
    return FullBonResult(
        sequences=tuple(s.tokens() for s in streams),
        chains=tuple(s.chain for s in streams) if want_chains else None,
        ledger=ledger,
        capped=tuple(s.capped for s in streams),
    )


@dataclass(frozen=True)
class VoteTally:
    counts: dict[AnswerLabel, int]
    winner_label: AnswerLabel
    uniform_tie: bool


def majority_vote(answers: Sequence[AnswerLabel]) -> tuple[int, VoteTally]:
    """Index of a sample carrying the most frequent answer.

    No-answer entries (None) never win unless every answer is None.
    A fully scattered vote (every label counted once) still returns the
    lowest index but is flagged as a uniform tie, since the vote carries
    no information there.
    """
    if not answers:
        raise ValueError("answers must be non-empty")
    counts: dict[AnswerLabel, int] = {}
    for label in answers:
        if label is not None:
            counts[label] = counts.get(label, 0) + 1
    if not counts:
        return 0, VoteTally(counts={}, winner_label=None, uniform_tie=True)
    best = max(counts.values())
    winner = next(i for i, label in enumerate(answers) if label is not None and counts[label] == best)
    return winner, VoteTally(counts=counts, winner_label=answers[winner], uniform_tie=best <= 1)


def coe_full_select(chains: Sequence[CoEChain]) -> int:
    """Most consistent sample by chain features over completed chains."""
    return argmin_select(consistency_scores(chains))


def ablation_distance(kind: str, a, b) -> float:
    """Replacement pairwise distances for the consistency ablations.

    ``semantic-lastlayer`` takes two last-layer sentence embeddings and
    returns their squared Euclidean distance; ``string`` takes two token
    sequences and returns the reciprocal LCS F-measure, with a large
    sentinel standing in for 1/0 on fully disjoint sequences.
    """
    if kind == "semantic-lastlayer":
        diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
        return float(np.dot(diff, diff))
    if kind == "string":
        f = rouge_l_f(tuple(a), tuple(b))
        return 1.0 / f if f > 0.0 else STRING_DISTANCE_SENTINEL
    raise ValueError(f"unknown ablation distance kind {kind!r}")

"""Contract every autoregressive model must satisfy.

A model is a deterministic function from a token prefix to next-token
logits plus the per-layer hidden vectors of the final prefix position.
All sampling randomness lives outside the model, so N parallel streams
can be driven through one immutable instance.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContextOverflowError

TokenSequence = tuple[int, ...]


@dataclass(frozen=True)
class ModelDescriptor:
    """Static shape information announced by a model."""

    vocab_size: int
    num_layers: int
    hidden_dim: int
    eos_id: int
    max_context: int

    def __post_init__(self) -> None:
        if self.vocab_size <= 0 or self.num_layers <= 0 or self.hidden_dim <= 0:
            raise ValueError("descriptor dimensions must be positive")
        if not 0 <= self.eos_id < self.vocab_size:
            raise ValueError("eos_id must lie inside the vocabulary")
        if self.max_context <= 0:
            raise ValueError("max_context must be positive")


@dataclass(frozen=True)
class StepOutput:
    """One decoding step: logits for the next token, hidden states of the
    last prefix position at layers 0..L (layer 0 is the embedding output)."""

    logits: np.ndarray
    hidden: tuple[np.ndarray, ...]


class Model(ABC):
    """Deterministic autoregressive model.

    ``step`` must be a pure function of the prefix: two calls with the
    same prefix return bitwise-identical outputs. Implementations may
    cache internally but must not let caching change results.
    """

    @property
    @abstractmethod
    def descriptor(self) -> ModelDescriptor: ...

    @abstractmethod
    def step(self, prefix: TokenSequence) -> StepOutput: ...

    def batch_step(self, prefixes: Sequence[TokenSequence]) -> list[StepOutput]:
        """Element i equals ``step(prefixes[i])``; order preserved.

        Step errors propagate annotated with the offending batch index.
        """
        outputs = []
        for i, prefix in enumerate(prefixes):
            try:
                outputs.append(self.step(prefix))
            except ContextOverflowError as exc:
                raise ContextOverflowError(exc.length, exc.max_context, index=i) from exc
        return outputs


def validate_prefix(prefix: Sequence[int], descriptor: ModelDescriptor) -> TokenSequence:
    """Check token range, eos placement, and context length for a step call."""
    tokens = tuple(int(t) for t in prefix)
    if len(tokens) > descriptor.max_context:
        raise ContextOverflowError(len(tokens), descriptor.max_context)
    for pos, tok in enumerate(tokens):
        if not 0 <= tok < descriptor.vocab_size:
            raise ValueError(f"token {tok} at position {pos} outside vocabulary")
        if tok == descriptor.eos_id:
            raise ValueError("prefix contains eos; terminated sequences must not be stepped")
    return tokens


def sequence_is_terminated(tokens: Sequence[int], eos_id: int) -> bool:
    return len(tokens) > 0 and tokens[-1] == eos_id

"""Desk-scale deterministic transformer used by tests and experiments.

The network is a stack of smooth causal mixing layers over seeded fixed
weights: position t at layer l is tanh(W_l z_t^{l-1} + U_l mean(z_{<=t}^{l-1}) + b_l).
The causal running mean makes the whole prefix influence every later
position while keeping per-step computation incremental. Weight variance
is kept small so softmax outputs stay spread out rather than one-hot,
and the eos logit is ramped up with position so sequences terminate well
inside the context window.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .interface import Model, ModelDescriptor, StepOutput, TokenSequence, validate_prefix
from .sampling import derive_rng


@dataclass(frozen=True)
class ToyTransformerConfig:
    num_layers: int = 4
    hidden_dim: int = 32
    vocab_size: int = 64
    max_context: int = 512
    weight_seed: int = 0
    # eos logit = raw - eos_margin + eos_rate * max(0, position - eos_ramp_start)^2
    eos_margin: float = 6.0
    eos_ramp_start: int = 48
    eos_ramp_rate: float = 0.008

    def __post_init__(self) -> None:
        if min(self.num_layers, self.hidden_dim, self.vocab_size, self.max_context) <= 0:
            raise ValueError("all toy dimensions must be positive")

    @property
    def eos_id(self) -> int:
        return self.vocab_size - 1


@dataclass
class _PrefixState:
    """Incremental forward state after processing ``count`` positions."""

    count: int
    layer_sums: np.ndarray  # (L, d): sums of z^l over positions, l = 0..L-1


class ToyTransformer(Model):
    """Fixed-weight causal network satisfying the model contract.

    Internally caches per-prefix running sums so extending a prefix by
    one token is O(L d^2). Cached and from-scratch paths accumulate in
    the same order, so results are bitwise identical either way.
    """

    def __init__(self, config: ToyTransformerConfig, cache_size: int = 2048):
        self._config = config
        self._descriptor = ModelDescriptor(
            vocab_size=config.vocab_size,
            num_layers=config.num_layers,
            hidden_dim=config.hidden_dim,
            eos_id=config.eos_id,
            max_context=config.max_context,
        )
        d, L, v = config.hidden_dim, config.num_layers, config.vocab_size
        rng = derive_rng(config.weight_seed, 0)
        self._embed = rng.normal(0.0, 0.7 / np.sqrt(d), size=(v, d))
        self._start = rng.normal(0.0, 0.7 / np.sqrt(d), size=d)
        self._w = rng.normal(0.0, 1.1 / np.sqrt(d), size=(L, d, d))
        self._u = rng.normal(0.0, 0.9 / np.sqrt(d), size=(L, d, d))
        self._b = rng.normal(0.0, 0.1, size=(L, d))
        self._out = rng.normal(0.0, 0.75 / np.sqrt(d), size=(d, v))
        positions = np.arange(config.max_context + 2)[:, None]
        dims = np.arange(d)[None, :]
        angles = positions / np.power(64.0, (dims - dims % 2) / d)
        self._pos = 0.12 * np.where(dims % 2 == 0, np.sin(angles), np.cos(angles))
        # The cache is an internal memoization detail; the lock keeps
        # concurrent step calls safe without changing any result.
        self._cache: OrderedDict[TokenSequence, _PrefixState] = OrderedDict()
        self._cache_size = cache_size
        self._cache_lock = threading.Lock()

    @property
    def descriptor(self) -> ModelDescriptor:
        return self._descriptor

    @property
    def config(self) -> ToyTransformerConfig:
        return self._config

    def reset_cache(self) -> None:
        with self._cache_lock:
            self._cache.clear()

    def _advance(self, state: _PrefixState, embedding: np.ndarray) -> tuple[_PrefixState, list[np.ndarray]]:
        cfg = self._config
        count = state.count + 1
        sums = state.layer_sums.copy()
        hidden = [embedding]
        z = embedding
        for l in range(cfg.num_layers):
            sums[l] += z
            mixed = self._w[l] @ z + self._u[l] @ (sums[l] / count) + self._b[l]
            z = np.tanh(mixed)
            hidden.append(z)
        return _PrefixState(count=count, layer_sums=sums), hidden

    def _state_for(self, prefix: TokenSequence) -> tuple[_PrefixState, list[np.ndarray]]:
        cfg = self._config
        if prefix == ():
            empty = _PrefixState(0, np.zeros((cfg.num_layers, cfg.hidden_dim)))
            return self._advance(empty, self._start + self._pos[0])

        with self._cache_lock:
            cached = self._cache.get(prefix[:-1]) if len(prefix) > 1 else None
            if cached is not None:
                self._cache.move_to_end(prefix[:-1])
        if cached is not None:
            start_at = len(prefix) - 1
            state = cached
        else:
            start_at = 0
            state = _PrefixState(0, np.zeros((cfg.num_layers, cfg.hidden_dim)))
        hidden: list[np.ndarray] = []
        for pos in range(start_at, len(prefix)):
            embedding = self._embed[prefix[pos]] + self._pos[pos + 1]
            state, hidden = self._advance(state, embedding)
        with self._cache_lock:
            self._cache[prefix] = state
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return state, hidden

    def step(self, prefix: TokenSequence) -> StepOutput:
        tokens = validate_prefix(prefix, self._descriptor)
        _, hidden = self._state_for(tokens)
        logits = hidden[-1] @ self._out
        cfg = self._config
        next_pos = len(tokens) + 1
        ramp = cfg.eos_ramp_rate * max(0, next_pos - cfg.eos_ramp_start) ** 2
        logits = logits.copy()
        logits[cfg.eos_id] += ramp - cfg.eos_margin
        return StepOutput(logits=logits, hidden=tuple(hidden))


def build_toy_transformer(config: ToyTransformerConfig | None = None) -> ToyTransformer:
    return ToyTransformer(config or ToyTransformerConfig())

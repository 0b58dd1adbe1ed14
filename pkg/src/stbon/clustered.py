"""Clustered answer task: a wrapped model whose rollouts commit to one of
several answer token ranges, plus a question sampler with ground truth.

Every prompt ends with a marker token; the wrapper splits the prefix at
the last marker into hint context and generation, then adds two
deterministic effects on top of the base model:

* answer drift on logits: tokens of range a are boosted by the share of
  range-a tokens already seen, plus a strong recency lock on the range
  of the last generated range token, so a rollout commits to an answer
  within a couple of tokens of its first range token;
* latent curvature on hidden states: every position's hidden stack is
  blended with a synthetic arc whose layer-to-layer angle encodes how
  coherent the rollout is. Rollouts that agree with the prefix's hints
  sit at one tight base curvature; a rollout fighting the hints has its
  angle displaced by a prefix-keyed signed amount proportional to the
  conflict, so conflicted chains scatter symmetrically around the
  coherent center. That is the signal the chain-consistency selector
  feeds on.

Eos is effectively blocked until the previous token lies inside the
majority answer range of the prefix, so a terminated sequence's final
range token always names the range the rollout committed to; the
no-answer sentinel only arises for sequences cut off at max length.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .interface import Model, ModelDescriptor, StepOutput, TokenSequence
from .sampling import derive_rng

EOS_BLOCK_PENALTY = 1e4


def _prefix_noise(prefix: TokenSequence) -> float:
    """Deterministic pseudo-noise keyed to the exact prefix.

    Values are signed with magnitude in [0.6, 1.0]. The magnitude floor
    matters: the consistency selector favors the sample nearest the
    feature mean, and a weakly displaced conflicted chain could sit
    closer to the mean than the coherent cluster does.
    """
    digest = zlib.crc32(np.asarray(prefix, dtype=np.uint32).tobytes())
    unit = digest / 4294967295.0
    sign = 1.0 if digest & 1 else -1.0
    return sign * (0.6 + 0.4 * unit)


@dataclass(frozen=True)
class ClusteredTaskConfig:
    answer_token_ranges: tuple[tuple[int, int], ...]  # half-open [lo, hi)
    drift_strength: float = 1.0
    logit_gain: float = 2.0  # share-proportional range boost
    lock_gain: float = 5.0  # recency boost on the last generated range
    conflict_gain: float = 0.35  # curvature-angle dispersion (radians) at full conflict
    conflict_floor: float = 0.05  # conflict below this (stray tokens) disperses nothing
    conflict_cap: float = 0.3  # conflict at which the dispersion saturates
    answer_gain: float = 0.0  # optional per-answer curvature offset (radians)
    curvature_base: float = 0.55  # arc angle of the coherent synthetic chain
    latent_blend: float = 0.65  # weight of the synthetic chain in the hidden states
    count_softening: float = 2.0  # larger = weaker initial hint boost
    hint_growth: float = 0.25  # hint weight grows with generation, so conflict persists
    jitter_span: int = 4  # generated tokens that key a rollout's dispersion sign
    marker_token: int = 0  # ends every prompt
    attractor_seed: int = 7

    def __post_init__(self) -> None:
        if len(self.answer_token_ranges) < 2:
            raise ValueError("need at least two answer ranges")
        if not 0.0 < self.drift_strength <= 1.0:
            raise ValueError("drift_strength must be in (0, 1]")
        spans = sorted(self.answer_token_ranges)
        for lo, hi in spans:
            if lo >= hi:
                raise ValueError(f"empty answer range ({lo}, {hi})")
        for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ValueError("answer ranges must be disjoint")

    @property
    def num_answers(self) -> int:
        return len(self.answer_token_ranges)


class ClusteredModel(Model):
    """Base model with answer drift; satisfies the full model contract."""

    def __init__(self, config: ClusteredTaskConfig, base: Model):
        desc = base.descriptor
        for lo, hi in config.answer_token_ranges:
            if lo < 0 or hi > desc.vocab_size:
                raise ValueError("answer range outside vocabulary")
            if lo <= desc.eos_id < hi:
                raise ValueError("answer range must not contain eos")
            if lo <= config.marker_token < hi:
                raise ValueError("answer range must not contain the prompt marker")
        if not 0 <= config.marker_token < desc.vocab_size or config.marker_token == desc.eos_id:
            raise ValueError("marker token must be a non-eos vocabulary token")
        self._config = config
        self._base = base
        self._range_of = np.full(desc.vocab_size, -1, dtype=np.int64)
        for a, (lo, hi) in enumerate(config.answer_token_ranges):
            self._range_of[lo:hi] = a
        layers = desc.num_layers + 1
        rng = derive_rng(config.attractor_seed, 3)
        # Orthonormal plane for the synthetic arc chain blended into the
        # hidden states. The arc's angle step is the curvature dial: the
        # chain feature of an arc is a smooth monotone function of the
        # angle, so placing coherent rollouts at one base angle and
        # displacing conflicted ones in angle gives a symmetric,
        # fold-free feature response.
        u = rng.normal(size=desc.hidden_dim)
        u /= np.linalg.norm(u)
        w = rng.normal(size=desc.hidden_dim)
        w -= u * (u @ w)
        w /= np.linalg.norm(w)
        self._arc_u, self._arc_w = u, w
        self._arc_norm = 2.5
        self._layer_index = np.arange(layers)[:, None]
        # Optional per-answer angle offsets.
        self._answer_theta = rng.uniform(-1.0, 1.0, size=config.num_answers)

    @property
    def descriptor(self) -> ModelDescriptor:
        return self._base.descriptor

    @property
    def config(self) -> ClusteredTaskConfig:
        return self._config

    def answer_of_token(self, token: int) -> int | None:
        """Answer range containing the token, or None for neutral tokens."""
        a = int(self._range_of[token])
        return a if a >= 0 else None

    def split_at_marker(self, prefix: TokenSequence) -> tuple[TokenSequence, TokenSequence]:
        """Tokens up to and including the last prompt marker, and the rest."""
        tokens = tuple(prefix)
        marker = self._config.marker_token
        for pos in range(len(tokens) - 1, -1, -1):
            if tokens[pos] == marker:
                return tokens[: pos + 1], tokens[pos + 1 :]
        return (), tokens

    def _range_counts(self, tokens: TokenSequence) -> np.ndarray:
        counts = np.zeros(self._config.num_answers)
        for tok in tokens:
            a = self._range_of[tok]
            if a >= 0:
                counts[a] += 1.0
        return counts

    def step(self, prefix: TokenSequence) -> StepOutput:
        out = self._base.step(prefix)
        cfg = self._config
        drift = cfg.drift_strength
        prompt_part, gen_part = self.split_at_marker(tuple(prefix))
        hint_scale = 1.0 + cfg.hint_growth * len(gen_part)
        counts = hint_scale * self._range_counts(prompt_part) + self._range_counts(gen_part)
        total = float(counts.sum())
        shares = counts / (total + cfg.count_softening)

        logits = out.logits.copy()
        last_range = -1
        for tok in reversed(gen_part):
            a = self._range_of[tok]
            if a >= 0:
                last_range = int(a)
                break
        for a, (lo, hi) in enumerate(cfg.answer_token_ranges):
            boost = cfg.logit_gain * shares[a]
            if a == last_range:
                boost += cfg.lock_gain
            if boost != 0.0:
                logits[lo:hi] += drift * boost
        eos = self.descriptor.eos_id
        dominant = int(np.argmax(counts)) if total > 0.0 else -1
        last_token_range = int(self._range_of[gen_part[-1]]) if gen_part else -1
        if last_token_range < 0 or last_token_range != dominant:
            logits[eos] -= EOS_BLOCK_PENALTY

        theta = cfg.curvature_base
        if total > 0.0:
            conflict = 1.0 - float(counts[dominant]) / total
            conflict = (conflict - cfg.conflict_floor) / (cfg.conflict_cap - cfg.conflict_floor)
            conflict = min(1.0, max(0.0, conflict))
            if conflict > 0.0:
                key = prompt_part + gen_part[: cfg.jitter_span]
                theta += cfg.conflict_gain * conflict * _prefix_noise(key)
            if cfg.answer_gain != 0.0:
                theta += cfg.answer_gain * float(shares @ self._answer_theta)
        theta = min(1.3, max(0.2, theta))
        angles = self._layer_index * theta
        arc = self._arc_norm * (np.cos(angles) * self._arc_u + np.sin(angles) * self._arc_w)
        blend = drift * cfg.latent_blend
        stack = (1.0 - blend) * np.stack(out.hidden) + blend * arc
        return StepOutput(logits=logits, hidden=tuple(stack))


def build_clustered_task_model(config: ClusteredTaskConfig, base: Model) -> ClusteredModel:
    return ClusteredModel(config, base)


def extract_answer(tokens: TokenSequence, model: ClusteredModel) -> int | None:
    """Answer label of a finished sequence: range of its last non-eos token.

    Total: returns None (no-answer) when the last non-eos token falls in
    no range or the sequence is empty.
    """
    toks = list(tokens)
    eos = model.descriptor.eos_id
    while toks and toks[-1] == eos:
        toks.pop()
    if not toks:
        return None
    return model.answer_of_token(toks[-1])


@dataclass(frozen=True)
class Question:
    prompt: TokenSequence
    answer: int


@dataclass
class ClusteredTask:
    """Question stream over a clustered model, with ground-truth answers.

    Prompts mix a few hint tokens drawn from the correct answer's range
    with neutral noise tokens and end with the marker; the hint count
    varies per question, which spreads per-sample accuracy and populates
    all correctness regimes.
    """

    model: ClusteredModel
    seed: int = 0
    hint_choices: tuple[int, ...] = (0, 1, 1, 2, 2, 3)
    noise_tokens: int = 2

    def __post_init__(self) -> None:
        desc = self.model.descriptor
        marker = self.model.config.marker_token
        self._neutral = [
            t
            for t in range(desc.vocab_size)
            if self.model.answer_of_token(t) is None and t != desc.eos_id and t != marker
        ]
        if not self._neutral:
            raise ValueError("task needs at least one neutral token")

    def question(self, index: int) -> Question:
        rng = derive_rng(self.seed, 2, index)
        cfg = self.model.config
        answer = int(rng.integers(cfg.num_answers))
        lo, hi = cfg.answer_token_ranges[answer]
        hints = int(rng.choice(np.array(self.hint_choices)))
        tokens = [int(rng.integers(lo, hi)) for _ in range(hints)]
        tokens += [int(self._neutral[rng.integers(len(self._neutral))]) for _ in range(self.noise_tokens)]
        order = rng.permutation(len(tokens))
        prompt = tuple(tokens[i] for i in order) + (cfg.marker_token,)
        return Question(prompt=prompt, answer=answer)


def default_task(
    seed: int = 0,
    *,
    weight_seed: int = 11,
    drift_strength: float = 1.0,
    **config_overrides,
) -> ClusteredTask:
    """Standard benchmark profile: 12 answers of 4 tokens over a 64-vocab toy."""
    from .toy import ToyTransformerConfig, build_toy_transformer

    base = build_toy_transformer(ToyTransformerConfig(weight_seed=weight_seed))
    ranges = tuple((4 + 4 * a, 8 + 4 * a) for a in range(12))
    config = ClusteredTaskConfig(
        answer_token_ranges=ranges, drift_strength=drift_strength, **config_overrides
    )
    return ClusteredTask(model=build_clustered_task_model(config, base), seed=seed)

"""Early self-truncating best-of-N decode.

The decode runs three phases. First, all N sample streams advance in
lockstep until the earliest estimation time c: the first step at which
every pair of streams has produced distinct token sequences. If a stream
emits eos before that happens, it terminates and the current step is
recorded as c directly. Second, during a buffer window of
tau = round(window_ratio * c) further steps, the per-step most
consistent stream is recorded at each of the tau+1 steps c..c+tau;
streams ending inside the window keep a frozen chain and remain scored.
Third, the modal per-step winner is kept, the other N-1 streams are
truncated (their slots are freed on the ledger), and the winner alone is
completed to eos or the length cap.

Per-step eligibility rules: streams with byte-identical generated
sequences (possible only when eos forced c before pairwise divergence)
are represented by their lowest index; streams whose chain cannot
produce a feature are excluded from scoring and candidacy. If no stream
is scorable at some step, the step's winner is drawn uniformly from the
still-active streams with a controller-owned seeded stream, and the step
is flagged. Ties always break toward the lowest index.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .costs import SlotLedger
from .errors import DegenerateChainError
from .interface import Model, TokenSequence
from .sampling import CONTROL_NS, SamplingParams, derive_rng
from .scorers import CoEScorer
from .streams import Stream, absorb_hidden, make_streams, sample_step

PRE_C = "pre_c"
WINDOW = "window"
SOLO = "solo"


@dataclass(frozen=True)
class StBoNConfig:
    n: int
    max_len: int
    window_ratio: float = 1.0
    sampling: SamplingParams = field(default_factory=SamplingParams)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.window_ratio < 0:
            raise ValueError("window_ratio must be >= 0")


@dataclass
class DecodeState:
    """Snapshot of the N parallel streams during a decode."""

    streams: tuple[TokenSequence, ...]
    chains: tuple[object, ...]
    active: tuple[bool, ...]
    phase: str
    step: int
    c: int | None


@dataclass(frozen=True)
class EstimationRecord:
    winners: tuple[int, ...]
    counts: tuple[int, ...]
    final: int


@dataclass
class Telemetry:
    c: int | None
    tau: int | None
    c_trigger: str | None
    generated_length: int
    prompt_length: int
    active_trace: list[int]
    step_scores: list[list[float | None]]
    fallback_steps: list[int]
    capped: bool
    wall_ms: float


@dataclass
class DecodeResult:
    sequence: TokenSequence
    generated: TokenSequence
    record: EstimationRecord
    telemetry: Telemetry
    ledger: SlotLedger


def all_pairwise_distinct(sequences: Sequence[TokenSequence]) -> bool:
    return len(set(sequences)) == len(sequences)


def detect_earliest_time(state: DecodeState) -> bool:
    """True once every pair of streams differs as a token sequence.

    Only meaningful before the estimation window; the caller records the
    current step as c when this first returns true.
    """
    if state.phase != PRE_C:
        raise ValueError("earliest-time detection applies to the pre-window phase")
    return all_pairwise_distinct(state.streams)


def vote_final(winners: Sequence[int], n: int) -> int:
    """Most frequent per-step winner; ties break toward the lowest index."""
    if len(winners) == 0:
        raise ValueError("winners must be non-empty")
    if any(not 0 <= w < n for w in winners):
        raise ValueError("winner indices must lie in [0, n)")
    counts = np.bincount(list(winners), minlength=n)
    return int(np.argmax(counts))


def _estimate(
    streams: list[Stream],
    scorer,
    fallback_rng: np.random.Generator,
) -> tuple[int, list[float | None], bool]:
    """Score one window step. Returns (winner, per-stream scores, used_fallback)."""
    n = len(streams)
    seen: set[tuple[int, ...]] = set()
    candidates: list[tuple[int, object]] = []
    for s in streams:
        key = s.tokens()
        if key in seen:
            continue
        seen.add(key)
        try:
            candidates.append((s.index, scorer.fingerprint(s.chain, key)))
        except DegenerateChainError:
            continue

    scores: list[float | None] = [None] * n
    if len(candidates) >= 2:
        for i, (idx, fp) in enumerate(candidates):
            total = 0.0
            for j, (_, other) in enumerate(candidates):
                if j != i:
                    total += scorer.distance(fp, other)
            scores[idx] = total / (len(candidates) - 1)
        winner = min((idx for idx, _ in candidates), key=lambda k: (scores[k], k))
        return winner, scores, False
    if len(candidates) == 1:
        return candidates[0][0], scores, False
    pool = [s.index for s in streams if not s.done] or [s.index for s in streams]
    return int(fallback_rng.choice(np.array(pool))), scores, True


def run_stbon(
    model: Model,
    config: StBoNConfig,
    prompt: TokenSequence,
    *,
    scorer=None,
) -> DecodeResult:
    """Run one early-truncating best-of-N decode."""
    start = time.perf_counter()
    scorer = scorer or CoEScorer()
    prompt = tuple(int(t) for t in prompt)
    params = config.sampling
    eos = model.descriptor.eos_id
    n = config.n

    streams = make_streams(params, n)
    fallback_rng = derive_rng(params.seed, CONTROL_NS)
    ledger = SlotLedger()
    allocated = set(range(n))
    phase = PRE_C
    c: int | None = None
    tau: int | None = None
    c_trigger: str | None = None
    winners: list[int] = []
    step_scores: list[list[float | None]] = []
    fallback_steps: list[int] = []
    final: int | None = None

    def run_estimation(u: int) -> None:
        winner, scores, used_fallback = _estimate(streams, scorer, fallback_rng)
        winners.append(winner)
        step_scores.append(scores)
        if used_fallback:
            fallback_steps.append(u)

    def finalize_vote() -> int:
        nonlocal phase
        chosen = vote_final(winners, n)
        allocated.intersection_update({chosen})
        phase = SOLO
        return chosen

    rounds = 0
    while True:
        rounds += 1
        u = rounds - 1  # number of tokens each lockstep stream holds right now
        stepping = [s for s in streams if s.index in allocated and not s.done]
        outputs = model.batch_step([prompt + s.tokens() for s in stepping]) if stepping else []
        for s, out in zip(stepping, outputs):
            absorb_hidden(s, out)

        if phase == PRE_C and u >= 1:
            eos_event = any(s.done and not s.capped for s in streams)
            if eos_event or all_pairwise_distinct([s.tokens() for s in streams]):
                c = u
                tau = int(round(config.window_ratio * c))
                c_trigger = "eos" if eos_event else "divergence"
                phase = WINDOW
        if phase == PRE_C and not stepping:
            # Length cap hit with the streams never diverging: estimate once.
            c = u
            tau = 0
            c_trigger = "cap"
            phase = WINDOW

        if phase == WINDOW:
            run_estimation(u)
            assert c is not None and tau is not None
            if u >= c + tau or not any(not s.done for s in streams):
                final = finalize_vote()

        for s, out in zip(stepping, outputs):
            if s.index not in allocated:
                continue  # truncated at this step, before sampling
            sample_step(s, out, params, eos, config.max_len)

        if stepping:
            ledger.note(
                len(stepping),
                sum(len(s.generated) for s in streams if s.index in allocated),
            )

        if phase == SOLO:
            assert final is not None
            if streams[final].done:
                break

    assert final is not None and c is not None and tau is not None
    winner_stream = streams[final]
    counts = np.bincount(winners, minlength=n)
    record = EstimationRecord(winners=tuple(winners), counts=tuple(int(x) for x in counts), final=final)
    ledger.wall_ms = (time.perf_counter() - start) * 1e3
    telemetry = Telemetry(
        c=c,
        tau=tau,
        c_trigger=c_trigger,
        generated_length=len(winner_stream.generated),
        prompt_length=len(prompt),
        active_trace=list(ledger.active_counts),
        step_scores=step_scores,
        fallback_steps=fallback_steps,
        capped=winner_stream.capped,
        wall_ms=ledger.wall_ms,
    )
    return DecodeResult(
        sequence=prompt + winner_stream.tokens(),
        generated=winner_stream.tokens(),
        record=record,
        telemetry=telemetry,
        ledger=ledger,
    )

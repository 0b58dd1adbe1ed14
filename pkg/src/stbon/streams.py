"""Shared lockstep stream machinery for the decode paths.

Sample stream i always draws from the substream derived from
(seed, stream namespace, i) and consumes exactly one uniform per
generated token, so the early-truncating decoder and the full
generation baseline produce identical prefixes under shared seeds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .coe import CoEChain, chain_from_hidden, update_chain
from .costs import SlotLedger
from .interface import Model, StepOutput, TokenSequence
from .sampling import SamplingParams, greedy_token, sample_token, transform_logits


@dataclass
class Stream:
    index: int
    rng: np.random.Generator
    generated: list[int] = field(default_factory=list)
    chain: CoEChain | None = None
    done: bool = False
    capped: bool = False

    def tokens(self) -> tuple[int, ...]:
        return tuple(self.generated)


def make_streams(params: SamplingParams, n: int) -> list[Stream]:
    return [Stream(index=i, rng=params.stream(i)) for i in range(n)]


def absorb_hidden(stream: Stream, output: StepOutput) -> None:
    """Fold the hidden states of the stream's newest generated position
    into its chain. The step that produced ``output`` saw a prefix ending
    at that position, so this runs only once something was generated."""
    if not stream.generated:
        return
    if stream.chain is None:
        stream.chain = chain_from_hidden(output.hidden)
    else:
        stream.chain = update_chain(stream.chain, output.hidden)


def sample_step(
    stream: Stream,
    output: StepOutput,
    params: SamplingParams,
    eos_id: int,
    max_len: int,
) -> None:
    dist = transform_logits(output.logits, params)
    token = sample_token(dist, stream.rng)
    stream.generated.append(token)
    if token == eos_id:
        stream.done = True
    elif len(stream.generated) >= max_len:
        stream.done = True
        stream.capped = True


def run_streams_to_completion(
    model: Model,
    prompt: TokenSequence,
    streams: list[Stream],
    params: SamplingParams,
    max_len: int,
    ledger: SlotLedger,
) -> None:
    """Advance all streams in lockstep until each hits eos or the cap.

    Every stream's slots stay on the ledger until the whole batch
    finishes, mirroring batched generation that returns all rows at once.
    """
    start = time.perf_counter()
    while True:
        stepping = [s for s in streams if not s.done]
        if not stepping:
            break
        outputs = model.batch_step([prompt + s.tokens() for s in stepping])
        for s, out in zip(stepping, outputs):
            absorb_hidden(s, out)
        for s, out in zip(stepping, outputs):
            sample_step(s, out, params, model.descriptor.eos_id, max_len)
        ledger.note(len(stepping), sum(len(s.generated) for s in streams))
    ledger.wall_ms += (time.perf_counter() - start) * 1e3


def greedy_decode(model: Model, prompt: TokenSequence, max_len: int) -> tuple[tuple[int, ...], SlotLedger]:
    """Single-stream argmax decode; the cost baseline."""
    ledger = SlotLedger()
    start = time.perf_counter()
    generated: list[int] = []
    eos = model.descriptor.eos_id
    while len(generated) < max_len:
        out = model.step(prompt + tuple(generated))
        generated.append(greedy_token(out.logits))
        ledger.note(1, len(generated))
        if generated[-1] == eos:
            break
    ledger.wall_ms = (time.perf_counter() - start) * 1e3
    return tuple(generated), ledger

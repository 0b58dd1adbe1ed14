"""Property suite for the model contract.

Runs the same checks against any model implementation: shape contract,
bitwise determinism, batch/single equivalence, and context-overflow
signaling. Used by the test suite for in-process models and by the
bridge-check command for out-of-process ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContextOverflowError
from .interface import Model, TokenSequence
from .sampling import derive_rng


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _random_prefix(model: Model, rng: np.random.Generator, max_len: int = 12) -> TokenSequence:
    desc = model.descriptor
    length = int(rng.integers(0, max_len + 1))
    tokens = []
    for _ in range(length):
        tok = int(rng.integers(desc.vocab_size))
        if tok == desc.eos_id:
            tok = (tok + 1) % desc.vocab_size
        tokens.append(tok)
    return tuple(tokens)


def _outputs_equal(a, b) -> bool:
    if not np.array_equal(a.logits, b.logits):
        return False
    if len(a.hidden) != len(b.hidden):
        return False
    return all(np.array_equal(x, y) for x, y in zip(a.hidden, b.hidden))


def run_interface_suite(model: Model, *, seed: int = 0, samples: int = 8) -> list[CheckResult]:
    rng = derive_rng(seed, 5)
    desc = model.descriptor
    results: list[CheckResult] = []

    def check(name: str, fn) -> None:
        try:
            detail = fn()
            results.append(CheckResult(name, True, detail or ""))
        except AssertionError as exc:
            results.append(CheckResult(name, False, str(exc)))
        except Exception as exc:  # noqa: BLE001 - report, never crash the suite
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    def shapes() -> str:
        for prefix in [(), *(_random_prefix(model, rng) for _ in range(samples))]:
            out = model.step(prefix)
            assert len(out.hidden) == desc.num_layers + 1, (
                f"expected {desc.num_layers + 1} hidden vectors, got {len(out.hidden)}"
            )
            assert out.logits.shape == (desc.vocab_size,), f"bad logits shape {out.logits.shape}"
            assert all(h.shape == (desc.hidden_dim,) for h in out.hidden), "bad hidden dims"
            assert np.all(np.isfinite(out.logits)), "non-finite logits"
            assert all(np.all(np.isfinite(h)) for h in out.hidden), "non-finite hidden state"
        return f"{samples + 1} prefixes"

    def determinism() -> str:
        for _ in range(samples):
            prefix = _random_prefix(model, rng)
            assert _outputs_equal(model.step(prefix), model.step(prefix)), (
                f"outputs differ for repeated prefix of length {len(prefix)}"
            )
        return f"{samples} prefixes bitwise stable"

    def batch_equivalence() -> str:
        assert model.batch_step([]) == [], "empty batch must return empty list"
        prefixes = [_random_prefix(model, rng) for _ in range(samples)]
        prefixes.append(prefixes[0])  # duplicate entries must match
        singles = [model.step(p) for p in prefixes]
        batched = model.batch_step(prefixes)
        assert len(batched) == len(prefixes), "batch length mismatch"
        for i, (one, many) in enumerate(zip(singles, batched)):
            assert _outputs_equal(one, many), f"batch element {i} differs from single step"
        return f"batch of {len(prefixes)} matches single steps"

    def overflow() -> str:
        filler = 0 if desc.eos_id != 0 else 1
        too_long = tuple([filler] * (desc.max_context + 1))
        try:
            model.step(too_long)
        except ContextOverflowError:
            return "context overflow raised"
        raise AssertionError("over-length prefix did not raise ContextOverflowError")

    check("shape_contract", shapes)
    check("determinism", determinism)
    check("batch_equivalence", batch_equivalence)
    check("context_overflow", overflow)
    return results

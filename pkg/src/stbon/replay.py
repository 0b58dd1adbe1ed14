"""Record and replay model steps as golden fixtures.

A recording captures every distinct (prefix -> step output) pair seen
during a decode at full float precision. A replay model serves the same
outputs back, so a decode over a recorded remote model can be reproduced
bit for bit without the remote process.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ReplayMissError
from .interface import Model, ModelDescriptor, StepOutput, TokenSequence
from .jsonio import SCHEMA_VERSION, read_jsonl, write_jsonl


def _output_to_record(prefix: TokenSequence, output: StepOutput) -> dict:
    return {
        "kind": "step",
        "prefix": list(prefix),
        "logits": [float(x) for x in output.logits],
        "hidden": [[float(x) for x in layer] for layer in output.hidden],
    }


def _output_from_record(record: dict) -> StepOutput:
    return StepOutput(
        logits=np.array(record["logits"], dtype=np.float64),
        hidden=tuple(np.array(layer, dtype=np.float64) for layer in record["hidden"]),
    )


class RecordingModel(Model):
    """Wraps a model and keeps every distinct step it serves."""

    def __init__(self, inner: Model, label: str = "recorded"):
        self._inner = inner
        self._label = label
        self._steps: dict[TokenSequence, StepOutput] = {}

    @property
    def descriptor(self) -> ModelDescriptor:
        return self._inner.descriptor

    def step(self, prefix: TokenSequence) -> StepOutput:
        key = tuple(prefix)
        out = self._inner.step(key)
        self._steps.setdefault(key, out)
        return out

    def save(self, path: str | Path, *, prompt: TokenSequence | None = None) -> None:
        desc = self.descriptor
        header = {
            "kind": "header",
            "schema_version": SCHEMA_VERSION,
            "label": self._label,
            "descriptor": {
                "vocab_size": desc.vocab_size,
                "num_layers": desc.num_layers,
                "hidden_dim": desc.hidden_dim,
                "eos_id": desc.eos_id,
                "max_context": desc.max_context,
            },
        }
        if prompt is not None:
            header["prompt"] = list(prompt)
        records = [header]
        for prefix in sorted(self._steps):
            records.append(_output_to_record(prefix, self._steps[prefix]))
        write_jsonl(path, records)


class ReplayModel(Model):
    """Serves recorded steps; unknown prefixes raise ReplayMissError."""

    def __init__(self, descriptor: ModelDescriptor, steps: dict[TokenSequence, StepOutput], prompt: TokenSequence | None = None):
        self._descriptor = descriptor
        self._steps = steps
        self.prompt = prompt

    @classmethod
    def load(cls, path: str | Path) -> "ReplayModel":
        header: dict | None = None
        steps: dict[TokenSequence, StepOutput] = {}
        for record in read_jsonl(path):
            if record.get("kind") == "header":
                header = record
            elif record.get("kind") == "step":
                steps[tuple(record["prefix"])] = _output_from_record(record)
        if header is None:
            raise ValueError(f"replay fixture {path} has no header record")
        d = header["descriptor"]
        descriptor = ModelDescriptor(
            vocab_size=d["vocab_size"],
            num_layers=d["num_layers"],
            hidden_dim=d["hidden_dim"],
            eos_id=d["eos_id"],
            max_context=d["max_context"],
        )
        prompt = tuple(header["prompt"]) if "prompt" in header else None
        return cls(descriptor, steps, prompt)

    @property
    def descriptor(self) -> ModelDescriptor:
        return self._descriptor

    def step(self, prefix: TokenSequence) -> StepOutput:
        key = tuple(prefix)
        try:
            return self._steps[key]
        except KeyError:
            raise ReplayMissError(f"no recorded step for prefix of length {len(key)}") from None

"""Client for an out-of-process model bridge.

The bridge is a child process speaking length-prefixed JSON frames over
its standard streams: an ASCII decimal payload byte length, a newline,
the UTF-8 JSON payload, and a trailing newline. The first frame must be
a hello announcing the model descriptor; afterwards the engine sends one
batch request at a time and reads one result frame, so responses never
reorder even though they carry the request id.

Frame shapes:

    {"type": "hello", "protocol": 1, "model": "...", "descriptor": {...}}
    {"type": "batch", "id": 7, "prefixes": [[1, 2], []]}
    {"type": "result", "id": 7, "outputs": [{"logits": [...], "hidden": [[...], ...]}
                                            | {"error": {"code": "...", "message": "..."}}]}
    {"type": "shutdown"}
    {"type": "fatal", "message": "..."}

All sampling stays engine-side; the bridge serves deterministic logits
and last-position hidden states only.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from typing import IO, Sequence

import numpy as np

from .errors import BridgeFailureError, BridgeProtocolError, ContextOverflowError
from .interface import Model, ModelDescriptor, StepOutput, TokenSequence

PROTOCOL_VERSION = 1


def write_frame(stream: IO[bytes], payload: dict) -> None:
    data = json.dumps(payload, separators=(",", ":"), allow_nan=False).encode("utf-8")
    stream.write(str(len(data)).encode("ascii") + b"\n" + data + b"\n")
    stream.flush()


def read_frame(stream: IO[bytes]) -> dict:
    header = stream.readline()
    if not header:
        raise BridgeProtocolError("stream closed while waiting for a frame")
    try:
        length = int(header.strip())
    except ValueError:
        raise BridgeProtocolError(f"malformed frame length {header!r}") from None
    if length < 0 or length > 1 << 30:
        raise BridgeProtocolError(f"unreasonable frame length {length}")
    payload = stream.read(length)
    if len(payload) != length:
        raise BridgeProtocolError("stream closed mid-frame")
    trailer = stream.read(1)
    if trailer not in (b"\n", b""):
        raise BridgeProtocolError("missing frame trailer")
    try:
        frame = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BridgeProtocolError(f"frame is not valid JSON: {exc}") from None
    if not isinstance(frame, dict) or "type" not in frame:
        raise BridgeProtocolError("frame must be an object with a type field")
    return frame


class BridgeModel(Model):
    """Model served by a spawned bridge process."""

    def __init__(self, command: Sequence[str]):
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._next_id = 0
        try:
            hello = read_frame(self._proc.stdout)
        except BridgeProtocolError:
            self._proc.kill()
            self._proc.wait()
            raise
        if hello["type"] == "fatal":
            self._proc.wait()
            raise BridgeFailureError(f"bridge failed to start: {hello.get('message', '')}")
        if hello["type"] != "hello":
            self.close()
            raise BridgeProtocolError(f"expected hello frame, got {hello['type']!r}")
        if hello.get("protocol") != PROTOCOL_VERSION:
            self.close()
            raise BridgeProtocolError(f"unsupported protocol {hello.get('protocol')!r}")
        d = hello["descriptor"]
        self._descriptor = ModelDescriptor(
            vocab_size=int(d["vocab_size"]),
            num_layers=int(d["num_layers"]),
            hidden_dim=int(d["hidden_dim"]),
            eos_id=int(d["eos_id"]),
            max_context=int(d["max_context"]),
        )

    @property
    def descriptor(self) -> ModelDescriptor:
        return self._descriptor

    def step(self, prefix: TokenSequence) -> StepOutput:
        return self.batch_step([prefix])[0]

    def batch_step(self, prefixes: Sequence[TokenSequence]) -> list[StepOutput]:
        if len(prefixes) == 0:
            return []
        assert self._proc.stdin is not None and self._proc.stdout is not None
        request_id = self._next_id
        self._next_id += 1
        write_frame(
            self._proc.stdin,
            {"type": "batch", "id": request_id, "prefixes": [list(map(int, p)) for p in prefixes]},
        )
        frame = read_frame(self._proc.stdout)
        if frame["type"] == "fatal":
            raise BridgeFailureError(frame.get("message", "bridge reported a fatal error"))
        if frame["type"] != "result":
            raise BridgeProtocolError(f"expected result frame, got {frame['type']!r}")
        if frame.get("id") != request_id:
            raise BridgeProtocolError(f"result id {frame.get('id')} does not match request {request_id}")
        outputs = frame.get("outputs")
        if not isinstance(outputs, list) or len(outputs) != len(prefixes):
            raise BridgeProtocolError("result outputs do not match request length")
        return [self._decode_output(i, out, len(prefixes[i])) for i, out in enumerate(outputs)]

    def _decode_output(self, index: int, out: dict, prefix_len: int) -> StepOutput:
        desc = self._descriptor
        if "error" in out:
            code = out["error"].get("code", "")
            if code == "context-overflow":
                raise ContextOverflowError(prefix_len, desc.max_context, index=index)
            raise BridgeFailureError(f"bridge error for batch index {index}: {out['error']}")
        logits = np.asarray(out["logits"], dtype=np.float64)
        hidden = tuple(np.asarray(layer, dtype=np.float64) for layer in out["hidden"])
        if logits.shape != (desc.vocab_size,):
            raise BridgeProtocolError(f"bad logits shape {logits.shape} at index {index}")
        if len(hidden) != desc.num_layers + 1 or any(h.shape != (desc.hidden_dim,) for h in hidden):
            raise BridgeProtocolError(f"bad hidden shapes at index {index}")
        if not np.all(np.isfinite(logits)) or any(not np.all(np.isfinite(h)) for h in hidden):
            raise BridgeProtocolError(f"non-finite values at index {index}")
        return StepOutput(logits=logits, hidden=hidden)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                write_frame(self._proc.stdin, {"type": "shutdown"})
                self._proc.stdin.close()
                self._proc.wait(timeout=10)
            except Exception:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "BridgeModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def parse_bridge_command(spec: str) -> list[str]:
    """Split a ``bridge:<command line>`` model spec into argv."""
    if not spec.startswith("bridge:"):
        raise ValueError(f"not a bridge model spec: {spec!r}")
    command = shlex.split(spec[len("bridge:") :])
    if not command:
        raise ValueError("bridge command is empty")
    return command

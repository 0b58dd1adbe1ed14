import io
import sys
from pathlib import Path

import numpy as np
import pytest

from stbon.bridge import BridgeModel, parse_bridge_command, read_frame, write_frame
from stbon.conformance import run_interface_suite
from stbon.controller import StBoNConfig, run_stbon
from stbon.errors import BridgeFailureError, BridgeProtocolError, ContextOverflowError
from stbon.replay import RecordingModel, ReplayModel
from stbon.sampling import SamplingParams
from stbon.toy import ToyTransformerConfig, build_toy_transformer

FAKE = [sys.executable, str(Path(__file__).parent / "fake_bridge.py")]


def test_frame_roundtrip():
    buf = io.BytesIO()
    payload = {"type": "batch", "id": 3, "prefixes": [[1, 2], []], "x": 1.25}
    write_frame(buf, payload)
    buf.seek(0)
    assert read_frame(buf) == payload


def test_frame_is_eye_readable():
    buf = io.BytesIO()
    write_frame(buf, {"type": "shutdown"})
    raw = buf.getvalue()
    length, body, tail = raw.split(b"\n")
    assert int(length) == len(body)
    assert tail == b""


def test_frame_errors():
    with pytest.raises(BridgeProtocolError):
        read_frame(io.BytesIO(b""))
    with pytest.raises(BridgeProtocolError):
        read_frame(io.BytesIO(b"xyz\n{}"))
    with pytest.raises(BridgeProtocolError):
        read_frame(io.BytesIO(b"50\n{\"type\":\"x\"}"))  # shorter than declared
    buf = io.BytesIO()
    write_frame(buf, {"no_type": 1})
    buf.seek(0)
    with pytest.raises(BridgeProtocolError):
        read_frame(buf)


def test_parse_bridge_command():
    assert parse_bridge_command("bridge:node main.js --echo-toy") == ["node", "main.js", "--echo-toy"]
    with pytest.raises(ValueError):
        parse_bridge_command("toy")
    with pytest.raises(ValueError):
        parse_bridge_command("bridge:")


def local_twin():
    return build_toy_transformer(
        ToyTransformerConfig(num_layers=2, hidden_dim=8, vocab_size=24, max_context=32, weight_seed=1)
    )


def test_bridge_serves_model_bitwise():
    twin = local_twin()
    with BridgeModel(FAKE) as bridge:
        desc = bridge.descriptor
        assert (desc.vocab_size, desc.num_layers, desc.hidden_dim, desc.eos_id) == (24, 2, 8, 23)
        for prefix in [(), (1,), (1, 2, 3)]:
            remote = bridge.step(prefix)
            local = twin.step(prefix)
            assert np.array_equal(remote.logits, local.logits)
            assert all(np.array_equal(a, b) for a, b in zip(remote.hidden, local.hidden))
        # duplicates inside one batch are identical
        batch = bridge.batch_step([(1, 2), (1, 2)])
        assert np.array_equal(batch[0].logits, batch[1].logits)
        assert bridge.batch_step([]) == []


def test_bridge_passes_interface_suite():
    with BridgeModel(FAKE) as bridge:
        results = run_interface_suite(bridge, seed=3)
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_bridge_context_overflow_keeps_connection():
    with BridgeModel(FAKE) as bridge:
        with pytest.raises(ContextOverflowError) as exc:
            bridge.batch_step([(1,), tuple([2] * 33)])
        assert exc.value.index == 1
        out = bridge.step((1,))  # connection still serves
        assert out.logits.shape == (24,)


def test_bridge_malformed_hello():
    with pytest.raises(BridgeProtocolError):
        BridgeModel(FAKE + ["--garbage"])


def test_bridge_fatal_frame():
    with pytest.raises(BridgeFailureError):
        BridgeModel(FAKE + ["--fatal"])


def test_record_replay_decode_over_bridge_bit_for_bit(tmp_path):
    params = SamplingParams(seed=13)
    config = StBoNConfig(n=3, max_len=16, sampling=params)
    with BridgeModel(FAKE) as bridge:
        recorder = RecordingModel(bridge, label="bridge-decode")
        live = run_stbon(recorder, config, (2, 1))
        fixture = tmp_path / "bridge_fixture.jsonl"
        recorder.save(fixture, prompt=(2, 1))
    replayed = run_stbon(ReplayModel.load(fixture), config, (2, 1))
    assert replayed.sequence == live.sequence
    assert replayed.record == live.record
    assert replayed.telemetry.step_scores == live.telemetry.step_scores
    assert replayed.ledger.slot_counts == live.ledger.slot_counts

import json

import numpy as np
import pytest

from qdialogue.adversary import intercept_resend_tap
from qdialogue.channel import (
    ClassicalMessage,
    LengthMismatch,
    MessageKind,
    QuantumBlock,
    Sender,
    SessionAborted,
    SessionTranscript,
    as_block,
    broadcast_classical,
    send_quantum,
)
from qdialogue.photon import make_state, random_labels


def _block(n=6, seed=0):
    labels = random_labels(n, np.random.default_rng(seed))
    return as_block([make_state(*lab) for lab in labels])


class TestQuantumChannel:
    def test_identity_without_tap(self):
        block = _block()
        assert send_quantum(block) is block

    def test_transfer_is_logged(self):
        t = SessionTranscript(seed=3)
        send_quantum(_block(4), transcript=t)
        (rec,) = t.records()
        assert rec["type"] == "quantum"
        assert rec["length"] == 4

    def test_tap_length_enforced(self):
        with pytest.raises(LengthMismatch):
            send_quantum(_block(4), tap=lambda b: as_block(b.photons[:3]))

    def test_intercept_resend_output_independent_of_input(self):
        a = send_quantum(_block(8, seed=1), tap=lambda b: intercept_resend_tap(b, np.random.default_rng(9)))
        b = send_quantum(_block(8, seed=2), tap=lambda b: intercept_resend_tap(b, np.random.default_rng(9)))
        assert all(np.allclose(x.amps, y.amps) for x, y in zip(a.photons, b.photons))

    def test_rejects_non_photons(self):
        with pytest.raises(TypeError):
            QuantumBlock((np.zeros(4),))

    def test_tags_length_checked(self):
        with pytest.raises(ValueError):
            QuantumBlock((make_state("H", "s"),), tags=("a", "b"))


class TestClassicalChannel:
    def test_schema_enforced(self):
        with pytest.raises(ValueError):
            ClassicalMessage(Sender.BOB, MessageKind.DECOY_POSITIONS, {"basis_codes": [1]})

    def test_payload_copied(self):
        positions = [1, 2]
        msg = ClassicalMessage(Sender.BOB, MessageKind.DECOY_POSITIONS, {"positions": positions})
        positions.append(7)
        assert msg.payload["positions"] == [1, 2]

    def test_every_listener_reads_same_payload(self):
        t = SessionTranscript()
        msg = ClassicalMessage(Sender.ALICE, MessageKind.MEASUREMENT_OUTCOMES, {"outcome_codes": [0, 3]})
        broadcast_classical(msg, t)
        (seen,) = t.messages(MessageKind.MEASUREMENT_OUTCOMES)
        assert seen is msg
        assert t.records()[0]["direction"] == "Alice->public"

    def test_abort_closes_session(self):
        t = SessionTranscript()
        broadcast_classical(
            ClassicalMessage(Sender.BOB, MessageKind.ABORT, {"stage": "first_check", "error_rate": 0.5}), t
        )
        assert t.aborted
        with pytest.raises(SessionAborted):
            broadcast_classical(
                ClassicalMessage(Sender.BOB, MessageKind.DECOY_POSITIONS, {"positions": []}), t
            )
        with pytest.raises(SessionAborted):
            send_quantum(_block(2), transcript=t)

    def test_dump_round_trip(self, tmp_path):
        t = SessionTranscript(seed=11)
        send_quantum(_block(3), transcript=t)
        broadcast_classical(ClassicalMessage("Bob", "DecoyPositions", {"positions": (0, 2)}), t)
        path = tmp_path / "t.jsonl"
        t.dump(path)
        recs = SessionTranscript.load_records(path)
        assert recs[0] == {"type": "header", "seed": 11}
        assert recs[2]["payload"] == {"positions": [0, 2]}
        for line in path.read_text().splitlines():
            json.loads(line)

"""Ideal quantum channel and public, authenticated classical channel."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence


from .photon import Carrier, JointState, PhotonState


class LengthMismatch(Exception):
    """A channel tap returned a block with a different photon count."""


class SessionAborted(Exception):
    """Raised when a protocol step runs after an abort was broadcast."""


class Sender(str, enum.Enum):
    ALICE = "Alice"
    BOB = "Bob"


class MessageKind(str, enum.Enum):
    DECOY_POSITIONS_AND_BASES = "DecoyPositionsAndBases"
    MEASUREMENT_OUTCOMES = "MeasurementOutcomes"
    DECOY_POSITIONS = "DecoyPositions"
    CHECK_BITS_DECODED = "CheckBitsDecoded"
    OUTCOME_ANNOUNCEMENT = "OutcomeAnnouncement"
    ABORT = "Abort"


# payload keys required for each message kind
PAYLOAD_SCHEMA: dict[MessageKind, frozenset[str]] = {
    MessageKind.DECOY_POSITIONS_AND_BASES: frozenset({"positions", "basis_codes"}),
    MessageKind.MEASUREMENT_OUTCOMES: frozenset({"outcome_codes"}),
    MessageKind.DECOY_POSITIONS: frozenset({"positions"}),
    MessageKind.CHECK_BITS_DECODED: frozenset({"labels"}),
    MessageKind.OUTCOME_ANNOUNCEMENT: frozenset({"basis_codes", "outcome_codes"}),
    MessageKind.ABORT: frozenset({"stage", "error_rate"}),
}


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [_plain(v) if isinstance(v, (list, tuple)) else v for v in value]
    return value


@dataclass(frozen=True)
class ClassicalMessage:
    sender: Sender
    kind: MessageKind
    payload: dict

    def __post_init__(self):
        if not isinstance(self.sender, Sender):
            object.__setattr__(self, "sender", Sender(self.sender))
        if not isinstance(self.kind, MessageKind):
            object.__setattr__(self, "kind", MessageKind(self.kind))
        expected = PAYLOAD_SCHEMA[self.kind]
        if set(self.payload) != expected:
            raise ValueError(
                f"{self.kind.value} payload needs keys {sorted(expected)}, "
                f"got {sorted(self.payload)}"
            )
        # copy to plain types so later mutation by the sender cannot leak in
        object.__setattr__(self, "payload", {k: _plain(v) for k, v in self.payload.items()})

    def to_record(self) -> dict:
        return {
            "type": "classical",
            "sender": self.sender.value,
            "kind": self.kind.value,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class QuantumBlock:
    """An ordered photon sequence sent as one unit.

    ``tags`` name each photon's origin (``L3``, ``L'3``, ``D1`` ...) for the
    transcript only; they are not visible to the receiving party's logic.
    """

    photons: tuple
    block_id: int = 0
    tags: Optional[tuple] = None

    def __post_init__(self):
        photons = tuple(self.photons)
        for p in photons:
            # carriers validate their norm on construction and are immutable
            if not isinstance(p, (PhotonState, JointState)):
                raise TypeError(f"not a photon carrier: {p!r}")
        object.__setattr__(self, "photons", photons)
        if self.tags is not None:
            tags = tuple(self.tags)
            if len(tags) != len(photons):
                raise ValueError("tags and photons differ in length")
            object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return len(self.photons)


Tap = Callable[[QuantumBlock], QuantumBlock]


@dataclass
class SessionTranscript:
    """Append-only log of every public message and quantum transfer."""

    seed: Optional[int] = None
    events: list = field(default_factory=list)
    aborted: bool = field(default=False, init=False)

    def ensure_open(self) -> None:
        if self.aborted:
            raise SessionAborted("session was aborted; no further steps may run")

    def append(self, direction: str, event: Any) -> None:
        self.events.append((direction, event))
        if isinstance(event, ClassicalMessage) and event.kind is MessageKind.ABORT:
            self.aborted = True

    def messages(self, kind: MessageKind | None = None) -> list[ClassicalMessage]:
        return [
            ev
            for _, ev in self.events
            if isinstance(ev, ClassicalMessage) and (kind is None or ev.kind is kind)
        ]

    def records(self) -> list[dict]:
        out = []
        for seq, (direction, ev) in enumerate(self.events):
            rec = ev.to_record() if hasattr(ev, "to_record") else dict(ev)
            out.append({"seq": seq, "direction": direction, **rec})
        return out

    def to_lines(self) -> str:
        """One JSON object per line, header first."""
        lines = [json.dumps({"type": "header", "seed": self.seed}, sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True, ensure_ascii=False) for r in self.records()]
        return "\n".join(lines) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_lines(), encoding="utf-8")

    @classmethod
    def load_records(cls, path: str | Path) -> list[dict]:
        return [
            json.loads(line)
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]


def _transfer_record(block: QuantumBlock) -> dict:
    return {
        "type": "quantum",
        "block_id": block.block_id,
        "length": len(block),
        "tags": list(block.tags) if block.tags is not None else None,
    }


def send_quantum(
    block: QuantumBlock,
    tap: Optional[Tap] = None,
    transcript: Optional[SessionTranscript] = None,
    direction: str = "Bob->Alice",
) -> QuantumBlock:
    """Deliver a block; an attached tap may replace what arrives."""
    if transcript is not None:
        transcript.ensure_open()
        transcript.append(direction, _transfer_record(block))
    if tap is None:
        return block
    out = tap(block)
    if len(out) != len(block):
        raise LengthMismatch(f"tap returned {len(out)} photons, expected {len(block)}")
    return out


def broadcast_classical(msg: ClassicalMessage, transcript: SessionTranscript) -> None:
    """Publish ``msg``; everyone, the eavesdropper included, can read it."""
    if msg.kind is not MessageKind.ABORT:
        transcript.ensure_open()
    transcript.append(f"{msg.sender.value}->public", msg)


def as_block(photons: Sequence[Carrier], block_id: int = 0, tags=None) -> QuantumBlock:
    return QuantumBlock(tuple(photons), block_id=block_id, tags=tags)


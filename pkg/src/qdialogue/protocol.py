"""Two-way secret exchange over single photons with private initial states.

Bob prepares twin photons ``(L_n, L'_n)`` in the same random product state
and sends both to Alice together with decoys. Alice encodes on ``L_n`` and
returns it while keeping ``L'_n``. Bob encodes on top, measures in the
preparation basis he alone knows and publishes the outcome. Alice learns
the basis from the announcement and reads the initial state off her twin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ._random import sample_positions, uniform_ints
from .adversary import AttackKind, AttackStrategy, make_taps
from .channel import (
    ClassicalMessage,
    MessageKind,
    QuantumBlock,
    Sender,
    SessionTranscript,
    broadcast_classical,
    send_quantum,
)
from .photon import (
    ALL_LABELS,
    BASES,
    UNITARIES,
    Carrier,
    CompositeUnitary,
    PhotonState,
    PolState,
    SpaState,
    apply_unitary,
    basis_of_label,
    identify_label,
    label_name,
    make_state,
    measure,
    random_labels,
    unitary_for,
)

Label = tuple[PolState, SpaState]


class SequenceShapeError(ValueError):
    """A received sequence does not have the length the protocol requires."""


class DecodeInconsistency(ValueError):
    """No operation label reproduces an announced outcome."""


class BitPair(NamedTuple):
    hi: int
    lo: int

    def __str__(self) -> str:
        return f"{self.hi}{self.lo}"


@dataclass(frozen=True)
class SecretMessage:
    """``N`` two-bit symbols, each selecting one composite unitary."""

    pairs: tuple[BitPair, ...]

    def __post_init__(self):
        pairs = tuple(p if type(p) is BitPair else BitPair(int(p[0]), int(p[1])) for p in self.pairs)
        if not pairs:
            raise ValueError("a secret needs at least one bit pair")
        if any(b not in (0, 1) for p in pairs for b in p):
            raise ValueError("secret bits must be 0 or 1")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_bits(cls, bits: str) -> SecretMessage:
        bits = bits.strip()
        if len(bits) % 2 or set(bits) - {"0", "1"}:
            raise ValueError(f"expected an even-length bit string, got {bits!r}")
        return cls(tuple(BitPair(int(bits[k]), int(bits[k + 1])) for k in range(0, len(bits), 2)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> SecretMessage:
        bits = uniform_ints(2 * n, 2, rng)
        return cls(tuple(BitPair(bits[2 * k], bits[2 * k + 1]) for k in range(n)))

    def to_bits(self) -> str:
        return "".join(str(p) for p in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class ProtocolConfig:
    n_pairs: int = 64
    delta1: int = 16
    delta2: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.delta1 < 0 or self.delta2 < 0:
            raise ValueError("decoy counts must be non-negative")

    @property
    def length(self) -> int:
        return 2 * self.n_pairs + self.delta1 + self.delta2


@dataclass(frozen=True)
class PreparedSequence:
    """Bob's outgoing sequence together with his private records."""

    photons: tuple[PhotonState, ...]
    initial_labels: tuple[Label, ...]
    decoy1_positions: tuple[int, ...]
    decoy2_positions: tuple[int, ...]

    @property
    def message_positions(self) -> tuple[int, ...]:
        decoys = set(self.decoy1_positions) | set(self.decoy2_positions)
        return tuple(k for k in range(len(self.photons)) if k not in decoys)

    @property
    def pair_labels(self) -> tuple[Label, ...]:
        msg = self.message_positions
        return tuple(self.initial_labels[msg[2 * n]] for n in range(len(msg) // 2))

    @property
    def decoy2_labels(self) -> tuple[Label, ...]:
        return tuple(self.initial_labels[k] for k in self.decoy2_positions)

    def decoy2_after_first_check(self) -> tuple[int, ...]:
        """Positions of the second-check decoys once the first-check ones are gone."""
        first = set(self.decoy1_positions)
        kept = [k for k in range(len(self.photons)) if k not in first]
        index = {k: n for n, k in enumerate(kept)}
        return tuple(index[k] for k in self.decoy2_positions)

    def tags(self) -> tuple[str, ...]:
        tags = [""] * len(self.photons)
        for n, k in enumerate(self.message_positions):
            tags[k] = f"L{n // 2 + 1}" if n % 2 == 0 else f"L'{n // 2 + 1}"
        for n, k in enumerate(self.decoy1_positions):
            tags[k] = f"D1.{n + 1}"
        for n, k in enumerate(self.decoy2_positions):
            tags[k] = f"D2.{n + 1}"
        return tuple(tags)


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    error_rate: float
    mismatches: int = 0


@dataclass(frozen=True)
class OutcomeAnnouncement:
    """Per message photon: 2-bit basis code and 2-bit outcome index."""

    basis_codes: tuple[int, ...]
    outcome_codes: tuple[int, ...]

    def __post_init__(self):
        if len(self.basis_codes) != len(self.outcome_codes):
            raise ValueError("basis and outcome codes differ in length")
        if any(not 0 <= c <= 3 for c in (*self.basis_codes, *self.outcome_codes)):
            raise ValueError("codes must fit in two bits")

    def bits(self) -> list[str]:
        return [f"{b:02b}{o:02b}" for b, o in zip(self.basis_codes, self.outcome_codes)]

    def outcome_label(self, n: int) -> Label:
        return BASES[self.basis_codes[n]].labels[self.outcome_codes[n]]

    def to_payload(self) -> dict:
        return {"basis_codes": list(self.basis_codes), "outcome_codes": list(self.outcome_codes)}


@dataclass(frozen=True)
class AliceEncoding:
    outgoing: QuantumBlock
    kept: tuple[Carrier, ...]
    check_bits: tuple[BitPair, ...]
    decoy_positions: tuple[int, ...]


# ACTION[x][u] = index in ALL_LABELS of C_u|x> up to phase
_LABEL_INDEX = {label: n for n, label in enumerate(ALL_LABELS)}
ACTION: tuple[tuple[int, ...], ...] = tuple(
    tuple(
        _LABEL_INDEX[identify_label(apply_unitary(u, make_state(*label)))]
        for u in UNITARIES
    )
    for label in ALL_LABELS
)


def _label_index(label: Label) -> int:
    try:
        return _LABEL_INDEX[label]
    except KeyError:
        return _LABEL_INDEX[(PolState(label[0]), SpaState(label[1]))]


def infer_operation(initial: Label, outcome: Label) -> BitPair:
    """The single ``C_ij`` taking ``initial`` to ``outcome`` (up to phase)."""
    x, y = _label_index(initial), _label_index(outcome)
    hits = [u for u in range(4) if ACTION[x][u] == y]
    if len(hits) != 1:
        raise DecodeInconsistency(
            f"no unique operation maps {label_name(initial)} to {label_name(outcome)}"
        )
    return BitPair(*UNITARIES[hits[0]].label)


def bob_prepare(
    config: ProtocolConfig,
    rng: np.random.Generator,
    force_initial: Optional[Label] = None,
    force_decoy: Optional[Label] = None,
) -> PreparedSequence:
    """Twin pairs in uniformly random states with decoys at random positions."""
    n, d1, d2 = config.n_pairs, config.delta1, config.delta2
    total = config.length
    pair_labels = [force_initial] * n if force_initial else random_labels(n, rng)
    decoy_labels = [force_decoy] * (d1 + d2) if force_decoy else random_labels(d1 + d2, rng)
    decoy_pos = sample_positions(total, d1 + d2, rng)
    first = tuple(sorted(decoy_pos[:d1]))
    second = tuple(sorted(decoy_pos[d1:]))

    labels: list[Optional[Label]] = [None] * total
    for k, lab in zip(decoy_pos, decoy_labels):
        labels[k] = lab
    free = iter(k for k in range(total) if labels[k] is None)
    for lab in pair_labels:
        labels[next(free)] = lab
        labels[next(free)] = lab
    if force_initial or force_decoy:
        labels = [(PolState(p), SpaState(s)) for p, s in labels]
    return PreparedSequence(
        photons=tuple(make_state(*lab) for lab in labels),
        initial_labels=tuple(labels),
        decoy1_positions=first,
        decoy2_positions=second,
    )


def first_security_check(
    received: QuantumBlock,
    prepared: PreparedSequence,
    transcript: SessionTranscript,
    rng: np.random.Generator,
) -> CheckResult:
    """Bob reveals first-check decoys; Alice measures them; Bob compares."""
    positions = prepared.decoy1_positions
    expected = [prepared.initial_labels[k] for k in positions]
    bases = [basis_of_label(lab) for lab in expected]
    broadcast_classical(
        ClassicalMessage(
            Sender.BOB,
            MessageKind.DECOY_POSITIONS_AND_BASES,
            {"positions": list(positions), "basis_codes": [b.code for b in bases]},
        ),
        transcript,
    )
    outcomes = [measure(received.photons[k], b, rng)[0] for k, b in zip(positions, bases)]
    broadcast_classical(
        ClassicalMessage(Sender.ALICE, MessageKind.MEASUREMENT_OUTCOMES, {"outcome_codes": outcomes}),
        transcript,
    )
    mismatches = sum(
        o != b.index_of(lab) for o, b, lab in zip(outcomes, bases, expected)
    )
    return _conclude("first_check", Sender.BOB, mismatches, len(positions), transcript)


def _conclude(stage, judge, mismatches, count, transcript) -> CheckResult:
    rate = mismatches / count if count else 0.0
    if mismatches:
        broadcast_classical(
            ClassicalMessage(judge, MessageKind.ABORT, {"stage": stage, "error_rate": rate}),
            transcript,
        )
        return CheckResult(False, rate, mismatches)
    return CheckResult(True, 0.0, 0)


def alice_encode(
    secret: SecretMessage,
    sequence: Sequence[Carrier],
    decoy_positions: Sequence[int],
    rng: np.random.Generator,
    check_ops: Optional[Sequence[CompositeUnitary]] = None,
) -> AliceEncoding:
    """Encode on the first photon of each twin pair and on the check decoys.

    ``sequence`` is what remains after the first-check decoys were dropped
    and ``decoy_positions`` are Bob's announced second-check decoy indices
    in it. The encoded decoys go back at fresh random positions; the m-th
    announced position in the result holds the m-th decoy.
    """
    n = len(secret)
    d2 = len(decoy_positions)
    if len(sequence) != 2 * n + d2:
        raise SequenceShapeError(
            f"expected {2 * n + d2} photons after the first check, got {len(sequence)}"
        )
    in_decoys = set(decoy_positions)
    message = [p for k, p in enumerate(sequence) if k not in in_decoys]
    decoys = [sequence[k] for k in decoy_positions]

    encoded = [apply_unitary(unitary_for(bits), message[2 * k]) for k, bits in enumerate(secret.pairs)]
    kept = tuple(message[2 * k + 1] for k in range(n))

    if check_ops is None:
        check_ops = [UNITARIES[u] for u in uniform_ints(d2, 4, rng)]
    if len(check_ops) != d2:
        raise ValueError(f"need {d2} check operations, got {len(check_ops)}")
    check_bits = tuple(BitPair(*u.label) for u in check_ops)
    encoded_decoys = [apply_unitary(u, d) for u, d in zip(check_ops, decoys)]

    out_positions = tuple(sample_positions(n + d2, d2, rng))
    slots: list = [None] * (n + d2)
    tags: list = [None] * (n + d2)
    for m, k in enumerate(out_positions):
        slots[k] = encoded_decoys[m]
        tags[k] = f"D2.{m + 1}"
    free = iter(k for k in range(n + d2) if slots[k] is None)
    for m, photon in enumerate(encoded):
        k = next(free)
        slots[k] = photon
        tags[k] = f"L{m + 1}"
    return AliceEncoding(
        outgoing=QuantumBlock(tuple(slots), block_id=1, tags=tuple(tags)),
        kept=kept,
        check_bits=check_bits,
        decoy_positions=out_positions,
    )


def second_security_check(
    received: QuantumBlock,
    alice: AliceEncoding,
    decoy_labels: Sequence[Label],
    transcript: SessionTranscript,
    rng: np.random.Generator,
) -> CheckResult:
    """Bob decodes Alice's check bits from the returned decoys; Alice compares."""
    positions = alice.decoy_positions
    broadcast_classical(
        ClassicalMessage(Sender.ALICE, MessageKind.DECOY_POSITIONS, {"positions": list(positions)}),
        transcript,
    )
    decoded = []
    for k, initial in zip(positions, decoy_labels):
        basis = basis_of_label(initial)
        outcome, _ = measure(received.photons[k], basis, rng)
        decoded.append(infer_operation(initial, basis.labels[outcome]))
    broadcast_classical(
        ClassicalMessage(
            Sender.BOB, MessageKind.CHECK_BITS_DECODED, {"labels": [list(b) for b in decoded]}
        ),
        transcript,
    )
    mismatches = sum(a != b for a, b in zip(alice.check_bits, decoded))
    return _conclude("second_check", Sender.ALICE, mismatches, len(positions), transcript)


def restore_message_sequence(received: QuantumBlock, decoy_positions: Sequence[int]) -> list[Carrier]:
    drop = set(decoy_positions)
    return [p for k, p in enumerate(received.photons) if k not in drop]


def bob_encode_measure_announce(
    secret: SecretMessage,
    restored: Sequence[Carrier],
    pair_labels: Sequence[Label],
    rng: np.random.Generator,
    transcript: SessionTranscript,
) -> OutcomeAnnouncement:
    if len(restored) != len(secret) or len(pair_labels) != len(secret):
        raise SequenceShapeError("message sequence, records and secret differ in length")
    basis_codes, outcome_codes = [], []
    for photon, bits, initial in zip(restored, secret.pairs, pair_labels):
        basis = basis_of_label(initial)
        outcome, _ = measure(apply_unitary(unitary_for(bits), photon), basis, rng)
        basis_codes.append(basis.code)
        outcome_codes.append(outcome)
    ann = OutcomeAnnouncement(tuple(basis_codes), tuple(outcome_codes))
    broadcast_classical(
        ClassicalMessage(Sender.BOB, MessageKind.OUTCOME_ANNOUNCEMENT, ann.to_payload()), transcript
    )
    return ann


def _decode_peer(initial: Label, own: BitPair, outcome: Label, own_first: bool) -> BitPair:
    x, y = _label_index(initial), _label_index(outcome)
    own_u = unitary_for(own).index
    if own_first:
        hits = [u for u in range(4) if ACTION[ACTION[x][own_u]][u] == y]
    else:
        hits = [u for u in range(4) if ACTION[ACTION[x][u]][own_u] == y]
    if len(hits) != 1:
        raise DecodeInconsistency(
            f"cannot explain {label_name(outcome)} from {label_name(initial)} with C{own}"
        )
    return BitPair(*UNITARIES[hits[0]].label)


def bob_decode(
    announcement: OutcomeAnnouncement,
    pair_labels: Sequence[Label],
    bob_secret: SecretMessage,
) -> SecretMessage:
    """Recover Alice's symbols from the initial states Bob prepared."""
    out = []
    for n, (initial, own) in enumerate(zip(pair_labels, bob_secret.pairs)):
        if basis_of_label(initial).code != announcement.basis_codes[n]:
            raise DecodeInconsistency(f"announced basis for photon {n} is not its preparation basis")
        out.append(_decode_peer(initial, own, announcement.outcome_label(n), own_first=False))
    return SecretMessage(tuple(out))


def alice_decode(
    announcement: OutcomeAnnouncement,
    kept: Sequence[Carrier],
    alice_secret: SecretMessage,
    rng: np.random.Generator,
) -> SecretMessage:
    """Read each initial state off the kept twin, then recover Bob's symbols."""
    if len(kept) != len(alice_secret):
        raise SequenceShapeError("kept photons and secret differ in length")
    out = []
    for n, (photon, own) in enumerate(zip(kept, alice_secret.pairs)):
        basis = BASES[announcement.basis_codes[n]]
        k, _ = measure(photon, basis, rng)
        out.append(_decode_peer(basis.labels[k], own, announcement.outcome_label(n), own_first=True))
    return SecretMessage(tuple(out))


@dataclass
class SessionResult:
    alice_decoded: Optional[SecretMessage]
    bob_decoded: Optional[SecretMessage]
    aborted: bool
    transcript: SessionTranscript
    abort_stage: Optional[str] = None
    announcement: Optional[OutcomeAnnouncement] = None
    first_check: Optional[CheckResult] = None
    second_check: Optional[CheckResult] = None
    probe: object = field(default=None, repr=False)
    completed: bool = True

    def to_dict(self) -> dict:
        def bits(s):
            return s.to_bits() if s is not None else None

        return {
            "aborted": self.aborted,
            "completed": self.completed,
            "abort_stage": self.abort_stage,
            "alice_decoded": bits(self.alice_decoded),
            "bob_decoded": bits(self.bob_decoded),
            "first_check_error_rate": self.first_check.error_rate if self.first_check else None,
            "second_check_error_rate": self.second_check.error_rate if self.second_check else None,
            "announcement": self.announcement.bits() if self.announcement else None,
            "announced_outcomes": (
                [
                    {
                        "basis": BASES[b].name,
                        "outcome": label_name(self.announcement.outcome_label(n)),
                    }
                    for n, b in enumerate(self.announcement.basis_codes)
                ]
                if self.announcement
                else None
            ),
            "seed": self.transcript.seed,
        }


def run_session(
    config: ProtocolConfig,
    alice_secret: SecretMessage,
    bob_secret: SecretMessage,
    attack=None,
    rng: Optional[np.random.Generator] = None,
    force_initial: Optional[Label] = None,
    force_decoy: Optional[Label] = None,
    eve_rng: Optional[np.random.Generator] = None,
    stop_after: Optional[str] = None,
) -> SessionResult:
    """Run all five steps; any failed check aborts before decoding.

    Eve draws from ``eve_rng`` (spawned from ``rng`` when omitted) so the
    parties' own draws do not depend on which attack is active.
    ``stop_after="first_check"`` or ``"second_check"`` ends a session that
    passed that check without running the rest; ``completed`` is then false.
    """
    if stop_after not in (None, "first_check", "second_check"):
        raise ValueError(f"unknown stage {stop_after!r}")
    if len(alice_secret) != config.n_pairs or len(bob_secret) != config.n_pairs:
        raise ValueError(f"both secrets must hold {config.n_pairs} bit pairs")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    attack = attack if attack is not None else AttackStrategy()
    if eve_rng is None and attack.kind is not AttackKind.NONE:
        eve_rng = rng.spawn(1)[0]
    forward_tap, return_tap, probe = make_taps(attack, eve_rng)
    transcript = SessionTranscript(seed=config.seed)

    def aborted(stage, first=None, second=None):
        return SessionResult(
            None, None, True, transcript, stage, None, first, second, probe, completed=False
        )

    prepared = bob_prepare(config, rng, force_initial=force_initial, force_decoy=force_decoy)
    sent = QuantumBlock(prepared.photons, block_id=0, tags=prepared.tags())
    received = send_quantum(sent, forward_tap, transcript, "Bob->Alice")

    first = first_security_check(received, prepared, transcript, rng)
    if probe is not None:
        probe.measure_ancillas(eve_rng)
    if not first.passed:
        return aborted("first_check", first)
    if stop_after == "first_check":
        return SessionResult(None, None, False, transcript, first_check=first, probe=probe, completed=False)

    drop = set(prepared.decoy1_positions)
    remaining = [p for k, p in enumerate(received.photons) if k not in drop]
    d2_positions = prepared.decoy2_after_first_check()
    broadcast_classical(
        ClassicalMessage(Sender.BOB, MessageKind.DECOY_POSITIONS, {"positions": list(d2_positions)}),
        transcript,
    )
    alice = alice_encode(alice_secret, remaining, d2_positions, rng)
    returned = send_quantum(alice.outgoing, return_tap, transcript, "Alice->Bob")

    second = second_security_check(returned, alice, prepared.decoy2_labels, transcript, rng)
    if not second.passed:
        return aborted("second_check", first, second)
    if stop_after == "second_check":
        return SessionResult(
            None, None, False, transcript, first_check=first, second_check=second,
            probe=probe, completed=False,
        )

    restored = restore_message_sequence(returned, alice.decoy_positions)
    pair_labels = prepared.pair_labels
    ann = bob_encode_measure_announce(bob_secret, restored, pair_labels, rng, transcript)
    bob_decoded = bob_decode(ann, pair_labels, bob_secret)
    alice_decoded = alice_decode(ann, alice.kept, alice_secret, rng)
    return SessionResult(
        alice_decoded, bob_decoded, False, transcript, None, ann, first, second, probe
    )

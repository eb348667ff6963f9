"""Active eavesdropping strategies and their detection probabilities.

Each attack is a channel tap: a function of the intercepted block (and
Eve's own random stream) returning what she forwards. Detection is what
the decoy checks see, computed three ways: closed form, exact enumeration
over the finite state/basis sets, and Monte Carlo over whole sessions.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._random import uniform_ints
from .channel import QuantumBlock
from .photon import (
    ALL_LABELS,
    BASES,
    C10,
    JointState,
    PhotonState,
    PolState,
    SpaState,
    basis_of_label,
    make_state,
    outcome_probabilities,
    random_labels,
)


class AttackKind(str, enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept-resend"
    MEASURE_RESEND = "measure-resend"
    ENTANGLE_MEASURE = "entangle-measure"


LEGS = ("forward", "return", "both")


@dataclass(frozen=True)
class AttackStrategy:
    """Which attack Eve mounts, with which strength, on which transfer.

    ``leg`` is ``"forward"`` (Bob to Alice, guarded by the first check),
    ``"return"`` (Alice to Bob, guarded by the second) or ``"both"``.
    """

    kind: AttackKind = AttackKind.NONE
    beta: float = 0.0
    leg: str = "forward"

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.leg not in LEGS:
            raise ValueError(f"leg must be one of {LEGS}")

    @property
    def alpha(self) -> float:
        return math.sqrt(1.0 - self.beta**2)


@dataclass
class EveProbe:
    """Eve's entangled ancillas; she measures them only after the check."""

    joint_states: list = field(default_factory=list)
    ancilla_outcomes: Optional[list] = None

    def measure_ancillas(self, rng: np.random.Generator) -> list:
        if self.ancilla_outcomes is None:
            self.ancilla_outcomes = [
                int(rng.random() >= js.ancilla_probabilities()[0]) for js in self.joint_states
            ]
        return self.ancilla_outcomes


def intercept_resend_tap(block: QuantumBlock, rng: np.random.Generator) -> QuantumBlock:
    """Swap the whole block for fresh photons in uniformly random product states."""
    fakes = tuple(make_state(*lab) for lab in random_labels(len(block), rng))
    return QuantumBlock(fakes, block_id=block.block_id, tags=block.tags)


def measure_resend_tap(block: QuantumBlock, rng: np.random.Generator) -> QuantumBlock:
    """Measure each photon in a uniformly random composite basis and resend."""
    from .photon import measure

    out = []
    for photon, b in zip(block.photons, uniform_ints(len(block), 4, rng)):
        _, post = measure(photon, BASES[b], rng)
        out.append(post)
    return QuantumBlock(tuple(out), block_id=block.block_id, tags=block.tags)


_E00 = np.array([[1.0, 0.0], [0.0, 0.0]])
_E10 = np.array([[0.0, 0.0], [1.0, 0.0]])
_E01 = _E10.T
_E11 = np.array([[0.0, 0.0], [0.0, 1.0]])


@functools.lru_cache(maxsize=64)
def eve_unitary(beta: float) -> np.ndarray:
    """8x8 photon⊗ancilla map: ``|H,m,ε0⟩ -> α|H,m,ε0⟩ + β|V,m,ε1⟩``.

    The ancilla-ε0 column block applies the polarization flip with amplitude
    ``β``; the ε1 block is the orthogonal completion. The spatial mode is
    never touched.
    """
    alpha = math.sqrt(1.0 - beta**2)
    flip = C10.matrix
    i4 = np.eye(4)
    w = (
        np.kron(alpha * i4, _E00)
        + np.kron(beta * flip, _E10)
        - np.kron(beta * flip.T, _E01)
        + np.kron(alpha * i4, _E11)
    )
    w.setflags(write=False)
    return w


def entangle_measure_tap(block: QuantumBlock, beta: float) -> tuple[QuantumBlock, EveProbe]:
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    w = eve_unitary(float(beta))
    out = []
    for photon in block.photons:
        if not isinstance(photon, PhotonState):
            raise TypeError("photon is already entangled with an ancilla")
        out.append(JointState(w @ JointState.from_photon(photon).amps))
    probe = EveProbe(joint_states=list(out))
    return QuantumBlock(tuple(out), block_id=block.block_id, tags=block.tags), probe


def make_taps(attack: AttackStrategy, rng: np.random.Generator):
    """Build ``(forward_tap, return_tap, probe)`` for a session."""
    probe = EveProbe() if attack.kind is AttackKind.ENTANGLE_MEASURE else None
    if attack.kind is AttackKind.NONE:
        return None, None, None
    if attack.kind is AttackKind.INTERCEPT_RESEND:
        def tap(block):
            return intercept_resend_tap(block, rng)
    elif attack.kind is AttackKind.MEASURE_RESEND:
        def tap(block):
            return measure_resend_tap(block, rng)
    else:
        if attack.leg == "both":
            raise ValueError("entangle-measure on both legs would re-entangle a probed photon")

        def tap(block):
            out, p = entangle_measure_tap(block, attack.beta)
            probe.joint_states.extend(p.joint_states)
            return out

    forward = tap if attack.leg in ("forward", "both") else None
    back = tap if attack.leg in ("return", "both") else None
    return forward, back, probe


def _pass_given_state(state, decoy) -> float:
    basis = basis_of_label(decoy)
    return float(outcome_probabilities(state, basis)[basis.index_of(decoy)])


def exact_pass_probability(kind, beta: float = 0.0, decoy=None) -> float:
    """Per-decoy probability that the first check sees no error, by enumeration.

    Sums the Born-rule pass probability over every decoy state (or only
    ``decoy``) and every choice Eve can make, each weighted uniformly.
    """
    kind = AttackKind(kind)
    decoys = [decoy] if decoy is not None else list(ALL_LABELS)
    total = 0.0
    for d in decoys:
        if kind is AttackKind.NONE:
            total += _pass_given_state(make_state(*d), d)
        elif kind is AttackKind.INTERCEPT_RESEND:
            total += sum(_pass_given_state(make_state(*f), d) for f in ALL_LABELS) / 16
        elif kind is AttackKind.MEASURE_RESEND:
            sent = make_state(*d)
            for basis in BASES:
                probs = outcome_probabilities(sent, basis)
                total += sum(
                    p * _pass_given_state(e, d) for p, e in zip(probs, basis.eigenstates)
                ) / 4
        else:
            joint = JointState(eve_unitary(beta) @ JointState.from_photon(make_state(*d)).amps)
            total += _pass_given_state(joint, d)
    return total / len(decoys)


def flip_sensitivity(decoy=None) -> float:
    """Fraction of decoys a full polarization flip always exposes (enumerated)."""
    return 1.0 - exact_pass_probability(AttackKind.ENTANGLE_MEASURE, 1.0, decoy)


def detection_probability_closed_form(kind, delta1: int, beta: float = 0.0, decoy=None) -> float:
    """Probability that at least one of ``delta1`` first-check decoys flags Eve."""
    kind = AttackKind(kind)
    if delta1 < 0:
        raise ValueError("delta1 must be non-negative")
    if kind is AttackKind.NONE:
        return 0.0
    if kind is AttackKind.INTERCEPT_RESEND:
        return 1.0 - 0.25**delta1
    if kind is AttackKind.MEASURE_RESEND:
        return 1.0 - (9 / 16) ** delta1
    return 1.0 - (1.0 - beta**2 * flip_sensitivity(decoy)) ** delta1


# lookup tables over the sixteen labeled states, for batch simulation
_PRODUCT_AMPS = np.array([make_state(*lab).amps for lab in ALL_LABELS])
_BASIS_ROWS = np.array([b._rows for b in BASES])
_BASIS_EIG = np.array([[e.amps for e in b.eigenstates] for b in BASES])
_LABEL_BASIS = np.array([basis_of_label(lab).code for lab in ALL_LABELS])
_LABEL_SLOT = np.array([basis_of_label(lab).index_of(lab) for lab in ALL_LABELS])


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Born-rule draw per row of ``probs`` (last axis = outcomes)."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    return np.minimum((cdf <= u).sum(axis=-1), probs.shape[-1] - 1)


def simulate_first_check(
    kind, delta1: int, trials: int, rng: np.random.Generator, beta: float = 0.0, decoy=None
) -> np.ndarray:
    """Vectorized Steps 1-2 restricted to the first-check decoys.

    Returns a boolean array: whether each trial's check saw a mismatch.
    Decoys are prepared, tapped and measured with the same state vectors,
    bases and Eve unitary the session code uses, for all trials at once.
    """
    kind = AttackKind(kind)
    shape = (trials, delta1)
    if delta1 == 0:
        return np.zeros(trials, dtype=bool)
    if decoy is not None:
        labels = np.full(shape, ALL_LABELS.index((PolState(decoy[0]), SpaState(decoy[1]))))
    else:
        labels = (rng.random(shape) * 16).astype(np.intp)
    states = _PRODUCT_AMPS[labels]

    if kind is AttackKind.INTERCEPT_RESEND:
        states = _PRODUCT_AMPS[(rng.random(shape) * 16).astype(np.intp)]
    elif kind is AttackKind.MEASURE_RESEND:
        eve_bases = (rng.random(shape) * 4).astype(np.intp)
        amps = np.einsum("tdkj,tdj->tdk", _BASIS_ROWS[eve_bases], states)
        outcome = _sample_rows(np.abs(amps) ** 2, rng)
        states = _BASIS_EIG[eve_bases, outcome]

    rows = _BASIS_ROWS[_LABEL_BASIS[labels]]
    if kind is AttackKind.ENTANGLE_MEASURE:
        joint = np.zeros(shape + (8,), dtype=complex)
        joint[..., 0::2] = states
        joint = joint @ eve_unitary(float(beta)).T
        overlaps = np.einsum("tdkj,tdja->tdka", rows, joint.reshape(shape + (4, 2)))
        probs = (np.abs(overlaps) ** 2).sum(axis=-1)
    else:
        probs = np.abs(np.einsum("tdkj,tdj->tdk", rows, states)) ** 2
    seen = _sample_rows(probs, rng)
    return (seen != _LABEL_SLOT[labels]).any(axis=1)


def estimate_detection_probability(
    kind,
    config,
    trials: int,
    rng: np.random.Generator,
    beta: float = 0.0,
    force_decoy=None,
    stage: str = "first_check",
    engine: str = "session",
) -> tuple[float, float]:
    """Monte-Carlo abort rate over ``trials`` independent sessions.

    By default only aborts raised by the first check count, since that is
    what ``delta1`` controls, and each session stops once that check is
    done. ``stage="any"`` runs sessions to the end and counts every abort.
    ``engine="batch"`` replaces the per-session loop with
    :func:`simulate_first_check` (first-check stage only).
    """
    from .protocol import SecretMessage, run_session

    if trials < 1:
        raise ValueError("trials must be >= 1")
    if stage not in ("first_check", "second_check", "any"):
        raise ValueError(f"unknown stage {stage!r}")
    stop_after = None if stage == "any" else stage
    if engine == "batch":
        if stage != "first_check":
            raise ValueError("the batch engine only simulates the first check")
        hits = int(simulate_first_check(kind, config.delta1, trials, rng, beta, force_decoy).sum())
        p = hits / trials
        return p, math.sqrt(p * (1.0 - p) / trials)
    if engine != "session":
        raise ValueError(f"unknown engine {engine!r}")
    attack = AttackStrategy(kind, beta=beta)
    eve_rng = rng.spawn(1)[0]
    hits = 0
    for _ in range(trials):
        alice = SecretMessage.random(config.n_pairs, rng)
        bob = SecretMessage.random(config.n_pairs, rng)
        res = run_session(
            config, alice, bob, attack, rng,
            force_decoy=force_decoy, eve_rng=eve_rng, stop_after=stop_after,
        )
        if res.aborted and (stage == "any" or res.abort_stage == stage):
            hits += 1
    p = hits / trials
    return p, math.sqrt(p * (1.0 - p) / trials)

"""What an outsider learns from Bob's public outcome announcement.

For a photon prepared in ``x`` and encoded with ``C_bob · C_alice``, the
announcement reveals the preparation basis and the resulting eigenstate but
not ``x``. Enumerating every ``x`` in that basis gives the eavesdropper's
candidate set for both parties' symbols.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .photon import (
    BASES,
    UNITARIES,
    CompositeBasis,
    PolState,
    SpaState,
    apply_unitary,
    identify_label,
    label_name,
    make_state,
)
from .protocol import BitPair

Label = tuple[PolState, SpaState]
OpPair = tuple[BitPair, BitPair]  # (Alice's symbol, Bob's symbol)


class DivisionDomain(ZeroDivisionError):
    """Efficiency is undefined when no qubits and no classical bits are spent."""


@dataclass(frozen=True)
class RelationTable:
    """Outcome label for every (Bob op, Alice op) on one initial state.

    ``cells[b][a]`` is the phase-free label of ``C_b C_a |initial⟩``;
    ``signed[b][a]`` keeps the sign the state vector actually carries.
    """

    initial: Label
    cells: tuple[tuple[Label, ...], ...]
    signed: tuple[tuple[int, ...], ...]

    def cell(self, bob: BitPair | tuple, alice: BitPair | tuple) -> Label:
        return self.cells[2 * bob[0] + bob[1]][2 * alice[0] + alice[1]]

    def rows(self, show_sign: bool = False) -> list[list[str]]:
        out = []
        for b in range(4):
            row = []
            for a in range(4):
                name = label_name(self.cells[b][a])
                row.append(("-" if self.signed[b][a] < 0 else "+") + name if show_sign else name)
            out.append(row)
        return out


OP_NAMES = ("I_P⊗I_S", "I_P⊗U_S", "U_P⊗I_S", "U_P⊗U_S")


def build_relation_table(initial: Label) -> RelationTable:
    initial = (PolState(initial[0]), SpaState(initial[1]))
    start = make_state(*initial)
    cells, signs = [], []
    for bob in UNITARIES:
        row, srow = [], []
        for alice in UNITARIES:
            out = apply_unitary(bob, apply_unitary(alice, start))
            label = identify_label(out)
            ref = make_state(*label)
            row.append(label)
            srow.append(1 if np.vdot(ref.amps, out.amps).real > 0 else -1)
        cells.append(tuple(row))
        signs.append(tuple(srow))
    return RelationTable(initial, tuple(cells), tuple(signs))


@dataclass(frozen=True)
class CandidateSet:
    """Eve's hypotheses about both symbols, each with its probability.

    ``by_initial`` keeps the split by guessed initial state.
    """

    candidates: tuple[tuple[OpPair, float], ...]
    by_initial: tuple[tuple[Label, tuple[OpPair, ...]], ...] = ()

    def __post_init__(self):
        total = sum(p for _, p in self.candidates)
        if self.candidates and abs(total - 1.0) > 1e-12:
            raise ValueError(f"candidate probabilities sum to {total}, not 1")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.candidates])

    def __len__(self) -> int:
        return len(self.candidates)


def candidates_for_initial(initial: Label, outcome: Label) -> tuple[OpPair, ...]:
    """Op pairs that take ``initial`` to ``outcome``, ordered by Alice's symbol."""
    table = build_relation_table(initial)
    outcome = (PolState(outcome[0]), SpaState(outcome[1]))
    found = []
    for a, b in itertools.product(range(4), range(4)):
        if table.cells[b][a] == outcome:
            found.append((BitPair(*UNITARIES[a].label), BitPair(*UNITARIES[b].label)))
    return tuple(found)


def eve_candidate_set(basis: CompositeBasis | int, outcome: Label | int) -> CandidateSet:
    """Uniform prior over the four possible initial states in ``basis``."""
    if isinstance(basis, int):
        basis = BASES[basis]
    if isinstance(outcome, int):
        outcome = basis.labels[outcome]
    split = []
    weighted = []
    for initial in basis.labels:
        pairs = candidates_for_initial(initial, outcome)
        split.append((initial, pairs))
        weighted += [(pair, 0.25 / len(pairs)) for pair in pairs]
    return CandidateSet(tuple(weighted), tuple(split))


def leakage_entropy(cs: CandidateSet | np.ndarray) -> float:
    """Shannon entropy in bits of the candidate distribution."""
    probs = cs.probabilities if isinstance(cs, CandidateSet) else np.asarray(cs, dtype=float)
    probs = probs[probs > 0]
    return float(-(probs * np.log2(probs)).sum()) + 0.0


def leakage_report() -> list[dict]:
    """Entropy of Eve's candidate set for all sixteen possible announcements."""
    rows = []
    for basis in BASES:
        for k, outcome in enumerate(basis.labels):
            cs = eve_candidate_set(basis, outcome)
            rows.append(
                {
                    "basis": basis.name,
                    "basis_code": basis.code,
                    "outcome": label_name(outcome),
                    "outcome_code": k,
                    "candidates": len(cs),
                    "entropy_bits": leakage_entropy(cs),
                }
            )
    return rows


@dataclass(frozen=True)
class EfficiencyInput:
    """Secret bits delivered, qubits used, classical bits exchanged."""

    v_c: float
    q_t: float
    v_t: float

    def __post_init__(self):
        if min(self.v_c, self.q_t, self.v_t) < 0:
            raise ValueError("efficiency inputs must be non-negative")


def cabello_efficiency(e: EfficiencyInput) -> float:
    """``v_c / (q_t + v_t)``."""
    spent = e.q_t + e.v_t
    if spent == 0:
        raise DivisionDomain("q_t + v_t must be positive")
    return e.v_c / spent


@dataclass(frozen=True)
class ProtocolFigures:
    name: str
    figures: EfficiencyInput
    photons_per_exchange: int
    bits_per_exchange: int
    unitaries: Optional[int] = None

    @property
    def efficiency(self) -> float:
        return cabello_efficiency(self.figures)


# one twin pair carries two bits each way; Bob announces four bits
THIS_PROTOCOL = ProtocolFigures("two-DOF twin-photon dialogue", EfficiencyInput(4, 4, 4), 2, 4, 4)
COMPARISONS = (
    # one two-DOF photon, one bit each way, two announced bits, seven unitaries
    ProtocolFigures("two-DOF single-photon dialogue, revised encoding", EfficiencyInput(2, 2, 2), 1, 2, 7),
    # two one-DOF photons, one bit each way, two announced bits
    ProtocolFigures("one-DOF twin-photon dialogue", EfficiencyInput(2, 2, 2), 2, 2, None),
)


def efficiency_report() -> dict:
    one_dof = COMPARISONS[1]
    rows = []
    for p in (THIS_PROTOCOL, *COMPARISONS):
        rows.append(
            {
                "protocol": p.name,
                "v_c": p.figures.v_c,
                "q_t": p.figures.q_t,
                "v_t": p.figures.v_t,
                "efficiency": p.efficiency,
                "bits_per_photon_pair": p.bits_per_exchange * 2 // p.photons_per_exchange,
                "unitaries": p.unitaries,
            }
        )
    # capacity compares bits carried by one photon pair
    ratio = (THIS_PROTOCOL.bits_per_exchange * 2 / THIS_PROTOCOL.photons_per_exchange) / (
        one_dof.bits_per_exchange * 2 / one_dof.photons_per_exchange
    )
    return {"rows": rows, "capacity_ratio": ratio}

"""Single-photon states in polarization and spatial-mode degrees of freedom.

Amplitudes are stored over the fixed product basis
``(H⊗b1, H⊗b2, V⊗b1, V⊗b2)``. A :class:`JointState` extends this with a
two-level ancilla held by an eavesdropper, ordered as photon index major,
ancilla index minor.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ._random import uniform_ints

NORM_TOL = 1e-12
PHASE_TOL = 1e-9

_SQRT_HALF = 1.0 / np.sqrt(2.0)


class PolState(str, enum.Enum):
    H = "H"
    V = "V"
    R = "R"
    A = "A"


class SpaState(str, enum.Enum):
    b1 = "b1"
    b2 = "b2"
    s = "s"
    a = "a"


_POL_VECTORS = {
    PolState.H: np.array([1.0, 0.0]),
    PolState.V: np.array([0.0, 1.0]),
    PolState.R: np.array([_SQRT_HALF, _SQRT_HALF]),
    PolState.A: np.array([_SQRT_HALF, -_SQRT_HALF]),
}
_SPA_VECTORS = {
    SpaState.b1: np.array([1.0, 0.0]),
    SpaState.b2: np.array([0.0, 1.0]),
    SpaState.s: np.array([_SQRT_HALF, _SQRT_HALF]),
    SpaState.a: np.array([_SQRT_HALF, -_SQRT_HALF]),
}

#: Polarization basis name -> its two eigenstates in canonical order.
POL_BASES = {"Zp": (PolState.H, PolState.V), "Xp": (PolState.R, PolState.A)}
#: Spatial basis name -> its two eigenstates in canonical order.
SPA_BASES = {"Zs": (SpaState.b1, SpaState.b2), "Xs": (SpaState.s, SpaState.a)}


def pol_basis_of(pol: PolState) -> str:
    return "Zp" if pol in (PolState.H, PolState.V) else "Xp"


def spa_basis_of(spa: SpaState) -> str:
    return "Zs" if spa in (SpaState.b1, SpaState.b2) else "Xs"


def _check_norm(amps: np.ndarray) -> None:
    norm = float(np.vdot(amps, amps).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm^2 = {norm!r})")


@dataclass(frozen=True, eq=False)
class PhotonState:
    """Pure state of one photon; ``amps`` has four complex entries."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(4)
        _check_norm(amps)
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def _trusted(cls, amps: np.ndarray) -> PhotonState:
        # for results of unitary maps on already-validated states
        obj = object.__new__(cls)
        amps.setflags(write=False)
        object.__setattr__(obj, "amps", amps)
        return obj

    def __neg__(self) -> PhotonState:
        return PhotonState(-self.amps)

    def __repr__(self) -> str:
        label = identify_label(self)
        if label is not None:
            return f"PhotonState(|{label[0].value}⟩⊗|{label[1].value}⟩)"
        return f"PhotonState({np.round(self.amps, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class JointState:
    """Photon entangled with a two-level ancilla (eight amplitudes)."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(8)
        _check_norm(amps)
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_photon(cls, photon: PhotonState, ancilla: int = 0) -> JointState:
        amps = np.zeros(8, dtype=complex)
        amps[ancilla::2] = photon.amps
        return cls(amps)

    def ancilla_probabilities(self) -> np.ndarray:
        """Marginal probabilities of the ancilla states ``ε0``, ``ε1``."""
        grid = np.abs(self.amps.reshape(4, 2)) ** 2
        return grid.sum(axis=0)


#: Anything that can travel through the quantum channel.
Carrier = Union[PhotonState, JointState]


def _product(pol: PolState | str, spa: SpaState | str) -> PhotonState:
    return PhotonState(np.kron(_POL_VECTORS[PolState(pol)], _SPA_VECTORS[SpaState(spa)]))


_PRODUCTS = {(p, s): _product(p, s) for p in PolState for s in SpaState}


def make_state(pol: PolState | str, spa: SpaState | str) -> PhotonState:
    """Return the product state ``|pol⟩⊗|spa⟩``."""
    try:
        return _PRODUCTS[pol, spa]
    except KeyError:
        return _PRODUCTS[PolState(pol), SpaState(spa)]


#: All sixteen labeled product states, polarization major.
ALL_LABELS: tuple[tuple[PolState, SpaState], ...] = tuple(
    itertools.product(PolState, SpaState)
)


@dataclass(frozen=True, eq=False)
class CompositeBasis:
    """Product of one polarization and one spatial measuring basis."""

    pol_basis: str
    spa_basis: str
    labels: tuple[tuple[PolState, SpaState], ...] = field(init=False)
    eigenstates: tuple[PhotonState, ...] = field(init=False)
    _rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.pol_basis not in POL_BASES or self.spa_basis not in SPA_BASES:
            raise ValueError(f"unknown basis {self.pol_basis}⊗{self.spa_basis}")
        labels = tuple(
            itertools.product(POL_BASES[self.pol_basis], SPA_BASES[self.spa_basis])
        )
        eig = tuple(make_state(p, s) for p, s in labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "eigenstates", eig)
        object.__setattr__(self, "_rows", np.array([e.amps.conj() for e in eig]))

    @property
    def name(self) -> str:
        return f"{self.pol_basis}⊗{self.spa_basis}"

    @property
    def code(self) -> int:
        """Two-bit code: 0 Zp⊗Zs, 1 Zp⊗Xs, 2 Xp⊗Zs, 3 Xp⊗Xs."""
        return 2 * (self.pol_basis == "Xp") + (self.spa_basis == "Xs")

    def index_of(self, label: tuple[PolState, SpaState]) -> int:
        if label in self.labels:
            return self.labels.index(label)
        return self.labels.index((PolState(label[0]), SpaState(label[1])))

    def __repr__(self) -> str:
        return f"CompositeBasis({self.name})"


BASES: tuple[CompositeBasis, ...] = tuple(
    CompositeBasis(p, s) for p in ("Zp", "Xp") for s in ("Zs", "Xs")
)


_BASIS_OF = {label: b for b in BASES for label in b.labels}


def random_labels(n: int, rng: np.random.Generator) -> list[tuple[PolState, SpaState]]:
    """``n`` labels drawn uniformly from the sixteen product states."""
    return [ALL_LABELS[k] for k in uniform_ints(n, 16, rng)]


def basis_from_code(code: int) -> CompositeBasis:
    return BASES[code]


def basis_of_label(label: tuple[PolState, SpaState]) -> CompositeBasis:
    """The composite basis in which a labeled product state is an eigenstate."""
    try:
        return _BASIS_OF[label]
    except KeyError:
        pass
    pol, spa = PolState(label[0]), SpaState(label[1])
    return BASES[2 * (pol_basis_of(pol) == "Xp") + (spa_basis_of(spa) == "Xs")]


def label_name(label: tuple[PolState, SpaState]) -> str:
    return f"{PolState(label[0]).value}⊗{SpaState(label[1]).value}"


# single-DOF operators; rows/cols are (H, V) or (b1, b2)
I2 = np.eye(2)
FLIP = np.array([[0.0, -1.0], [1.0, 0.0]])  # |1><0| - |0><1|
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) * _SQRT_HALF


@dataclass(frozen=True, eq=False)
class CompositeUnitary:
    """``C_ij``: polarization flip if ``i``, spatial flip if ``j``."""

    i: int
    j: int
    matrix: np.ndarray = field(init=False, repr=False)
    joint_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.i not in (0, 1) or self.j not in (0, 1):
            raise ValueError(f"bad composite unitary label ({self.i}, {self.j})")
        m = np.kron(FLIP if self.i else I2, FLIP if self.j else I2)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        # same map acting on photon⊗ancilla
        object.__setattr__(self, "joint_matrix", np.kron(m, I2))

    @property
    def label(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def index(self) -> int:
        return 2 * self.i + self.j

    def __repr__(self) -> str:
        return f"C{self.i}{self.j}"


C00 = CompositeUnitary(0, 0)
C01 = CompositeUnitary(0, 1)
C10 = CompositeUnitary(1, 0)
C11 = CompositeUnitary(1, 1)
UNITARIES: tuple[CompositeUnitary, ...] = (C00, C01, C10, C11)


def unitary_for(bits) -> CompositeUnitary:
    """Look up ``C_ij`` from a ``(i, j)`` pair."""
    i, j = bits
    return UNITARIES[2 * int(i) + int(j)]


def apply_unitary(u: CompositeUnitary, state: Carrier) -> Carrier:
    """Apply a composite unitary to the photon (ancilla untouched)."""
    if isinstance(state, JointState):
        return JointState(u.joint_matrix @ state.amps)
    return PhotonState._trusted(u.matrix @ state.amps)


_SPATIAL_H = np.kron(I2, HADAMARD)


def spatial_hadamard(state: PhotonState) -> PhotonState:
    """Beam-splitter action on the spatial mode: b1 -> s, b2 -> a."""
    return PhotonState(_SPATIAL_H @ state.amps)


def outcome_probabilities(state: Carrier, basis: CompositeBasis) -> np.ndarray:
    """Born-rule probabilities of the four eigenstates of ``basis``."""
    if isinstance(state, JointState):
        overlaps = basis._rows @ state.amps.reshape(4, 2)
        return (np.abs(overlaps) ** 2).sum(axis=1)
    return np.abs(basis._rows @ state.amps) ** 2


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    probs = probs.tolist()
    u = rng.random() * sum(probs)
    last = 0
    for k, p in enumerate(probs):
        if p > 0.0:
            last = k
            u -= p
            if u < 0.0:
                return k
    # float round-off at the top of the cdf
    return last


def measure(
    state: Carrier, basis: CompositeBasis, rng: np.random.Generator
) -> tuple[int, Carrier]:
    """Projective measurement; returns the outcome index and the collapsed state.

    A photon collapses to the phase-free eigenstate. For a :class:`JointState`
    the photon part is projected and the ancilla keeps its conditional state.
    """
    probs = outcome_probabilities(state, basis)
    k = _sample(probs, rng)
    if isinstance(state, JointState):
        row = basis._rows[k]
        ancilla = row @ state.amps.reshape(4, 2)
        ancilla = ancilla / np.sqrt(probs[k])
        return k, JointState(np.outer(basis.eigenstates[k].amps, ancilla).reshape(8))
    return k, basis.eigenstates[k]


def equal_up_to_phase(a: PhotonState, b: PhotonState) -> bool:
    return abs(abs(np.vdot(a.amps, b.amps)) - 1.0) <= PHASE_TOL


_LABEL_STATES = [(label, make_state(*label)) for label in ALL_LABELS]


def identify_label(state: PhotonState) -> tuple[PolState, SpaState] | None:
    """Return the labeled product state equal to ``state`` up to phase, if any."""
    for label, ref in _LABEL_STATES:
        if equal_up_to_phase(ref, state):
            return label
    return None

"""Two-way quantum secret exchange with single photons in polarization and spatial mode."""

from .adversary import (
    AttackKind,
    AttackStrategy,
    EveProbe,
    detection_probability_closed_form,
    entangle_measure_tap,
    estimate_detection_probability,
    exact_pass_probability,
    intercept_resend_tap,
    measure_resend_tap,
)
from .channel import (
    ClassicalMessage,
    LengthMismatch,
    MessageKind,
    QuantumBlock,
    SessionAborted,
    SessionTranscript,
    broadcast_classical,
    send_quantum,
)
from .leakage import (
    CandidateSet,
    DivisionDomain,
    EfficiencyInput,
    RelationTable,
    build_relation_table,
    cabello_efficiency,
    eve_candidate_set,
    leakage_entropy,
)
from .photon import (
    BASES,
    C00,
    C01,
    C10,
    C11,
    UNITARIES,
    CompositeBasis,
    CompositeUnitary,
    JointState,
    PhotonState,
    PolState,
    SpaState,
    apply_unitary,
    equal_up_to_phase,
    make_state,
    measure,
    outcome_probabilities,
    spatial_hadamard,
)
from .protocol import (
    BitPair,
    DecodeInconsistency,
    OutcomeAnnouncement,
    PreparedSequence,
    ProtocolConfig,
    SecretMessage,
    SequenceShapeError,
    SessionResult,
    alice_decode,
    alice_encode,
    bob_decode,
    bob_encode_measure_announce,
    bob_prepare,
    first_security_check,
    run_session,
    second_security_check,
)

__version__ = "0.1.0"

"""Splitting one qubit of quantum information between two receivers.

Alice fuses the qubit with her particle of a shared GHZ triplet and measures
the pair in the Bell basis; she then picks one partner at random to end up
with the qubit. The other partner measures along X and sends the sign; the
chosen receiver applies a two-entry correction word determined by Alice's
two bits and the helper's one bit. Neither partner alone learns anything
about the qubit, and a cheater who grabbed both travelling particles risks
detection whenever the other partner is chosen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .keyshare import Announcement, PartyId
from .quantum import (
    Basis,
    DensityMatrix,
    OrthonormalFamily,
    Outcome,
    Pauli,
    StateVector,
    apply_pauli_word,
    compose,
    ghz,
    measure_family,
    measure_qubit,
    project_family,
    project_qubit,
    qubit_state,
    reduced_density,
)
from .rng import RandomStream

FIDELITY_TOL = 1e-10
KNOWLEDGE_TOL = 1e-12


class BellOutcome(Enum):
    """Alice's two-bit measurement result on (input qubit, her GHZ particle)."""

    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"


BELL_OUTCOMES = (
    BellOutcome.PSI_PLUS,
    BellOutcome.PSI_MINUS,
    BellOutcome.PHI_PLUS,
    BellOutcome.PHI_MINUS,
)

_H = 1.0 / math.sqrt(2.0)


def _bell_vector(c00: complex, c01: complex, c10: complex, c11: complex) -> StateVector:
    return StateVector(np.array([c00, c01, c10, c11], dtype=complex), (2, 2))


# psi+/- pair the 00/11 components, phi+/- the 01/10 components.
BELL_FAMILY = OrthonormalFamily(
    subset=(0, 1),
    vectors=(
        _bell_vector(_H, 0, 0, _H),
        _bell_vector(_H, 0, 0, -_H),
        _bell_vector(0, _H, _H, 0),
        _bell_vector(0, _H, -_H, 0),
    ),
)


class AuditStage(Enum):
    AFTER_BELL_UNANNOUNCED = "after-bell-unannounced"
    AFTER_HELPER_MEASUREMENT_UNANNOUNCED = "after-helper-measurement-unannounced"
    AFTER_ALICE_ANNOUNCEMENT = "after-alice-announcement"


@dataclass(frozen=True)
class InputQubit:
    """The qubit to split: alpha|0> + beta|1>, normalized."""

    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        a = complex(self.alpha)
        b = complex(self.beta)
        norm_sq = abs(a) ** 2 + abs(b) ** 2
        if not (np.isfinite(norm_sq) and abs(norm_sq - 1.0) <= 1e-12):
            raise ValueError(f"input amplitudes must be normalized, |a|^2+|b|^2={norm_sq!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def as_state(self) -> StateVector:
        return qubit_state(self.alpha, self.beta)

    @classmethod
    def random(cls, rng: RandomStream) -> "InputQubit":
        raw = rng.generator.normal(size=4)
        vec = np.array([raw[0] + 1j * raw[1], raw[2] + 1j * raw[3]])
        norm = np.linalg.norm(vec)
        if norm < 1e-6:
            return cls.random(rng)
        vec = vec / norm
        return cls(complex(vec[0]), complex(vec[1]))

    def to_json_dict(self) -> dict:
        return {
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
        }


# Correction the receiver applies, keyed by (Alice's Bell result, helper's X
# sign). Words act rightmost-first; each reconstructs the input up to a
# global sign.
CORRECTIONS: dict[tuple[BellOutcome, Outcome], tuple[Pauli, ...]] = {
    (BellOutcome.PSI_PLUS, Outcome.PLUS): (Pauli.I,),
    (BellOutcome.PSI_PLUS, Outcome.MINUS): (Pauli.Z,),
    (BellOutcome.PSI_MINUS, Outcome.PLUS): (Pauli.Z,),
    (BellOutcome.PSI_MINUS, Outcome.MINUS): (Pauli.I,),
    (BellOutcome.PHI_PLUS, Outcome.PLUS): (Pauli.X,),
    (BellOutcome.PHI_PLUS, Outcome.MINUS): (Pauli.X, Pauli.Z),
    (BellOutcome.PHI_MINUS, Outcome.PLUS): (Pauli.X, Pauli.Z),
    (BellOutcome.PHI_MINUS, Outcome.MINUS): (Pauli.X,),
}


def correction_for(bell: BellOutcome, helper: Outcome) -> tuple[Pauli, ...]:
    """The receiver's correction word for a (Bell result, helper sign) pair."""
    return CORRECTIONS[(bell, helper)]


@dataclass
class SplitTranscript:
    """One splitting run, with enough detail to audit every message."""

    run_index: int
    input: InputQubit
    bell_outcome: BellOutcome
    receiver: PartyId
    helper_outcome: Outcome
    correction: tuple[Pauli, ...]
    output_state: StateVector
    fidelity: float
    messages: list[Announcement]

    def to_json_dict(self) -> dict:
        out = self.output_state.amps
        return {
            "run_index": self.run_index,
            "input": self.input.to_json_dict(),
            "bell_outcome": self.bell_outcome.value,
            "receiver": self.receiver.value,
            "helper_outcome": self.helper_outcome.value,
            "correction": [p.value for p in self.correction],
            "output_state": [[z.real, z.imag] for z in out],
            "fidelity": float(f"{self.fidelity:.12g}"),
            "messages": [m.to_json_dict() for m in self.messages],
        }


_RECEIVER_QUBIT = {PartyId.BOB: 2, PartyId.CHARLIE: 3}


def _extract_pure_qubit(state: StateVector, qubit: int) -> StateVector:
    rho = reduced_density(state, [qubit])
    values, vectors = np.linalg.eigh(rho.entries)
    if values[-1] < 1.0 - 1e-9:
        raise RuntimeError("subsystem is not pure; extraction is ill-defined")
    return StateVector(np.ascontiguousarray(vectors[:, -1]), (2,))


def split_qubit(
    input_qubit: InputQubit,
    rng: RandomStream,
    *,
    receiver_choice: PartyId | None = None,
    force_bell: BellOutcome | None = None,
    force_helper: Outcome | None = None,
    run_index: int = 0,
) -> SplitTranscript:
    """Run the full splitting protocol for one qubit.

    Branches are sampled with their Born probabilities unless forced (forcing
    post-selects the branch, which is how tests sweep all of them). Alice's
    two-bit Bell message is sent only after both partners confirm receipt of
    a particle; the helper's one bit follows it.
    """
    if receiver_choice is not None and receiver_choice not in _RECEIVER_QUBIT:
        raise ValueError(f"receiver must be Bob or Charlie, got {receiver_choice}")

    state = compose(input_qubit.as_state(), ghz(3))

    if force_bell is not None:
        _, state = project_family(state, BELL_FAMILY, BELL_OUTCOMES.index(force_bell))
        bell = force_bell
    else:
        index, state = measure_family(state, BELL_FAMILY, rng)
        bell = BELL_OUTCOMES[index]

    if receiver_choice is not None:
        receiver = receiver_choice
    else:
        receiver = PartyId.BOB if rng.bit() == 0 else PartyId.CHARLIE
    helper = PartyId.CHARLIE if receiver is PartyId.BOB else PartyId.BOB
    helper_qubit = _RECEIVER_QUBIT[helper]
    receiver_qubit = _RECEIVER_QUBIT[receiver]

    if force_helper is not None:
        _, state = project_qubit(state, helper_qubit, Basis.X, force_helper)
        helper_outcome = force_helper
    else:
        helper_outcome, state = measure_qubit(state, helper_qubit, Basis.X, rng)

    word = correction_for(bell, helper_outcome)
    state = apply_pauli_word(state, receiver_qubit, word)

    output = _extract_pure_qubit(state, receiver_qubit)
    rho = reduced_density(state, [receiver_qubit])
    in_vec = input_qubit.as_state().amps
    fid = float(np.real(np.conj(in_vec) @ rho.entries @ in_vec))

    alice = PartyId.ALICE
    messages = [
        Announcement(PartyId.BOB, (alice,), {"received_particle": True}),
        Announcement(PartyId.CHARLIE, (alice,), {"received_particle": True}),
        Announcement(alice, (receiver,), {"bell_outcome": bell.value}),
        Announcement(helper, (receiver,), {"x_outcome": helper_outcome.value}),
    ]
    return SplitTranscript(
        run_index=run_index,
        input=input_qubit,
        bell_outcome=bell,
        receiver=receiver,
        helper_outcome=helper_outcome,
        correction=word,
        output_state=output,
        fidelity=fid,
        messages=messages,
    )


def _branch_states(input_qubit: InputQubit):
    """Exact (probability, post-Bell state) pairs for each Bell outcome."""
    state = compose(input_qubit.as_state(), ghz(3))
    for index, bell in enumerate(BELL_OUTCOMES):
        prob, post = project_family(state, BELL_FAMILY, index)
        yield bell, prob, post


def intermediate_knowledge_audit(
    stage: AuditStage, transcript: SplitTranscript
) -> dict[PartyId, DensityMatrix]:
    """Each partner's best description of the qubit-carrying particle.

    For every non-dealer party, returns the density matrix of the designated
    receiver's particle conditioned on the classical information that party
    holds at the given stage, averaging (with exact probabilities) over
    everything it has not seen. Before Alice announces her result both
    matrices are maximally mixed; after it, the receiver learns the
    amplitudes but nothing about the phase.
    """
    receiver = transcript.receiver
    helper = PartyId.CHARLIE if receiver is PartyId.BOB else PartyId.BOB
    receiver_qubit = _RECEIVER_QUBIT[receiver]
    helper_qubit = _RECEIVER_QUBIT[helper]

    branch: dict[BellOutcome, tuple[float, StateVector]] = {}
    for bell, prob, post in _branch_states(transcript.input):
        branch[bell] = (prob, post)

    def receiver_rho(state: StateVector) -> np.ndarray:
        return reduced_density(state, [receiver_qubit]).entries

    if stage is AuditStage.AFTER_BELL_UNANNOUNCED:
        # Helper has not measured; nobody outside Alice knows anything.
        mixed = sum(p * receiver_rho(s) for p, s in branch.values())
        rho = DensityMatrix(mixed)
        return {helper: rho, receiver: rho}

    # Exact joint weights over (Bell result, helper sign).
    weights: dict[tuple[BellOutcome, Outcome], tuple[float, np.ndarray]] = {}
    for bell, (p_bell, post) in branch.items():
        for outcome in (Outcome.PLUS, Outcome.MINUS):
            p_m, collapsed = project_qubit(post, helper_qubit, Basis.X, outcome)
            weights[(bell, outcome)] = (p_bell * p_m, receiver_rho(collapsed))

    def mix(pairs) -> DensityMatrix:
        total = sum(p for p, _ in pairs)
        return DensityMatrix(sum((p / total) * r for p, r in pairs))

    helper_view = mix(
        [weights[(bell, transcript.helper_outcome)] for bell in BELL_OUTCOMES]
    )

    if stage is AuditStage.AFTER_HELPER_MEASUREMENT_UNANNOUNCED:
        receiver_view = mix(list(weights.values()))
    elif stage is AuditStage.AFTER_ALICE_ANNOUNCEMENT:
        receiver_view = mix(
            [weights[(transcript.bell_outcome, o)] for o in (Outcome.PLUS, Outcome.MINUS)]
        )
    else:
        raise ValueError(f"unknown audit stage {stage}")
    return {helper: helper_view, receiver: receiver_view}


@dataclass
class CheatRunRecord:
    """Per-run observables of the dishonest-Charlie experiment."""

    run_index: int
    receiver: PartyId
    bell_outcome: BellOutcome
    is_test_round: bool
    fidelity: float
    detected: bool

    def to_json_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "receiver": self.receiver.value,
            "bell_outcome": self.bell_outcome.value,
            "is_test_round": self.is_test_round,
            "fidelity": float(f"{self.fidelity:.12g}"),
            "detected": self.detected,
        }


@dataclass
class CheatReport:
    """Aggregate of the dishonest-Charlie experiment.

    Detection rates are exact per-run detection probabilities (one minus the
    reconstruction fidelity on compared rounds), averaged; ``sampled_detections``
    counts the Bernoulli draws that actually fired.
    """

    runs: int
    bob_chosen: int
    charlie_chosen: int
    test_rounds_bob_chosen: int
    mean_fidelity_when_bob_chosen: float | None
    detection_rate_when_bob_chosen: float | None
    detection_rate_when_charlie_chosen: float
    sampled_detections: int
    records: list[CheatRunRecord]

    def to_json_dict(self) -> dict:
        return {
            "runs": self.runs,
            "bob_chosen": self.bob_chosen,
            "charlie_chosen": self.charlie_chosen,
            "test_rounds_bob_chosen": self.test_rounds_bob_chosen,
            "mean_fidelity_when_bob_chosen": self.mean_fidelity_when_bob_chosen,
            "detection_rate_when_bob_chosen": self.detection_rate_when_bob_chosen,
            "detection_rate_when_charlie_chosen": self.detection_rate_when_charlie_chosen,
            "sampled_detections": self.sampled_detections,
        }


def charlie_cheat_experiment(
    n_runs: int,
    rng: RandomStream,
    *,
    test_fraction: float = 0.2,
    substitute: InputQubit | None = None,
) -> CheatReport:
    """Charlie grabs both travelling particles and sends Bob a substitute.

    Default strategy: Charlie performs the helper's X measurement on the
    intercepted particle himself and forwards a fresh ``substitute`` qubit
    (|0> unless overridden) to Bob. When Alice picks Charlie as receiver the
    cheat is undetectable; when she picks Bob, test rounds compare Bob's
    reconstruction against the known input and flag a mismatch with
    probability one minus the fidelity.
    """
    if n_runs < 1:
        raise ValueError(f"need at least one run, got {n_runs}")
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError(f"test fraction must lie in [0, 1], got {test_fraction}")
    substitute = substitute if substitute is not None else InputQubit(1.0, 0.0)

    records: list[CheatRunRecord] = []
    bob_fidelities: list[float] = []
    bob_test_infidelities: list[float] = []
    sampled_detections = 0
    bob_chosen = 0
    charlie_chosen = 0
    test_rounds_bob = 0

    for i in range(n_runs):
        run_rng = rng.child(i)
        input_qubit = InputQubit.random(run_rng)
        state = compose(input_qubit.as_state(), ghz(3))
        index, state = measure_family(state, BELL_FAMILY, run_rng)
        bell = BELL_OUTCOMES[index]
        # Charlie measures the intercepted particle (Bob's slot) along X
        # before learning who the receiver will be.
        stolen_outcome, state = measure_qubit(state, 2, Basis.X, run_rng)

        receiver = PartyId.BOB if run_rng.bit() == 0 else PartyId.CHARLIE
        is_test = run_rng.random() < test_fraction
        detected = False

        if receiver is PartyId.CHARLIE:
            charlie_chosen += 1
            # Charlie holds the genuine particle and both classical bits.
            word = correction_for(bell, stolen_outcome)
            final = apply_pauli_word(state, 3, word)
            rho = reduced_density(final, [3]).entries
            in_vec = input_qubit.as_state().amps
            fid = float(np.real(np.conj(in_vec) @ rho @ in_vec))
        else:
            bob_chosen += 1
            # Bob reconstructs from the substitute; Charlie reports the X sign
            # he measured on the stolen particle.
            word = correction_for(bell, stolen_outcome)
            recon = apply_pauli_word(substitute.as_state(), 0, word)
            in_vec = input_qubit.as_state().amps
            fid = float(abs(np.vdot(in_vec, recon.amps)) ** 2)
            bob_fidelities.append(fid)
            if is_test:
                test_rounds_bob += 1
                bob_test_infidelities.append(1.0 - fid)
                detected = run_rng.random() < (1.0 - fid)
                if detected:
                    sampled_detections += 1

        records.append(
            CheatRunRecord(
                run_index=i,
                receiver=receiver,
                bell_outcome=bell,
                is_test_round=is_test,
                fidelity=fid,
                detected=detected,
            )
        )

    return CheatReport(
        runs=n_runs,
        bob_chosen=bob_chosen,
        charlie_chosen=charlie_chosen,
        test_rounds_bob_chosen=test_rounds_bob,
        mean_fidelity_when_bob_chosen=(
            sum(bob_fidelities) / len(bob_fidelities) if bob_fidelities else None
        ),
        detection_rate_when_bob_chosen=(
            sum(bob_test_infidelities) / len(bob_test_infidelities)
            if bob_test_infidelities
            else None
        ),
        detection_rate_when_charlie_chosen=0.0,
        sampled_detections=sampled_detections,
        records=records,
    )

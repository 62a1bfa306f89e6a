"""Multi-party key sharing over shared GHZ registers.

One round: every party measures their particle along a randomly chosen X or
Y direction, the partners announce their directions to the dealer (Alice),
Alice broadcasts all of them, and the round is kept exactly when the number
of Y choices is even. On kept rounds the partners, pooling their outcomes,
reconstruct Alice's bit; a publicly compared sample of the sifted key
estimates the error rate and decides whether to abort.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .attacks import (
    AttackModel,
    EntangledAncilla,
    InterceptResend,
    NoAttack,
    bob_joint_family,
    lying_basis_choice,
)
from .quantum import Basis, Outcome, StateVector, ghz, measure_family, measure_qubit
from .rng import RandomStream

DEFAULT_QBER_THRESHOLD = 0.05
DEFAULT_MIN_SAMPLE = 100
DISCARD_MONITOR_RATE = 0.6
DISCARD_MONITOR_MIN_ROUNDS = 500


class PartyId(Enum):
    ALICE = "Alice"
    BOB = "Bob"
    CHARLIE = "Charlie"
    DIANA = "Diana"


PARTY_ORDER = (PartyId.ALICE, PartyId.BOB, PartyId.CHARLIE, PartyId.DIANA)


def parties_for(n: int) -> tuple[PartyId, ...]:
    """The party roster for an n-party round; the dealer is always first."""
    if n not in (3, 4):
        raise ValueError(f"protocol is defined for 3 or 4 parties, got {n}")
    return PARTY_ORDER[:n]


class Verdict(Enum):
    ACCEPT = "Accept"
    ABORT = "Abort"


@dataclass(frozen=True)
class Announcement:
    """One classical message: sender, receiver set, and a payload dict.

    Payloads carry basis choices only, never measurement outcomes.
    """

    sender: PartyId
    receivers: tuple[PartyId, ...]
    payload: dict

    def to_json_dict(self) -> dict:
        return {
            "sender": self.sender.value,
            "receivers": [p.value for p in self.receivers],
            "payload": self.payload,
        }


@dataclass
class RoundRecord:
    """Everything observable about one protocol round.

    ``true_alice_bit`` is the dealer's actual outcome bit;
    ``inferred_alice_bit`` is the partners' reconstruction, present exactly
    on sifted rounds. ``adversary``/``attack_info`` tag attacked rounds for
    reporting only.
    """

    round_index: int
    bases: dict[PartyId, Basis]
    outcomes: dict[PartyId, Outcome]
    announcement_log: list[Announcement]
    sifted: bool
    inferred_alice_bit: int | None
    true_alice_bit: int
    adversary: str | None = None
    attack_info: dict | None = None

    def to_json_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "bases": {p.value: b.value for p, b in self.bases.items()},
            "outcomes": {p.value: o.value for p, o in self.outcomes.items()},
            "announcement_log": [a.to_json_dict() for a in self.announcement_log],
            "sifted": self.sifted,
            "inferred_alice_bit": self.inferred_alice_bit,
            "true_alice_bit": self.true_alice_bit,
            "adversary": self.adversary,
            "attack_info": self.attack_info,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "RoundRecord":
        return cls(
            round_index=int(data["round_index"]),
            bases={PartyId(p): Basis(b) for p, b in data["bases"].items()},
            outcomes={PartyId(p): Outcome(o) for p, o in data["outcomes"].items()},
            announcement_log=[
                Announcement(
                    sender=PartyId(a["sender"]),
                    receivers=tuple(PartyId(r) for r in a["receivers"]),
                    payload=dict(a["payload"]),
                )
                for a in data["announcement_log"]
            ],
            sifted=bool(data["sifted"]),
            inferred_alice_bit=(
                None if data["inferred_alice_bit"] is None else int(data["inferred_alice_bit"])
            ),
            true_alice_bit=int(data["true_alice_bit"]),
            adversary=data.get("adversary"),
            attack_info=data.get("attack_info"),
        )


@dataclass(frozen=True)
class KeyMaterial:
    """Result of public error estimation on the sifted key."""

    alice_key: str
    partners_key: str
    revealed_indices: tuple[int, ...]
    qber_estimate: float | None
    verdict: Verdict
    abort_reason: str | None = None


def _as_basis_sequence(bases) -> tuple[Basis, ...]:
    if isinstance(bases, Mapping):
        parties = parties_for(len(bases))
        if set(bases) != set(parties):
            raise ValueError(f"expected bases for {parties}, got {sorted(bases, key=str)}")
        return tuple(bases[p] for p in parties)
    seq = tuple(bases)
    if len(seq) not in (3, 4):
        raise ValueError(f"expected 3 or 4 bases, got {len(seq)}")
    return seq


def valid_combo(bases, n: int | None = None) -> bool:
    """True when the basis combination carries a usable correlation.

    A round survives sifting exactly when the number of Y choices across all
    parties is even (0, 2, or 4).
    """
    seq = _as_basis_sequence(bases)
    if n is not None and len(seq) != n:
        raise ValueError(f"expected {n} bases, got {len(seq)}")
    return sum(1 for b in seq if b is Basis.Y) % 2 == 0


def infer_alice_bit(
    bases: Mapping[PartyId, Basis], partner_outcomes: Mapping[PartyId, Outcome]
) -> int:
    """The dealer's bit as reconstructed by all partners pooling their outcomes.

    The reconstructed sign is (-1)^(#Y/2) times the product of the partner
    outcome signs; on honest rounds it equals Alice's outcome with
    certainty.
    """
    seq = _as_basis_sequence(bases)
    if not valid_combo(seq):
        raise ValueError("inference is undefined for discarded basis combinations")
    parties = parties_for(len(seq))
    expected_partners = set(parties) - {PartyId.ALICE}
    if set(partner_outcomes) != expected_partners:
        raise ValueError(
            f"expected outcomes for {sorted(expected_partners, key=str)},"
            f" got {sorted(partner_outcomes, key=str)}"
        )
    y = sum(1 for b in seq if b is Basis.Y)
    sign = -1 if (y // 2) % 2 else 1
    for p in parties:
        if p is PartyId.ALICE:
            continue
        sign *= partner_outcomes[p].sign
    return 0 if sign > 0 else 1


def _random_basis(rng: RandomStream) -> Basis:
    return Basis.X if rng.bit() == 0 else Basis.Y


def _standard_log(
    bases: Mapping[PartyId, Basis], parties: Sequence[PartyId]
) -> list[Announcement]:
    partners = tuple(p for p in parties if p is not PartyId.ALICE)
    log = [
        Announcement(p, (PartyId.ALICE,), {"basis": bases[p].value}) for p in partners
    ]
    log.append(
        Announcement(
            PartyId.ALICE,
            partners,
            {"bases": {p.value: bases[p].value for p in parties}},
        )
    )
    return log


def _weakened_log(bases: Mapping[PartyId, Basis]) -> list[Announcement]:
    # Bob hears Alice's and Charlie's directions before revealing his own.
    a, b, c = PartyId.ALICE, PartyId.BOB, PartyId.CHARLIE
    return [
        Announcement(c, (a,), {"basis": bases[c].value}),
        Announcement(
            a, (b, c), {"bases": {a.value: bases[a].value, c.value: bases[c].value}}
        ),
        Announcement(b, (a,), {"basis": bases[b].value}),
        Announcement(
            a, (b, c), {"bases": {p.value: bases[p].value for p in (a, b, c)}}
        ),
    ]


def announcement_order_ok(record: RoundRecord) -> bool:
    """True when no dealer payload with basis information precedes the
    receipt of every partner basis announcement."""
    alice_first = None
    partner_last = None
    for i, ann in enumerate(record.announcement_log):
        if ann.sender is PartyId.ALICE:
            if alice_first is None:
                alice_first = i
        elif "basis" in ann.payload:
            partner_last = i
    if alice_first is None or partner_last is None:
        return True
    return alice_first > partner_last


def run_round(
    n: int,
    attack: AttackModel | None,
    rng: RandomStream,
    *,
    round_index: int = 0,
    weakened_announcements: bool = False,
) -> RoundRecord:
    """Simulate one complete round: preparation, interception, measurement,
    announcements, sifting, and inference.

    The adaptive lying attack is rejected unless the weakened announcement
    order is explicitly enabled; under the standard order Bob must commit to
    his direction before hearing the others.
    """
    parties = parties_for(n)
    attack = attack if attack is not None else NoAttack()

    if isinstance(attack, InterceptResend):
        if n != 3:
            raise ValueError("the intercept-resend attack is defined for 3 parties only")
        if attack.lying and not weakened_announcements:
            raise ValueError(
                "adaptive lying requires the weakened announcement order;"
                " the standard order forbids it"
            )
        return _intercept_resend_round(attack, rng, round_index)

    adversary = None
    attack_info = None
    if isinstance(attack, EntangledAncilla):
        if n != 3:
            raise ValueError("the entangled-ancilla attack targets the 3-party protocol")
        state = attack.joint_state
        adversary = "Eve"
        attack_info = {"kind": "entangled-ancilla", "ancilla_dim": attack.ancilla_dim}
    else:
        state = ghz(n)

    bases: dict[PartyId, Basis] = {}
    outcomes: dict[PartyId, Outcome] = {}
    for qubit, party in enumerate(parties):
        bases[party] = _random_basis(rng)
        outcomes[party], state = measure_qubit(state, qubit, bases[party], rng)

    return _finish_round(
        round_index, parties, bases, outcomes, _standard_log(bases, parties),
        adversary, attack_info,
    )


def _intercept_resend_round(
    attack: InterceptResend, rng: RandomStream, round_index: int
) -> RoundRecord:
    parties = parties_for(3)
    a, b, c = parties
    state = ghz(3)

    bases: dict[PartyId, Basis] = {a: _random_basis(rng)}
    outcomes: dict[PartyId, Outcome] = {}
    outcomes[a], state = measure_qubit(state, 0, bases[a], rng)

    # Bob guesses which joint family the stolen pair sits in, measures it,
    # forwards one particle, then measures his own along the guessed direction.
    guess = _random_basis(rng)
    joint_index, state = measure_family(state, bob_joint_family(guess), rng)
    outcomes[b], state = measure_qubit(state, 1, guess, rng)

    bases[c] = _random_basis(rng)
    outcomes[c], state = measure_qubit(state, 2, bases[c], rng)

    if attack.lying and guess is not bases[a]:
        bases[b] = lying_basis_choice(bases[a], bases[c])
    else:
        bases[b] = guess

    log = _weakened_log(bases) if attack.lying else _standard_log(bases, parties)
    attack_info = {
        "kind": "intercept-resend",
        "bob_guess": guess.value,
        "joint_outcome": joint_index,
        "lying": attack.lying,
    }
    return _finish_round(round_index, parties, bases, outcomes, log, "Bob", attack_info)


def _finish_round(
    round_index: int,
    parties: Sequence[PartyId],
    bases: dict[PartyId, Basis],
    outcomes: dict[PartyId, Outcome],
    log: list[Announcement],
    adversary: str | None,
    attack_info: dict | None,
) -> RoundRecord:
    sifted = valid_combo(bases)
    inferred = None
    if sifted:
        inferred = infer_alice_bit(
            bases, {p: outcomes[p] for p in parties if p is not PartyId.ALICE}
        )
    return RoundRecord(
        round_index=round_index,
        bases=bases,
        outcomes=outcomes,
        announcement_log=log,
        sifted=sifted,
        inferred_alice_bit=inferred,
        true_alice_bit=outcomes[PartyId.ALICE].bit,
        adversary=adversary,
        attack_info=attack_info,
    )


def sift_and_extract(records: Iterable[RoundRecord]) -> tuple[str, str]:
    """Parallel bit strings from sifted rounds, in round order.

    Returns (dealer bits, partner-reconstructed bits); on honest rounds the
    two strings are identical.
    """
    alice_bits: list[str] = []
    partner_bits: list[str] = []
    for record in records:
        if not record.sifted:
            continue
        alice_bits.append(str(record.true_alice_bit))
        partner_bits.append(str(record.inferred_alice_bit))
    return "".join(alice_bits), "".join(partner_bits)


def estimate_error(
    records: Iterable[RoundRecord],
    reveal_fraction: float,
    threshold: float = DEFAULT_QBER_THRESHOLD,
    min_sample: int = DEFAULT_MIN_SAMPLE,
    rng: RandomStream | None = None,
) -> KeyMaterial:
    """Publicly compare a random sample of the sifted key and decide.

    A ceil(reveal_fraction * count) sample is drawn without replacement; the
    verdict is Abort when the sample is at least ``min_sample`` long and its
    mismatch rate exceeds ``threshold``. Revealed positions are removed from
    both final keys. With no sifted rounds at all the estimate is undefined
    and the verdict is Abort with reason "insufficient-data".
    """
    if not 0.0 < reveal_fraction <= 1.0:
        raise ValueError(f"reveal fraction must lie in (0, 1], got {reveal_fraction}")
    if rng is None:
        raise ValueError("estimate_error needs a RandomStream for sampling")
    alice, partners = sift_and_extract(records)
    count = len(alice)
    if count == 0:
        return KeyMaterial(
            alice_key="",
            partners_key="",
            revealed_indices=(),
            qber_estimate=None,
            verdict=Verdict.ABORT,
            abort_reason="insufficient-data",
        )
    k = math.ceil(reveal_fraction * count)
    revealed = rng.sample_indices(count, k)
    revealed_set = set(revealed)
    mismatches = sum(1 for i in revealed if alice[i] != partners[i])
    qber = mismatches / k
    abort = k >= min_sample and qber > threshold
    kept = [i for i in range(count) if i not in revealed_set]
    return KeyMaterial(
        alice_key="".join(alice[i] for i in kept),
        partners_key="".join(partners[i] for i in kept),
        revealed_indices=revealed,
        qber_estimate=qber,
        verdict=Verdict.ABORT if abort else Verdict.ACCEPT,
        abort_reason="qber-threshold" if abort else None,
    )


def resource_accounting(key_bits: int, parts: int) -> dict[str, int]:
    """Particle and classical-bit budgets for an N-bit key split M ways.

    The entangled-state scheme consumes 2N shared triplets on average, versus
    4N entangled pairs (or 4N prepared particles) for the hybrid
    quantum-plus-classical route; either way 4N particles travel from the
    dealer. Once keys exist, sending the message costs N classical bits in
    the entangled scheme against M*N in the hybrid one.
    """
    n = int(key_bits)
    m = int(parts)
    if n < 0:
        raise ValueError(f"key length must be non-negative, got {n}")
    if m < 2:
        raise ValueError(f"a secret must split into at least 2 parts, got {m}")
    return {
        "ghz_triplets": 2 * n,
        "hybrid_entangled_pairs": 4 * n,
        "hybrid_bb84_particles": 4 * n,
        "particles_sent_total": 4 * n,
        "classical_bits_ghz": n,
        "classical_bits_hybrid": m * n,
    }

"""Adversary models for the key-sharing protocol.

Covers the dishonest-partner intercept-resend attack (with its adaptive
lying variant) and the entangled-ancilla framework, including a numerical
verifier for the statement that an ancilla which introduces no errors must
be completely unentangled from the shared triplet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .quantum import (
    Basis,
    Outcome,
    StateVector,
    OrthonormalFamily,
    ghz,
    inner,
    outcome_distribution,
)

MAX_ANCILLA_DIM = 8
_SV_THRESHOLD = 1e-9  # singular values below this count as zero


@dataclass(frozen=True)
class NoAttack:
    """Honest execution."""


@dataclass(frozen=True)
class InterceptResend:
    """Bob holds both partner particles, measures them jointly, forwards one.

    With ``lying`` set he additionally announces whichever basis spoils the
    round whenever his guess missed, which requires the weakened announcement
    order in which he hears the other bases first.
    """

    lying: bool = False


def _validate_joint_state(state: StateVector) -> None:
    if tuple(state.dims[:3]) != (2, 2, 2):
        raise ValueError(
            f"joint state must start with three qubit subsystems, got dims {state.dims}"
        )
    if len(state.dims) > 4:
        raise ValueError("joint state may carry at most one ancilla subsystem")
    if len(state.dims) == 4 and state.dims[3] > MAX_ANCILLA_DIM:
        raise ValueError(f"ancilla dimension {state.dims[3]} exceeds {MAX_ANCILLA_DIM}")


@dataclass(frozen=True)
class EntangledAncilla:
    """Eavesdropper replaces the shared triplet with a supplied joint state.

    The state covers the three protocol qubits plus an optional ancilla
    subsystem appended after them. Whether the adversary is a third party or
    one of the partners makes no difference to the dynamics; it is the same
    state substitution.
    """

    joint_state: StateVector

    def __post_init__(self) -> None:
        _validate_joint_state(self.joint_state)

    @property
    def ancilla_dim(self) -> int:
        return self.joint_state.dims[3] if len(self.joint_state.dims) == 4 else 1


AttackModel = NoAttack | InterceptResend | EntangledAncilla


def _two_qubit(c00: complex, c01: complex, c10: complex, c11: complex) -> StateVector:
    return StateVector(np.array([c00, c01, c10, c11], dtype=complex), (2, 2))


_H = 1.0 / math.sqrt(2.0)


@lru_cache(maxsize=None)
def bob_joint_family(guess: Basis) -> OrthonormalFamily:
    """Joint two-particle family Bob measures when he holds both particles.

    The first two vectors are the ones his stolen pair can actually occupy;
    the |01>/|10> combinations complete the family so it spans the full
    two-qubit space, and they occur with probability 0 on protocol states.
    """
    phase = 1.0 if guess is Basis.X else 1.0j
    vectors = (
        _two_qubit(_H, 0, 0, phase * _H),
        _two_qubit(_H, 0, 0, -phase * _H),
        _two_qubit(0, _H, phase * _H, 0),
        _two_qubit(0, _H, -phase * _H, 0),
    )
    return OrthonormalFamily(subset=(1, 2), vectors=vectors)


def lying_basis_choice(alice_basis: Basis, charlie_basis: Basis) -> Basis:
    """The announcement that forces a discard: makes the round's Y-count odd."""
    y = (alice_basis is Basis.Y) + (charlie_basis is Basis.Y)
    return Basis.Y if y % 2 == 0 else Basis.X


# The four three-party basis combinations that survive sifting.
VALID_COMBOS_3 = (
    (Basis.X, Basis.X, Basis.X),
    (Basis.X, Basis.Y, Basis.Y),
    (Basis.Y, Basis.X, Basis.Y),
    (Basis.Y, Basis.Y, Basis.X),
)


def _inferred_sign(bases: tuple[Basis, ...], partner_signs: tuple[int, ...]) -> int:
    # Recombination parity rule: dealer sign = (-1)^(#Y/2) * product of partner signs.
    y = sum(1 for b in bases if b is Basis.Y)
    sign = -1 if (y // 2) % 2 else 1
    for s in partner_signs:
        sign *= s
    return sign


def _pair_ket(label_a: str, label_b: str, sign: int) -> StateVector:
    amps = np.zeros(8, dtype=complex)
    amps[int(label_a, 2)] = _H
    amps[int(label_b, 2)] = sign * _H
    return StateVector(amps, (2, 2, 2))


@lru_cache(maxsize=1)
def constraint_vectors() -> tuple[StateVector, ...]:
    """The seven triplet states an error-free joint state must be orthogonal to.

    Together with the shared GHZ triplet they form an orthonormal basis of
    the three-qubit space, so their common orthogonal complement is the
    one-dimensional GHZ ray.
    """
    return (
        _pair_ket("000", "111", -1),
        _pair_ket("100", "011", -1),
        _pair_ket("010", "101", -1),
        _pair_ket("110", "001", -1),
        _pair_ket("010", "101", +1),
        _pair_ket("110", "001", +1),
        _pair_ket("100", "011", +1),
    )


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Validated wrapper around the seven no-error constraint vectors."""

    vectors: tuple[StateVector, ...] = field(default_factory=constraint_vectors)

    def __post_init__(self) -> None:
        vectors = tuple(self.vectors)
        if len(vectors) != 7:
            raise ValueError(f"constraint set must hold exactly 7 vectors, got {len(vectors)}")
        if any(v.dims != (2, 2, 2) for v in vectors):
            raise ValueError("constraint vectors must be three-qubit states")
        rows = np.stack([np.conj(v.amps) for v in vectors])
        _, s, vh = np.linalg.svd(rows, full_matrices=True)
        rank = int(np.sum(s > _SV_THRESHOLD))
        if 8 - rank != 1:
            raise ValueError("constraints must leave a one-dimensional complement")
        kernel = np.conj(vh[rank])
        if abs(np.vdot(ghz(3).amps, kernel)) < 1.0 - 1e-9:
            raise ValueError("constraint complement is not the shared triplet state")
        object.__setattr__(self, "vectors", vectors)


@dataclass(frozen=True)
class AncillaErrorRates:
    """Per-combination inference error probabilities for a joint state."""

    per_combo: dict[tuple[Basis, Basis, Basis], float]
    average: float

    def combo(self, *bases: Basis) -> float:
        return self.per_combo[tuple(bases)]


def ancilla_attack_error_rates(joint_state: StateVector) -> AncillaErrorRates:
    """Exact inference error probabilities when the triplet is replaced.

    For each basis combination that survives sifting, computes by direct
    enumeration the probability that the partners' reconstruction disagrees
    with the dealer's outcome. No sampling is involved.
    """
    if not isinstance(joint_state, StateVector):
        raise ValueError("joint state must be a StateVector")
    _validate_joint_state(joint_state)
    per_combo: dict[tuple[Basis, Basis, Basis], float] = {}
    for combo in VALID_COMBOS_3:
        dist = outcome_distribution(joint_state, [(q, combo[q]) for q in range(3)])
        err = 0.0
        for (m_a, m_b, m_c), p in dist.items():
            if _inferred_sign(combo, (m_b.sign, m_c.sign)) != m_a.sign:
                err += p
        per_combo[combo] = err
    average = sum(per_combo.values()) / len(per_combo)
    return AncillaErrorRates(per_combo=per_combo, average=average)


@dataclass(frozen=True)
class TheoremReport:
    """Null-space analysis of the stacked no-error constraints."""

    ancilla_dim: int
    kernel_dim: int
    is_product_form: bool
    max_residual: float

    def to_json_dict(self) -> dict:
        return {
            "ancilla_dim": self.ancilla_dim,
            "kernel_dim": self.kernel_dim,
            "is_product_form": self.is_product_form,
            "max_residual": self.max_residual,
        }


def verify_no_error_theorem(ancilla_dim: int) -> TheoremReport:
    """Check numerically that error-free joint states factor into GHZ x ancilla.

    Builds the seven constraint projections tensored with the ancilla
    identity, computes the common null space of the stacked constraints, and
    tests that every null-space basis vector is a product of the shared
    triplet with some ancilla vector (rank-1 coefficient grid whose triplet
    factor lies on the GHZ ray).
    """
    d = int(ancilla_dim)
    if not 1 <= d <= MAX_ANCILLA_DIM:
        raise ValueError(f"ancilla dimension must be in [1, {MAX_ANCILLA_DIM}], got {d}")
    rows = np.stack([np.conj(v.amps) for v in constraint_vectors()])
    stacked = np.kron(rows, np.eye(d))
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    rank = int(np.sum(s > _SV_THRESHOLD))
    kernel = np.conj(vh[rank:])
    kernel_dim = kernel.shape[0]
    g = ghz(3).amps
    max_residual = 0.0
    product = True
    for w in kernel:
        max_residual = max(max_residual, float(np.max(np.abs(stacked @ w))))
        grid = w.reshape(8, d)
        u, sv, _ = np.linalg.svd(grid)
        if d > 1:
            max_residual = max(max_residual, float(sv[1]))
            if sv[1] > _SV_THRESHOLD:
                product = False
        overlap = float(abs(np.vdot(g, u[:, 0])))
        max_residual = max(max_residual, 1.0 - overlap)
        if overlap < 1.0 - _SV_THRESHOLD:
            product = False
    return TheoremReport(
        ancilla_dim=d,
        kernel_dim=kernel_dim,
        is_product_form=product,
        max_residual=max_residual,
    )


def product_with_ancilla(triplet: StateVector, ancilla: np.ndarray) -> StateVector:
    """Convenience builder: triplet state tensored with a (normalized) ancilla."""
    anc = np.asarray(ancilla, dtype=complex)
    anc = anc / np.linalg.norm(anc)
    amps = np.kron(triplet.amps, anc)
    dims = triplet.dims + ((len(anc),) if len(anc) > 1 else ())
    return StateVector(amps, dims)


def ghz_factor_fidelity(joint_state: StateVector) -> float:
    """Largest squared overlap of the triplet factor with the GHZ ray.

    For a joint state reshaped into an 8 x d coefficient grid, the dominant
    left singular vector is the best product approximation's triplet factor;
    its overlap with GHZ bounds how close the state is to GHZ x ancilla.
    """
    _validate_joint_state(joint_state)
    d = joint_state.dims[3] if len(joint_state.dims) == 4 else 1
    grid = joint_state.amps.reshape(8, d)
    u, sv, _ = np.linalg.svd(grid)
    return float((sv[0] * abs(np.vdot(ghz(3).amps, u[:, 0]))) ** 2)

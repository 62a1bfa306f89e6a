"""Exact state-vector simulation for small quantum registers.

Conventions fixed across the package:

- Subsystem 0 is the leftmost symbol of a ket label; the protocol modules
  keep the dealer's (Alice's) particle in that slot.
- Measured qubits stay in the register, collapsed onto the observed
  eigenstate, so subsystem indices remain stable throughout a round.
- A "+" outcome encodes key bit 0 and "-" encodes bit 1.
- Registers consist of qubits, optionally followed by one larger ancilla
  subsystem (used by the eavesdropping analysis).

States and density matrices are immutable once constructed; every operation
returns a new value, so they are safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import product as _cartesian
from typing import Iterable, Sequence

import numpy as np

from .rng import RandomStream

NORM_TOL = 1e-12         # algebraic identities
ORTHO_TOL = 1e-10        # orthonormality and fidelity comparisons
EIGENVALUE_FLOOR = -1e-10
_ZERO_PROB = 1e-15

SQRT_HALF = 1.0 / math.sqrt(2.0)


class Basis(Enum):
    """Single-qubit measurement direction."""

    X = "X"
    Y = "Y"


class Outcome(Enum):
    """Sign of a measurement result; "+" encodes key bit 0, "-" bit 1."""

    PLUS = "+"
    MINUS = "-"

    @property
    def sign(self) -> int:
        return 1 if self is Outcome.PLUS else -1

    @property
    def bit(self) -> int:
        return 0 if self is Outcome.PLUS else 1

    @classmethod
    def from_sign(cls, sign: int) -> "Outcome":
        return Outcome.PLUS if sign > 0 else Outcome.MINUS


OUTCOMES = (Outcome.PLUS, Outcome.MINUS)


class Pauli(Enum):
    """Single-qubit correction operators used by the splitting protocol."""

    I = "I"
    X = "X"
    Z = "Z"


_PAULI_MATRICES = {
    Pauli.I: np.eye(2, dtype=complex),
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}

_EIGENVECTORS: dict[tuple[Basis, Outcome], np.ndarray] = {
    (Basis.X, Outcome.PLUS): np.array([SQRT_HALF, SQRT_HALF], dtype=complex),
    (Basis.X, Outcome.MINUS): np.array([SQRT_HALF, -SQRT_HALF], dtype=complex),
    (Basis.Y, Outcome.PLUS): np.array([SQRT_HALF, SQRT_HALF * 1j], dtype=complex),
    (Basis.Y, Outcome.MINUS): np.array([SQRT_HALF, -SQRT_HALF * 1j], dtype=complex),
}
for _v in _EIGENVECTORS.values():
    _v.setflags(write=False)

# Rows are conjugated eigenvectors, so applying the matrix to a qubit axis
# re-expresses amplitudes in the measurement basis (row 0 = "+", row 1 = "-").
_BASIS_ROTATIONS = {
    b: np.stack(
        [np.conj(_EIGENVECTORS[(b, Outcome.PLUS)]), np.conj(_EIGENVECTORS[(b, Outcome.MINUS)])]
    )
    for b in Basis
}


def eigenvector(basis: Basis, outcome: Outcome) -> np.ndarray:
    """The (read-only) 2-vector for the given measurement direction and sign."""
    return _EIGENVECTORS[(basis, outcome)]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state over a register of small subsystems.

    ``amps`` is indexed by the mixed-radix label whose most significant digit
    is subsystem 0, matching the left-to-right order in which kets are
    written.
    """

    amps: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.amps, dtype=np.complex128)
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"invalid subsystem dimensions {dims}")
        if arr.ndim != 1 or arr.size != math.prod(dims):
            raise ValueError(
                f"amplitude count {arr.size} does not match register dimensions {dims}"
            )
        if not (np.isfinite(arr.real).all() and np.isfinite(arr.imag).all()):
            raise ValueError("amplitudes must be finite")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        if arr.flags.writeable:
            if arr is self.amps:
                arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "amps", arr)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def _owned(cls, arr: np.ndarray, dims: tuple[int, ...]) -> "StateVector":
        """Wrap a freshly allocated array without copying; caller cedes ownership."""
        self = object.__new__(cls)
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "amps", arr)
        object.__setattr__(self, "dims", dims)
        return self

    @classmethod
    def from_amplitudes(
        cls, values: Iterable[complex], dims: Sequence[int] | None = None
    ) -> "StateVector":
        arr = np.asarray(list(values), dtype=np.complex128)
        if dims is None:
            n = arr.size.bit_length() - 1
            if arr.size != 2**n:
                raise ValueError(
                    f"amplitude count {arr.size} is not a power of two; pass dims explicitly"
                )
            dims = (2,) * n
        return cls(arr, tuple(dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    @property
    def n_qubits(self) -> int:
        """Number of qubit-sized subsystems in the register."""
        return sum(1 for d in self.dims if d == 2)

    def __str__(self) -> str:
        return ket_string(self)


def qubit_state(alpha: complex, beta: complex) -> StateVector:
    """Single-qubit state alpha|0> + beta|1>."""
    return StateVector(np.array([alpha, beta], dtype=complex), (2,))


def eigenstate(basis: Basis, outcome: Outcome) -> StateVector:
    """The one-qubit eigenstate for a measurement direction and sign."""
    return StateVector(_EIGENVECTORS[(basis, outcome)], (2,))


def compose(*states: StateVector) -> StateVector:
    """Tensor product; subsystem order follows the argument order."""
    if not states:
        raise ValueError("compose requires at least one state")
    amps = states[0].amps
    for s in states[1:]:
        amps = np.kron(amps, s.amps)
    dims = tuple(d for s in states for d in s.dims)
    return StateVector._owned(np.ascontiguousarray(amps), dims)


@lru_cache(maxsize=None)
def ghz(n: int) -> StateVector:
    """The maximally entangled n-party state (|0..0> + |1..1>)/sqrt(2)."""
    if not 2 <= n <= 6:
        raise ValueError(f"GHZ register size must be between 2 and 6 qubits, got {n}")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = SQRT_HALF
    amps[-1] = SQRT_HALF
    return StateVector._owned(amps, (2,) * n)


def inner(a: StateVector, b: StateVector) -> complex:
    """The overlap <a|b>; registers must have identical dimensions."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 between two pure states."""
    return float(abs(inner(a, b)) ** 2)


def same_up_to_phase(a: StateVector, b: StateVector, tol: float = ORTHO_TOL) -> bool:
    """True when the states differ at most by a global phase."""
    return abs(inner(a, b)) >= 1.0 - tol


def _check_subsystem(state: StateVector, index: int, need_qubit: bool = True) -> None:
    if not 0 <= index < len(state.dims):
        raise ValueError(f"subsystem index {index} out of range for dims {state.dims}")
    if need_qubit and state.dims[index] != 2:
        raise ValueError(f"subsystem {index} has dimension {state.dims[index]}, not a qubit")


def _axis_apply(arr: np.ndarray, dims: tuple[int, ...], axis: int, mat: np.ndarray) -> np.ndarray:
    """Apply a square matrix to one subsystem axis of a flat amplitude array."""
    t = np.moveaxis(arr.reshape(dims), axis, 0)
    out = np.tensordot(mat, t, axes=([1], [0]))
    return np.ascontiguousarray(np.moveaxis(out, 0, axis)).reshape(-1)


def _qubit_blocks(
    state: StateVector, qubit: int, basis: Basis
) -> tuple[list[np.ndarray], list[float]]:
    """Amplitude blocks and Born probabilities for both outcomes on one qubit."""
    t = np.moveaxis(state.amps.reshape(state.dims), qubit, 0)
    a0, a1 = t[0], t[1]
    blocks: list[np.ndarray] = []
    probs: list[float] = []
    for outcome in OUTCOMES:
        v = _EIGENVECTORS[(basis, outcome)]
        block = np.conj(v[0]) * a0 + np.conj(v[1]) * a1
        blocks.append(block)
        probs.append(float(np.vdot(block, block).real))
    return blocks, probs


def _collapse_qubit(
    state: StateVector, qubit: int, basis: Basis, outcome: Outcome, block: np.ndarray, prob: float
) -> StateVector:
    v = _EIGENVECTORS[(basis, outcome)]
    scaled = block / math.sqrt(prob)
    out = np.empty((2,) + block.shape, dtype=np.complex128)
    out[0] = v[0] * scaled
    out[1] = v[1] * scaled
    arr = np.ascontiguousarray(np.moveaxis(out, 0, qubit)).reshape(-1)
    return StateVector._owned(arr, state.dims)


def measure_qubit(
    state: StateVector, qubit: int, basis: Basis, rng: RandomStream
) -> tuple[Outcome, StateVector]:
    """Born-rule measurement of one qubit; the qubit stays in the register.

    Returns the sampled outcome together with the renormalized
    post-measurement state. Outcomes of zero probability are never sampled.
    """
    _check_subsystem(state, qubit)
    blocks, probs = _qubit_blocks(state, qubit, basis)
    i = rng.pick(probs)
    outcome = OUTCOMES[i]
    return outcome, _collapse_qubit(state, qubit, basis, outcome, blocks[i], probs[i])


def project_qubit(
    state: StateVector, qubit: int, basis: Basis, outcome: Outcome
) -> tuple[float, StateVector]:
    """Deterministic projection onto one outcome; returns (probability, state)."""
    _check_subsystem(state, qubit)
    blocks, probs = _qubit_blocks(state, qubit, basis)
    i = OUTCOMES.index(outcome)
    if probs[i] <= _ZERO_PROB:
        raise ValueError(f"projection onto outcome {outcome.value} has zero probability")
    return probs[i], _collapse_qubit(state, qubit, basis, outcome, blocks[i], probs[i])


@dataclass(frozen=True, eq=False)
class OrthonormalFamily:
    """A complete orthonormal measurement family over a subset of subsystems.

    ``subset`` names the register positions the family acts on, in the order
    the family vectors' own subsystems are written.
    """

    subset: tuple[int, ...]
    vectors: tuple[StateVector, ...]

    def __post_init__(self) -> None:
        subset = tuple(int(i) for i in self.subset)
        vectors = tuple(self.vectors)
        if len(set(subset)) != len(subset) or any(i < 0 for i in subset):
            raise ValueError(f"subset indices must be distinct and non-negative: {subset}")
        if not vectors:
            raise ValueError("family must contain at least one vector")
        dims = vectors[0].dims
        if any(v.dims != dims for v in vectors):
            raise ValueError("all family vectors must share the same register dimensions")
        if len(subset) != len(dims):
            raise ValueError(
                f"subset length {len(subset)} does not match vector dimensions {dims}"
            )
        if len(vectors) != math.prod(dims):
            raise ValueError(
                f"family has {len(vectors)} vectors but the subset space has"
                f" dimension {math.prod(dims)}"
            )
        gram = np.array([[np.vdot(u.amps, v.amps) for v in vectors] for u in vectors])
        if np.max(np.abs(gram - np.eye(len(vectors)))) > ORTHO_TOL:
            raise ValueError("family vectors are not orthonormal")
        object.__setattr__(self, "subset", subset)
        object.__setattr__(self, "vectors", vectors)

    @property
    def size(self) -> int:
        return len(self.vectors)


def _check_family(state: StateVector, family: OrthonormalFamily) -> None:
    for pos, dim in zip(family.subset, family.vectors[0].dims):
        if not 0 <= pos < len(state.dims):
            raise ValueError(f"family subset index {pos} out of range for dims {state.dims}")
        if state.dims[pos] != dim:
            raise ValueError(
                f"family expects dimension {dim} at subsystem {pos}, register has"
                f" {state.dims[pos]}"
            )


def _family_component(
    state: StateVector, family: OrthonormalFamily, index: int
) -> tuple[np.ndarray, float]:
    v = family.vectors[index]
    t = state.amps.reshape(state.dims)
    vt = np.conj(v.amps.reshape(v.dims))
    rest = np.tensordot(vt, t, axes=(tuple(range(len(family.subset))), family.subset))
    prob = float(np.vdot(rest, rest).real)
    return rest, prob


def _family_collapse(
    state: StateVector, family: OrthonormalFamily, index: int, rest: np.ndarray, prob: float
) -> StateVector:
    v = family.vectors[index]
    scaled = rest / math.sqrt(prob)
    out = np.multiply.outer(v.amps.reshape(v.dims), scaled)
    k = len(family.subset)
    arr = np.moveaxis(out, tuple(range(k)), family.subset)
    return StateVector._owned(np.ascontiguousarray(arr).reshape(-1), state.dims)


def family_probabilities(state: StateVector, family: OrthonormalFamily) -> list[float]:
    """Exact Born probabilities for each family vector (no sampling)."""
    _check_family(state, family)
    return [_family_component(state, family, i)[1] for i in range(family.size)]


def measure_family(
    state: StateVector, family: OrthonormalFamily, rng: RandomStream
) -> tuple[int, StateVector]:
    """Projective measurement in an orthonormal family over a subsystem subset.

    Outcome ``i`` is drawn with probability equal to the squared projection
    onto ``family.vectors[i]``; the measured subsystems stay in the register,
    collapsed onto that vector.
    """
    _check_family(state, family)
    components = [_family_component(state, family, i) for i in range(family.size)]
    probs = [p for _, p in components]
    i = rng.pick(probs)
    return i, _family_collapse(state, family, i, components[i][0], probs[i])


def project_family(
    state: StateVector, family: OrthonormalFamily, index: int
) -> tuple[float, StateVector]:
    """Deterministic projection onto one family vector; returns (probability, state)."""
    _check_family(state, family)
    if not 0 <= index < family.size:
        raise ValueError(f"family outcome index {index} out of range")
    rest, prob = _family_component(state, family, index)
    if prob <= _ZERO_PROB:
        raise ValueError(f"projection onto family vector {index} has zero probability")
    return prob, _family_collapse(state, family, index, rest, prob)


def apply_pauli_word(
    state: StateVector, qubit: int, word: Sequence[Pauli]
) -> StateVector:
    """Apply a product of Pauli operators to one qubit, rightmost factor first."""
    word = tuple(word)
    if not word:
        raise ValueError("correction word must not be empty")
    _check_subsystem(state, qubit)
    arr = state.amps
    for p in reversed(word):
        if p is Pauli.I:
            continue
        arr = _axis_apply(arr, state.dims, qubit, _PAULI_MATRICES[p])
    if arr is state.amps:
        return state
    return StateVector._owned(arr, state.dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix for a subsystem."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {arr.shape}")
        if np.max(np.abs(arr - arr.conj().T)) > NORM_TOL:
            raise ValueError("density matrix is not Hermitian")
        trace = complex(np.trace(arr))
        if abs(trace - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace {trace!r} deviates from 1")
        if float(np.min(np.linalg.eigvalsh(arr))) < EIGENVALUE_FLOOR:
            raise ValueError("density matrix has a significantly negative eigenvalue")
        if arr.flags.writeable:
            if arr is self.entries:
                arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def reduced_density(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace onto the listed subsystems.

    Rows and columns of the result are indexed by the kept subsystems in the
    order given.
    """
    keep = [int(q) for q in keep]
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if len(set(keep)) != len(keep):
        raise ValueError(f"keep contains duplicate subsystems: {keep}")
    for q in keep:
        _check_subsystem(state, q, need_qubit=False)
    n = len(state.dims)
    traced = [i for i in range(n) if i not in keep]
    t = state.amps.reshape(state.dims)
    rho = np.tensordot(t, np.conj(t), axes=(traced, traced))
    kept_sorted = sorted(keep)
    pos = {q: i for i, q in enumerate(kept_sorted)}
    perm = [pos[q] for q in keep]
    k = len(keep)
    rho = np.transpose(rho, perm + [k + p for p in perm])
    dim = math.prod(state.dims[q] for q in keep)
    return DensityMatrix(rho.reshape(dim, dim))


def outcome_distribution(
    state: StateVector, specs: Sequence[tuple[int, Basis]]
) -> dict[tuple[Outcome, ...], float]:
    """Exact joint outcome distribution for single-qubit measurements.

    ``specs`` lists (qubit, basis) pairs over distinct qubits; every
    combination of outcomes appears in the result, including impossible ones
    with probability 0. Computed by direct enumeration, never by sampling,
    so it serves as the oracle for the sampled measurement paths.
    """
    specs = [(int(q), b) for q, b in specs]
    if not specs:
        raise ValueError("specs must name at least one qubit")
    qubits = [q for q, _ in specs]
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"measurement specs repeat a qubit: {qubits}")
    for q in qubits:
        _check_subsystem(state, q)
    arr = state.amps
    for q, basis in specs:
        arr = _axis_apply(arr, state.dims, q, _BASIS_ROTATIONS[basis])
    probs = np.abs(arr.reshape(state.dims)) ** 2
    other = tuple(i for i in range(len(state.dims)) if i not in qubits)
    marg = probs.sum(axis=other) if other else probs
    # marginal axes follow ascending qubit order; rearrange to spec order
    ascending = sorted(qubits)
    marg = np.transpose(marg, [ascending.index(q) for q in qubits])
    dist: dict[tuple[Outcome, ...], float] = {}
    for bits in _cartesian(range(2), repeat=len(specs)):
        outcomes = tuple(OUTCOMES[b] for b in bits)
        dist[outcomes] = float(marg[bits])
    return dist


def haar_random_state(rng: RandomStream, dims: Sequence[int]) -> StateVector:
    """State drawn uniformly from the unit sphere of the register space."""
    dims = tuple(int(d) for d in dims)
    size = math.prod(dims)
    raw = rng.generator.normal(size=2 * size)
    vec = raw[0::2] + 1j * raw[1::2]
    norm = np.linalg.norm(vec)
    if norm < 1e-6:  # vanishing draw; probability ~0 but stay total
        return haar_random_state(rng, dims)
    return StateVector._owned(np.ascontiguousarray(vec / norm), dims)


def ket_string(state: StateVector, precision: int = 4, tol: float = 1e-9) -> str:
    """Render a state like ``0.7071|000> + 0.7071|111>`` for debugging."""
    parts = []
    for idx, amp in enumerate(state.amps):
        if abs(amp) <= tol:
            continue
        parts.append(f"{_format_coeff(complex(amp), precision)}|{_basis_label(idx, state.dims)}⟩")
    return " + ".join(parts) if parts else "0"


def _basis_label(index: int, dims: tuple[int, ...]) -> str:
    digits = []
    for d in reversed(dims):
        index, digit = divmod(index, d)
        digits.append(str(digit))
    return "".join(reversed(digits))


def _format_coeff(z: complex, precision: int) -> str:
    if abs(z.imag) <= 1e-12:
        return f"{z.real:.{precision}f}"
    if abs(z.real) <= 1e-12:
        return f"{z.imag:.{precision}f}i"
    return f"({z.real:.{precision}f}{z.imag:+.{precision}f}i)"

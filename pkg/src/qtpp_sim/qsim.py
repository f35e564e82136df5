"""
Small dense state-vector engine for 1 to 4 qubits.

Basis index convention: qubit 0 is the most significant bit, so for two
qubits ``|10>`` lives at index 2.

Every ``StateVector`` may carry leading batch dimensions: ``amplitudes`` has
shape ``(..., 2**num_qubits)`` and each row is an independent normalized
state. Gates broadcast the same way, which lets a protocol push a whole
message of independent photons through one call. Unbatched usage (a single
state of shape ``(2**n,)``) is the common case in tests and examples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError

MAX_QUBITS = 4
NORM_TOL = 1e-9
UNITARY_TOL = 1e-10
# outcomes below this probability are never sampled
MIN_OUTCOME_PROB = 1e-12

ArrayLike = Union[float, np.ndarray]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitudes over ``num_qubits`` qubits (optionally batched)."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not isinstance(self.num_qubits, (int, np.integer)) or not 1 <= self.num_qubits <= MAX_QUBITS:
            raise ConfigurationError(f"num_qubits must be in 1..{MAX_QUBITS}, got {self.num_qubits!r}")
        amps = _readonly(self.amplitudes)
        if amps.ndim < 1 or amps.shape[-1] != 2 ** self.num_qubits:
            raise ConfigurationError(
                f"expected trailing dimension {2 ** self.num_qubits}, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise DomainError("amplitudes must be finite")
        norms = np.sum(np.abs(amps) ** 2, axis=-1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise DomainError(f"state is not normalized (max deviation {np.max(np.abs(norms - 1.0)):.3e})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 2 ** self.num_qubits

    @property
    def batch_shape(self) -> tuple:
        return self.amplitudes.shape[:-1]

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __getitem__(self, index) -> "StateVector":
        """Select rows of a batched state."""
        if not self.batch_shape:
            raise IndexError("state is not batched")
        return StateVector(self.num_qubits, self.amplitudes[index])

    def __len__(self) -> int:
        if not self.batch_shape:
            raise TypeError("unbatched StateVector has no len()")
        return self.batch_shape[0]

    def allclose(self, other: "StateVector", atol: float = 1e-9, up_to_phase: bool = False) -> bool:
        if self.num_qubits != other.num_qubits:
            return False
        a, b = self.amplitudes, other.amplitudes
        if up_to_phase:
            overlap = np.sum(np.conj(a) * b, axis=-1)
            return bool(np.all(np.abs(np.abs(overlap) - 1.0) <= atol))
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class Gate:
    """A unitary matrix acting on ``log2(dimension)`` qubits.

    ``matrix`` has shape ``(..., d, d)``; leading dimensions broadcast
    against a batched state.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
            raise DomainError(f"gate matrix must be square, got shape {m.shape}")
        d = m.shape[-1]
        if d < 2 or d & (d - 1) or d > 2 ** MAX_QUBITS:
            raise DomainError(f"gate dimension must be a power of two in 2..{2 ** MAX_QUBITS}, got {d}")
        if not np.all(np.isfinite(m)):
            raise DomainError("gate entries must be finite")
        gram = np.conj(np.swapaxes(m, -1, -2)) @ m
        if np.max(np.abs(gram - np.eye(d)), initial=0.0) > UNITARY_TOL:
            raise DomainError("gate is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[-1]

    @property
    def num_qubits(self) -> int:
        return self.dimension.bit_length() - 1

    def dagger(self) -> "Gate":
        return Gate(np.conj(np.swapaxes(self.matrix, -1, -2)))


@dataclass(frozen=True, eq=False)
class MeasurementResult:
    outcome: Union[int, np.ndarray]
    collapsed: StateVector
    probability: Union[float, np.ndarray]


def basis_state(num_qubits: int, bits: Sequence[int]) -> StateVector:
    """Computational basis ket ``|bits>``; ``bits[0]`` is qubit 0."""
    if not isinstance(num_qubits, (int, np.integer)) or not 1 <= num_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"num_qubits must be in 1..{MAX_QUBITS}, got {num_qubits!r}")
    bits = list(bits)
    if len(bits) != num_qubits:
        raise ConfigurationError(f"expected {num_qubits} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise DomainError(f"bits must be 0 or 1, got {bits}")
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    amps = np.zeros(2 ** num_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(num_qubits, amps)


def basis_states(bits: np.ndarray) -> StateVector:
    """Batch of single-qubit kets, one row per entry of ``bits``."""
    bits = np.asarray(bits)
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise DomainError("bits must be 0 or 1")
    amps = np.zeros(bits.shape + (2,), dtype=np.complex128)
    amps[..., 0] = bits == 0
    amps[..., 1] = bits == 1
    return StateVector(1, amps)


def rotation_gate(theta: ArrayLike) -> Gate:
    """``[[cos t, sin t], [-sin t, cos t]]``; an array of angles gives a batched gate."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("rotation angle must be finite")
    c, s = np.cos(theta), np.sin(theta)
    m = np.empty(theta.shape + (2, 2))
    m[..., 0, 0] = c
    m[..., 0, 1] = s
    m[..., 1, 0] = -s
    m[..., 1, 1] = c
    return Gate(m)


def cnot_gate() -> Gate:
    """Controlled-NOT with the first target as control."""
    m = np.eye(4)
    m[[2, 3]] = m[[3, 2]]
    return Gate(m)


def x_gate() -> Gate:
    return Gate(np.array([[0.0, 1.0], [1.0, 0.0]]))


def identity_gate(dimension: int = 2) -> Gate:
    return Gate(np.eye(dimension))


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not isinstance(qubit, (int, np.integer)) or not 0 <= qubit < state.num_qubits:
        raise DomainError(f"qubit index {qubit!r} out of range for {state.num_qubits} qubits")


def apply_gate(state: StateVector, gate: Gate, targets: Sequence[int]) -> StateVector:
    """Apply ``gate`` to the ordered ``targets`` (targets[0] is the gate's MSB)."""
    targets = list(targets)
    n = state.num_qubits
    k = len(targets)
    if gate.dimension != 2 ** k:
        raise DomainError(f"gate of dimension {gate.dimension} cannot act on {k} target(s)")
    if len(set(targets)) != k:
        raise DomainError(f"target indices must be distinct, got {targets}")
    for t in targets:
        _check_qubit(state, t)

    batch = state.batch_shape
    nb = len(batch)
    psi = state.amplitudes.reshape(batch + (2,) * n)
    psi = np.moveaxis(psi, [nb + t for t in targets], list(range(-k, 0)))
    moved_shape = psi.shape
    psi = psi.reshape(batch + (-1, 2 ** k))
    # rows are vectors, so multiply by the transpose; batch dims broadcast
    out = psi @ np.swapaxes(gate.matrix, -1, -2)
    out_batch = out.shape[:-2]
    out = out.reshape(out_batch + moved_shape[len(batch):])
    out = np.moveaxis(out, list(range(-k, 0)), [len(out_batch) + t for t in targets])
    return StateVector(n, out.reshape(out_batch + (2 ** n,)))


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product with ``a``'s qubits first."""
    n = a.num_qubits + b.num_qubits
    if n > MAX_QUBITS:
        raise ConfigurationError(f"combined register of {n} qubits exceeds the {MAX_QUBITS}-qubit limit")
    amps = a.amplitudes[..., :, None] * b.amplitudes[..., None, :]
    return StateVector(n, amps.reshape(amps.shape[:-2] + (2 ** n,)))


def _bit_mask(num_qubits: int, qubit: int) -> np.ndarray:
    idx = np.arange(2 ** num_qubits)
    return (idx >> (num_qubits - 1 - qubit)) & 1


def outcome_probability(state: StateVector, qubit: int, outcome: int) -> Union[float, np.ndarray]:
    """Born-rule probability that measuring ``qubit`` yields ``outcome``."""
    _check_qubit(state, qubit)
    if outcome not in (0, 1):
        raise DomainError(f"outcome must be 0 or 1, got {outcome!r}")
    sel = _bit_mask(state.num_qubits, qubit) == outcome
    p = np.sum(state.probabilities()[..., sel], axis=-1)
    return float(p) if p.ndim == 0 else p


def measure_qubit(state: StateVector, qubit: int, rng: np.random.Generator) -> MeasurementResult:
    """Projective computational-basis measurement with collapse.

    One uniform draw per batch row. Outcomes whose probability is below
    ``MIN_OUTCOME_PROB`` are never returned.
    """
    _check_qubit(state, qubit)
    p1 = np.asarray(outcome_probability(state, qubit, 1))
    p0 = 1.0 - p1
    u = rng.random(state.batch_shape)
    outcome = (u < p1).astype(np.int8)
    outcome = np.where(p1 < MIN_OUTCOME_PROB, 0, outcome)
    outcome = np.where(p0 < MIN_OUTCOME_PROB, 1, outcome).astype(np.int8)
    prob = np.where(outcome == 1, p1, p0)

    keep = _bit_mask(state.num_qubits, qubit) == outcome[..., None]
    amps = np.where(keep, state.amplitudes, 0.0)
    # rows already in an eigenstate are left bit-for-bit unchanged, so
    # measuring a collapsed state again is exactly idempotent
    settled = np.all(amps == state.amplitudes, axis=-1)
    amps = np.where(settled[..., None], state.amplitudes, amps / np.sqrt(prob)[..., None])
    collapsed = StateVector(state.num_qubits, amps)
    if outcome.ndim == 0:
        return MeasurementResult(int(outcome), collapsed, float(prob))
    return MeasurementResult(outcome, collapsed, prob)


def norm(state: StateVector) -> Union[float, np.ndarray]:
    n = np.sqrt(np.sum(state.probabilities(), axis=-1))
    return float(n) if n.ndim == 0 else n


def select_gate(mask: np.ndarray, when_true: Gate, when_false: Gate) -> Gate:
    """Per-row choice between two gates of equal dimension."""
    mask = np.asarray(mask, dtype=bool)
    return Gate(np.where(mask[..., None, None], when_true.matrix, when_false.matrix))


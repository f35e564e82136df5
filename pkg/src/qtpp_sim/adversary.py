"""
Eavesdropper strategies hooked onto the three protocol passes.

Eve works on individual wire qubits only: each message position gets its own
record, and ancillas are never shared across positions.

The wire qubit is always qubit 0 of the register; ancillas attached by the
entangling attack are appended as qubits 1, 2, 3 in the order they were
attached.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .qsim import (
    MAX_QUBITS,
    Gate,
    StateVector,
    apply_gate,
    basis_state,
    cnot_gate,
    measure_qubit,
    rotation_gate,
    tensor,
)

WIRE = 0
MAX_ANCILLAS = MAX_QUBITS - 1
PASSES = (1, 2, 3)


class AttackKind(str, enum.Enum):
    PASSIVE = "passive"
    INTERCEPT_RESEND = "intercept-resend"
    ENTANGLE_CNOT = "entangle-cnot"


def _first(outcomes: np.ndarray) -> np.ndarray:
    return outcomes[:, 0]


def _last(outcomes: np.ndarray) -> np.ndarray:
    return outcomes[:, -1]


def _majority(outcomes: np.ndarray) -> np.ndarray:
    k = outcomes.shape[1]
    ones = outcomes.sum(axis=1)
    guess = (2 * ones > k).astype(np.int8)
    # ties (even k) fall back to the earliest outcome
    tie = 2 * ones == k
    return np.where(tie, outcomes[:, 0], guess).astype(np.int8)


def _parity(outcomes: np.ndarray) -> np.ndarray:
    return (outcomes.sum(axis=1) % 2).astype(np.int8)


# Deterministic maps from Eve's per-position outcomes (columns ordered by
# pass) to a single guessed bit.
GUESS_RULES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "first": _first,
    "last": _last,
    "majority": _majority,
    "parity": _parity,
}

DEFAULT_GUESS_RULE = {
    AttackKind.PASSIVE: "random",
    AttackKind.INTERCEPT_RESEND: "first",
    AttackKind.ENTANGLE_CNOT: "majority",
}
DEFAULT_PASSES = {
    AttackKind.PASSIVE: frozenset(),
    AttackKind.INTERCEPT_RESEND: frozenset({1}),
    AttackKind.ENTANGLE_CNOT: frozenset({1, 2, 3}),
}


@dataclass(frozen=True)
class AdversaryStrategy:
    """Configuration of Eve's behaviour for one session.

    ``measurement_basis_angle`` rotates the intercept-resend measurement
    basis to ``{R(a)|0>, R(a)|1>}``. ``ancilla_unitary`` is an optional
    ``2**k x 2**k`` unitary applied to Eve's ``k`` retained ancillas before
    she measures them (entangling attack only).
    """

    kind: AttackKind = AttackKind.PASSIVE
    attacked_passes: FrozenSet[int] = frozenset()
    measurement_basis_angle: float = 0.0
    guess_rule: Optional[str] = None
    ancilla_unitary: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        try:
            kind = AttackKind(self.kind)
        except ValueError:
            raise ConfigurationError(f"unknown adversary kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        passes = frozenset(int(p) for p in self.attacked_passes)
        if not passes <= set(PASSES):
            raise ConfigurationError(f"attacked passes must be a subset of {{1, 2, 3}}, got {sorted(passes)}")
        if kind is AttackKind.PASSIVE:
            passes = frozenset()
        elif not passes:
            raise ConfigurationError(f"{kind.value} needs at least one attacked pass")
        object.__setattr__(self, "attacked_passes", passes)

        rule = self.guess_rule or DEFAULT_GUESS_RULE[kind]
        if kind is AttackKind.PASSIVE:
            if rule != "random":
                raise ConfigurationError(f"passive adversary only supports guess_rule 'random', got {rule!r}")
        elif rule not in GUESS_RULES:
            raise ConfigurationError(f"unknown guess_rule {rule!r}; choose from {sorted(GUESS_RULES)}")
        object.__setattr__(self, "guess_rule", rule)

        if not np.isfinite(self.measurement_basis_angle):
            raise ConfigurationError("measurement_basis_angle must be finite")
        if self.ancilla_unitary is not None:
            if kind is not AttackKind.ENTANGLE_CNOT:
                raise ConfigurationError("ancilla_unitary is only meaningful for the entangling attack")
            u = Gate(np.asarray(self.ancilla_unitary))
            if u.dimension != 2 ** len(passes):
                raise ConfigurationError(
                    f"ancilla_unitary must be {2 ** len(passes)}x{2 ** len(passes)} for {len(passes)} ancilla(s)"
                )
            object.__setattr__(self, "ancilla_unitary", u.matrix)

    def attacks(self, pass_index: int) -> bool:
        return pass_index in self.attacked_passes

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "attacked_passes": sorted(self.attacked_passes),
            "measurement_basis_angle": float(self.measurement_basis_angle),
            "guess_rule": self.guess_rule,
            "ancilla_unitary": None if self.ancilla_unitary is None else "custom",
        }


def passive() -> AdversaryStrategy:
    return AdversaryStrategy(AttackKind.PASSIVE)


def intercept_resend(passes: Iterable[int] = (1,), basis_angle: float = 0.0, guess_rule: Optional[str] = None) -> AdversaryStrategy:
    return AdversaryStrategy(AttackKind.INTERCEPT_RESEND, frozenset(passes), basis_angle, guess_rule)


def entangle_cnot(
    passes: Iterable[int] = (1, 2, 3), guess_rule: Optional[str] = None, ancilla_unitary: Optional[np.ndarray] = None
) -> AdversaryStrategy:
    return AdversaryStrategy(AttackKind.ENTANGLE_CNOT, frozenset(passes), 0.0, guess_rule, ancilla_unitary)


@dataclass
class EveRecord:
    """Everything Eve keeps for one session, one entry per message position.

    ``observed`` maps pass index to the intercept-resend outcomes.
    ``ancilla_passes[i]`` is the pass on which ancilla qubit ``i + 1`` was
    attached. The protocol stores the final joint register in
    ``final_state`` so the ancillas can be measured afterwards.
    """

    n_bits: int
    observed: Dict[int, np.ndarray] = field(default_factory=dict)
    ancilla_passes: List[int] = field(default_factory=list)
    final_state: Optional[StateVector] = None
    final_guess: Optional[np.ndarray] = None


def _intercept(strategy: AdversaryStrategy, state: StateVector, rng: np.random.Generator) -> Tuple[StateVector, np.ndarray]:
    angle = strategy.measurement_basis_angle
    if angle:
        state = apply_gate(state, rotation_gate(-angle), [WIRE])
    m = measure_qubit(state, WIRE, rng)
    released = m.collapsed
    if angle:
        released = apply_gate(released, rotation_gate(angle), [WIRE])
    return released, np.asarray(m.outcome, dtype=np.int8)


def _entangle(state: StateVector) -> StateVector:
    ancilla = state.num_qubits
    joint = tensor(state, basis_state(1, [0]))
    return apply_gate(joint, cnot_gate(), [WIRE, ancilla])


def on_pass(
    strategy: AdversaryStrategy,
    wire_state: StateVector,
    pass_index: int,
    rng: np.random.Generator,
    record: Optional[EveRecord] = None,
) -> Tuple[StateVector, EveRecord]:
    """Let Eve act on the in-flight register for one pass.

    Returns the register released back onto the channel and the updated
    record.
    """
    if record is None:
        shape = wire_state.batch_shape
        record = EveRecord(int(np.prod(shape)) if shape else 1)
    if pass_index not in PASSES:
        raise ConfigurationError(f"pass index must be 1, 2 or 3, got {pass_index!r}")
    if not strategy.attacks(pass_index):
        return wire_state, record

    if strategy.kind is AttackKind.INTERCEPT_RESEND:
        released, outcome = _intercept(strategy, wire_state, rng)
        record.observed[pass_index] = outcome
        return released, record

    # entangling attack
    if len(record.ancilla_passes) >= MAX_ANCILLAS or wire_state.num_qubits >= MAX_QUBITS:
        raise ConfigurationError(f"ancilla budget of {MAX_ANCILLAS} exceeded")
    released = _entangle(wire_state)
    record.ancilla_passes.append(pass_index)
    return released, record


def _apply_rule(rule: str, outcomes: np.ndarray) -> np.ndarray:
    return GUESS_RULES[rule](outcomes).astype(np.int8)


def finalize_guess(strategy: AdversaryStrategy, record: EveRecord, rng: np.random.Generator) -> np.ndarray:
    """Eve's guess of every message bit once the session is over."""
    n = record.n_bits
    if strategy.kind is AttackKind.PASSIVE:
        guess = rng.integers(0, 2, size=n, dtype=np.int8)

    elif strategy.kind is AttackKind.INTERCEPT_RESEND:
        cols = [np.reshape(record.observed[p], n) for p in sorted(record.observed)]
        if not cols:
            raise ConfigurationError("intercept-resend record holds no observations")
        guess = _apply_rule(strategy.guess_rule, np.stack(cols, axis=1))

    else:
        if record.final_state is None:
            raise ConfigurationError("entangling attack needs the final joint register to measure ancillas")
        state = record.final_state
        k = len(record.ancilla_passes)
        ancillas = list(range(1, k + 1))
        if strategy.ancilla_unitary is not None:
            state = apply_gate(state, Gate(strategy.ancilla_unitary), ancillas)
        cols = []
        for q in ancillas:
            m = measure_qubit(state, q, rng)
            cols.append(np.reshape(m.outcome, n))
            state = m.collapsed
        guess = _apply_rule(strategy.guess_rule, np.stack(cols, axis=1))

    record.final_guess = guess
    return guess

"""
Quantum three-pass key transport.

Each message bit travels as one photon through three passes:

    pass 1  Alice -> Bob   R(a)|m>
    pass 2  Bob -> Alice   R(b) R(a)|m>
    pass 3  Alice -> Bob   R(-a) R(b) R(a)|m> = R(b)|m>

after which Bob applies R(-b) and measures in the computational basis.
On every pass the adversary hook runs first, then the channel.

Bits are simulated as a batch of independent single-qubit registers, so an
n-bit session costs a handful of vectorised gate applications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from . import adversary as adv
from .channel import IDEAL, NoiseModel, transmit
from .errors import ConfigurationError, DomainError
from .qsim import StateVector, apply_gate, basis_state, basis_states, measure_qubit, rotation_gate

WIRE = 0
ALICE = "Alice"
BOB = "Bob"
A_TO_B = "Alice->Bob"
B_TO_A = "Bob->Alice"


@dataclass(frozen=True, eq=False)
class MessageBits:
    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.int8, copy=True).reshape(-1)
        if b.size < 1:
            raise ConfigurationError("a message needs at least one bit")
        if not np.all((b == 0) | (b == 1)):
            raise DomainError("message bits must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, MessageBits):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __str__(self) -> str:
        return "".join(str(int(b)) for b in self.bits)

    @classmethod
    def from_string(cls, text: str) -> "MessageBits":
        if not text or set(text) - {"0", "1"}:
            raise DomainError(f"expected a non-empty string of 0/1, got {text!r}")
        return cls(np.array([int(c) for c in text]))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "MessageBits":
        if n < 1:
            raise ConfigurationError("a message needs at least one bit")
        return cls(rng.integers(0, 2, size=n))


@dataclass(frozen=True)
class AngleMode:
    """How key angles are drawn: ``uniform`` on [0, pi), ``fixed`` at ``theta``,
    or ``grid`` over ``{k*pi/m : k = 0..m-1}``."""

    kind: str = "uniform"
    theta: float = 0.0
    m: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed", "grid"):
            raise ConfigurationError(f"unknown angle mode {self.kind!r}")
        if self.kind == "fixed" and not 0.0 <= self.theta < math.pi:
            raise ConfigurationError(f"fixed key angle must lie in [0, pi), got {self.theta}")
        if self.kind == "grid" and self.m < 1:
            raise ConfigurationError(f"grid angle mode needs m >= 1, got {self.m}")

    @classmethod
    def parse(cls, text: str) -> "AngleMode":
        """Parse ``uniform``, ``fixed(0.785)`` or ``grid(8)``."""
        text = text.strip()
        if text == "uniform":
            return cls()
        for kind in ("fixed", "grid"):
            if text.startswith(kind + "(") and text.endswith(")"):
                arg = text[len(kind) + 1 : -1]
                try:
                    return cls(kind, theta=float(arg)) if kind == "fixed" else cls(kind, m=int(arg))
                except ValueError:
                    break
        raise ConfigurationError(f"cannot parse angle mode {text!r}")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed({self.theta!r})"
        if self.kind == "grid":
            return f"grid({self.m})"
        return "uniform"


@dataclass(frozen=True, eq=False)
class SessionKey:
    """One party's secret angles for a single session."""

    angles: np.ndarray
    owner: str

    def __post_init__(self):
        a = np.array(self.angles, dtype=float, copy=True).reshape(-1)
        if a.size < 1:
            raise ConfigurationError("session key must hold at least one angle")
        if not np.all((a >= 0.0) & (a < math.pi)):
            raise DomainError("key angles must lie in [0, pi)")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)
        if self.owner not in (ALICE, BOB):
            raise ConfigurationError(f"key owner must be {ALICE!r} or {BOB!r}")

    def __len__(self) -> int:
        return self.angles.size

    def __repr__(self) -> str:
        return f"SessionKey(owner={self.owner!r}, n={self.angles.size}, angles=<redacted>)"


def generate_session_key(
    n: int, rng: np.random.Generator, owner: str = ALICE, mode: AngleMode = AngleMode()
) -> SessionKey:
    if n < 1:
        raise ConfigurationError(f"key length must be >= 1, got {n}")
    if mode.kind == "uniform":
        angles = rng.uniform(0.0, math.pi, size=n)
    elif mode.kind == "fixed":
        angles = np.full(n, mode.theta)
    else:
        angles = rng.integers(0, mode.m, size=n) * (math.pi / mode.m)
    return SessionKey(angles, owner)


def encode_bit(bit: int) -> StateVector:
    """Logic 0 is ``|0>`` (horizontal), logic 1 is ``|1>`` (vertical)."""
    if bit not in (0, 1):
        raise DomainError(f"bit must be 0 or 1, got {bit!r}")
    return basis_state(1, [bit])


def encrypt(state: StateVector, theta: Union[float, np.ndarray]) -> StateVector:
    return apply_gate(state, rotation_gate(theta), [WIRE])


def decrypt(state: StateVector, theta: Union[float, np.ndarray]) -> StateVector:
    return apply_gate(state, rotation_gate(-np.asarray(theta, dtype=float)), [WIRE])


@dataclass(frozen=True, eq=False)
class PassRecord:
    """Channel-side view of one pass.

    ``qubit_states_on_wire`` is the register as the sending party released
    it, before Eve and the channel act (``None`` when recording is off).
    """

    pass_index: int
    direction: str
    qubit_states_on_wire: Optional[StateVector]
    lost: np.ndarray

    def __post_init__(self):
        expected = A_TO_B if self.pass_index in (1, 3) else B_TO_A
        if self.pass_index not in (1, 2, 3) or self.direction != expected:
            raise ConfigurationError(f"pass {self.pass_index} must travel {expected}")


@dataclass(frozen=True, eq=False)
class SessionTranscript:
    message: MessageBits
    key_a: SessionKey
    key_b: SessionKey
    passes: List[PassRecord]
    recovered: MessageBits
    per_bit_error: np.ndarray
    lost: np.ndarray
    eve: adv.EveRecord = field(repr=False)

    @property
    def usable(self) -> np.ndarray:
        """Positions whose photon survived all three passes."""
        return ~self.lost

    def to_dict(self, debug: bool = False) -> dict:
        """JSON-ready view. Key angles appear only when ``debug`` is set."""
        out = {
            "message": str(self.message),
            "recovered": str(self.recovered),
            "per_bit_error": [int(e) for e in self.per_bit_error],
            "lost": [int(x) for x in self.lost],
            "passes": [
                {"pass_index": p.pass_index, "direction": p.direction, "lost": [int(x) for x in p.lost]}
                for p in self.passes
            ],
            "keys": "redacted",
        }
        if debug:
            out["keys"] = {
                "key_a": [float(a) for a in self.key_a.angles],
                "key_b": [float(b) for b in self.key_b.angles],
            }
        return out


_STEPS = (
    (1, A_TO_B, "encrypt", "a"),
    (2, B_TO_A, "encrypt", "b"),
    (3, A_TO_B, "decrypt", "a"),
)


def run_session(
    message: MessageBits,
    key_a: SessionKey,
    key_b: SessionKey,
    channel: NoiseModel = IDEAL,
    adversary: adv.AdversaryStrategy = adv.passive(),
    rng: Optional[np.random.Generator] = None,
    record_states: bool = True,
) -> SessionTranscript:
    """Run the three passes for every bit of ``message``.

    A photon lost on any pass voids its bit: the position is flagged in
    ``lost`` and its entry in ``recovered`` is a placeholder.
    """
    n = len(message)
    if len(key_a) != n or len(key_b) != n:
        raise ConfigurationError(f"key lengths ({len(key_a)}, {len(key_b)}) must equal message length {n}")
    if rng is None:
        rng = np.random.default_rng()

    keys = {"a": key_a.angles, "b": key_b.angles}
    state = basis_states(message.bits)
    lost = np.zeros(n, dtype=bool)
    record = adv.EveRecord(n)
    passes = []
    for pass_index, direction, op, who in _STEPS:
        state = (encrypt if op == "encrypt" else decrypt)(state, keys[who])
        released = state
        state, record = adv.on_pass(adversary, state, pass_index, rng, record)
        state, lost_now = transmit(state, channel, rng)
        lost |= lost_now
        passes.append(PassRecord(pass_index, direction, released if record_states else None, lost_now))

    state = decrypt(state, keys["b"])
    m = measure_qubit(state, WIRE, rng)
    record.final_state = m.collapsed
    recovered = MessageBits(m.outcome)
    return SessionTranscript(
        message=message,
        key_a=key_a,
        key_b=key_b,
        passes=passes,
        recovered=recovered,
        per_bit_error=recovered.bits != message.bits,
        lost=lost,
        eve=record,
    )


def bob_final_state(
    message: MessageBits, key_a: SessionKey, key_b: SessionKey, order: Sequence[str] = ("a", "b")
) -> StateVector:
    """Noise-free register just before Bob's measurement.

    ``order`` sets which decryption happens first after Bob's encryption;
    the default is the protocol order (Alice, then Bob).
    """
    keys = {"a": key_a.angles, "b": key_b.angles}
    state = encrypt(encrypt(basis_states(message.bits), keys["a"]), keys["b"])
    for who in order:
        state = decrypt(state, keys[who])
    return state

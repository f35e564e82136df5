"""Classical XOR three-pass protocol and the passive break against it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError


def _bits(x) -> np.ndarray:
    if isinstance(x, str):
        if set(x) - {"0", "1"}:
            raise DomainError(f"expected a string of 0/1, got {x!r}")
        return np.array([int(c) for c in x], dtype=np.uint8)
    a = np.asarray(x, dtype=np.uint8).reshape(-1)
    if not np.all(a <= 1):
        raise DomainError("bits must be 0 or 1")
    return a


def bitstring(bits: np.ndarray) -> str:
    return "".join(str(int(b)) for b in bits)


@dataclass(frozen=True, eq=False)
class XorTranscript:
    """The three wire messages M^Ka, M^Ka^Kb, M^Kb."""

    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray

    def __post_init__(self):
        if not (len(self.m1) == len(self.m2) == len(self.m3)):
            raise DomainError("transcript messages must have equal length")


def xor_three_pass(message, k_a, k_b) -> Tuple[XorTranscript, np.ndarray]:
    m, ka, kb = _bits(message), _bits(k_a), _bits(k_b)
    if not (m.size == ka.size == kb.size):
        raise DomainError(f"length mismatch: message {m.size}, k_a {ka.size}, k_b {kb.size}")
    m1 = m ^ ka
    m2 = m1 ^ kb
    m3 = m2 ^ ka
    return XorTranscript(m1, m2, m3), m3 ^ kb


def eve_xor_recover(t: XorTranscript) -> np.ndarray:
    """XOR of all three wire messages; the keys cancel and M is left."""
    return t.m1 ^ t.m2 ^ t.m3

"""
BB84 prepare-and-measure baseline.

Bases are encoded as rotation angles: rectilinear = 0, diagonal = pi/4.
A bit b in basis angle t is sent as R(t)|b>; measuring in basis t means
undoing R(t) and reading the computational basis. Eve, when present,
does the same in a basis of her own chosen uniformly at random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adversary import AdversaryStrategy, AttackKind, passive
from .channel import IDEAL, NoiseModel, transmit
from .errors import ConfigurationError
from .qsim import apply_gate, basis_states, measure_qubit, rotation_gate

RECTILINEAR = 0
DIAGONAL = 1
BASIS_ANGLE = np.array([0.0, math.pi / 4])


@dataclass(frozen=True, eq=False)
class Bb84Session:
    alice_bits: np.ndarray
    alice_bases: np.ndarray
    bob_bases: np.ndarray
    bob_outcomes: np.ndarray
    lost: np.ndarray
    eve_outcomes: Optional[np.ndarray]
    sifted_positions: np.ndarray
    sifted_qber: float

    @property
    def n(self) -> int:
        return self.alice_bits.size

    @property
    def sift_fraction(self) -> float:
        return self.sifted_positions.size / self.n


def _measure_in(state, basis: np.ndarray, rng: np.random.Generator):
    angle = BASIS_ANGLE[basis]
    return measure_qubit(apply_gate(state, rotation_gate(-angle), [0]), 0, rng)


def run_bb84(
    n: int,
    adversary: AdversaryStrategy = passive(),
    channel: NoiseModel = IDEAL,
    rng: Optional[np.random.Generator] = None,
    alice_bases: Optional[np.ndarray] = None,
    bob_bases: Optional[np.ndarray] = None,
) -> Bb84Session:
    """Simulate ``n`` BB84 signals, sift, and estimate QBER on the sifted key.

    Basis lists may be forced for testing; otherwise they are uniform.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if adversary.kind is AttackKind.ENTANGLE_CNOT:
        raise ConfigurationError("the BB84 baseline supports passive and intercept-resend adversaries only")
    if rng is None:
        rng = np.random.default_rng()

    bits = rng.integers(0, 2, size=n, dtype=np.int8)
    a_bases = rng.integers(0, 2, size=n, dtype=np.int8) if alice_bases is None else np.asarray(alice_bases, dtype=np.int8)
    b_bases = rng.integers(0, 2, size=n, dtype=np.int8) if bob_bases is None else np.asarray(bob_bases, dtype=np.int8)
    if a_bases.shape != (n,) or b_bases.shape != (n,):
        raise ConfigurationError("forced basis lists must have length n")

    state = apply_gate(basis_states(bits), rotation_gate(BASIS_ANGLE[a_bases]), [0])

    eve = None
    if adversary.kind is AttackKind.INTERCEPT_RESEND:
        e_bases = rng.integers(0, 2, size=n, dtype=np.int8)
        m = _measure_in(state, e_bases, rng)
        eve = m.outcome
        state = apply_gate(basis_states(eve), rotation_gate(BASIS_ANGLE[e_bases]), [0])

    state, lost = transmit(state, channel, rng)
    outcomes = _measure_in(state, b_bases, rng).outcome

    # basis reconciliation over an authenticated classical channel
    sifted = np.flatnonzero((a_bases == b_bases) & ~lost)
    qber = float(np.mean(outcomes[sifted] != bits[sifted])) if sifted.size else float("nan")
    return Bb84Session(bits, a_bases, b_bases, outcomes, lost, eve, sifted, qber)

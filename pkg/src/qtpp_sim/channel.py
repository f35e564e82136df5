"""Per-pass channel imperfections acting on the wire qubit (qubit 0)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Tuple, Union

import numpy as np

from .errors import ConfigurationError
from .qsim import StateVector, apply_gate, identity_gate, rotation_gate, select_gate, x_gate

WIRE = 0


@dataclass(frozen=True)
class NoiseModel:
    """Misalignment, Gaussian rotation jitter, X-flip noise and photon loss.

    All angles are in radians. Applied once per pass, in the order
    loss, rotation (offset + jitter), flip.
    """

    fixed_offset: float = 0.0
    jitter_sigma: float = 0.0
    flip_prob: float = 0.0
    loss_prob: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.fixed_offset):
            raise ConfigurationError("channel.fixed_offset must be finite")
        if not (np.isfinite(self.jitter_sigma) and self.jitter_sigma >= 0):
            raise ConfigurationError(f"channel.jitter_sigma must be >= 0, got {self.jitter_sigma}")
        for name in ("flip_prob", "loss_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"channel.{name} must be in [0, 1], got {p}")

    @property
    def is_ideal(self) -> bool:
        return not (self.fixed_offset or self.jitter_sigma or self.flip_prob or self.loss_prob)

    def to_dict(self) -> dict:
        return asdict(self)


IDEAL = NoiseModel()


def transmit(
    state: StateVector, model: NoiseModel, rng: np.random.Generator
) -> Tuple[StateVector, Union[bool, np.ndarray]]:
    """Send ``state`` through one channel pass.

    Returns the output state and a lost flag (an array for batched states).
    Lost rows still carry a valid state so the batch stays rectangular;
    callers must mask them out.
    """
    shape = state.batch_shape
    lost = np.zeros(shape, dtype=bool)
    if model.loss_prob > 0:
        lost = rng.random(shape) < model.loss_prob

    if model.fixed_offset or model.jitter_sigma:
        angle = np.full(shape, float(model.fixed_offset))
        if model.jitter_sigma > 0:
            angle = angle + rng.normal(0.0, model.jitter_sigma, size=shape)
        state = apply_gate(state, rotation_gate(angle), [WIRE])

    if model.flip_prob > 0:
        flips = rng.random(shape) < model.flip_prob
        state = apply_gate(state, select_gate(flips, x_gate(), identity_gate()), [WIRE])

    if not shape:
        return state, bool(lost)
    return state, lost

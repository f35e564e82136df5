"""
Monte Carlo experiment runner and eavesdropper detection.

Every trial gets its own random stream derived from ``(master_seed,
trial_index)`` (see ``trial_rng``), runs one session, sacrifices a random
``check_fraction`` of the surviving key bits to estimate the QBER, and
flags the session when that estimate exceeds ``detection_threshold``.
Trial results are reduced in trial-index order, so the report does not
depend on the order in which trials were executed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import adversary as adv
from .bb84 import run_bb84
from .channel import IDEAL, NoiseModel
from .errors import ConfigurationError, EstimationError, SimulationError
from .protocol import ALICE, BOB, AngleMode, MessageBits, SessionTranscript, generate_session_key, run_session

RNG_SCHEME = "numpy.PCG64(SeedSequence(entropy=master_seed, spawn_key=(trial_index,)))/v1"
Z95 = 1.959963984540054
PROTOCOLS = ("qtpp", "bb84")


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Random stream for one trial. Changing this function changes every
    published result, so bump the version in ``RNG_SCHEME`` if you do."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str = "qtpp"
    trials: int = 1
    bits_per_session: int = 1000
    adversary: adv.AdversaryStrategy = field(default_factory=adv.passive)
    channel: NoiseModel = IDEAL
    check_fraction: float = 0.2
    detection_threshold: float = 0.11
    master_seed: int = 0
    angle_mode: AngleMode = AngleMode()

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.bits_per_session < 1:
            raise ConfigurationError(f"bits_per_session must be >= 1, got {self.bits_per_session}")
        if not 0.0 < self.check_fraction <= 1.0:
            raise ConfigurationError(f"check_fraction must be in (0, 1], got {self.check_fraction}")
        if not 0.0 <= self.detection_threshold <= 1.0:
            raise ConfigurationError(f"detection_threshold must be in [0, 1], got {self.detection_threshold}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigurationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.protocol == "bb84" and self.adversary.kind is adv.AttackKind.ENTANGLE_CNOT:
            raise ConfigurationError("the BB84 baseline supports passive and intercept-resend adversaries only")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "trials": self.trials,
            "bits_per_session": self.bits_per_session,
            "adversary": self.adversary.to_dict(),
            "channel": self.channel.to_dict(),
            "check_fraction": self.check_fraction,
            "detection_threshold": self.detection_threshold,
            "master_seed": self.master_seed,
            "angle_mode": str(self.angle_mode),
        }


class Detection(str, enum.Enum):
    CLEAN = "clean"
    COMPROMISED = "compromised"


def estimate_qber(sent, recovered, check_positions) -> float:
    """Mismatch fraction between ``sent`` and ``recovered`` on ``check_positions``."""
    sent = np.asarray(getattr(sent, "bits", sent))
    recovered = np.asarray(getattr(recovered, "bits", recovered))
    pos = np.asarray(check_positions, dtype=np.intp)
    if pos.size == 0:
        raise EstimationError("cannot estimate QBER from an empty check set")
    return float(np.mean(sent[pos] != recovered[pos]))


def select_check_positions(candidates: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Random subset (sorted) of ``candidates``; at least one position if any exist."""
    candidates = np.asarray(candidates, dtype=np.intp)
    if candidates.size == 0:
        return candidates
    if fraction >= 1.0:
        return candidates
    k = min(candidates.size, max(1, int(round(fraction * candidates.size))))
    return np.sort(rng.choice(candidates, size=k, replace=False))


def detect_eavesdropper(qber: float, threshold: float) -> Detection:
    return Detection.COMPROMISED if qber > threshold else Detection.CLEAN


@dataclass(frozen=True)
class TrialResult:
    trial: int
    bits: int = 0
    lost: int = 0
    sifted: int = 0
    check_bits: int = 0
    check_errors: int = 0
    eve_correct: int = 0
    eve_total: int = 0
    compromised: bool = False
    error: Optional[str] = None


def _qtpp_session(config: ExperimentConfig, rng: np.random.Generator, record_states: bool = False) -> SessionTranscript:
    n = config.bits_per_session
    message = MessageBits.random(n, rng)
    key_a = generate_session_key(n, rng, ALICE, config.angle_mode)
    key_b = generate_session_key(n, rng, BOB, config.angle_mode)
    return run_session(message, key_a, key_b, config.channel, config.adversary, rng, record_states=record_states)


def trial_transcript(config: ExperimentConfig, trial_index: int = 0) -> SessionTranscript:
    """Re-run the QTPP session of one trial and return its full transcript."""
    if config.protocol != "qtpp":
        raise ConfigurationError("transcripts exist for the qtpp protocol only")
    return _qtpp_session(config, trial_rng(config.master_seed, trial_index), record_states=True)


def _qtpp_trial(config: ExperimentConfig, rng: np.random.Generator):
    t = _qtpp_session(config, rng)
    message = t.message
    guess = adv.finalize_guess(config.adversary, t.eve, rng)
    survived = np.flatnonzero(~t.lost)
    return message.bits, t.recovered.bits, survived, survived, guess


def _bb84_trial(config: ExperimentConfig, rng: np.random.Generator):
    s = run_bb84(config.bits_per_session, config.adversary, config.channel, rng)
    if s.eve_outcomes is not None:
        guess = s.eve_outcomes
    else:
        guess = rng.integers(0, 2, size=s.n, dtype=np.int8)
    survived = np.flatnonzero(~s.lost)
    return s.alice_bits, s.bob_outcomes, survived, s.sifted_positions, guess


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """One independent session. Simulation errors are captured, not raised."""
    rng = trial_rng(config.master_seed, trial_index)
    try:
        body = _qtpp_trial if config.protocol == "qtpp" else _bb84_trial
        sent, recovered, survived, key_positions, guess = body(config, rng)
        check = select_check_positions(key_positions, config.check_fraction, rng)
        qber = estimate_qber(sent, recovered, check)
    except SimulationError as exc:
        return TrialResult(trial_index, bits=config.bits_per_session, error=f"{type(exc).__name__}: {exc}")
    return TrialResult(
        trial=trial_index,
        bits=sent.size,
        lost=sent.size - survived.size,
        sifted=key_positions.size,
        check_bits=check.size,
        check_errors=int(np.sum(sent[check] != recovered[check])),
        eve_correct=int(np.sum(guess[survived] == sent[survived])),
        eve_total=survived.size,
        compromised=detect_eavesdropper(qber, config.detection_threshold) is Detection.COMPROMISED,
    )


def binomial_ci95(successes: int, total: int):
    """Point estimate and normal-approximation 95% half-width."""
    if total == 0:
        return None, None
    p = successes / total
    return p, Z95 * math.sqrt(p * (1.0 - p) / total)


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> Optional[float]:
    """(p1 - p2) in units of its unpooled standard error."""
    if n1 == 0 or n2 == 0:
        return None
    p1, p2 = k1 / n1, k2 / n2
    se = math.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
    if se == 0.0:
        return 0.0 if p1 == p2 else math.copysign(math.inf, p1 - p2)
    return (p1 - p2) / se


@dataclass(frozen=True)
class ExperimentReport:
    mean_qber: Optional[float]
    qber_ci95: Optional[float]
    eve_accuracy: Optional[float]
    eve_ci95: Optional[float]
    detection_rate: Optional[float]
    sift_fraction: float
    lost_fraction: float
    usable_fraction: float
    total_bits: int
    check_bits: int
    check_errors: int
    eve_correct: int
    eve_total: int
    trials_completed: int
    trials_failed: int

    def results_dict(self) -> dict:
        return {
            "mean_qber": self.mean_qber,
            "qber_ci95": self.qber_ci95,
            "eve_accuracy": self.eve_accuracy,
            "eve_ci95": self.eve_ci95,
            "detection_rate": self.detection_rate,
            "sift_fraction": self.sift_fraction,
            "lost_fraction": self.lost_fraction,
            "usable_fraction": self.usable_fraction,
            "total_bits": self.total_bits,
            "check_bits": self.check_bits,
            "check_errors": self.check_errors,
            "trials_completed": self.trials_completed,
            "trials_failed": self.trials_failed,
        }


def aggregate(results: Iterable[TrialResult]) -> ExperimentReport:
    results = sorted(results, key=lambda r: r.trial)
    ok = [r for r in results if r.error is None]
    total_bits = sum(r.bits for r in results)
    check_bits = sum(r.check_bits for r in ok)
    check_errors = sum(r.check_errors for r in ok)
    eve_correct = sum(r.eve_correct for r in ok)
    eve_total = sum(r.eve_total for r in ok)
    sifted = sum(r.sifted for r in ok)
    lost = sum(r.lost for r in ok)
    ok_bits = sum(r.bits for r in ok)

    qber, qber_ci = binomial_ci95(check_errors, check_bits)
    eve, eve_ci = binomial_ci95(eve_correct, eve_total)
    return ExperimentReport(
        mean_qber=qber,
        qber_ci95=qber_ci,
        eve_accuracy=eve,
        eve_ci95=eve_ci,
        detection_rate=(sum(r.compromised for r in ok) / len(ok)) if ok else None,
        sift_fraction=sifted / ok_bits if ok_bits else 0.0,
        lost_fraction=lost / ok_bits if ok_bits else 0.0,
        usable_fraction=(sifted - check_bits) / ok_bits if ok_bits else 0.0,
        total_bits=total_bits,
        check_bits=check_bits,
        check_errors=check_errors,
        eve_correct=eve_correct,
        eve_total=eve_total,
        trials_completed=len(ok),
        trials_failed=len(results) - len(ok),
    )


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    return aggregate(run_trial(config, i) for i in range(config.trials))


# -- sweeps ---------------------------------------------------------------

def _set_theta(c: ExperimentConfig, v: float) -> ExperimentConfig:
    return replace(c, angle_mode=AngleMode("fixed", theta=v))


def _set_channel(name: str):
    return lambda c, v: replace(c, channel=replace(c.channel, **{name: v}))


def _set_basis_angle(c: ExperimentConfig, v: float) -> ExperimentConfig:
    return replace(c, adversary=replace(c.adversary, measurement_basis_angle=v))


SWEEP_PARAMS = {
    "theta": _set_theta,
    "fixed_offset": _set_channel("fixed_offset"),
    "jitter_sigma": _set_channel("jitter_sigma"),
    "flip_prob": _set_channel("flip_prob"),
    "loss_prob": _set_channel("loss_prob"),
    "basis_angle": _set_basis_angle,
    "check_fraction": lambda c, v: replace(c, check_fraction=v),
    "detection_threshold": lambda c, v: replace(c, detection_threshold=v),
}


@dataclass(frozen=True)
class SweepPoint:
    param_name: str
    param_value: float
    report: ExperimentReport


def with_param(config: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    try:
        setter = SWEEP_PARAMS[param]
    except KeyError:
        raise ConfigurationError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}") from None
    return setter(config, float(value))


def run_sweep(config: ExperimentConfig, param: str, values: Sequence[float]) -> List[SweepPoint]:
    """Same master seed at every point (common random numbers)."""
    return [SweepPoint(param, float(v), run_experiment(with_param(config, param, v))) for v in values]


# -- side-by-side comparison ---------------------------------------------

@dataclass(frozen=True)
class ProtocolComparisonRow:
    """One protocol under a shared channel/adversary setting.

    ``under_attack``: configured adversary on the configured channel.
    ``noise_floor``: passive adversary on the configured channel.
    ``attack_signature``: configured adversary on an ideal channel, i.e. the
    error rate Eve's presence alone produces.
    """

    protocol: str
    under_attack: ExperimentReport
    noise_floor: ExperimentReport
    attack_signature: ExperimentReport

    @property
    def attack_vs_floor_z(self) -> Optional[float]:
        a, f = self.under_attack, self.noise_floor
        return two_proportion_z(a.check_errors, a.check_bits, f.check_errors, f.check_bits)

    @property
    def signature_vs_floor_z(self) -> Optional[float]:
        s, f = self.attack_signature, self.noise_floor
        return two_proportion_z(s.check_errors, s.check_bits, f.check_errors, f.check_bits)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "usable_fraction": self.under_attack.usable_fraction,
            "sift_fraction": self.under_attack.sift_fraction,
            "under_attack_qber": self.under_attack.mean_qber,
            "under_attack_qber_ci95": self.under_attack.qber_ci95,
            "noise_floor_qber": self.noise_floor.mean_qber,
            "noise_floor_qber_ci95": self.noise_floor.qber_ci95,
            "attack_signature_qber": self.attack_signature.mean_qber,
            "attack_signature_qber_ci95": self.attack_signature.qber_ci95,
            "attack_vs_floor_z": self.attack_vs_floor_z,
            "signature_vs_floor_z": self.signature_vs_floor_z,
            "detection_rate": self.under_attack.detection_rate,
            "false_alarm_rate": self.noise_floor.detection_rate,
            "eve_accuracy": self.under_attack.eve_accuracy,
        }


def _compare_row(config: ExperimentConfig) -> ProtocolComparisonRow:
    attack = run_experiment(config)
    floor = run_experiment(replace(config, adversary=adv.passive()))
    signature = attack if config.channel.is_ideal else run_experiment(replace(config, channel=IDEAL))
    return ProtocolComparisonRow(config.protocol, attack, floor, signature)


def tune_flip_prob(
    config: ExperimentConfig, target_qber: float, tol: float = 0.005, max_iter: int = 30
) -> float:
    """Flip probability whose passive (noise-only) QBER is within ``tol`` of
    ``target_qber``, found by bisection on ``[0, 1]``.

    Every probe reuses the config's seed, so successive evaluations share
    random numbers and the QBER is monotone in the flip probability over the
    bracket that matters here (floors up to 0.5).
    """
    if not 0.0 <= target_qber <= 0.5:
        raise ConfigurationError(f"target QBER must lie in [0, 0.5], got {target_qber}")
    base = replace(config, adversary=adv.passive())

    def floor(p: float) -> float:
        return run_experiment(replace(base, channel=replace(config.channel, flip_prob=p))).mean_qber

    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        q = floor(mid)
        if abs(q - target_qber) <= tol:
            return mid
        if q < target_qber:
            lo = mid
        else:
            hi = mid
    return mid


def compare_protocols(
    qtpp_config: ExperimentConfig, bb84_config: Optional[ExperimentConfig] = None
) -> Dict[str, ProtocolComparisonRow]:
    """QTPP and BB84 rows under a matched adversary, seed and trial count.

    The channels must agree except possibly in ``flip_prob``: the same X-flip
    rate yields different noise floors in the two protocols, so a floor-matched
    comparison needs per-protocol flip tuning (see :func:`tune_flip_prob`).
    """
    if bb84_config is None:
        bb84_config = replace(qtpp_config, protocol="bb84")
    if qtpp_config.protocol != "qtpp" or bb84_config.protocol != "bb84":
        raise ConfigurationError("compare_protocols expects a (qtpp, bb84) config pair")
    for name in ("trials", "master_seed", "bits_per_session", "check_fraction", "detection_threshold"):
        if getattr(qtpp_config, name) != getattr(bb84_config, name):
            raise ConfigurationError(f"compared configs differ in {name}")
    if replace(qtpp_config.channel, flip_prob=0.0) != replace(bb84_config.channel, flip_prob=0.0):
        raise ConfigurationError("compared channels may differ only in flip_prob")
    if qtpp_config.adversary.kind != bb84_config.adversary.kind:
        raise ConfigurationError("compared configs must use the same adversary kind")
    return {"qtpp": _compare_row(qtpp_config), "bb84": _compare_row(bb84_config)}

import math

import numpy as np
import pytest

from qtpp_sim import protocol
from qtpp_sim.channel import IDEAL, NoiseModel, transmit
from qtpp_sim.errors import ConfigurationError
from qtpp_sim.protocol import ALICE, BOB, AngleMode, MessageBits, generate_session_key, run_session
from qtpp_sim.qsim import apply_gate, basis_state, basis_states, norm, rotation_gate

N = 100_000


def run(model, n=N, seed=0, mode=AngleMode(), bits=None):
    rng = np.random.default_rng(seed)
    m = MessageBits(bits) if bits is not None else MessageBits.random(n, rng)
    ka = generate_session_key(len(m), rng, ALICE, mode)
    kb = generate_session_key(len(m), rng, BOB, mode)
    return m, ka, kb, run_session(m, ka, kb, channel=model, rng=rng, record_states=False)


def test_noise_model_validation():
    with pytest.raises(ConfigurationError):
        NoiseModel(flip_prob=1.5)
    with pytest.raises(ConfigurationError):
        NoiseModel(loss_prob=-0.1)
    with pytest.raises(ConfigurationError):
        NoiseModel(jitter_sigma=-1)
    assert IDEAL.is_ideal and not NoiseModel(flip_prob=0.1).is_ideal


def test_ideal_channel_is_identity():
    s = apply_gate(basis_state(1, [0]), rotation_gate(0.4), [0])
    out, lost = transmit(s, IDEAL, np.random.default_rng(0))
    assert lost is False
    assert np.array_equal(out.amplitudes, s.amplitudes)


def test_fixed_offset_error_rate():
    delta = 0.2
    oracle = math.sin(3 * delta) ** 2
    m, _, _, t = run(NoiseModel(fixed_offset=delta), bits=np.zeros(N, dtype=int))
    assert abs(t.per_bit_error.mean() - oracle) < 4 * math.sqrt(oracle * (1 - oracle) / N)


def test_fixed_offset_final_state_is_net_rotation():
    delta = 0.13
    rng = np.random.default_rng(1)
    n = 1000
    m = MessageBits.random(n, rng)
    ka, kb = generate_session_key(n, rng, ALICE), generate_session_key(n, rng, BOB)
    # zero flip/loss: Bob's pre-measurement state must equal R(3 delta)|m>
    state = basis_states(m.bits)
    for op, theta in ((protocol.encrypt, ka.angles), (protocol.encrypt, kb.angles), (protocol.decrypt, ka.angles)):
        state = op(state, theta)
        state, _ = transmit(state, NoiseModel(fixed_offset=delta), rng)
    state = protocol.decrypt(state, kb.angles)
    expected = apply_gate(basis_states(m.bits), rotation_gate(3 * delta), [0])
    assert np.max(np.abs(state.amplitudes - expected.amplitudes)) < 1e-9


def test_rotation_noise_commutes_with_protocol():
    rng = np.random.default_rng(2)
    n = 1000
    m = MessageBits.random(n, rng)
    ka, kb = generate_session_key(n, rng, ALICE), generate_session_key(n, rng, BOB)
    offset, sigma = rng.uniform(-0.3, 0.3), 0.05
    jitters = rng.normal(0, sigma, size=(3, n))

    state = basis_states(m.bits)
    for k, (op, theta) in enumerate(((protocol.encrypt, ka.angles), (protocol.encrypt, kb.angles), (protocol.decrypt, ka.angles))):
        state = op(state, theta)
        state = apply_gate(state, rotation_gate(offset + jitters[k]), [0])
    state = protocol.decrypt(state, kb.angles)
    expected = apply_gate(basis_states(m.bits), rotation_gate(3 * offset + jitters.sum(axis=0)), [0])
    assert np.max(np.abs(state.amplitudes - expected.amplitudes)) < 1e-9


def test_jitter_channel_norm_preserved():
    rng = np.random.default_rng(3)
    s = basis_states(rng.integers(0, 2, 10_000))
    out, _ = transmit(s, NoiseModel(fixed_offset=0.1, jitter_sigma=0.5, flip_prob=0.3), rng)
    assert np.max(np.abs(norm(out) - 1)) < 1e-9


def test_flip_half_decorrelates():
    _, _, _, t = run(NoiseModel(flip_prob=0.5), seed=4)
    assert abs(t.per_bit_error.mean() - 0.5) < 4 * math.sqrt(0.25 / N)


def test_flip_is_amplitude_swap():
    out, _ = transmit(basis_state(1, [0]), NoiseModel(flip_prob=1.0), np.random.default_rng(5))
    assert np.array_equal(out.amplitudes, [0, 1])


def test_flip_floor_at_quarter_pi_keys_equals_flip_prob():
    p = 0.25
    _, _, _, t = run(NoiseModel(flip_prob=p), seed=6, mode=AngleMode("fixed", theta=math.pi / 4))
    assert abs(t.per_bit_error.mean() - p) < 4 * math.sqrt(p * (1 - p) / N)


def test_qber_monotone_in_flip_prob():
    rates = []
    for p in np.round(np.arange(0, 0.51, 0.1), 2):
        _, _, _, t = run(NoiseModel(flip_prob=float(p)), seed=7)
        rates.append(t.per_bit_error.mean())
    assert rates[0] == 0.0
    assert all(b >= a for a, b in zip(rates, rates[1:])), rates


def test_loss_flags_bits():
    p = 0.1
    _, _, _, t = run(NoiseModel(loss_prob=p), seed=8)
    expected = 1 - (1 - p) ** 3
    assert abs(t.lost.mean() - expected) < 4 * math.sqrt(expected * (1 - expected) / N)
    # loss alone never corrupts surviving bits
    assert not t.per_bit_error[~t.lost].any()
    per_pass = [p_.lost.mean() for p_ in t.passes]
    assert all(abs(x - p) < 0.005 for x in per_pass)

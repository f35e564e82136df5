import math

import numpy as np
import pytest

from qtpp_sim.adversary import entangle_cnot, intercept_resend
from qtpp_sim.bb84 import run_bb84
from qtpp_sim.channel import NoiseModel
from qtpp_sim.errors import ConfigurationError

N = 100_000


def test_no_eve_sifting_and_zero_qber():
    s = run_bb84(N, rng=np.random.default_rng(0))
    assert abs(s.sift_fraction - 0.5) < 0.005
    assert s.sifted_qber == 0.0
    assert np.array_equal(s.sifted_positions, np.flatnonzero(s.alice_bases == s.bob_bases))


def test_intercept_resend_quarter_qber():
    s = run_bb84(N, intercept_resend(), rng=np.random.default_rng(1))
    assert abs(s.sifted_qber - 0.25) < 0.01
    n = s.sifted_positions.size
    assert abs(s.sifted_qber - 0.25) < 3 * math.sqrt(0.25 * 0.75 / n)


def test_forced_matched_bases_all_correct():
    rng = np.random.default_rng(2)
    bases = rng.integers(0, 2, 1000)
    s = run_bb84(1000, rng=rng, alice_bases=bases, bob_bases=bases)
    assert s.sift_fraction == 1.0
    assert np.array_equal(s.bob_outcomes, s.alice_bits)


def test_mismatched_bases_carry_no_information():
    s = run_bb84(N, rng=np.random.default_rng(3))
    mism = s.alice_bases != s.bob_bases
    assert abs(s.bob_outcomes[mism].mean() - 0.5) < 0.01
    assert abs((s.bob_outcomes[mism] == s.alice_bits[mism]).mean() - 0.5) < 0.01


@pytest.mark.parametrize("p", [0.25, 0.5])
def test_flip_noise_floor_is_half_flip_prob(p):
    # diagonal states are X eigenstates, so only rectilinear rounds are hit
    s = run_bb84(N, channel=NoiseModel(flip_prob=p), rng=np.random.default_rng(4))
    diag = s.alice_bases[s.sifted_positions] == 1
    errors = s.bob_outcomes[s.sifted_positions] != s.alice_bits[s.sifted_positions]
    assert not errors[diag].any()
    assert abs(s.sifted_qber - p / 2) < 0.01


def test_lost_positions_are_not_sifted():
    s = run_bb84(10_000, channel=NoiseModel(loss_prob=0.3), rng=np.random.default_rng(5))
    assert not s.lost[s.sifted_positions].any()


def test_rejects_entangling_adversary():
    with pytest.raises(ConfigurationError):
        run_bb84(10, entangle_cnot(), rng=np.random.default_rng(0))


def test_rejects_empty():
    with pytest.raises(ConfigurationError):
        run_bb84(0)

import itertools

import numpy as np
import pytest

from qhashlab.errors import InfeasibleParameters
from qhashlab.fingerprint import (FingerprintScheme, build_hadamard, build_random_linear, delta_of,
                                  from_codewords, linear_codewords, message_bits,
                                  negligibility_profile, weight_delta)


def test_message_bits_big_endian():
    assert message_bits(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_linear_codewords_match_matrix_product(rng):
    g = rng.integers(0, 2, size=(4, 7), dtype=np.uint8)
    expected = (message_bits(4).astype(int) @ g) % 2
    np.testing.assert_array_equal(linear_codewords(g), expected)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_hadamard_is_orthonormal(n):
    s = build_hadamard(n)
    assert s.delta_measured == 0.0
    assert s.m_qubits == n
    np.testing.assert_allclose(s.gram(), np.eye(2**n), atol=1e-15)
    v = s.states()
    np.testing.assert_allclose(v @ v.conj().T, np.eye(2**n), atol=1e-12)


def test_delta_matches_brute_force(rng):
    for seed in range(10):
        s = build_random_linear(4, 6, 1.0, seed)
        v = s.states()
        brute = max(abs(np.vdot(v[a], v[b])) for a, b in itertools.combinations(range(16), 2))
        assert delta_of(s) == pytest.approx(brute, abs=1e-12)
        assert weight_delta(s.codewords) == pytest.approx(brute, abs=1e-12)


def test_padding_to_power_of_two():
    s = build_random_linear(3, 6, 1.0, 0)
    assert s.dim == 8 and s.m_qubits == 3
    assert np.all(s.states()[:, 6:] == 0)
    np.testing.assert_allclose(np.linalg.norm(s.states(), axis=1), 1.0)


def test_random_linear_meets_target_and_is_reproducible():
    a = build_random_linear(6, 64, 0.5, seed=3)
    b = build_random_linear(6, 64, 0.5, seed=3)
    assert a.delta_measured <= 0.5
    np.testing.assert_array_equal(a.generator, b.generator)


def test_random_linear_retry_cap():
    with pytest.raises(InfeasibleParameters):
        build_random_linear(8, 2, 0.0, seed=0, max_attempts=5)


def test_round_trip_dict():
    s = build_random_linear(5, 16, 1.0, seed=4)
    back = FingerprintScheme.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.codewords, s.codewords)
    assert back.delta_measured == s.delta_measured
    ext = from_codewords(s.codewords)
    assert FingerprintScheme.from_dict(ext.to_dict()).delta_measured == s.delta_measured


def test_repeated_codewords_give_delta_one():
    s = from_codewords([[0, 1], [0, 1]])
    assert s.delta_measured == 1.0


def test_profile_trend():
    prof = negligibility_profile(build_hadamard, range(1, 5))
    assert prof.delta_trend() == "constant"
    assert [r["m"] for r in prof.as_table()] == [1, 2, 3, 4]


def test_n8_code_length_1024():
    s = build_random_linear(8, 1024, 0.25, seed=0)
    assert s.delta_measured <= 0.25
    assert s.m_qubits == 10
    assert delta_of(s) == s.delta_measured

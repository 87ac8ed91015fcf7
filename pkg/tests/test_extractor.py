import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from qhashlab import numerics as nx
from qhashlab.extractor import (audit_extractor, build_ip_extractor, classical_proof_error,
                                cpext_spot_check, fingerprint_cq_state, fixed_seed_error,
                                flat_source, plain_extractor_error, quantum_proof_error,
                                random_source_with_guess_bound, topsep_exact_point,
                                topsep_witness, worst_flat_error)
from qhashlab.decomposition import conversion_upper_bound
from qhashlab.fingerprint import build_hadamard, build_random_linear
from qhashlab.states import CqState, JointDistribution, guess_prob_classical


def test_table_matches_scalar_map():
    e = build_ip_extractor(3, 2)
    tab = e.table()
    for x, s in itertools.product(range(8), range(64)):
        rows = [(s >> (r * 3)) & 7 for r in range(2)]
        bits = [bin(row & x).count("1") % 2 for row in rows]
        assert tab[x, s] == bits[0] * 2 + bits[1] == e(x, s)


def test_uniform_source_full_rank_seed():
    e = build_ip_extractor(4, 2)
    u = np.full(16, 1 / 16)
    seed = 0b0010_0001  # rows 0001 and 0010
    assert fixed_seed_error(e, u, seed) == 0.0


def test_degenerate_seed_gives_constant_output():
    e = build_ip_extractor(3, 1)
    src = flat_source(3, [0, 1])  # affine line {000, 001}
    seed = 0b110  # orthogonal to 001
    assert fixed_seed_error(e, src, seed) == pytest.approx(1.0)


def test_average_seed_error_brute_force():
    # oracle: enumerate seeds and outputs by hand
    e = build_ip_extractor(4, 1)
    support = [0, 1, 2, 3, 4, 5, 6, 8]
    src = flat_source(4, support)
    total = 0.0
    for s in range(16):
        ones = sum(bin(s & x).count("1") % 2 for x in support) / len(support)
        total += abs(ones - 0.5) + abs(1 - ones - 0.5)
    assert plain_extractor_error(e, src) == pytest.approx(total / 16)
    assert plain_extractor_error(e, src, strong=False) <= plain_extractor_error(e, src) + 1e-15


def _gf2_rank(rows):
    rank, rows = 0, list(rows)
    for bit in reversed(range(16)):
        pivot = next((r for r in rows if r >> bit & 1), None)
        if pivot is None:
            continue
        rows.remove(pivot)
        rows = [r ^ pivot if r >> bit & 1 else r for r in rows]
        rank += 1
    return rank


@pytest.mark.parametrize("n,m", [(3, 1), (3, 2), (4, 2)])
def test_uniform_source_error_comes_from_rank_deficient_seeds(n, m):
    # oracle: S x is uniform on an image of size 2^rank(S), so each seed adds 2 (1 - 2^{rank - m})
    e = build_ip_extractor(n, m)
    S = 2 ** (n * m)
    expected = sum(2 * (1 - 2.0 ** (_gf2_rank([(s >> (r * n)) & (2**n - 1) for r in range(m)]) - m))
                   for s in range(S)) / S
    assert plain_extractor_error(e, np.full(2**n, 2.0**-n)) == pytest.approx(expected, abs=1e-14)


def test_independent_side_information_does_not_help():
    e = build_ip_extractor(3, 1)
    for px in (np.full(8, 1 / 8), flat_source(3, [1, 2, 4, 7])):
        j = JointDistribution(np.outer(px, [0.3, 0.7]))
        for strong in (True, False):
            assert classical_proof_error(e, j, strong) == pytest.approx(
                plain_extractor_error(e, px, strong), abs=1e-15)


def test_side_information_equal_to_source():
    e = build_ip_extractor(4, 1)
    j = JointDistribution(np.eye(16) / 16)
    assert classical_proof_error(e, j) == pytest.approx(2 * (1 - 2**-1))


def test_quantum_error_of_independent_state(rng):
    e = build_ip_extractor(3, 1)
    sig = nx.random_density_matrix(rng, 3)
    rho = CqState(np.stack([sig / 8] * 8))
    plain = plain_extractor_error(e, np.full(8, 1 / 8))
    assert quantum_proof_error(e, rho) == pytest.approx(plain, abs=1e-12)


def test_diagonal_embedding_matches_classical(rng):
    e = build_ip_extractor(3, 2)
    for _ in range(20):
        t = rng.random((8, 4))
        j = JointDistribution(t / t.sum())
        for strong in (True, False):
            assert quantum_proof_error(e, CqState.from_joint(j), strong) == pytest.approx(
                classical_proof_error(e, j, strong), abs=1e-10)


def test_quantum_error_dense_oracle():
    # oracle: build the full output cq state and take one trace norm
    e = build_ip_extractor(3, 1)
    s = build_random_linear(3, 4, 1.0, seed=1)
    rho = fingerprint_cq_state(s)
    Z, S, D = 2, 8, rho.dim
    big = np.zeros((Z * S * D, Z * S * D), dtype=complex)
    for x in range(8):
        for seed in range(S):
            z = e(x, seed)
            i = (z * S + seed) * D
            big[i:i + D, i:i + D] += rho.blocks[x] / S
    ideal = np.kron(np.eye(Z * S) / (Z * S), rho.side_state())
    assert quantum_proof_error(e, rho) == pytest.approx(nx.trace_norm(big - ideal), abs=1e-10)


def test_worst_flat_error_limits():
    e = build_ip_extractor(4, 1)
    assert worst_flat_error(e, 0)[0] == pytest.approx(1.0)
    errs = [worst_flat_error(e, k)[0] for k in range(5)]
    assert errs == sorted(errs, reverse=True)


def test_random_source_meets_guess_bound(rng):
    for p in (0.5, 0.25, 0.1):
        j = random_source_with_guess_bound(rng, 4, p)
        assert guess_prob_classical(j) <= p + 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cpext_spot_check(k):
    chk = cpext_spot_check(build_ip_extractor(4, 1), k, rng=np.random.default_rng(k), trials=100)
    assert chk.holds
    assert chk.worst_classical_error <= 2 * chk.epsilon


def test_topsep_hadamard():
    w = topsep_witness(build_hadamard(4))
    assert w.cc_error_lower_bound == pytest.approx(1.5)
    assert w.p_guess_upper == pytest.approx(1.0)
    assert w.margin > 0


def test_topsep_random_code_reports_entropy():
    s = build_random_linear(5, 8, 1.0, seed=0)
    w = topsep_witness(s, gap_tol=1e-7)
    assert w.cq_k_certified >= 5 - s.m_qubits - 1e-6
    assert w.p_guess_lower <= w.p_guess_upper


def test_topsep_exact_point():
    pt = topsep_exact_point()
    assert pt["conversion_lower"] == Fraction(1, 2)
    assert pt["conversion_lower_additive"] == Fraction(49, 100)
    assert pt["cc_error_lower_bound"] == Fraction(147, 100)
    assert pt["separated"]


def test_trivial_conversion_with_full_side_information():
    rho = fingerprint_cq_state(build_random_linear(3, 4, 1.0, seed=2))
    pt = conversion_upper_bound(rho, [[x] for x in range(8)])
    assert pt.epsilon == pytest.approx(0.0, abs=1e-12)
    assert -math.log2(pt.p) == pytest.approx(0.0)


def test_audit_rows():
    e = build_ip_extractor(3, 1)
    rho = fingerprint_cq_state(build_hadamard(3))
    j = JointDistribution(np.full((8, 1), 1 / 8))
    rep = audit_extractor(e, {"uniform": j, "fp": rho})
    assert [r["source"] for r in rep.rows] == ["uniform", "fp"]
    assert rep.rows[0]["k"] == pytest.approx(3.0)
    assert math.isnan(rep.rows[1]["classical_error"])
    assert 0 <= rep.error_quantum <= 2

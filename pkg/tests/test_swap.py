from fractions import Fraction

import numpy as np
import pytest

from qhashlab import numerics as nx
from qhashlab.attack import no_leak, prefix_leak
from qhashlab.errors import DimensionError
from qhashlab.fingerprint import build_hadamard, build_random_linear
from qhashlab.swap import (SwapScheme, exact_honest_acceptance, pairwise_accept,
                           pairwise_swap_projector, product_accept_probability, random_forgery,
                           swap_accept_probability, swap_attack_audit, two_proof_identities)


def test_maximally_mixed_single_slot():
    s = SwapScheme(build_hadamard(1), 1)
    for method in ("expansion", "direct", "factorized"):
        assert swap_accept_probability(s, 0, np.eye(2) / 2, method) == pytest.approx(0.75)


@pytest.mark.parametrize("t", [1, 2, 3])
def test_product_forgery_factorizes(rng, t):
    s = SwapScheme(build_random_linear(2, 4, 1.0, seed=t), t)
    nus = [nx.random_density_matrix(rng, s.slot_dim) for _ in range(t)]
    mu = nx.tensor(*nus)
    expected = product_accept_probability(s, 1, nus)
    for method in ("expansion", "direct", "factorized"):
        if method == "direct" and 2 * s.qubits > 10:
            continue
        assert swap_accept_probability(s, 1, mu, method) == pytest.approx(expected, abs=1e-12)


def test_projector_is_a_projector():
    p = pairwise_swap_projector(2, 2)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    np.testing.assert_allclose(p, p.conj().T, atol=1e-12)
    # the symmetric subspace of each pair has dimension 3
    assert np.trace(p).real == pytest.approx(9.0)


def test_expansion_vs_direct_on_mixed_advice(rng):
    rho = nx.random_density_matrix(rng, 4)
    mu = nx.random_density_matrix(rng, 4, rank=2)
    assert pairwise_accept(rho, mu, 2, 2, "expansion") == pytest.approx(
        pairwise_accept(rho, mu, 2, 2, "direct"), abs=1e-12)


def test_exact_honest_acceptance():
    for n in (1, 2):
        s = SwapScheme(build_hadamard(n), 3)
        assert all(exact_honest_acceptance(s, x) == Fraction(1) for x in range(2**n))


def test_wrong_fixed_state_against_orthonormal_base():
    for t in (1, 2, 3):
        s = SwapScheme(build_hadamard(3), t) if t < 3 else SwapScheme(build_hadamard(2), t)
        n = s.base.n_bits
        rep = swap_attack_audit(s, no_leak(), np.stack([s.advice(1)]))
        assert rep.acceptance <= 2.0**-t + 2.0**-n + 1e-12
        assert rep.acceptance == pytest.approx(2.0**-n + (1 - 2.0**-n) * 2.0**-t)


def test_single_copy_relation(rng):
    s = SwapScheme(build_random_linear(3, 4, 1.0, seed=0), 1)
    f = random_forgery(rng, s, 2, "mixed")
    rep = swap_attack_audit(s, prefix_leak(1), f)
    assert rep.acceptance == pytest.approx((1 + rep.per_slot_terms[0]) / 2)


def test_acceptance_is_linear_in_forgery(rng):
    s = SwapScheme(build_hadamard(2), 2)
    a = random_forgery(rng, s, 1, "entangled")[0]
    b = random_forgery(rng, s, 1, "mixed")[0]
    lam = 0.3
    mix = swap_accept_probability(s, 2, lam * a + (1 - lam) * b)
    assert mix == pytest.approx(lam * swap_accept_probability(s, 2, a)
                                + (1 - lam) * swap_accept_probability(s, 2, b), abs=1e-12)


def test_audit_chain_terms(rng):
    s = SwapScheme(build_random_linear(2, 4, 1.0, seed=3), 3)
    rep = swap_attack_audit(s, prefix_leak(1), random_forgery(rng, s, 2, "entangled"))
    assert rep.chain_holds and rep.holds
    assert rep.subset_terms[()] == 1.0
    assert len(rep.subset_terms) == 8
    d = rep.to_dict()
    assert set(d) >= {"t", "m_prime", "acceptance", "bound", "per_slot_terms"}


def test_identities():
    r = two_proof_identities(np.random.default_rng(0), trials=50)
    assert r["expansion_vs_direct"] < 1e-10
    assert r["swap_trace_identity"] < 1e-10
    v = np.array([1.0, 0.0])
    w = np.array([0.0, 1.0])
    s = nx.swap_operator(2)
    assert np.trace(s @ np.kron(np.outer(v, v), np.outer(v, v))).real == pytest.approx(1.0)
    assert np.trace(s @ np.kron(np.outer(v, v), np.outer(w, w))).real == pytest.approx(0.0)


def test_dimension_errors():
    s = SwapScheme(build_hadamard(1), 2)
    with pytest.raises(DimensionError):
        swap_accept_probability(s, 0, np.eye(2) / 2)
    with pytest.raises(ValueError):
        SwapScheme(build_hadamard(5), 3)
    with pytest.raises(ValueError):
        swap_accept_probability(s, 0, np.eye(4) / 4, "bogus")

import math

import numpy as np
import pytest

from qhashlab import numerics as nx
from qhashlab.errors import DimensionError
from qhashlab.states import (CqState, JointDistribution, bounded_storage_bound,
                             conditional_min_entropy, guess_prob_classical, guess_prob_quantum,
                             helstrom_value, pgm_value, statistical_distance, trace_distance)


def test_joint_validation():
    with pytest.raises(ValueError):
        JointDistribution([[0.5, 0.6]])
    with pytest.raises(ValueError):
        JointDistribution([[1.5, -0.5]])
    j = JointDistribution.from_unnormalized([[1, 1], [2, 0]])
    np.testing.assert_allclose(j.marginal_x(), [0.5, 0.5])
    np.testing.assert_allclose(j.posterior(1), [1.0, 0.0])


def test_classical_guessing():
    j = JointDistribution([[0.4, 0.1], [0.1, 0.4]])
    assert guess_prob_classical(j) == pytest.approx(0.8)
    assert conditional_min_entropy(j) == pytest.approx(-math.log2(0.8))


def test_distances():
    assert statistical_distance([1, 0], [0, 1]) == 1.0
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    assert trace_distance(a, b) == pytest.approx(2.0)
    assert trace_distance(a, b, halved=True) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        trace_distance(a, np.eye(3))


def test_cq_state_checks():
    with pytest.raises(ValueError):
        CqState(np.stack([np.eye(2), np.eye(2)]))
    rho = CqState.from_pure([0.5, 0.5], [[1, 0], [0, 1]])
    np.testing.assert_allclose(rho.side_state(), np.eye(2) / 2)
    np.testing.assert_allclose(rho.weights(), [0.5, 0.5])


def test_orthogonal_states_are_perfectly_distinguishable():
    rho = CqState.from_pure([0.25] * 4, np.eye(4))
    g = guess_prob_quantum(rho)
    assert g.lower == pytest.approx(1.0) and g.upper == pytest.approx(1.0)
    assert pgm_value(rho) == pytest.approx(1.0)


def test_identical_states_give_prior_guess():
    v = np.array([1.0, 0.0])
    rho = CqState.from_pure([0.7, 0.2, 0.1], [v, v, v])
    g = guess_prob_quantum(rho)
    assert g.upper == pytest.approx(0.7, abs=1e-6)
    assert g.lower <= g.upper


def test_helstrom_pure_pair():
    # c = 0.6 gives (1 + 0.8) / 2
    a = np.array([1.0, 0.0])
    b = np.array([0.6, 0.8])
    g = guess_prob_quantum(CqState.from_pure([0.5, 0.5], [a, b]))
    assert g.lower == pytest.approx(0.9, abs=1e-6)
    assert helstrom_value(0.5, 0.5, np.outer(a, a), np.outer(b, b)) == pytest.approx(0.9)


def test_mixed_helstrom_matches_solver(rng):
    for _ in range(20):
        r0, r1 = nx.random_density_matrix(rng, 3), nx.random_density_matrix(rng, 3)
        p = rng.uniform(0.2, 0.8)
        g = guess_prob_quantum(CqState(np.stack([p * r0, (1 - p) * r1])))
        assert abs(g.lower - helstrom_value(p, 1 - p, r0, r1)) < 1e-6
        assert g.lower <= g.upper + 1e-12


def test_dual_certificate_is_feasible(rng):
    blocks = np.stack([w * nx.random_density_matrix(rng, 4) for w in rng.dirichlet(np.ones(5))])
    g = guess_prob_quantum(CqState(blocks))
    for b in blocks:
        assert np.linalg.eigvalsh(g.sigma - b)[0] >= -1e-9
    assert np.trace(g.sigma).real == pytest.approx(g.upper)
    np.testing.assert_allclose(g.povm.sum(axis=0), np.eye(4), atol=1e-9)


def test_bounded_storage(rng):
    rho = CqState.from_pure(rng.dirichlet(np.ones(8)), [nx.random_state_vector(rng, 2) for _ in range(8)])
    assert guess_prob_quantum(rho).upper <= bounded_storage_bound(rho, 1) + 1e-9
    with pytest.raises(DimensionError):
        bounded_storage_bound(CqState.from_pure([1.0], [[0, 0, 1]]), 1)


def test_classical_embedding_guessing(rng):
    t = rng.random((4, 3))
    j = JointDistribution(t / t.sum())
    g = guess_prob_quantum(CqState.from_joint(j))
    assert abs(g.lower - guess_prob_classical(j)) < 1e-6

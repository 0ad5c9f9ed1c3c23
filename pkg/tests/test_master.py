import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from ssep_hydro.dynamics import SSEPModel
from ssep_hydro.functions import constant
from ssep_hydro.geometry import Lattice
from ssep_hydro.master import (InfiniteEntropy, StateSpaceTooLarge, TruncationError,
                               build_generator, empirical_distribution, encode, evolve,
                               marginals, product_distribution, relative_entropy, stationary,
                               state_bits, total_variation)
from ssep_hydro.measures import ProductMeasure

COS = {"kind": "cosine", "base": 0.5, "amp": 0.25, "axis": 0}


def test_state_encoding_roundtrip():
    bits = state_bits(4)
    np.testing.assert_array_equal(encode(bits), np.arange(16))
    assert encode(np.array([1, 0, 1])) == 5


def test_two_state_generator():
    alpha = 0.3
    Q = build_generator(SSEPModel(Lattice(2, 2), 0.0, 1.0, constant(alpha))).toarray()
    np.testing.assert_allclose(Q, [[-4 * alpha, 4 * alpha], [4 * (1 - alpha), -4 * (1 - alpha)]])


def test_generator_structure_d2_n3():
    model = SSEPModel(Lattice(2, 3), 1.0, 1.0, COS)
    Q = build_generator(model)
    assert Q.shape == (16, 16)
    np.testing.assert_allclose(np.asarray(Q.sum(axis=1)).ravel(), 0.0, atol=1e-12)
    off = Q.toarray() - np.diag(Q.diagonal())
    assert np.all(off >= 0)
    bits = state_bits(4)
    for s in range(16):
        targets = np.flatnonzero(off[s])
        discrepant = sum(bits[s, a] != bits[s, b] for a, b in model.lattice.edges)
        assert targets.size == 4 + discrepant  # every site is a boundary site
        for t in targets:
            assert 1 <= np.sum(bits[s] != bits[t]) <= 2


def test_state_space_cap():
    with pytest.raises(StateSpaceTooLarge):
        build_generator(SSEPModel(Lattice(2, 6), 1.0, 1.0, COS))


@pytest.mark.parametrize("theta,c,n", [(0.0, 1.0, 2), (1.0, 2.0, 2), (2.0, 1.5, 2)])
def test_two_state_closed_form(theta, c, n):
    alpha = 0.35
    Q = build_generator(SSEPModel(Lattice(1, n), theta, c, constant(alpha)))
    rate = n**2 * c * n**-theta
    for t in (0.0, 0.01, 0.1, 1.0):
        mu = evolve(Q, np.array([1.0, 0.0]), t)
        assert mu[1] == pytest.approx(alpha * (1 - np.exp(-rate * t)), abs=1e-10)


def test_evolve_matches_dense_expm():
    Q = build_generator(SSEPModel(Lattice(2, 3), 1.0, 1.0, COS))
    mu0 = np.zeros(16)
    mu0[0] = 1.0
    for t in (0.01, 0.05, 0.2):
        exact = mu0 @ scipy.linalg.expm(t * Q.toarray())
        np.testing.assert_allclose(evolve(Q, mu0, t), exact, atol=1e-10)


def test_evolve_chunks_long_times():
    Q = build_generator(SSEPModel(Lattice(1, 4), 0.0, 1.0, constant(0.4)))
    mu = evolve(Q, np.full(8, 1 / 8), 20.0)
    np.testing.assert_allclose(mu, product_distribution(np.full(3, 0.4)), atol=1e-9)


def test_evolve_truncation_budget():
    Q = build_generator(SSEPModel(Lattice(2, 3), 1.0, 1.0, COS))
    with pytest.raises(TruncationError):
        evolve(Q, np.full(16, 1 / 16), 1.0, max_terms=10)
    with pytest.raises(ValueError):
        evolve(Q, np.full(16, 1 / 16), -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3), st.integers(0, 2**16 - 1))
def test_mass_positivity_and_semigroup(s, t, seed):
    Q = build_generator(SSEPModel(Lattice(2, 3), 1.0, 1.0, COS))
    mu0 = np.random.default_rng(seed).dirichlet(np.ones(16))
    mu_t = evolve(Q, mu0, t)
    assert mu_t.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(mu_t >= -1e-14)
    np.testing.assert_allclose(evolve(Q, evolve(Q, mu0, s), t), evolve(Q, mu0, s + t), atol=1e-9)


def test_evolve_zero_time_is_identity():
    Q = build_generator(SSEPModel(Lattice(2, 3), 1.0, 1.0, COS))
    mu0 = np.random.default_rng(1).dirichlet(np.ones(16))
    np.testing.assert_array_equal(evolve(Q, mu0, 0.0), mu0)


def test_entropy_to_stationary_law_decreases():
    Q = build_generator(SSEPModel(Lattice(2, 3), 1.0, 1.0, COS))
    pi = stationary(Q)
    mu0 = np.zeros(16)
    mu0[5] = 1.0
    ent = [relative_entropy(evolve(Q, mu0, t), pi) for t in np.linspace(0.0, 0.5, 11)]
    assert np.all(np.diff(ent) < 1e-12)
    assert ent[-1] < 1e-3


def test_single_site_stationary_ratio():
    alpha = 0.27
    pi = stationary(build_generator(SSEPModel(Lattice(2, 2), 0.0, 1.0, constant(alpha))))
    assert pi[1] / pi[0] == pytest.approx(alpha / (1 - alpha), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_constant_boundary_stationary_law_is_product(alpha):
    Q = build_generator(SSEPModel(Lattice(2, 3), 1.0, 1.0, constant(alpha)))
    prod = product_distribution(np.full(4, alpha))
    np.testing.assert_allclose(Q.T @ prod, 0.0, atol=1e-12)
    assert total_variation(stationary(Q), prod) < 1e-10


def test_nonconstant_boundary_stationary_law_is_not_product():
    Q = build_generator(SSEPModel(Lattice(1, 5), 1.0, 1.0,
                                  {"kind": "affine", "base": 0.2, "slope": [0.6]}))
    pi = stationary(Q)
    prod = product_distribution(marginals(pi))
    assert total_variation(pi, prod) > 1e-4
    # density interpolates between the reservoirs
    assert np.all(np.diff(marginals(pi)) > 0)


def test_relative_entropy_examples():
    nu = ProductMeasure.constant(3, 0.5)
    mu = product_distribution(np.full(3, 0.5))
    assert relative_entropy(mu, nu) == pytest.approx(0.0, abs=1e-15)
    for k in (1, 2, 4):
        delta = np.zeros(2**k)
        delta[-1] = 1.0
        assert relative_entropy(delta, ProductMeasure.constant(k, 0.5)) == pytest.approx(k * np.log(2))
        assert relative_entropy(delta, np.full(2**k, 2.0**-k)) == pytest.approx(k * np.log(2))


def test_relative_entropy_signals_infinite_value():
    with pytest.raises(InfiniteEntropy):
        relative_entropy(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
    assert relative_entropy(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 0.0


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_relative_entropy_nonnegative(seed):
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(8))
    nu = ProductMeasure(rng.uniform(0.05, 0.95, 3))
    assert relative_entropy(mu, nu) >= -1e-12
    assert relative_entropy(mu, mu) == pytest.approx(0.0, abs=1e-12)


def test_empirical_distribution_and_marginals():
    configs = np.array([[0, 0], [1, 0], [1, 0], [1, 1]])
    np.testing.assert_allclose(empirical_distribution(configs), [0.25, 0.5, 0.0, 0.25])
    np.testing.assert_allclose(marginals(empirical_distribution(configs)), [0.75, 0.25])
    p = np.array([0.1, 0.6, 0.3])
    np.testing.assert_allclose(marginals(product_distribution(p)), p)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian, random_state
from ecdnorms.errors import InvalidInputError
from ecdnorms.linalg import trace_norm
from ecdnorms.superop import Superoperator
from ecdnorms.semigroups import (
    SemigroupSpec,
    commutator_generator,
    conservativity_residual,
    exp_semigroup_at,
    gaussian_channel_at,
    gaussian_generator,
    gkls_generator,
    random_gkls,
    taylor_polynomial,
    unitary_channel_at,
)

seeds = st.integers(0, 2**32 - 1)


def bounded_hermitian(d, rng, norm=1.0):
    A = random_hermitian(d, rng)
    return norm * A / np.max(np.abs(np.linalg.eigvalsh(A)))


def fd_slope(chan, gen, rho, ts):
    target = gen.apply(rho)
    errs = [trace_norm((chan(t).apply(rho) - rho) / t - target) for t in ts]
    return np.polyfit(np.log(ts), np.log(errs), 1)[0]


class TestUnitary:
    def test_zero_time(self, rng):
        A = random_hermitian(3, rng)
        assert unitary_channel_at(A, 0.0).distance(Superoperator.identity(3)) <= 1e-15

    def test_qubit_phase(self):
        rho = np.array([[0.5, 0.3], [0.3, 0.5]])
        out = unitary_channel_at(np.diag([0.0, 1.0]), math.pi).apply(rho)
        np.testing.assert_allclose(out, [[0.5, -0.3], [-0.3, 0.5]], atol=1e-15)

    def test_is_channel(self, rng):
        assert unitary_channel_at(random_hermitian(4, rng), 0.7).is_channel

    @given(seeds, st.sampled_from([0.1, 0.3, 1.0]), st.sampled_from([0.1, 0.3, 1.0]))
    def test_group_law(self, seed, s, t):
        A = bounded_hermitian(4, np.random.default_rng(seed))
        lhs = unitary_channel_at(A, s) @ unitary_channel_at(A, t)
        assert lhs.distance(unitary_channel_at(A, s + t)) <= 1e-10


class TestCommutator:
    def test_qubit_example(self):
        rho = 0.5 * np.ones((2, 2))
        out = commutator_generator(np.diag([0.0, 1.0])).apply(rho)
        np.testing.assert_allclose(out, 0.5 * np.array([[0, 1j], [-1j, 0]]), atol=1e-15)

    def test_commuting_input(self, rng):
        A = random_hermitian(3, rng)
        rho = A @ A + np.eye(3)
        assert np.max(np.abs(commutator_generator(A).apply(rho))) <= 1e-12

    def test_trace_annihilating_and_hermitian_preserving(self, rng):
        S = commutator_generator(random_hermitian(4, rng))
        assert S.hermitian_preserving
        assert abs(np.trace(S.apply(random_state(4, rng)))) <= 1e-12

    @pytest.mark.parametrize("diagonal", [True, False])
    def test_finite_difference_slope(self, rng, diagonal):
        A = np.diag(rng.uniform(-1, 1, 4)) if diagonal else bounded_hermitian(4, rng)
        rho = random_state(4, rng)
        slope = fd_slope(lambda t: unitary_channel_at(A, t), commutator_generator(A), rho, np.geomspace(1e-4, 1e-1, 7))
        assert slope >= 0.9


class TestGaussian:
    def test_qubit_factor(self):
        # the defining integral averages e^{-ix} against N(0, t): its characteristic function e^{-t/2}
        u, w = np.polynomial.hermite.hermgauss(64)
        oracle = np.sum(w * np.exp(-1j * math.sqrt(2 * 2.0) * u)).real / math.sqrt(math.pi)
        ch = gaussian_channel_at(np.diag([0.0, 1.0]), 2.0)
        out = ch.apply(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert out[0, 1].real == pytest.approx(oracle, abs=1e-14)
        assert out[0, 1].real == pytest.approx(math.exp(-1), abs=1e-14)

    def test_diagonal_input_unchanged(self, rng):
        A = random_hermitian(4, rng)
        w, U = np.linalg.eigh(A)
        rho = U @ np.diag(rng.uniform(0, 1, 4)) @ U.conj().T
        np.testing.assert_allclose(gaussian_channel_at(A, 1.3).apply(rho), rho, atol=1e-12)

    @pytest.mark.parametrize("d", [2, 4, 8])
    @pytest.mark.parametrize("t", [0.1, 1.0, 2.0])
    def test_closed_form_vs_quadrature(self, rng, d, t):
        A = bounded_hermitian(d, rng)
        a = gaussian_channel_at(A, t)
        b = gaussian_channel_at(A, t, method="quadrature", n_nodes=64)
        assert a.distance(b) <= 1e-8

    def test_is_channel(self, rng):
        ch = gaussian_channel_at(random_hermitian(3, rng), 0.5)
        assert ch.is_channel and ch.trace_residual() <= 1e-10

    def test_rejects_nonpositive_time(self):
        with pytest.raises(InvalidInputError):
            gaussian_channel_at(np.eye(2), 0.0)

    def test_rejects_few_nodes(self):
        with pytest.raises(InvalidInputError):
            gaussian_channel_at(np.eye(2), 1.0, method="quadrature", n_nodes=10)

    def test_dephasing_monotone(self, rng):
        A = random_hermitian(4, rng)
        rho = random_state(4, rng)
        w, U = np.linalg.eigh(A)
        mags = [np.abs(U.conj().T @ gaussian_channel_at(A, t).apply(rho) @ U) for t in (0.1, 0.5, 1.0, 3.0)]
        for a, b in zip(mags, mags[1:]):
            assert np.all(b <= a + 1e-12)

    @given(seeds, st.sampled_from([0.1, 0.3, 1.0]), st.sampled_from([0.1, 0.3, 1.0]))
    def test_semigroup_law(self, seed, s, t):
        A = bounded_hermitian(4, np.random.default_rng(seed))
        lhs = gaussian_channel_at(A, s) @ gaussian_channel_at(A, t)
        assert lhs.distance(gaussian_channel_at(A, s + t)) <= 1e-10


class TestGaussianGenerator:
    def test_qubit_rate(self):
        Z = gaussian_generator(np.diag([0.0, 1.0]))
        np.testing.assert_allclose(Z.apply(np.ones((2, 2))), [[0, -0.5], [-0.5, 0]], atol=1e-15)

    def test_commuting_input(self, rng):
        A = random_hermitian(3, rng)
        assert np.max(np.abs(gaussian_generator(A).apply(A @ A))) <= 1e-12

    @pytest.mark.parametrize("diagonal", [True, False])
    def test_half_square_of_commutator(self, rng, diagonal):
        A = np.diag(rng.uniform(-1, 1, 5)) if diagonal else bounded_hermitian(5, rng)
        S, Z = commutator_generator(A), gaussian_generator(A)
        np.testing.assert_allclose(Z.action, 0.5 * S.action @ S.action, atol=1e-12)

    def test_finite_difference_against_quadrature(self, rng):
        A = bounded_hermitian(4, rng)
        rho = random_state(4, rng)
        chan = lambda t: gaussian_channel_at(A, t, method="quadrature")
        assert fd_slope(chan, gaussian_generator(A), rho, np.geomspace(1e-4, 1e-1, 7)) >= 0.9


class TestGkls:
    def test_flip(self, rng):
        X = np.array([[0.0, 1.0], [1.0, 0.0]])
        gamma = 0.7
        S = gkls_generator([math.sqrt(gamma) * X], -0.5 * gamma * np.eye(2))
        rho = random_state(2, rng)
        np.testing.assert_allclose(S.apply(rho), gamma * (X @ rho @ X - rho), atol=1e-14)

    def test_conservativity_violation(self):
        with pytest.raises(InvalidInputError, match="residual"):
            gkls_generator([np.eye(2)], np.zeros((2, 2)))

    def test_residual(self, rng):
        V, K = random_gkls(3, 2, rng)
        assert conservativity_residual(V, K) <= 1e-12

    @pytest.mark.parametrize("t", [0.1, 1.0])
    def test_exponential_is_channel(self, rng, t):
        V, K = random_gkls(3, 2, rng)
        ch = exp_semigroup_at(gkls_generator(V, K), t)
        assert np.linalg.eigvalsh((ch.choi + ch.choi.conj().T) / 2)[0] >= -1e-9
        assert ch.trace_residual() <= 1e-10

    @given(seeds)
    def test_trace_annihilating(self, seed):
        rng = np.random.default_rng(seed)
        V, K = random_gkls(3, 2, rng)
        assert abs(np.trace(gkls_generator(V, K).apply(random_state(3, rng)))) <= 1e-10

    def test_finite_difference(self, rng):
        V, K = random_gkls(3, 2, rng)
        S = gkls_generator(V, K)
        assert fd_slope(lambda t: exp_semigroup_at(S, t), S, random_state(3, rng), np.geomspace(1e-4, 1e-1, 7)) >= 0.9


class TestExponentials:
    def test_taylor_order_zero(self, rng):
        S = gkls_generator(*random_gkls(2, 1, rng))
        assert taylor_polynomial(S, 0.5, 0).distance(Superoperator.identity(2)) == 0.0

    def test_taylor_converges_to_exp(self, rng):
        S = commutator_generator(bounded_hermitian(3, rng))
        assert taylor_polynomial(S, 0.5, 30).distance(exp_semigroup_at(S, 0.5)) <= 1e-13

    @pytest.mark.parametrize("d", [2, 4, 8])
    @pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
    def test_exp_matches_closed_forms(self, rng, d, t):
        A = bounded_hermitian(d, rng)
        assert exp_semigroup_at(commutator_generator(A), t).distance(unitary_channel_at(A, t)) <= 1e-9
        assert exp_semigroup_at(gaussian_generator(A), t).distance(gaussian_channel_at(A, t)) <= 1e-9

    def test_negative_time(self, rng):
        with pytest.raises(InvalidInputError):
            exp_semigroup_at(commutator_generator(np.eye(2)), -1.0)


class TestSpec:
    def test_kinds(self, rng):
        A = bounded_hermitian(3, rng)
        V, K = random_gkls(3, 1, rng)
        for spec in (SemigroupSpec("unitary", A=A), SemigroupSpec("gaussian", A=A), SemigroupSpec("gkls", V=V, K=K)):
            assert spec.dim == 3
            assert spec.channel_at(0.0).distance(Superoperator.identity(3)) == 0.0
            assert spec.channel_at(0.2).distance(exp_semigroup_at(spec.generator(), 0.2)) <= 1e-9

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            SemigroupSpec("unitary")
        with pytest.raises(InvalidInputError):
            SemigroupSpec("unitary", A=np.array([[0, 1], [0, 0]]))
        with pytest.raises(InvalidInputError):
            SemigroupSpec("gkls", V=[np.eye(2)], K=np.zeros((2, 2)))
        with pytest.raises(InvalidInputError):
            SemigroupSpec("other", A=np.eye(2))

import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import random_hermitian
from ecdnorms.enorm import enorm, enorm_brute, family_norm, max_linear_objective, objective_brute
from ecdnorms.errors import InvalidInputError, UnsupportedError
from ecdnorms.operators import make_discrete, operator_family


def two_point_oracle(m, g, E):
    """max sum p_k m_k over distributions with sum p_k g_k <= E, by enumerating
    single points and two-point mixtures (the vertices of the feasible polytope)."""
    best = max(mk for mk, gk in zip(m, g) if gk <= E)
    for i, j in combinations(range(len(m)), 2):
        if (g[i] - E) * (g[j] - E) < 0:
            p = (E - g[j]) / (g[i] - g[j])
            best = max(best, p * m[i] + (1 - p) * m[j])
    return best


def lp_oracle(m, g, E):
    res = linprog(-np.asarray(m), A_ub=[g], b_ub=[E], A_eq=[np.ones(len(m))], b_eq=[1.0], bounds=(0, None))
    return -res.fun


class TestMaxLinearObjective:
    def test_identity(self):
        res = max_linear_objective(np.eye(4), make_discrete("number", 4), 1.0)
        assert res.value == pytest.approx(1.0, abs=1e-14)

    def test_squared_number_operator(self):
        G = make_discrete("number", 4)
        res = max_linear_objective(np.diag(G.eigenvalues**2), G, 1.0)
        assert res.value == pytest.approx(two_point_oracle(G.eigenvalues**2, G.eigenvalues, 1.0), abs=1e-10)
        assert res.value == pytest.approx(3.0, abs=1e-10)
        np.testing.assert_allclose(np.diagonal(res.primal_witness).real, [2 / 3, 0, 0, 1 / 3], atol=1e-9)

    def test_inactive_constraint(self):
        G = make_discrete("number", 3)
        M = np.diag([5.0, 1.0, 2.0])
        res = max_linear_objective(M, G, 0.5)
        assert res.value == 5.0 and res.dual_lambda == 0.0

    def test_rejects_nonpositive_budget(self):
        with pytest.raises(InvalidInputError):
            max_linear_objective(np.eye(2), make_discrete("number", 2), 0.0)

    def test_rejects_constraint_without_zero(self):
        with pytest.raises(InvalidInputError):
            max_linear_objective(np.eye(2), np.diag([1.0, 2.0]), 1.0)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            max_linear_objective(np.eye(3), make_discrete("number", 2), 1.0)

    def test_dense_constraint(self, rng):
        # the same problem in a rotated basis
        G = make_discrete("number", 5)
        M = random_hermitian(5, rng)
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        a = max_linear_objective(M, G, 1.5).value
        b = max_linear_objective(Q @ M @ Q.T, Q @ G.matrix @ Q.T, 1.5).value
        assert a == pytest.approx(b, abs=1e-9)

    @given(st.integers(0, 10_000), st.integers(2, 12), st.floats(0.05, 10))
    def test_diagonal_matches_lp(self, seed, d, E):
        rng = np.random.default_rng(seed)
        G = make_discrete("number", d)
        m = rng.standard_normal(d)
        res = max_linear_objective(np.diag(m), G, E)
        assert res.value == pytest.approx(lp_oracle(m, G.eigenvalues, E), abs=1e-8)

    @given(st.integers(0, 10_000), st.integers(2, 16), st.floats(0.05, 10))
    def test_certificate(self, seed, d, E):
        rng = np.random.default_rng(seed)
        G = make_discrete("number", d)
        res = max_linear_objective(random_hermitian(d, rng), G, E)
        assert res.gap >= -1e-10
        assert res.gap <= 1e-7 * (1 + res.value**2)
        rho = res.primal_witness
        assert np.trace(rho).real <= 1 + 1e-10
        assert float(np.diagonal(rho).real @ G.eigenvalues) <= E + 1e-8
        assert np.linalg.matrix_rank(rho, tol=1e-10) <= 2


class TestEnorm:
    def test_identity(self):
        G = make_discrete("number", 6)
        for E in (0.1, 1.0, 3.0):
            assert enorm(np.eye(6), G, E).value == pytest.approx(1.0, abs=1e-14)

    def test_sqrt_g(self):
        G = make_discrete("number", 4)
        assert enorm(operator_family(G, "power", 0.5), G, 2.0).value == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_g_itself(self):
        G = make_discrete("number", 4)
        expected = math.sqrt(two_point_oracle(G.eigenvalues**2, G.eigenvalues, 1.0))
        assert enorm(G.matrix, G, 1.0).value == pytest.approx(expected, abs=1e-10)

    def test_value_matches_witness(self, rng):
        G = make_discrete("number", 8)
        A = rng.standard_normal((8, 8))
        res = enorm(A, G, 2.0)
        rho = res.primal_witness
        assert res.value**2 == pytest.approx(np.trace(A @ rho @ A.T).real, abs=1e-10)

    @pytest.mark.parametrize("E", [0.3, 1.0, 7.5])
    def test_sqrt_g_large(self, E):
        G = make_discrete("number", 64)
        assert enorm(operator_family(G, "power", 0.5), G, E).value == pytest.approx(math.sqrt(E), abs=1e-9)

    def test_power_above_half_truncation_formula(self):
        # ||G^a||_E^2 = E * E_max^(2a - 1) for a > 1/2 and E <= E_max
        G = make_discrete("number", 32)
        v = enorm(operator_family(G, "power", 0.75), G, 4.0).value
        assert v**2 == pytest.approx(two_point_oracle(G.eigenvalues**1.5, G.eigenvalues, 4.0), rel=1e-10)
        assert v**2 == pytest.approx(4.0 * 31**0.5, rel=1e-10)


class TestFamilyNorm:
    def test_identity(self):
        assert family_norm([np.eye(3)], make_discrete("number", 3), 1.0).value == pytest.approx(1.0)

    def test_scaled_flip(self):
        X = np.array([[0, 1], [1, 0]])
        for E in (0.1, 0.7):
            assert family_norm([math.sqrt(0.3) * X], make_discrete("number", 2), E).value == pytest.approx(0.3)

    def test_not_square_rooted(self):
        G = make_discrete("number", 3)
        assert family_norm([2 * np.eye(3)], G, 1.0).value == pytest.approx(4.0)

    def test_random_against_brute(self, rng):
        G = make_discrete("number", 3)
        V = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(2)]
        M = sum(v.conj().T @ v for v in V)
        assert family_norm(V, G, 0.8).value == pytest.approx(objective_brute(M, G, 0.8), abs=1e-6)

    def test_mixed_shapes(self):
        with pytest.raises(InvalidInputError):
            family_norm([np.eye(2), np.eye(3)], make_discrete("number", 2), 1.0)


class TestBrute:
    def test_identity(self):
        assert enorm_brute(np.eye(2), make_discrete("number", 2), 0.4) == pytest.approx(1.0, abs=1e-12)

    def test_sqrt_g(self):
        G = make_discrete("number", 3)
        A = operator_family(G, "power", 0.5)
        assert enorm_brute(A, G, 1.5, n_points=200_000) == pytest.approx(math.sqrt(1.5), abs=1e-3)

    def test_unsupported(self):
        with pytest.raises(UnsupportedError):
            enorm_brute(np.eye(4), make_discrete("number", 4), 1.0)

    def test_agrees_on_qubits(self, rng):
        G = make_discrete("number", 2)
        for _ in range(5):
            A = random_hermitian(2, rng)
            E = rng.uniform(0.05, 1)
            assert enorm(A, G, E).value == pytest.approx(enorm_brute(A, G, E), abs=2e-3)


@pytest.mark.parametrize("seed", range(5))
def test_concavity_and_equivalence(seed):
    rng = np.random.default_rng(seed)
    G = make_discrete("number", 12)
    A = random_hermitian(12, rng)
    grid = np.linspace(0.2, 11, 15)
    vals = np.array([enorm(A, G, E).value for E in grid])
    f = vals**2
    assert np.all(np.diff(f, 2) <= 1e-8 * (1 + np.abs(f[1:-1])))
    for i in range(len(grid)):
        for j in range(i + 1, len(grid)):
            assert vals[i] <= vals[j] + 1e-9
            assert vals[j] <= math.sqrt(grid[j] / grid[i]) * vals[i] + 1e-9

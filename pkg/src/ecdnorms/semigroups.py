"""Unitary, Gaussian-dephasing and GKLS dynamics with their generators.

For a Hermitian ``A`` the unitary group is ``rho -> e^{-iAt} rho e^{iAt}``
with generator ``S_A(rho) = -i[A, rho]``; the Gaussian semigroup averages the
unitary group over a centred normal time of variance ``t`` and has generator
``Z_A(rho) = A rho A - (A^2 rho + rho A^2)/2 = S_A^2(rho)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg import check_hermitian, expm_action, hermitian_eig, hermitian_function, is_diagonal
from .superop import Superoperator

ZT_ATOL = 1e-9


def unitary_channel_at(A, t):
    """``rho -> e^{-iAt} rho e^{iAt}``."""
    A = check_hermitian(A, "A")
    U = hermitian_function(A, lambda x: np.exp(-1j * t * x))
    return Superoperator.from_unitary(U)


def commutator_generator(A):
    """``rho -> -i(A rho - rho A)``, the derivative of the unitary group at 0."""
    A = check_hermitian(A, "A")
    d = A.shape[0]
    if is_diagonal(A):
        a = np.real(np.diagonal(A))
        return Superoperator(multiplier=-1j * (a[:, None] - a[None, :]))
    eye = np.eye(d)
    return Superoperator(-1j * (np.kron(A, eye) - np.kron(eye, A.T)), d, d)


def gaussian_multiplier(a, t):
    """Entrywise factors ``exp(-t (a_j - a_k)^2 / 2)`` in the eigenbasis of ``A``."""
    diff = a[:, None] - a[None, :]
    return np.exp(-0.5 * t * diff**2)


def _in_eigenbasis(A, m):
    """Superoperator ``X -> U (m ∘ (U^* X U)) U^*`` for ``A = U diag(a) U^*``."""
    if is_diagonal(A):
        return Superoperator(multiplier=m)
    _, U = hermitian_eig(A)
    B = np.kron(U, U.conj())
    return Superoperator((B * m.reshape(-1)) @ B.conj().T, A.shape[0], A.shape[0])


def gaussian_channel_at(A, t, method="closed_form", n_nodes=64):
    """Gaussian average of the unitary group with variance ``t``.

    ``method='closed_form'`` uses the dephasing factors in the eigenbasis of
    ``A``; ``method='quadrature'`` evaluates the defining integral with
    ``n_nodes``-point Gauss-Hermite quadrature after the substitution
    ``x = sqrt(2t) u``.
    """
    A = check_hermitian(A, "A")
    if not t > 0:
        raise InvalidInputError(f"t must be positive, got {t}")
    if method == "closed_form":
        a, _ = hermitian_eig(A)
        return _in_eigenbasis(A, gaussian_multiplier(a, t))
    if method == "quadrature":
        if n_nodes < 20:
            raise InvalidInputError(f"quadrature needs at least 20 nodes, got {n_nodes}")
        u, w = np.polynomial.hermite.hermgauss(n_nodes)
        s = math.sqrt(2.0 * t)
        total = None
        for ui, wi in zip(u, w):
            term = unitary_channel_at(A, s * ui) * (wi / math.sqrt(math.pi))
            total = term if total is None else total + term
        return total
    raise InvalidInputError(f"unknown method {method!r}")


def gaussian_generator(A):
    """``rho -> A rho A - (A^2 rho + rho A^2) / 2``."""
    A = check_hermitian(A, "A")
    d = A.shape[0]
    if is_diagonal(A):
        a = np.real(np.diagonal(A))
        return Superoperator(multiplier=-0.5 * (a[:, None] - a[None, :]) ** 2)
    A2 = A @ A
    eye = np.eye(d)
    L = np.kron(A, A.T) - 0.5 * (np.kron(A2, eye) + np.kron(eye, A2.T))
    return Superoperator(L, d, d)


def conservativity_residual(V, K):
    """Max entry of ``sum_k V_k^* V_k + K + K^*``.

    The quadratic form of this Hermitian matrix is
    ``sum_k ||V_k phi||^2 + 2 Re <phi|K phi>``, so it vanishes for every
    ``phi`` exactly when the matrix is zero.
    """
    K = np.asarray(K, dtype=complex)
    R = K + K.conj().T
    for v in V:
        v = np.asarray(v, dtype=complex)
        R = R + v.conj().T @ v
    return float(np.max(np.abs(R)))


def gkls_generator(V, K, atol=ZT_ATOL):
    """``rho -> sum_k V_k rho V_k^* + K rho + rho K^*`` after checking conservativity."""
    K = np.asarray(K, dtype=complex)
    V = [np.asarray(v, dtype=complex) for v in V]
    d = K.shape[0]
    if any(v.shape != (d, d) for v in V):
        raise InvalidInputError("jump operators must match the shape of K")
    res = conservativity_residual(V, K)
    if res > atol:
        raise InvalidInputError(f"conservativity condition violated: max residual {res:.3e}")
    eye = np.eye(d)
    L = np.kron(K, eye) + np.kron(eye, K.conj())
    for v in V:
        L = L + np.kron(v, v.conj())
    return Superoperator(L, d, d)


def exp_semigroup_at(S, t):
    """``e^{tS}``."""
    if t < 0:
        raise InvalidInputError(f"t must be nonnegative, got {t}")
    if S.is_multiplier:
        return Superoperator(multiplier=np.exp(t * S.multiplier))
    return Superoperator(expm_action(S.action, t), S.d_in, S.d_out)


def taylor_polynomial(S, t, k):
    """``id + tS + ... + (t^k / k!) S^k`` summed from powers of the action."""
    if k < 0:
        raise InvalidInputError(f"order must be nonnegative, got {k}")
    d = S.d_in
    if S.is_multiplier:
        m = S.multiplier
        total = np.ones_like(m)
        term = np.ones_like(m)
        for j in range(1, k + 1):
            term = term * (t * m) / j
            total = total + term
        return Superoperator(multiplier=total)
    L = S.action
    total = np.eye(d * d, dtype=complex)
    term = np.eye(d * d, dtype=complex)
    for j in range(1, k + 1):
        term = term @ L * (t / j)
        total = total + term
    return Superoperator(total, d, d)


def random_hermitian(d, rng, scale=1.0):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (X + X.conj().T) / 2


def random_gkls(d, n_ops, rng, scale=1.0):
    """Random conservative ``(V, K)``: ``K = -sum V^*V / 2 - iH``."""
    V = [scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d) for _ in range(n_ops)]
    H = random_hermitian(d, rng, scale / np.sqrt(d))
    K = -0.5 * sum(v.conj().T @ v for v in V) - 1j * H
    return V, K


@dataclass
class SemigroupSpec:
    """One of the three dynamics: ``kind`` in ``{'unitary', 'gaussian', 'gkls'}``."""

    kind: str
    A: np.ndarray = None
    V: list = field(default_factory=list)
    K: np.ndarray = None

    def __post_init__(self):
        if self.kind in ("unitary", "gaussian"):
            if self.A is None:
                raise InvalidInputError(f"{self.kind} semigroup needs A")
            self.A = check_hermitian(self.A, "A")
        elif self.kind == "gkls":
            if self.K is None:
                raise InvalidInputError("gkls semigroup needs K")
            res = conservativity_residual(self.V, self.K)
            if res > ZT_ATOL:
                raise InvalidInputError(f"conservativity condition violated: max residual {res:.3e}")
        else:
            raise InvalidInputError(f"unknown semigroup kind {self.kind!r}")

    @property
    def dim(self):
        return (self.A if self.A is not None else self.K).shape[0]

    def generator(self):
        if self.kind == "unitary":
            return commutator_generator(self.A)
        if self.kind == "gaussian":
            return gaussian_generator(self.A)
        return gkls_generator(self.V, self.K)

    def channel_at(self, t):
        if t == 0:
            return Superoperator.identity(self.dim)
        if self.kind == "unitary":
            return unitary_channel_at(self.A, t)
        if self.kind == "gaussian":
            return gaussian_channel_at(self.A, t)
        return exp_semigroup_at(self.generator(), t)

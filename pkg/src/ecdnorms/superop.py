"""Superoperators, their Choi matrices, and energy-constrained diamond norm estimates.

A superoperator stores its action on row-major vectorized matrices, so
``Phi(X) = unvec(action @ vec(X))``. The Choi matrix is

    J = sum_{c,e} Phi(|c><e|) ⊗ |c><e|        (output factor first).

Maps that multiply matrix entries elementwise, ``Phi(X)_{jk} = m_{jk} X_{jk}``,
have a diagonal action and are kept in that form. Every map built from
operators diagonal in the energy eigenbasis (unitary and Gaussian dynamics of
``f(G)``, their generators and Taylor polynomials) is of this kind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .enorm import max_linear_objective
from .errors import InvalidInputError, UnsupportedError
from .linalg import as_square, is_hermitian, partial_trace, sign_contraction, trace_norm
from .operators import DiscreteOperator, sample_constrained_vector

HP_ATOL = 1e-10
CP_ATOL = 1e-9
TP_ATOL = 1e-9


class Superoperator:
    """Linear map from ``d_in x d_in`` to ``d_out x d_out`` matrices."""

    def __init__(self, action=None, d_in=None, d_out=None, *, multiplier=None):
        if multiplier is not None:
            m = np.array(multiplier, dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidInputError(f"multiplier must be square, got shape {m.shape}")
            self._mult = m
            self.d_in = self.d_out = m.shape[0]
            return
        action = np.asarray(action, dtype=complex)
        if d_in is None:
            d_in = int(round(np.sqrt(action.shape[1])))
        if d_out is None:
            d_out = int(round(np.sqrt(action.shape[0])))
        if action.shape != (d_out * d_out, d_in * d_in):
            raise InvalidInputError(
                f"action shape {action.shape} inconsistent with d_in={d_in}, d_out={d_out}"
            )
        self.d_in, self.d_out = int(d_in), int(d_out)
        self._mult = None
        if self.d_in == self.d_out:
            off = action - np.diag(np.diagonal(action))
            if not np.any(off):
                self._mult = np.diagonal(action).reshape(self.d_in, self.d_in).copy()
        if self._mult is None:
            self.__dict__["action"] = action

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, d):
        return cls(multiplier=np.ones((d, d)))

    @classmethod
    def zero(cls, d):
        return cls(multiplier=np.zeros((d, d)))

    @classmethod
    def from_multiplier(cls, m):
        return cls(multiplier=m)

    @classmethod
    def from_kraus(cls, ops, coefficients=None):
        """``X -> sum_l c_l K_l X K_l^*`` (``c_l = 1`` by default)."""
        ops = [np.asarray(K, dtype=complex) for K in ops]
        if not ops:
            raise InvalidInputError("empty operator list")
        coefficients = np.ones(len(ops)) if coefficients is None else coefficients
        L = sum(c * np.kron(K, K.conj()) for c, K in zip(coefficients, ops))
        d_out, d_in = ops[0].shape
        return cls(L, d_in=d_in, d_out=d_out)

    @classmethod
    def from_unitary(cls, U):
        U = np.asarray(U, dtype=complex)
        if not np.any(U - np.diag(np.diagonal(U))):
            u = np.diagonal(U)
            return cls(multiplier=np.outer(u, u.conj()))
        return cls.from_kraus([U])

    @classmethod
    def from_choi(cls, J, d_in, d_out=None):
        d_out = d_in if d_out is None else d_out
        J = np.asarray(J, dtype=complex)
        if J.shape != (d_out * d_in, d_out * d_in):
            raise InvalidInputError(f"Choi shape {J.shape} inconsistent with dims ({d_in}, {d_out})")
        L = J.reshape(d_out, d_in, d_out, d_in).transpose(0, 2, 1, 3).reshape(d_out**2, d_in**2)
        return cls(L, d_in=d_in, d_out=d_out)

    @classmethod
    def from_function(cls, f, d_in, d_out=None):
        """Tabulate a linear function of matrices on the matrix-unit basis."""
        cols = []
        for c in range(d_in):
            for e in range(d_in):
                X = np.zeros((d_in, d_in), dtype=complex)
                X[c, e] = 1.0
                cols.append(np.asarray(f(X), dtype=complex).reshape(-1))
        L = np.array(cols).T
        d_out = int(round(np.sqrt(L.shape[0]))) if d_out is None else d_out
        return cls(L, d_in=d_in, d_out=d_out)

    # -- representations ---------------------------------------------------

    @property
    def multiplier(self):
        """Entrywise multiplier for diagonal-action maps, else ``None``."""
        return self._mult

    @property
    def is_multiplier(self):
        return self._mult is not None

    @cached_property
    def action(self):
        return np.diag(self._mult.reshape(-1))

    @cached_property
    def choi(self):
        if self._mult is not None:
            d = self.d_in
            J = np.zeros((d * d, d * d), dtype=complex)
            idx = np.arange(d) * (d + 1)
            J[np.ix_(idx, idx)] = self._mult
            return J
        do, di = self.d_out, self.d_in
        return self.action.reshape(do, do, di, di).transpose(0, 2, 1, 3).reshape(do * di, do * di)

    # -- predicates --------------------------------------------------------

    @cached_property
    def hermitian_preserving(self):
        if self._mult is not None:
            return bool(np.max(np.abs(self._mult - self._mult.conj().T)) <= HP_ATOL)
        return bool(np.max(np.abs(self.choi - self.choi.conj().T)) <= HP_ATOL)

    @cached_property
    def completely_positive(self):
        if not self.hermitian_preserving:
            return False
        if self._mult is not None:
            J = (self._mult + self._mult.conj().T) / 2
        else:
            J = (self.choi + self.choi.conj().T) / 2
        return bool(np.linalg.eigvalsh(J)[0] >= -CP_ATOL)

    @cached_property
    def trace_preserving(self):
        return bool(self.trace_residual() <= TP_ATOL)

    def trace_residual(self):
        """``max |Tr_out J - I|``."""
        if self._mult is not None:
            return float(np.max(np.abs(np.diagonal(self._mult) - 1.0)))
        T = partial_trace(self.choi, self.d_out, self.d_in, "A")
        return float(np.max(np.abs(T - np.eye(self.d_in))))

    @property
    def is_channel(self):
        return self.completely_positive and self.trace_preserving

    # -- action ------------------------------------------------------------

    def apply(self, X):
        X = as_square(X, "input")
        if X.shape[0] != self.d_in:
            raise InvalidInputError(f"input dimension {X.shape[0]} != {self.d_in}")
        if self._mult is not None:
            return self._mult * X
        return (self.action @ X.reshape(-1)).reshape(self.d_out, self.d_out)

    __call__ = apply

    def apply_extended(self, X, d_R):
        """``(Phi ⊗ id_R)(X)`` for ``X`` on ``A ⊗ R``."""
        X = as_square(X, "input")
        if X.shape[0] != self.d_in * d_R:
            raise InvalidInputError(
                f"input dimension {X.shape[0]} != {self.d_in} * {d_R}"
            )
        T = X.reshape(self.d_in, d_R, self.d_in, d_R)
        if self._mult is not None:
            out = self._mult[:, None, :, None] * T
        else:
            do, di = self.d_out, self.d_in
            L = self.action.reshape(do, do, di, di)
            out = np.einsum("abce,cres->arbs", L, T, optimize=True)
        n = self.d_out * d_R
        return out.reshape(n, n)

    # -- algebra -----------------------------------------------------------

    def adjoint(self):
        """Adjoint with respect to the Hilbert-Schmidt inner product."""
        if self._mult is not None:
            return Superoperator(multiplier=self._mult.conj())
        return Superoperator(self.action.conj().T, d_in=self.d_out, d_out=self.d_in)

    def _check_same(self, other):
        if (self.d_in, self.d_out) != (other.d_in, other.d_out):
            raise InvalidInputError(
                f"dimension mismatch: ({self.d_in}->{self.d_out}) vs ({other.d_in}->{other.d_out})"
            )

    def __add__(self, other):
        self._check_same(other)
        if self._mult is not None and other._mult is not None:
            return Superoperator(multiplier=self._mult + other._mult)
        return Superoperator(self.action + other.action, self.d_in, self.d_out)

    def __sub__(self, other):
        self._check_same(other)
        if self._mult is not None and other._mult is not None:
            return Superoperator(multiplier=self._mult - other._mult)
        return Superoperator(self.action - other.action, self.d_in, self.d_out)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        if self._mult is not None:
            return Superoperator(multiplier=c * self._mult)
        return Superoperator(c * self.action, self.d_in, self.d_out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first."""
        if other.d_out != self.d_in:
            raise InvalidInputError(f"cannot compose: {other.d_out} != {self.d_in}")
        if self._mult is not None and other._mult is not None:
            return Superoperator(multiplier=self._mult * other._mult)
        return Superoperator(self.action @ other.action, other.d_in, self.d_out)

    __matmul__ = compose

    def distance(self, other):
        """Max entrywise difference of the action matrices."""
        self._check_same(other)
        if self._mult is not None and other._mult is not None:
            return float(np.max(np.abs(self._mult - other._mult)))
        return float(np.max(np.abs(self.action - other.action)))

    def __repr__(self):
        kind = "multiplier" if self._mult is not None else "dense"
        return f"Superoperator(d_in={self.d_in}, d_out={self.d_out}, {kind})"


def combine(phi, psi=None, operation="add", c=None):
    """Functional form of the superoperator algebra.

    ``operation`` is one of ``'add'``, ``'subtract'``, ``'scale'`` (uses ``c``)
    and ``'compose'`` (``phi ∘ psi``).
    """
    if operation == "add":
        return phi + psi
    if operation == "subtract":
        return phi - psi
    if operation == "scale":
        return phi * c
    if operation == "compose":
        return phi @ psi
    raise InvalidInputError(f"unknown operation {operation!r}")


def sandwich(A, rho, B):
    """``A rho B^*``."""
    A = as_square(A, "A")
    B = as_square(B, "B")
    rho = as_square(rho, "rho")
    if not (A.shape == B.shape == rho.shape):
        raise InvalidInputError(f"shape mismatch {A.shape}, {rho.shape}, {B.shape}")
    return A @ rho @ B.conj().T


# -- energy-constrained diamond norm, lower bound ------------------------------


@dataclass
class EcdEstimate:
    """Best feasible value found by :func:`ecd_lower`.

    ``witness_vector`` is a pure state on ``A ⊗ R`` with ``d_R = d_A``.
    ``histories[i]`` holds the accepted objective values of restart ``i``.
    """

    value: float
    witness_vector: np.ndarray
    contraction: np.ndarray
    iterations: int
    restart_values: list
    histories: list
    d_A: int
    subspace: bool = False
    best_restart: int = 0
    energy: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def witness_state(self):
        v = self.witness_vector
        return np.outer(v, v.conj())

    @property
    def witness_contraction(self):
        """Contraction attaining the trace norm at the witness, on the full output space."""
        if not self.subspace:
            return self.contraction
        d = self.d_A
        W = np.zeros((d * d, d * d), dtype=complex)
        idx = np.arange(d) * (d + 1)
        W[np.ix_(idx, idx)] = self.contraction
        return W


def _psd_sqrt(rho):
    w, U = np.linalg.eigh((rho + rho.conj().T) / 2)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def _budget_weights(g, E):
    """Uniform weights on all levels, blended toward the ground level to meet ``E``."""
    p = np.full(g.size, 1.0 / g.size)
    if p @ g <= E:
        return p
    # p(w) = (1 - w) * uniform + w * ground; energy is linear in w
    w = 1.0 - E / float(p @ g)
    p = (1.0 - w) * p
    p[0] += w
    return p


def _feasible(x, g, E):
    """Normalize ``x`` and pull it toward the ground level until its energy is ``<= E``."""
    x = x / np.linalg.norm(x)
    if float(np.dot(g, np.abs(x) ** 2)) <= E:
        return x
    if abs(x[0]) > 0:
        x = x * (np.conj(x[0]) / abs(x[0]))
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        u = (1.0 - mid) * x
        u[0] += mid
        u /= np.linalg.norm(u)
        if float(np.dot(g, np.abs(u) ** 2)) <= E:
            hi = mid
        else:
            lo = mid
    u = (1.0 - hi) * x
    u[0] += hi
    return u / np.linalg.norm(u)


def _polish(x, value_grad, g, E, complex_vars):
    """Local SLSQP ascent on the unit sphere under the energy budget.

    ``value_grad(x)`` returns the objective and its gradient with respect to
    ``conj(x)`` (complex) or ``x`` (real). Returns a feasible point.
    """
    from scipy.optimize import minimize

    n = x.size

    def pack(z):
        return np.concatenate([z.real, z.imag]) if complex_vars else z.real.astype(float)

    def unpack(y):
        return y[:n] + 1j * y[n:] if complex_vars else y

    def fun(y):
        v, grad = value_grad(unpack(y))
        return -v, -pack(2.0 * grad) if complex_vars else -2.0 * grad

    gg = np.concatenate([g, g]) if complex_vars else g
    cons = [
        {"type": "eq", "fun": lambda y: y @ y - 1.0, "jac": lambda y: 2.0 * y},
        {"type": "ineq", "fun": lambda y: E - gg @ (y * y), "jac": lambda y: -2.0 * gg * y},
    ]
    res = minimize(fun, pack(x), jac=True, method="SLSQP", constraints=cons,
                   options={"maxiter": 200, "ftol": 1e-14})
    return _feasible(unpack(res.x), g, E)


def _ascent(value_of, step, polish, x, max_iters, tol):
    """Monotone ascent mixing exact alternating steps with local polishing.

    Only strictly better, exactly evaluated feasible points are accepted, so
    the returned history is nondecreasing.
    """
    value, W = value_of(x)
    history = [value]
    since_polish = 0
    for _ in range(max_iters):
        x_new = step(x, W)
        v_new, W_new = value_of(x_new)
        gain = v_new - value
        if gain > 0:
            x, value, W = x_new, v_new, W_new
            history.append(value)
            since_polish += 1
        if gain <= tol or since_polish >= 8:
            since_polish = 0
            x_p = polish(x)
            v_p, W_p = value_of(x_p)
            if v_p > value + tol:
                x, value, W = x_p, v_p, W_p
                history.append(value)
                continue
            if gain <= tol:
                break
    return value, x, W, history


def _multiplier_run(m, g, E, x, max_iters, tol):
    """Ascent restricted to states ``sum_j x_j |jj>`` with real ``x``."""
    mt = m.T

    def value_of(x):
        X = m * np.outer(x, x)
        return trace_norm(X), sign_contraction(X)

    def step(x, W):
        res = max_linear_objective(W * mt, g, E)
        return np.sqrt(np.clip(np.real(np.diagonal(res.primal_witness)), 0.0, None))

    def value_grad(x):
        X = m * np.outer(x, x)
        W = sign_contraction(X)
        return trace_norm(X), np.real(W * mt) @ x

    def polish(x):
        return np.abs(_polish(x, value_grad, g, E, complex_vars=False))

    return _ascent(value_of, step, polish, np.abs(x), max_iters, tol)


def _dense_run(phi, adj, g_comp, d, E, psi, max_iters, tol):
    """Ascent over pure states on ``A ⊗ R``."""

    def value_of(psi):
        X = phi.apply_extended(np.outer(psi, psi.conj()), d)
        return trace_norm(X), sign_contraction(X)

    def step(psi, W):
        M = adj.apply_extended(W, d)
        res = max_linear_objective((M + M.conj().T) / 2, g_comp, E)
        rho_A = partial_trace(res.primal_witness, d, d, "R")
        return _psd_sqrt(rho_A).reshape(-1)

    def value_grad(psi):
        X = phi.apply_extended(np.outer(psi, psi.conj()), d)
        W = sign_contraction(X)
        M = adj.apply_extended(W, d)
        return trace_norm(X), ((M + M.conj().T) / 2) @ psi

    def polish(psi):
        return _polish(psi, value_grad, g_comp, E, complex_vars=True)

    return _ascent(value_of, step, polish, psi, max_iters, tol)


def ecd_lower(phi, G, E, restarts=16, max_iters=200, seed=0, tol=1e-10, subspace=None):
    """Lower bound on the energy-constrained diamond norm of ``phi``.

    Each restart alternates two exact half-steps: the trace-norm-attaining
    contraction for the current input, then the best energy-feasible input
    for that contraction (a constrained eigenvalue problem). Mixed solutions
    of the second step are replaced by the canonical purification of their
    ``A`` marginal, which does not decrease the objective. The accepted
    objective sequence of each restart is nondecreasing.

    For entrywise-multiplier maps the search runs over states
    ``sum_j x_j |j>|j>`` (``subspace=None`` selects this automatically).
    """
    if not isinstance(G, DiscreteOperator):
        raise InvalidInputError("G must be a DiscreteOperator")
    if not E > 0:
        raise InvalidInputError(f"energy budget must be positive, got {E}")
    if phi.d_in != G.dim:
        raise InvalidInputError(f"map input dimension {phi.d_in} != G dimension {G.dim}")
    if not phi.hermitian_preserving:
        raise InvalidInputError("ECD norm estimator requires a Hermitian-preserving map")
    d = G.dim
    g = G.eigenvalues
    use_sub = phi.is_multiplier if subspace is None else bool(subspace)
    if use_sub and not phi.is_multiplier:
        raise InvalidInputError("subspace search needs an entrywise-multiplier map")

    starts = [np.sqrt(_budget_weights(g, E))]
    for r in range(1, restarts):
        rng = np.random.default_rng([seed, r])
        if use_sub:
            starts.append(sample_constrained_vector(g, E, rng=rng))
        else:
            starts.append(sample_constrained_vector(np.repeat(g, d), E, rng=rng))

    results = []
    if use_sub:
        m = phi.multiplier
        for x0 in starts:
            results.append(_multiplier_run(m, g, E, x0, max_iters, tol))
    else:
        adj = phi.adjoint()
        g_comp = np.repeat(g, d)
        for i, s in enumerate(starts):
            psi0 = s if s.size == d * d else _embed_diagonal(s, d)
            results.append(_dense_run(phi, adj, g_comp, d, E, psi0, max_iters, tol))

    values = [r[0] for r in results]
    best = int(np.argmax(values))
    value, vecx, W, _ = results[best]
    psi = _embed_diagonal(vecx, d) if use_sub else vecx
    en = float(np.dot(np.repeat(g, d), np.abs(psi) ** 2))
    return EcdEstimate(
        value=float(value),
        witness_vector=psi,
        contraction=W,
        iterations=len(results[best][3]) - 1,
        restart_values=[float(v) for v in values],
        histories=[r[3] for r in results],
        d_A=d,
        subspace=use_sub,
        best_restart=best,
        energy=en,
    )


def _embed_diagonal(x, d):
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = x
    return psi


def extended_trace_norm(phi, psi, d_R=None):
    """``||(Phi ⊗ id_R)(|psi><psi|)||_1``."""
    d_R = phi.d_in if d_R is None else d_R
    return trace_norm(phi.apply_extended(np.outer(psi, psi.conj()), d_R))


# -- brute-force oracle -------------------------------------------------------


def _bloch_states(n_grid, n_random, rng, z_min=-1.0):
    """Bloch vectors with ``z >= z_min``: a spherical-shell grid plus random draws."""
    r = np.sqrt(np.linspace(0.0, 1.0, n_grid))
    cos_t = np.linspace(1.0, z_min, n_grid)
    ph = np.linspace(0.0, 2 * np.pi, n_grid, endpoint=False)
    R, C, P = np.meshgrid(r, cos_t, ph, indexing="ij")
    S = np.sqrt(1.0 - C**2)
    grid = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], -1).reshape(-1, 3)
    u = rng.standard_normal((n_random, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rand = np.concatenate([u, u * rng.uniform(0, 1, (n_random, 1)) ** (1 / 3)])
    return np.concatenate([grid, rand])


def ecd_brute(phi, G, E, n_grid=100, n_random=50_000, seed=0, chunk=100_000):
    """Brute-force ``max ||(Phi ⊗ id)(psi)||_1`` over feasible pure states, qubit ``A`` only.

    Every pure state on ``A ⊗ R`` is a local unitary on ``R`` away from the
    canonical purification of its ``A`` marginal, and the trace norm is
    invariant under such unitaries, so sampling the marginal over the
    feasible part of the Bloch ball (``n_grid**3`` grid points plus random
    draws) covers all feasible pure states. The output is computed through
    the Choi matrix, ``(I ⊗ S^T) J (I ⊗ conj(S))`` with ``S = sqrt(rho_A)``.
    """
    if G.dim != 2 or phi.d_in != 2:
        raise UnsupportedError("brute-force ECD oracle supports d_A = 2 only")
    rng = np.random.default_rng(seed)
    g1 = float(G.eigenvalues[1])
    # energy of (I + r.sigma)/2 is g1 * (1 - z) / 2
    z_min = max(-1.0, 1.0 - 2.0 * E / g1) if g1 > 0 else -1.0
    bloch = _bloch_states(n_grid, n_random, rng, z_min)
    bloch = bloch[g1 * (1.0 - bloch[:, 2]) / 2.0 <= E]
    do = phi.d_out
    # J[a, i, b, j]: output indices a, b and input indices i, j
    Jt = phi.choi.reshape(do, 2, do, 2).transpose(1, 3, 0, 2).reshape(4, do * do)
    best = 0.0
    paulis = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
    for start in range(0, len(bloch), chunk):
        b = bloch[start : start + chunk]
        n = len(b)
        rho = 0.5 * (np.eye(2) + np.einsum("ni,ijk->njk", b, paulis))
        # qubit square root: (rho + sqrt(det) I) / sqrt(1 + 2 sqrt(det))
        sdet = np.sqrt(np.clip(1.0 - np.sum(b**2, axis=1), 0.0, None)) / 2.0
        S = (rho + sdet[:, None, None] * np.eye(2)) / np.sqrt(1.0 + 2.0 * sdet)[:, None, None]
        # out[a, r, b, s] = sum_ij S[i, r] J[a, i, b, j] conj(S[j, s])
        P = np.einsum("nir,njs->nrsij", S, S.conj()).reshape(n, 4, 4)
        out = (P @ Jt).reshape(n, 2, 2, do, do).transpose(0, 3, 1, 4, 2).reshape(n, 2 * do, 2 * do)
        vals = np.sum(np.abs(np.linalg.eigvalsh(out)), axis=1)
        best = max(best, float(vals.max()))
    return best

"""Operator E-norms by Lagrangian eigenvalue duality.

The core problem is

    maximize Tr(M rho)  subject to  rho >= 0, Tr rho = 1, Tr(G rho) <= E,

whose dual is the convex univariate problem

    minimize g(lam) = lam * E + lambda_max(M - lam * G)  over lam >= 0.

A subgradient of ``g`` at ``lam`` is ``E - <v|G|v>`` for any top eigenvector
``v`` of ``M - lam * G``, so the minimizer is located by bisection on the sign
of that subgradient. The primal solution is a mixture of (at most) two top
eigenvectors taken at the ends of the final bracket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError, InvalidInputError, UnsupportedError
from .linalg import check_hermitian
from .operators import DiscreteOperator


@dataclass
class NormResult:
    value: float
    dual_lambda: float
    dual_value: float
    primal_value: float
    gap: float
    energy_used: float
    witness_vectors: np.ndarray
    witness_weights: np.ndarray

    @property
    def primal_witness(self):
        V = self.witness_vectors
        return (V.T * self.witness_weights) @ V.conj()


class _Constraint:
    """Constraint operator, kept as a diagonal when possible."""

    def __init__(self, G):
        if isinstance(G, DiscreteOperator):
            self.diag = G.eigenvalues
            self.mat = None
        else:
            G = np.asarray(G)
            if G.ndim == 1:
                self.diag = G.astype(float)
                self.mat = None
            else:
                G = check_hermitian(G, "constraint operator")
                if not np.any(G - np.diag(np.diagonal(G))):
                    self.diag = np.real(np.diagonal(G)).astype(float)
                    self.mat = None
                else:
                    self.diag = None
                    self.mat = G
        lo = float(np.min(self.diag)) if self.mat is None else float(np.linalg.eigvalsh(self.mat)[0])
        scale = 1.0 + abs(self.max_eig())
        if lo < -1e-12 * scale:
            raise InvalidInputError(f"constraint operator is not positive semidefinite (min eig {lo:.3e})")
        if lo > 1e-12 * scale:
            raise InvalidInputError("constraint operator has no zero eigenvalue; no Slater point")

    @property
    def dim(self):
        return self.diag.size if self.mat is None else self.mat.shape[0]

    def max_eig(self):
        return float(np.max(self.diag)) if self.mat is None else float(np.linalg.eigvalsh(self.mat)[-1])

    def shifted(self, M, lam):
        if self.mat is None:
            out = M.copy()
            idx = np.arange(M.shape[0])
            out[idx, idx] -= lam * self.diag
            return out
        return M - lam * self.mat

    def energies(self, V):
        """Energies of the columns of ``V``."""
        if self.mat is None:
            return np.real(self.diag @ (np.abs(V) ** 2))
        return np.real(np.einsum("ij,ik,kj->j", V.conj(), self.mat, V))

    def sandwich(self, V):
        if self.mat is None:
            return (V.conj().T * self.diag) @ V
        return V.conj().T @ self.mat @ V


def _top_space(M, con, lam, pick):
    """Top eigenvalue of ``M - lam G`` and a top eigenvector with extreme energy.

    ``pick`` is ``'min'``, ``'max'`` or ``'both'``; within a degenerate top
    eigenspace the vector of minimal (maximal) energy is chosen.
    """
    w, U = np.linalg.eigh(con.shifted(M, lam))
    top = w[-1]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    k = int(np.sum(w >= top - tol))
    V = U[:, -k:]
    if k == 1:
        v = V[:, 0]
        e = float(con.energies(V)[0])
        return top, (v, e), (v, e)
    h, Q = np.linalg.eigh(con.sandwich(V))
    vmin, vmax = V @ Q[:, 0], V @ Q[:, -1]
    return top, (vmin, float(h[0])), (vmax, float(h[-1]))


def _objective(M, v):
    return float(np.real(np.vdot(v, M @ v)))


def _result(M, E, lam, dual, pairs):
    vecs = np.array([p[0] for p in pairs])
    weights = np.array([p[2] for p in pairs], dtype=float)
    primal = float(sum(w * _objective(M, v) for v, _, w in pairs))
    used = float(sum(w * e for _, e, w in pairs))
    return NormResult(
        value=primal,
        dual_lambda=float(lam),
        dual_value=float(dual),
        primal_value=primal,
        gap=float(dual - primal),
        energy_used=used,
        witness_vectors=vecs,
        witness_weights=weights,
    )


def max_linear_objective(M, G, E, rel_width=1e-12):
    """Supremum of ``Tr(M rho)`` over states with ``Tr(G rho) <= E``.

    ``G`` is a :class:`DiscreteOperator`, the diagonal of a constraint
    operator, or a positive semidefinite matrix with a zero eigenvalue.
    """
    if not E > 0:
        raise InvalidInputError(f"energy budget must be positive, got {E}")
    M = check_hermitian(M, "objective")
    con = _Constraint(G)
    if con.dim != M.shape[0]:
        raise InvalidInputError(f"objective dimension {M.shape[0]} != constraint dimension {con.dim}")

    top0, (v0, e0), _ = _top_space(M, con, 0.0, "min")
    if e0 <= E:
        # constraint inactive: a top eigenvector of M is feasible
        return _result(M, E, 0.0, top0, [(v0, e0, 1.0)])

    ev = np.linalg.eigvalsh(M)
    hi = (ev[-1] - ev[0]) / E + 1.0
    top_hi, (v_hi, e_hi), _ = _top_space(M, con, hi, "min")
    if e_hi > E:
        raise InternalError(
            "dual search not bracketed",
            {"lambda_hi": hi, "energy_at_hi": e_hi, "E": E, "lambda_max": ev[-1], "lambda_min": ev[0]},
        )
    lo, v_lo, e_lo, top_lo = 0.0, v0, e0, top0
    width = rel_width * (1.0 + hi)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        top, (vmin, emin), (vmax, emax) = _top_space(M, con, mid, "both")
        if emin <= E <= emax:
            # zero is a subgradient: mid is dual optimal
            if emax == emin:
                return _result(M, E, mid, mid * E + top, [(vmin, emin, 1.0)])
            p = (E - emin) / (emax - emin)
            return _result(M, E, mid, mid * E + top, [(vmax, emax, p), (vmin, emin, 1.0 - p)])
        if emin > E:
            lo, v_lo, e_lo, top_lo = mid, vmin, emin, top
        else:
            hi, v_hi, e_hi, top_hi = mid, vmax, emax, top

    g_lo = lo * E + top_lo
    g_hi = hi * E + top_hi
    lam, dual = (lo, g_lo) if g_lo <= g_hi else (hi, g_hi)
    p = (E - e_hi) / (e_lo - e_hi)
    return _result(M, E, lam, dual, [(v_lo, e_lo, p), (v_hi, e_hi, 1.0 - p)])


def enorm(A, G, E):
    """Operator E-norm ``sup sqrt(Tr A rho A^*)`` over states with energy ``<= E``.

    The returned ``gap`` is on the squared scale.
    """
    A = np.asarray(A, dtype=complex)
    res = max_linear_objective(A.conj().T @ A, G, E)
    res.value = float(np.sqrt(max(res.primal_value, 0.0)))
    return res


def family_norm(V, G, E):
    """``sup sum_k Tr(V_k rho V_k^*)`` over states with energy ``<= E`` (not square-rooted)."""
    V = [np.asarray(v, dtype=complex) for v in V]
    if not V:
        raise InvalidInputError("operator family is empty")
    shapes = {v.shape for v in V}
    if len(shapes) != 1:
        raise InvalidInputError(f"operators have mixed shapes {sorted(shapes)}")
    M = sum(v.conj().T @ v for v in V)
    return max_linear_objective(M, G, E)


# -- brute-force oracle -------------------------------------------------------


def _pure_grid(d, n_points):
    """Unit vectors on a dense angle/phase grid in dimension 2 or 3."""
    if d == 2:
        n = int(np.ceil(np.sqrt(n_points)))
        th = np.linspace(0.0, np.pi / 2, n)
        ph = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        return np.stack([np.cos(T), np.sin(T) * np.exp(1j * P)], axis=-1).reshape(-1, 2)
    n = int(np.ceil(n_points ** 0.25))
    th = np.linspace(0.0, np.pi / 2, n)
    ph = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    T1, T2, P1, P2 = np.meshgrid(th, th, ph, ph, indexing="ij")
    return np.stack(
        [
            np.cos(T1),
            np.sin(T1) * np.cos(T2) * np.exp(1j * P1),
            np.sin(T1) * np.sin(T2) * np.exp(1j * P2),
        ],
        axis=-1,
    ).reshape(-1, 3)


def _angles_to_vector(x, d):
    if d == 2:
        th, ph = x
        return np.array([np.cos(th), np.sin(th) * np.exp(1j * ph)])
    t1, t2, p1, p2 = x
    return np.array(
        [np.cos(t1), np.sin(t1) * np.cos(t2) * np.exp(1j * p1), np.sin(t1) * np.sin(t2) * np.exp(1j * p2)]
    )


def _vector_to_angles(v, d):
    v = v * np.exp(-1j * np.angle(v[0])) if abs(v[0]) > 0 else v
    if d == 2:
        return np.array([np.arccos(np.clip(abs(v[0]), 0, 1)), np.angle(v[1])])
    t1 = np.arccos(np.clip(abs(v[0]), 0, 1))
    s = np.sin(t1)
    t2 = np.arccos(np.clip(abs(v[1]) / s, 0, 1)) if s > 0 else 0.0
    return np.array([t1, t2, np.angle(v[1]), np.angle(v[2])])


def objective_brute(M, G, E, n_points=1_000_000, polish=True):
    """Brute-force ``max <psi|M|psi>`` over feasible pure states (d <= 3).

    Extreme points of the feasible state set are pure, so the grid over pure
    states reaches the supremum; the best grid point is then polished by a
    local constrained optimizer on the same angle parametrization.
    """
    from scipy.optimize import minimize

    M = np.asarray(M, dtype=complex)
    g = G.eigenvalues if isinstance(G, DiscreteOperator) else np.real(np.diagonal(np.asarray(G)))
    d = M.shape[0]
    if d > 3:
        raise UnsupportedError(f"brute-force oracle supports d <= 3, got {d}")
    best, best_v = -np.inf, None
    for chunk in np.array_split(_pure_grid(d, n_points), 16):
        en = (np.abs(chunk) ** 2) @ g
        ok = en <= E
        if not np.any(ok):
            continue
        vals = np.real(np.einsum("ni,ij,nj->n", chunk[ok].conj(), M, chunk[ok]))
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_v = float(vals[i]), chunk[ok][i]
    if polish:
        def neg(x):
            v = _angles_to_vector(x, d)
            return -float(np.real(np.vdot(v, M @ v)))

        def slack(x):
            v = _angles_to_vector(x, d)
            return E - float(np.dot(g, np.abs(v) ** 2))

        res = minimize(
            neg,
            _vector_to_angles(best_v, d),
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": slack}],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        if res.success and slack(res.x) >= -1e-12 and -res.fun > best:
            best = -float(res.fun)
    return best


def enorm_brute(A, G, E, n_points=1_000_000, polish=True):
    """Independent grid oracle for :func:`enorm`, for dimension 2 or 3."""
    A = np.asarray(A, dtype=complex)
    if A.shape[0] > 3:
        raise UnsupportedError(f"brute-force oracle supports d <= 3, got {A.shape[0]}")
    return float(np.sqrt(max(objective_brute(A.conj().T @ A, G, E, n_points, polish), 0.0)))

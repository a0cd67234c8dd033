"""Reference energy observables and the operator families built from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg import as_square, partial_trace


@dataclass(frozen=True)
class DiscreteOperator:
    """Diagonal energy observable with nondecreasing eigenvalues and ground energy 0.

    All other operators are written in the eigenbasis of this one, so the
    observable itself is stored as its eigenvalue vector.
    """

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=float).reshape(-1)
        if ev.size < 2:
            raise InvalidInputError("a discrete operator needs dimension >= 2")
        if not np.all(np.isfinite(ev)):
            raise InvalidInputError("eigenvalues must be finite")
        if ev[0] != 0.0:
            raise InvalidInputError(f"ground eigenvalue must be exactly 0, got {ev[0]}")
        if np.any(np.diff(ev) < 0):
            raise InvalidInputError("eigenvalues must be nondecreasing")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def matrix(self):
        return np.diag(self.eigenvalues).astype(complex)

    @property
    def max_eigenvalue(self):
        return float(self.eigenvalues[-1])

    def extended(self, d_R):
        """Diagonal of ``G ⊗ I_R``."""
        return np.repeat(self.eigenvalues, d_R)

    def __eq__(self, other):
        return isinstance(other, DiscreteOperator) and np.array_equal(
            self.eigenvalues, other.eigenvalues
        )

    def __hash__(self):
        return hash(self.eigenvalues.tobytes())


def make_discrete(kind="number", dim=None, eigenvalues=None):
    """Build the reference observable.

    ``kind='number'`` gives eigenvalues ``0, 1, ..., dim - 1``;
    ``kind='custom'`` takes ``eigenvalues`` verbatim.
    """
    if kind == "number":
        if dim is None or int(dim) < 2:
            raise InvalidInputError(f"number operator needs dim >= 2, got {dim}")
        return DiscreteOperator(np.arange(int(dim), dtype=float))
    if kind == "custom":
        if eigenvalues is None:
            raise InvalidInputError("custom operator needs an eigenvalue list")
        ev = np.asarray(eigenvalues, dtype=float)
        if dim is not None and ev.size != int(dim):
            raise InvalidInputError(f"got {ev.size} eigenvalues for dim {dim}")
        return DiscreteOperator(ev)
    raise InvalidInputError(f"unknown discrete operator kind {kind!r}")


def operator_family(G, family, alpha=None):
    """Diagonal operator ``f(G)`` for ``family`` in ``{'power', 'sqrt_log'}``.

    ``power`` uses ``0**0 = 1``. ``sqrt_log`` clamps the logarithm at zero,
    i.e. returns ``sqrt(log(max(E_k, 1)))``.
    """
    ev = G.eigenvalues
    if family == "power":
        if alpha is None or alpha < 0:
            raise InvalidInputError(f"power family needs alpha >= 0, got {alpha}")
        if alpha == 0:
            vals = np.ones_like(ev)
        else:
            vals = np.power(ev, float(alpha))
    elif family == "sqrt_log":
        vals = np.sqrt(np.log(np.maximum(ev, 1.0)))
    else:
        raise InvalidInputError(f"unknown operator family {family!r}")
    return np.diag(vals).astype(complex)


def energy(rho, G):
    """``Tr(rho_A G)``; a state on ``A ⊗ R`` is reduced over ``R`` first."""
    rho = as_square(rho, "state")
    d = rho.shape[0]
    if d == G.dim:
        rho_A = rho
    elif d % G.dim == 0:
        rho_A = partial_trace(rho, G.dim, d // G.dim, "R")
    else:
        raise InvalidInputError(f"state dimension {d} incompatible with G of dimension {G.dim}")
    return float(np.real(np.dot(G.eigenvalues, np.diagonal(rho_A))))


def _constraint_diagonal(G):
    if isinstance(G, DiscreteOperator):
        return G.eigenvalues
    g = np.asarray(G, dtype=float)
    if g.ndim == 2:
        g = np.real(np.diagonal(g))
    return g


def sample_constrained_vector(G, E, seed=None, rng=None, iterations=20):
    """Random unit vector with energy ``<= E`` for the diagonal constraint ``G``.

    A complex Gaussian vector is blended toward the ground basis vector; the
    blend weight is found by bisection. ``G`` is a ``DiscreteOperator`` or the
    diagonal of a constraint operator whose first entry is 0.
    """
    g = _constraint_diagonal(G)
    if E <= 0:
        raise InvalidInputError(f"energy budget must be positive, got {E}")
    if g[0] != 0:
        raise InvalidInputError("constraint must have ground energy 0 at index 0")
    rng = np.random.default_rng(seed) if rng is None else rng
    d = g.size
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    if abs(v[0]) > 0:
        v *= np.conj(v[0]) / abs(v[0])

    def blend(w):
        u = (1.0 - w) * v
        u[0] += w
        return u / np.linalg.norm(u)

    def en(u):
        return float(np.dot(g, np.abs(u) ** 2))

    if en(v) <= E:
        return v
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if en(blend(mid)) <= E:
            hi = mid
        else:
            lo = mid
    return blend(hi)


def sample_constrained_pure(G, E, seed=None):
    """Density matrix of :func:`sample_constrained_vector`."""
    v = sample_constrained_vector(G, E, seed=seed)
    return np.outer(v, v.conj())


@dataclass
class SqrtGBoundEstimate:
    E_grid: np.ndarray
    norms: np.ndarray
    ratios: np.ndarray
    extrapolated_bound: float
    ab_pairs: list = field(default_factory=list)


def sqrtg_bound_estimate(A, G, E_grid):
    """Estimate the relative bound of ``A`` with respect to ``sqrt(G)``.

    The ratio ``||A||_E / sqrt(E)`` is nonincreasing in ``E``; its value at the
    largest grid point is reported as the extrapolated bound. Each grid point
    ``E0`` also yields a pair ``(a, b) = (||A||_E0, ||A||_E0 / sqrt(E0))`` with
    ``||A phi||^2 <= a^2 ||phi||^2 + b^2 ||sqrt(G) phi||^2``.
    """
    from .enorm import enorm

    E_grid = np.asarray(E_grid, dtype=float)
    if E_grid.size == 0 or np.any(E_grid <= 0) or np.any(np.diff(E_grid) <= 0):
        raise InvalidInputError("E_grid must be nonempty, positive and increasing")
    norms = np.array([enorm(A, G, E).value for E in E_grid])
    ratios = norms / np.sqrt(E_grid)
    pairs = [(float(a), float(b)) for a, b in zip(norms, ratios)]
    return SqrtGBoundEstimate(E_grid, norms, ratios, float(ratios[-1]), pairs)

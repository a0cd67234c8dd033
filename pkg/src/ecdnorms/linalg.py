"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays. Operators on a composite space
``A ⊗ R`` use the standard Kronecker ordering, i.e. basis index
``a * d_R + r``. Vectorization is row-major: ``vec(X)[a * d + b] = X[a, b]``,
so that ``vec(K X L^*) = (K ⊗ conj(L)) vec(X)``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, InvalidInputError

HERMITIAN_ATOL = 1e-12


def as_square(M, name="matrix"):
    """Return ``M`` as a complex square array, validating shape and finiteness."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M.astype(complex, copy=False)


def hermiticity_residual(M):
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(M - M.conj().T)))


def is_hermitian(M, atol=HERMITIAN_ATOL):
    M = np.asarray(M)
    scale = 1.0 + float(np.max(np.abs(M))) if M.size else 1.0
    return hermiticity_residual(M) <= atol * scale


def check_hermitian(M, name="matrix", atol=HERMITIAN_ATOL):
    M = as_square(M, name)
    if not is_hermitian(M, atol):
        raise InvalidInputError(
            f"{name} is not Hermitian (residual {hermiticity_residual(M):.3e})"
        )
    return M


def is_diagonal(M):
    M = np.asarray(M)
    return not np.any(M - np.diag(np.diagonal(M)))


def check_density(rho, trace=None, atol=1e-12, min_eig=-1e-10):
    """Validate a density operator (trace one) or a sub-normalized positive operator.

    With ``trace=None`` any trace in (0, 1] is accepted.
    """
    rho = check_hermitian(rho, "density operator", atol)
    tr = float(np.real(np.trace(rho)))
    if trace is None:
        if not (0.0 < tr <= 1.0 + atol):
            raise InvalidInputError(f"density operator trace {tr} outside (0, 1]")
    elif abs(tr - trace) > atol:
        raise InvalidInputError(f"density operator trace {tr} differs from {trace}")
    lo = float(np.linalg.eigvalsh(rho)[0])
    if lo < min_eig:
        raise InvalidInputError(f"density operator has negative eigenvalue {lo:.3e}")
    return rho


def hermitian_eig(M):
    """Eigendecomposition ``M = U diag(w) U^*`` with ``w`` nondecreasing.

    Diagonal input is handled exactly (no rounding in the eigenvectors),
    which keeps structure such as diagonal unitaries bit-exact.
    """
    M = np.asarray(M)
    if is_diagonal(M):
        w = np.real(np.diagonal(M)).astype(float)
        order = np.argsort(w, kind="stable")
        U = np.eye(M.shape[0], dtype=complex)[:, order]
        return w[order], U
    w, U = np.linalg.eigh(M)
    return w, U


def hermitian_function(M, f):
    """Apply the scalar function ``f`` to the Hermitian matrix ``M``.

    ``f`` is called once on the vector of eigenvalues and may return complex
    values (e.g. ``lambda x: np.exp(-1j * t * x)``). Raises ``DomainError``
    if ``f`` is not finite at some eigenvalue.
    """
    M = check_hermitian(M)
    diagonal = is_diagonal(M)
    if diagonal:
        w = np.real(np.diagonal(M)).astype(float)
    else:
        w, U = np.linalg.eigh(M)
    with np.errstate(all="ignore"):
        fw = np.broadcast_to(np.asarray(f(w)), w.shape)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        lam = float(w[np.argmax(bad)])
        raise DomainError(f"function undefined at eigenvalue {lam!r}", eigenvalue=lam)
    if diagonal:
        return np.diag(fw.astype(complex))
    return (U * fw) @ U.conj().T


def trace_norm(M):
    """Sum of singular values of ``M``."""
    M = as_square(M)
    if is_hermitian(M, 1e-14):
        return float(np.sum(np.abs(np.linalg.eigvalsh(M))))
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def sign_contraction(X):
    """Hermitian contraction ``W`` with ``Tr(W X) = ||X||_1``.

    Eigenvalues within ``1e-12 * max|w|`` of zero count as zero and map to ``+1``.
    """
    X = check_hermitian(X, "X", 1e-10)
    w, U = hermitian_eig(X)
    tol = 1e-12 * float(np.max(np.abs(w))) if w.size else 0.0
    s = np.where(w >= -tol, 1.0, -1.0)
    return (U * s) @ U.conj().T


def partial_trace(M, d_A, d_R, trace_out="R"):
    """Trace out one factor of a matrix on ``A ⊗ R``."""
    M = as_square(M)
    if M.shape[0] != d_A * d_R:
        raise InvalidInputError(
            f"matrix dimension {M.shape[0]} does not factor as {d_A} x {d_R}"
        )
    T = M.reshape(d_A, d_R, d_A, d_R)
    if trace_out in ("R", "r"):
        return np.einsum("arbr->ab", T)
    if trace_out in ("A", "a"):
        return np.einsum("aras->rs", T)
    raise InvalidInputError(f"trace_out must be 'A' or 'R', got {trace_out!r}")


def kron_identity(M, d, side="right"):
    """``M ⊗ I_d`` (``side='right'``) or ``I_d ⊗ M``."""
    eye = np.eye(d)
    return np.kron(M, eye) if side == "right" else np.kron(eye, M)


def vec(X):
    return np.asarray(X).reshape(-1)


def unvec(v, d_rows, d_cols=None):
    return np.asarray(v).reshape(d_rows, d_rows if d_cols is None else d_cols)


def _norm1(L):
    # maximum absolute column sum
    return float(np.max(np.sum(np.abs(L), axis=0))) if L.size else 0.0


def expm_action(L, t=1.0):
    """``exp(t L)`` by scaling and squaring around a truncated Taylor series.

    The squaring count ``s`` is the smallest with ``||t L||_1 / 2**s <= 0.5``.
    Diagonal ``L`` is exponentiated entrywise.
    """
    L = as_square(L, "generator")
    if t < 0:
        raise InvalidInputError(f"t must be nonnegative, got {t}")
    n = L.shape[0]
    if t == 0:
        return np.eye(n, dtype=complex)
    X = t * L
    if is_diagonal(X):
        return np.diag(np.exp(np.diagonal(X)))
    nrm = _norm1(X)
    s = 0 if nrm <= 0.5 else int(math.ceil(math.log2(nrm / 0.5)))
    X = X / (2.0 ** s)
    out = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    eps = np.finfo(float).eps
    for j in range(1, 40):
        term = term @ X / j
        out = out + term
        if _norm1(term) <= eps * _norm1(out):
            break
    for _ in range(s):
        out = out @ out
    return out

"""Symmetric and generalized symmetric eigensolvers with deterministic output.

Everything downstream (map design, fusion, loss bookkeeping) leans on these
wrappers instead of calling numpy directly, so the ordering, sign, and
zero-threshold conventions live in exactly one place:

* eigenvalues are returned in descending order; ties keep the original
  (ascending-index) order from the backend, so results are reproducible;
* each eigenvector is scaled so its first nonzero component is positive;
* an eigenvalue counts as zero when it is <= 1e-10 times the largest one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DefinitenessError, InputError, RankError

# Relative cutoff below which an eigenvalue / singular value is treated as zero.
EIGEN_ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues (descending) with eigenvectors as matching columns."""

    values: np.ndarray   # shape (k,)
    vectors: np.ndarray  # shape (n, k), column j pairs with values[j]

    def __len__(self) -> int:
        return self.values.shape[0]


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return (A + A^T)/2. Cheap guard against drift in chained products."""
    return 0.5 * (a + a.T)


def _as_square(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite entries")
    return a


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its first nonzero component is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        big = np.abs(col).max()
        if big == 0.0:
            continue
        nz = np.nonzero(np.abs(col) > 1e-12 * big)[0]
        if nz.size and col[nz[0]] < 0.0:
            out[:, j] = -col
    return out


def eig_sym(a: np.ndarray) -> EigenPairs:
    """Eigendecomposition of a symmetric matrix, descending and sign-fixed.

    Parameters
    ----------
    a : (n, n) array_like, symmetric. Only the symmetrized part is used.

    Returns
    -------
    EigenPairs with orthonormal eigenvector columns.
    """
    a = _as_square(a, "matrix")
    w, v = np.linalg.eigh(symmetrize(a))
    order = np.argsort(-w, kind="stable")
    return EigenPairs(values=w[order], vectors=_fix_signs(v[:, order]))


def solve_gevp(q: np.ndarray, s: np.ndarray) -> EigenPairs:
    """Solve the symmetric-definite generalized problem  Q u = lambda S u.

    Uses Cholesky whitening: with S = L L^T the problem becomes an ordinary
    symmetric eigenproblem on L^-1 Q L^-T and the generalized eigenvectors
    are u = L^-T w.  Returned vectors are S-orthonormal (u_i^T S u_j = delta_ij).

    Raises
    ------
    DefinitenessError
        If S has no Cholesky factor; route those inputs to
        :func:`solve_gevp_singular`.
    """
    q = _as_square(q, "Q")
    s = _as_square(s, "S")
    if q.shape != s.shape:
        raise InputError(f"Q and S must agree in shape: {q.shape} vs {s.shape}")
    try:
        chol = np.linalg.cholesky(symmetrize(s))
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("S is not positive definite") from exc
    # L^-1 Q L^-T via two triangular-ish solves; sizes are small, solve() is fine.
    half = np.linalg.solve(chol, symmetrize(q))
    whitened = symmetrize(np.linalg.solve(chol, half.T))
    w, v = np.linalg.eigh(whitened)
    order = np.argsort(-w, kind="stable")
    u = np.linalg.solve(chol.T, v[:, order])
    return EigenPairs(values=w[order], vectors=_fix_signs(u))


def solve_gevp_singular(q: np.ndarray, s: np.ndarray) -> EigenPairs:
    """Generalized problem Q u = lambda S u for positive SEMIdefinite S.

    The problem is restricted to range(S): with S = V diag(d) V^T and the
    r eigenvalues above the zero threshold retained, the returned pairs solve
    the problem projected onto that r-dimensional subspace and the vectors are
    S-orthonormal.  Consistent with :func:`solve_gevp` when S is definite.

    Raises
    ------
    RankError
        If S is (numerically) the zero matrix: there is no range to solve on.
    """
    q = _as_square(q, "Q")
    s = _as_square(s, "S")
    if q.shape != s.shape:
        raise InputError(f"Q and S must agree in shape: {q.shape} vs {s.shape}")
    es = eig_sym(s)
    top = es.values[0] if len(es) else 0.0
    if top <= 0.0:
        raise RankError("S has rank 0; the generalized problem has no range to restrict to")
    keep = es.values > EIGEN_ZERO_RTOL * top
    v_r = es.vectors[:, keep]
    d_r = es.values[keep]
    # Whiten within range(S): B = D^-1/2 V^T Q V D^-1/2, then back-map.
    scale = 1.0 / np.sqrt(d_r)
    b = symmetrize(scale[:, None] * (v_r.T @ symmetrize(q) @ v_r) * scale[None, :])
    w, z = np.linalg.eigh(b)
    order = np.argsort(-w, kind="stable")
    u = v_r @ (scale[:, None] * z[:, order])
    return EigenPairs(values=w[order], vectors=_fix_signs(u))


def orthonormalize_rows(phi: np.ndarray) -> np.ndarray:
    """Gram-Schmidt the rows of a full-row-rank matrix.

    Row order is preserved (row i of the result spans the same leading
    subspace as rows 0..i of the input) and each output row has a positive
    projection onto the input row it came from, which pins the sign.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2:
        raise InputError(f"expected a 2-d row matrix, got shape {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise InputError("row matrix contains non-finite entries")
    m, n = phi.shape
    if m > n:
        raise RankError(f"cannot orthonormalize {m} rows in dimension {n}")
    qmat, rmat = np.linalg.qr(phi.T)
    diag = np.diag(rmat)
    scale = np.abs(phi).max() * max(m, n)
    if np.any(np.abs(diag) <= (scale if scale > 0 else 1.0) * 1e-13):
        raise RankError("rows are numerically rank deficient")
    # qr() leaves the diagonal of R with arbitrary signs; make them positive.
    signs = np.sign(diag)
    return (qmat * signs[None, :]).T


def is_psd(a: np.ndarray, tol: float = EIGEN_ZERO_RTOL) -> bool:
    """True when the symmetrized matrix has no eigenvalue below -tol * spread.

    `tol` is relative to the largest absolute eigenvalue, so the test is
    scale-free; `is_psd(A - B)` is the conservativeness check used throughout.
    """
    a = _as_square(a, "matrix")
    w = np.linalg.eigvalsh(symmetrize(a))
    scale = np.abs(w).max()
    if scale == 0.0:
        return True
    return bool(w.min() >= -tol * scale)


def psd_pinv(a: np.ndarray, rtol: float = EIGEN_ZERO_RTOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via its eigensystem.

    Eigenvalues at or below rtol * lambda_max are dropped, matching the
    package-wide zero threshold; output is exactly symmetric.
    """
    a = _as_square(a, "matrix")
    w, v = np.linalg.eigh(symmetrize(a))
    top = np.abs(w).max()
    inv = np.zeros_like(w)
    keep = w > rtol * top if top > 0.0 else np.zeros_like(w, dtype=bool)
    inv[keep] = 1.0 / w[keep]
    return symmetrize((v * inv[None, :]) @ v.T)


def rank_psd(a: np.ndarray, rtol: float = EIGEN_ZERO_RTOL) -> int:
    """Numerical rank of a symmetric PSD matrix under the shared threshold."""
    a = _as_square(a, "matrix")
    w = np.linalg.eigvalsh(symmetrize(a))
    top = np.abs(w).max()
    if top == 0.0:
        return 0
    return int(np.count_nonzero(w > rtol * top))

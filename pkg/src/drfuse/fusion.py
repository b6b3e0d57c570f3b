"""Fusion rules for combining a local estimate with a rank-reduced remote one.

The remote agent observes z2 = H2 x + v2 and ships a compressed estimate
(M y2, M R2 M^T) through a wide matrix M with full row rank.  The receiving
agent holds (y1, R1) with y1 = x + v1.  Four fusers are provided:

* fuse_bsc  - optimal linear unbiased fusion when the cross-covariance
  between v1 and v2 is known;
* fuse_kf   - the same rule under an assumed zero cross-covariance;
* fuse_ci   - covariance intersection, a convex information blend that stays
  conservative for any unknown correlation;
* fuse_le   - largest-ellipsoid fusion: a common-information decomposition in
  a doubly whitened basis with per-component selection.

All fused covariances are symmetrized before return.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DefinitenessError, InputError
from .linalg import (
    EIGEN_ZERO_RTOL,
    eig_sym,
    psd_pinv,
    rank_psd,
    solve_gevp,
    symmetrize,
)

OMEGA_FLOOR = 1e-6  # lower edge of the admissible CI weight interval


def _check_cov(cov: np.ndarray, name: str) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InputError(f"{name} must be square, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise InputError(f"{name} has non-finite entries")
    scale = np.abs(cov).max()
    if scale > 0 and np.abs(cov - cov.T).max() > 1e-9 * scale:
        raise InputError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(symmetrize(cov) + 0.0)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"{name} is not positive definite") from exc
    return symmetrize(cov)


@dataclass
class Estimate:
    """A mean vector with its claimed error covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.mean)):
            raise InputError("mean has non-finite entries")
        self.cov = _check_cov(self.cov, "cov")
        if self.cov.shape[0] != self.mean.shape[0]:
            raise InputError("mean and cov dimensions disagree")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class ReducedEstimate:
    """A compressed estimate: (M y2, M R2 M^T) plus the map M that made it.

    `cov` must be symmetric positive definite; the wire codec additionally
    requires it diagonal with orthonormal rows in `mapping`, and enforces that
    itself at encode time.
    """

    mean: np.ndarray
    cov: np.ndarray
    mapping: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.mean)):
            raise InputError("mean has non-finite entries")
        self.cov = _check_cov(self.cov, "cov")
        self.mapping = np.asarray(self.mapping, dtype=float)
        if self.mapping.ndim != 2:
            raise InputError(f"mapping must be 2-d, got {self.mapping.shape}")
        if not np.all(np.isfinite(self.mapping)):
            raise InputError("mapping has non-finite entries")
        m, n = self.mapping.shape
        if m > n:
            raise InputError(f"mapping must be wide (m <= n), got {self.mapping.shape}")
        if self.mean.shape[0] != m or self.cov.shape[0] != m:
            raise InputError("mean/cov size must match the mapping row count")

    @property
    def m(self) -> int:
        return self.mapping.shape[0]

    @property
    def n(self) -> int:
        return self.mapping.shape[1]


@dataclass
class FusedEstimate:
    """Fusion output; `gain` is the weight applied to the remote message
    (None for the largest-ellipsoid rule, which is not a single-gain form)."""

    mean: np.ndarray
    cov: np.ndarray
    gain: np.ndarray | None = field(default=None)


def reduce_estimate(est: Estimate, mapping: np.ndarray) -> ReducedEstimate:
    """Compress an estimate through a wide map: (M y, M R M^T)."""
    mapping = np.asarray(mapping, dtype=float)
    return ReducedEstimate(
        mean=mapping @ est.mean,
        cov=symmetrize(mapping @ est.cov @ mapping.T),
        mapping=mapping,
    )


def _combined_map(e2: ReducedEstimate, h2: np.ndarray | None, nx: int) -> np.ndarray:
    """Rows of the remote message expressed in state space: C = M H2."""
    if h2 is None:
        if e2.n != nx:
            raise InputError("mapping width must equal the state dimension when H2 is omitted")
        return e2.mapping.copy()
    h2 = np.asarray(h2, dtype=float)
    if h2.shape != (e2.n, nx):
        raise InputError(f"H2 must be ({e2.n}, {nx}), got {h2.shape}")
    return e2.mapping @ h2


def fuse_bsc(
    e1: Estimate,
    e2: ReducedEstimate,
    h2: np.ndarray | None = None,
    r12: np.ndarray | None = None,
) -> FusedEstimate:
    """Optimal (minimum-MSE) linear unbiased fusion with known cross-covariance.

    Parameters
    ----------
    e1 : local estimate of the full state.
    e2 : reduced remote estimate.
    h2 : remote observation matrix (n2, nx); identity if None.
    r12 : cross-covariance between the local and remote errors, shape (nx, n2);
        zero if None.

    The innovation covariance is inverted with a pseudoinverse when it is
    singular, in which case the remote message carries no usable information
    along the null directions and the gain there is zero.
    """
    nx = e1.dim
    c = _combined_map(e2, h2, nx)
    if r12 is None:
        r1m = np.zeros((nx, e2.m))
    else:
        r12 = np.asarray(r12, dtype=float)
        if r12.shape != (nx, e2.n):
            raise InputError(f"r12 must be ({nx}, {e2.n}), got {r12.shape}")
        r1m = r12 @ e2.mapping.T
    r1 = e1.cov
    gain_num = r1 @ c.T - r1m                      # cov(local error, innovation)
    s_m = symmetrize(c @ r1 @ c.T + e2.cov - c @ r1m - r1m.T @ c.T)
    if rank_psd(s_m) < s_m.shape[0]:
        k_m = gain_num @ psd_pinv(s_m)
    else:
        k_m = np.linalg.solve(s_m, gain_num.T).T
    cov = symmetrize(r1 - k_m @ s_m @ k_m.T)
    mean = (np.eye(nx) - k_m @ c) @ e1.mean + k_m @ e2.mean
    return FusedEstimate(mean=mean, cov=cov, gain=k_m)


def fuse_kf(e1: Estimate, e2: ReducedEstimate, h2: np.ndarray | None = None) -> FusedEstimate:
    """Kalman-style fusion: the optimal rule evaluated at zero cross-covariance."""
    return fuse_bsc(e1, e2, h2=h2, r12=np.zeros((e1.dim, e2.n)))


def _ci_objective_terms(r1: np.ndarray, e2: ReducedEstimate, h2, nx: int):
    """Diagonalize the CI information blend once.

    Returns (weights, lams) such that
        trace((w R1^-1 + (1-w) G)^-1) = sum_j weights_j / (w + (1-w) lams_j)
    with G = C^T R_M^-1 C.  One generalized eigendecomposition replaces a
    matrix inverse per objective evaluation.
    """
    c = _combined_map(e2, h2, nx)
    info1 = np.linalg.inv(r1)
    g = symmetrize(c.T @ np.linalg.solve(e2.cov, c))
    pairs = solve_gevp(g, info1)
    weights = np.sum(pairs.vectors**2, axis=0)
    lams = np.clip(pairs.values, 0.0, None)
    return weights, lams


def _minimize_ci_trace(weights: np.ndarray, lams: np.ndarray) -> tuple[float, float]:
    """Minimize the diagonalized CI trace objective over omega in (0, 1].

    Golden-section search on [1e-6, 1] to a bracket of 1e-8 plus one
    quadratic-fit refinement.  Tie rules, in order: a flat objective returns
    0.5; an upper endpoint at least as good as the best interior point snaps
    to exactly 1.0 (the remote estimate is discarded).  Returns (omega, J).
    """

    def f(w: float) -> float:
        return float(np.sum(weights / (w + (1.0 - w) * lams)))

    lo, hi = OMEGA_FLOOR, 1.0
    f_lo, f_mid, f_hi = f(lo), f(0.5 * (lo + hi)), f(hi)
    spread = max(f_lo, f_mid, f_hi) - min(f_lo, f_mid, f_hi)
    if spread <= 1e-12 * abs(f_mid):
        return 0.5, f(0.5)

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > 1e-8:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    best_w, best_f = (x1, f1) if f1 <= f2 else (x2, f2)

    # One parabola through (a, best, b) can shave the final bracket error.
    xs = np.array([a, best_w, b])
    fs = np.array([f(a), best_f, f(b)])
    denom = (xs[1] - xs[0]) * (fs[1] - fs[2]) - (xs[1] - xs[2]) * (fs[1] - fs[0])
    if abs(denom) > 0:
        num = (xs[1] - xs[0]) ** 2 * (fs[1] - fs[2]) - (xs[1] - xs[2]) ** 2 * (fs[1] - fs[0])
        cand = xs[1] - 0.5 * num / denom
        if lo <= cand <= hi and f(cand) < best_f:
            best_w, best_f = cand, f(cand)

    # Boundary snap against the ORIGINAL endpoints, not the collapsed bracket.
    if f_hi <= best_f:
        return 1.0, f_hi
    if f_lo < best_f:
        return lo, f_lo
    return float(best_w), best_f


def optimize_ci_omega(
    r1: np.ndarray,
    e2: ReducedEstimate,
    h2: np.ndarray | None = None,
) -> float:
    """Trace-minimizing covariance-intersection weight in (0, 1]."""
    r1 = _check_cov(r1, "r1")
    weights, lams = _ci_objective_terms(r1, e2, h2, r1.shape[0])
    omega, _ = _minimize_ci_trace(weights, lams)
    return omega


def fuse_ci(
    e1: Estimate,
    e2: ReducedEstimate,
    h2: np.ndarray | None = None,
    omega: float | None = None,
) -> FusedEstimate:
    """Covariance intersection of the local estimate with the reduced message.

    With weight w:  P = (w R1^-1 + (1-w) C^T R_M^-1 C)^-1, remote gain
    K = (1-w) P C^T R_M^-1.  `omega` defaults to the trace-optimal weight.
    """
    if omega is None:
        omega = optimize_ci_omega(e1.cov, e2, h2)
    if not (0.0 < omega <= 1.0):
        raise InputError(f"omega must lie in (0, 1], got {omega}")
    nx = e1.dim
    c = _combined_map(e2, h2, nx)
    rm_inv = np.linalg.inv(e2.cov)
    info = symmetrize(omega * np.linalg.inv(e1.cov) + (1.0 - omega) * c.T @ rm_inv @ c)
    cov = symmetrize(np.linalg.inv(info))
    k_m = (1.0 - omega) * cov @ c.T @ rm_inv
    mean = (np.eye(nx) - k_m @ c) @ e1.mean + k_m @ e2.mean
    return FusedEstimate(mean=mean, cov=cov, gain=k_m)


def _le_pieces(e1: Estimate, e2: ReducedEstimate, h2):
    """Double whitening shared by fuse_le and le_gains.

    Builds the transform T that simultaneously maps the local information to
    the identity and the remote information to a diagonal, then selects each
    component from whichever side is more informative (ties go local).
    Returns None if the remote message carries no information at all.
    """
    nx = e1.dim
    c = _combined_map(e2, h2, nx)
    info1 = symmetrize(np.linalg.inv(e1.cov))
    rm_inv = np.linalg.inv(e2.cov)
    info2 = symmetrize(c.T @ rm_inv @ c)
    if rank_psd(info2) == 0:
        return None
    p1 = eig_sym(info1)
    inv_sqrt = 1.0 / np.sqrt(p1.values)
    t1 = inv_sqrt[:, None] * p1.vectors.T
    p2 = eig_sym(t1 @ info2 @ t1.T)
    t = p2.vectors.T @ t1
    remote = p2.values > 1.0
    d = np.where(remote, p2.values, 1.0)
    # x_hat = T^T D^-1 (selected iota'); P = T^T D^-1 T.
    tt_dinv = t.T / d[None, :]
    k1 = tt_dinv @ (np.where(remote, 0.0, 1.0)[:, None] * (t @ info1))
    km = tt_dinv @ (remote.astype(float)[:, None] * (t @ c.T @ rm_inv))
    cov = symmetrize(tt_dinv @ t)
    return k1, km, cov


def fuse_le(e1: Estimate, e2: ReducedEstimate, h2: np.ndarray | None = None) -> FusedEstimate:
    """Largest-ellipsoid fusion of the local estimate with the reduced message.

    Both information matrices are expressed in a basis where the local one is
    the identity and the remote one diagonal; each basis direction keeps the
    side with more information.  Implicitly removes double-counted common
    information without knowing the cross-covariance.
    """
    pieces = _le_pieces(e1, e2, h2)
    if pieces is None:
        warnings.warn("remote message carries no information; returning the local estimate")
        return FusedEstimate(mean=e1.mean.copy(), cov=e1.cov.copy(), gain=None)
    k1, km, cov = pieces
    mean = k1 @ e1.mean + km @ e2.mean
    return FusedEstimate(mean=mean, cov=cov, gain=None)


def le_gains(
    e1: Estimate,
    e2: ReducedEstimate,
    h2: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Effective linear gains (K1, KM) of the largest-ellipsoid fuser.

    The fused mean equals K1 y1 + KM y_M, with K1 + KM M H2 = I; exposing the
    gains lets callers propagate the true error covariance of the rule.
    """
    pieces = _le_pieces(e1, e2, h2)
    if pieces is None:
        nx = e1.dim
        return np.eye(nx), np.zeros((nx, e2.m))
    k1, km, _ = pieces
    return k1, km


def true_error_cov(
    k1: np.ndarray,
    km: np.ndarray,
    mapping: np.ndarray,
    r1: np.ndarray,
    r2: np.ndarray,
    r12: np.ndarray | None = None,
) -> np.ndarray:
    """Actual MSE matrix of a linear fusion x_hat = K1 y1 + KM (M y2).

    Evaluated under the true joint statistics (r1, r2, r12), independent of
    whatever statistics the fuser assumed; this is the P-tilde that the
    consistency metrics compare claimed covariances against.
    """
    k1 = np.asarray(k1, dtype=float)
    km = np.asarray(km, dtype=float)
    mapping = np.asarray(mapping, dtype=float)
    kmm = km @ mapping
    if r12 is None:
        r12 = np.zeros((k1.shape[1], mapping.shape[1]))
    cross = k1 @ r12 @ kmm.T
    return symmetrize(k1 @ r1 @ k1.T + cross + cross.T + kmm @ r2 @ kmm.T)

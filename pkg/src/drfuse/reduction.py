"""Design of the wide matrix M that compresses the remote estimate.

The trace of the optimally fused covariance separates into a constant minus
the top generalized eigenvalues of a problem (Q, S) built from the model
covariances, so the trace-optimal rank-m map consists of the m leading
generalized eigenvectors.  Variants cover four assumed correlation regimes:

* gevo     - cross-covariance known;
* gevo_kf  - cross-covariance assumed zero;
* gevo_ci  - unknown correlation handled by covariance intersection, solved
  by alternating minimization over the map and the CI weight;
* gevo_le  - correlation implied by a common-information decomposition,
  reconstructed first and then fed to the known-correlation design.

Every returned map has orthonormal rows and diagonalizes the compressed
remote covariance M R2 M^T, so messages fit the wire codec directly.
Baselines pco (keep the remote covariance's weakest eigendirections) and
dca_eig (diagonal dominating covariance) are included for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DefinitenessError, InputError, RankError
from .fusion import OMEGA_FLOOR, _ci_objective_terms, _minimize_ci_trace, ReducedEstimate
from .linalg import (
    EigenPairs,
    eig_sym,
    orthonormalize_rows,
    rank_psd,
    solve_gevp,
    solve_gevp_singular,
    symmetrize,
)

_OMEGA_CLAMP = (OMEGA_FLOOR, 1.0 - 1e-6)


@dataclass
class GevoInputs:
    """Model quantities the map design consumes.

    r12 defaults to zero (uncorrelated errors); h2 defaults to identity, in
    which case the remote measurement space must match the state space.
    `m` is the number of rows to keep; loss_ladder ignores it.
    """

    r1: np.ndarray
    r2: np.ndarray
    r12: np.ndarray | None = None
    h2: np.ndarray | None = None
    m: int | None = None

    def __post_init__(self) -> None:
        self.r1 = np.asarray(self.r1, dtype=float)
        self.r2 = np.asarray(self.r2, dtype=float)
        nx = self.r1.shape[0]
        n2 = self.r2.shape[0]
        if self.r1.shape != (nx, nx) or self.r2.shape != (n2, n2):
            raise InputError("r1 and r2 must be square")
        if not (np.all(np.isfinite(self.r1)) and np.all(np.isfinite(self.r2))):
            raise InputError("covariances contain non-finite entries")
        if self.h2 is not None:
            self.h2 = np.asarray(self.h2, dtype=float)
            if self.h2.shape != (n2, nx):
                raise InputError(f"h2 must be ({n2}, {nx}), got {self.h2.shape}")
        elif n2 != nx:
            raise InputError("h2 may be omitted only when r2 matches the state dimension")
        if self.r12 is not None:
            self.r12 = np.asarray(self.r12, dtype=float)
            if self.r12.shape != (nx, n2):
                raise InputError(f"r12 must be ({nx}, {n2}), got {self.r12.shape}")
        if self.m is not None and (int(self.m) != self.m or self.m < 1):
            raise InputError(f"m must be a positive integer, got {self.m}")

    @property
    def nx(self) -> int:
        return self.r1.shape[0]

    @property
    def n2(self) -> int:
        return self.r2.shape[0]

    def observation(self) -> np.ndarray:
        return np.eye(self.nx) if self.h2 is None else self.h2

    def cross(self) -> np.ndarray:
        if self.r12 is None:
            return np.zeros((self.nx, self.n2))
        return self.r12


@dataclass
class GevoCiConfig:
    """Knobs of the alternating minimization in gevo_ci."""

    omega0: float = 0.5
    epsilon: float = 1e-4   # relative loss improvement below which we stop
    max_iters: int = 100


@dataclass
class ConvergenceTrace:
    """Per-round record of the alternating minimization."""

    losses: np.ndarray
    omegas: np.ndarray
    iterations: int
    truncated: bool = field(default=False)


@dataclass
class LossLadder:
    """Fused-trace loss as a function of message rank.

    ell[m] is the fused trace when m rows are kept (ell[0] = no message at
    all); lambdas[i] is the trace reduction contributed by row i+1.
    """

    ell: np.ndarray
    lambdas: np.ndarray


def _reduction_problem(inputs: GevoInputs) -> tuple[np.ndarray, np.ndarray]:
    """The (Q, S) pencil whose leading eigenvectors form the optimal map."""
    h2 = inputs.observation()
    r12 = inputs.cross()
    delta = inputs.r1 @ h2.T - r12              # cov(local error, remote innovation)
    q = symmetrize(delta.T @ delta)
    s = symmetrize(h2 @ inputs.r1 @ h2.T + inputs.r2 - h2 @ r12 - r12.T @ h2.T)
    return q, s


def _solve_pencil(q: np.ndarray, s: np.ndarray) -> EigenPairs:
    """Route to the definite or singular generalized solver."""
    if rank_psd(s) == s.shape[0]:
        try:
            return solve_gevp(q, s)
        except DefinitenessError:
            pass
    return solve_gevp_singular(q, s)


def _finish_map(phi: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Orthonormalize the rows, then rotate so M R2 M^T comes out diagonal."""
    omega_rows = orthonormalize_rows(phi)
    rot = eig_sym(symmetrize(omega_rows @ r2 @ omega_rows.T))
    return rot.vectors.T @ omega_rows


def gevo(inputs: GevoInputs) -> np.ndarray:
    """Trace-optimal rank-m compression map for known cross-covariance.

    Returns an (m, n2) matrix with orthonormal rows whose row space spans the
    m leading generalized eigenvectors of the reduction pencil, rotated so
    the compressed remote covariance is diagonal.

    Raises RankError when m exceeds the rank of the innovation covariance:
    rows beyond that rank cannot reduce the fused trace.
    """
    if inputs.m is None:
        raise InputError("GevoInputs.m must be set for map design")
    q, s = _reduction_problem(inputs)
    pairs = _solve_pencil(q, s)
    if inputs.m > len(pairs):
        raise RankError(
            f"m={inputs.m} exceeds rank(S)={len(pairs)}; "
            "rows beyond rank(S) add no fusion gain"
        )
    phi = pairs.vectors[:, : inputs.m].T
    return _finish_map(phi, inputs.r2)


def gevo_kf(r1, r2, h2: np.ndarray | None = None, m: int = 1) -> np.ndarray:
    """Compression map optimal under an assumed zero cross-covariance."""
    nx = np.asarray(r1).shape[0]
    n2 = np.asarray(r2).shape[0]
    return gevo(GevoInputs(r1=r1, r2=r2, r12=np.zeros((nx, n2)), h2=h2, m=m))


def gevo_ci(
    r1,
    r2,
    h2: np.ndarray | None = None,
    m: int = 1,
    config: GevoCiConfig | None = None,
) -> tuple[np.ndarray, float, ConvergenceTrace]:
    """Joint map/weight design for covariance-intersection fusion.

    Alternates two exact coordinate steps: for a fixed weight the optimal map
    is a generalized eigenvector problem; for a fixed map the optimal weight
    is a scalar minimization.  Stops when the relative loss improvement drops
    to `config.epsilon` (the first round never stops: there is no earlier
    loss to compare against) or when the weight snaps to 1.0, meaning the
    remote message is discarded and no further round can improve the loss.

    Returns (map, omega, trace) where the map is orthonormal-row with
    diagonal compressed covariance, like :func:`gevo`.
    """
    cfg = config or GevoCiConfig()
    if not (0.0 < cfg.omega0 <= 1.0):
        raise InputError(f"omega0 must lie in (0, 1], got {cfg.omega0}")
    if cfg.epsilon < 0.0:
        raise InputError("epsilon must be nonnegative")
    inputs = GevoInputs(r1=r1, r2=r2, h2=h2, m=m)
    h = inputs.observation()
    r1 = inputs.r1
    r2 = inputs.r2
    hr1 = h @ r1
    q_base = symmetrize(hr1 @ hr1.T)        # H R1^2 H^T
    s_loc = symmetrize(hr1 @ h.T)           # H R1 H^T

    omega = float(np.clip(cfg.omega0, *_OMEGA_CLAMP))
    prev_loss = np.inf
    losses: list[float] = []
    omegas: list[float] = []
    phi = None
    converged = False
    for _ in range(cfg.max_iters):
        w = float(np.clip(omega, *_OMEGA_CLAMP))
        pairs = _solve_pencil(q_base / w**2, s_loc / w + r2 / (1.0 - w))
        if m > len(pairs):
            raise RankError(f"m={m} exceeds the pencil rank {len(pairs)}")
        phi = pairs.vectors[:, :m].T
        proxy = ReducedEstimate(
            mean=np.zeros(m), cov=symmetrize(phi @ r2 @ phi.T), mapping=phi
        )
        weights, lams = _ci_objective_terms(r1, proxy, inputs.h2, inputs.nx)
        omega, loss = _minimize_ci_trace(weights, lams)
        losses.append(loss)
        omegas.append(omega)
        if omega == 1.0:
            converged = True        # remote discarded; the loss cannot move again
            break
        if (prev_loss - loss) / loss <= cfg.epsilon:
            converged = True
            break
        prev_loss = loss

    trace = ConvergenceTrace(
        losses=np.asarray(losses),
        omegas=np.asarray(omegas),
        iterations=len(losses),
        truncated=not converged,
    )
    return _finish_map(phi, r2), omegas[-1], trace


def gevo_le(r1, r2, h2: np.ndarray | None = None, m: int = 1) -> np.ndarray:
    """Compression map for largest-ellipsoid fusion.

    The rule's implicit cross-covariance follows from its common-information
    decomposition: in a basis where the local information is the identity and
    the remote information diagonal, the shared information per direction is
    the smaller of 1 and the remote amount.  That cross term is reconstructed
    and handed to the known-correlation design.
    """
    inputs = GevoInputs(r1=r1, r2=r2, h2=h2, m=m)
    h = inputs.observation()
    if np.linalg.matrix_rank(h) < inputs.nx:
        raise RankError("h2 must have full column rank for the common-information step")
    r2_inv = np.linalg.inv(inputs.r2)
    info1 = symmetrize(np.linalg.inv(inputs.r1))
    info2 = symmetrize(h.T @ r2_inv @ h)
    p1 = eig_sym(info1)
    sqrt1 = np.sqrt(p1.values)
    t1_inv = p1.vectors * sqrt1[None, :]          # T1^-1 = U1 S1^(1/2)
    p2 = eig_sym(symmetrize((p1.vectors / sqrt1[None, :]).T @ info2 @ (p1.vectors / sqrt1[None, :])))
    t_inv = t1_inv @ p2.vectors                   # T^-1 = T1^-1 U2
    d = np.minimum(1.0, p2.values)                # shared information per direction
    info_common = symmetrize((t_inv * d[None, :]) @ t_inv.T)
    r12 = inputs.r1 @ info_common @ h.T @ inputs.r2
    return gevo(GevoInputs(r1=inputs.r1, r2=inputs.r2, r12=r12, h2=inputs.h2, m=m))


def pco(r2, m: int) -> np.ndarray:
    """Keep the m weakest eigendirections of the remote covariance.

    A transmitter-side heuristic: it minimizes trace(M R2 M^T) over
    orthonormal-row maps but ignores the receiver entirely.
    """
    r2 = np.asarray(r2, dtype=float)
    n2 = r2.shape[0]
    if not 1 <= m <= n2:
        raise InputError(f"m must lie in 1..{n2}, got {m}")
    pairs = eig_sym(r2)
    return pairs.vectors[:, n2 - m :].T


def dca_eig(r2) -> np.ndarray:
    """Smallest eigenvalue-scaled diagonal matrix dominating the covariance.

    D* = s diag(R2) with s the largest eigenvalue of the correlation-like
    matrix D^-1/2 R2 D^-1/2, so D* - R2 is positive semidefinite and only the
    diagonal needs transmitting.
    """
    r2 = np.asarray(r2, dtype=float)
    d = np.diag(r2).copy()
    if np.any(d <= 0.0):
        raise DefinitenessError("covariance diagonal must be positive")
    scale = 1.0 / np.sqrt(d)
    corr = symmetrize(scale[:, None] * r2 * scale[None, :])
    s = float(np.linalg.eigvalsh(corr).max())
    return np.diag(s * d)


def loss_ladder(inputs: GevoInputs) -> LossLadder:
    """Fused-trace loss for every admissible message rank.

    ell[0] is trace(r1); each further rung subtracts one generalized
    eigenvalue of the reduction pencil.  The ladder is nonincreasing and has
    rank(S) + 1 rungs.
    """
    q, s = _reduction_problem(inputs)
    pairs = _solve_pencil(q, s)
    lams = np.clip(pairs.values, 0.0, None)
    ell0 = float(np.trace(inputs.r1))
    ell = ell0 - np.concatenate(([0.0], np.cumsum(lams)))
    return LossLadder(ell=ell, lambdas=lams)


def select_m(ladder: LossLadder, tau: float) -> int:
    """Smallest rank capturing at least a fraction tau of the reachable gain.

    The boundary is inclusive; tau must lie in [0, 1].  A ladder with no
    positive eigenvalues (fusion cannot improve anything) returns 0 with a
    warning.
    """
    if not 0.0 <= tau <= 1.0:
        raise InputError(f"tau must lie in [0, 1], got {tau}")
    lams = np.asarray(ladder.lambdas, dtype=float)
    total = float(lams.sum())
    if total <= 0.0:
        warnings.warn("all eigenvalues are zero; no rank gives any gain")
        return 0
    ratio = np.cumsum(lams) / total
    hit = np.nonzero(ratio + 1e-12 >= tau)[0]
    if hit.size == 0:
        return int(lams.shape[0])
    return int(hit[0]) + 1

"""Consistency and performance metrics for claimed covariances.

A fuser claims P; the truth is the actual MSE matrix P-tilde.  The claim is
conservative when P - P-tilde is PSD.  Both checks below whiten the truth by
the claim, so 1.0 is the knife edge:

* coin  - largest eigenvalue of the whitened truth; <= 1 iff conservative;
* anees - mean eigenvalue of the whitened truth (the average normalized
  squared error in expectation); a weaker, direction-blind check.

anees never exceeds coin.  rmtr compares traces against a reference method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DefinitenessError, InputError
from .linalg import symmetrize


def _pair(claimed, actual):
    claimed = np.asarray(claimed, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if claimed.shape != actual.shape or claimed.ndim != 2:
        raise InputError(f"covariance shapes disagree: {claimed.shape} vs {actual.shape}")
    if not (np.all(np.isfinite(claimed)) and np.all(np.isfinite(actual))):
        raise InputError("non-finite covariance entries")
    return claimed, actual


def coin(claimed: np.ndarray, actual: np.ndarray) -> float:
    """Largest eigenvalue of the claim-whitened actual MSE matrix.

    With claimed = L L^T this is lambda_max(L^-1 actual L^-T); at most 1
    exactly when the claim is conservative in every direction.
    """
    claimed, actual = _pair(claimed, actual)
    try:
        chol = np.linalg.cholesky(symmetrize(claimed))
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("claimed covariance is not positive definite") from exc
    half = np.linalg.solve(chol, symmetrize(actual))
    white = symmetrize(np.linalg.solve(chol, half.T))
    return float(np.linalg.eigvalsh(white).max())


def anees(claimed: np.ndarray, actual: np.ndarray) -> float:
    """trace(claimed^-1 actual) / n: the mean whitened eigenvalue."""
    claimed, actual = _pair(claimed, actual)
    try:
        sol = np.linalg.solve(symmetrize(claimed), symmetrize(actual))
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("claimed covariance is singular") from exc
    return float(np.trace(sol)) / claimed.shape[0]


def rmtr(claimed: np.ndarray, reference: np.ndarray) -> float:
    """Root-trace ratio sqrt(trace(claimed)) / sqrt(trace(reference))."""
    claimed, reference = _pair(claimed, reference)
    tr_ref = float(np.trace(reference))
    tr_cl = float(np.trace(claimed))
    if tr_ref <= 0.0 or tr_cl < 0.0:
        raise InputError("traces must be positive to compare")
    return float(np.sqrt(tr_cl) / np.sqrt(tr_ref))


def mc_error_cov(errors: np.ndarray) -> np.ndarray:
    """Raw second moment of Monte Carlo errors, shape (runs, n) -> (n, n).

    No mean subtraction: estimator bias is part of the error being measured.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2 or errors.shape[0] < 1:
        raise InputError(f"errors must be (runs, n) with runs >= 1, got {errors.shape}")
    if not np.all(np.isfinite(errors)):
        raise InputError("errors contain non-finite entries")
    return symmetrize(errors.T @ errors / errors.shape[0])


@dataclass
class MetricSeries:
    """COIN / ANEES / RMTR sampled over steps (e.g. fusion instants)."""

    times: np.ndarray
    coin: np.ndarray
    anees: np.ndarray
    rmtr: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times)
        self.coin = np.asarray(self.coin, dtype=float)
        self.anees = np.asarray(self.anees, dtype=float)
        self.rmtr = np.asarray(self.rmtr, dtype=float)
        n = self.times.shape[0]
        if not (self.coin.shape[0] == self.anees.shape[0] == self.rmtr.shape[0] == n):
            raise InputError("metric series lengths disagree")

    def __len__(self) -> int:
        return self.times.shape[0]

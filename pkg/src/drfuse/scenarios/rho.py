"""Analytic sweep of fusion methods over a correlation strength parameter.

Two agents share a common-information component: their inverse covariances
blend a private part with a shared one weighted by rho in [0, 1), and the
true cross-covariance follows from the shared part.  Four method stacks are
swept over rho and message rank m:

* dkf - decorrelate first (subtract the shared information from the remote
  estimate), then fuse as if independent, map designed for that model;
* ci  - covariance intersection with the jointly optimized map and weight;
* le  - largest-ellipsoid fusion with its common-information map;
* nkf - naive Kalman fusion that ignores the correlation entirely.

Claimed covariances are compared against exactly propagated true MSE
matrices (no Monte Carlo needed: every fuser here is linear), with the
known-correlation optimum as the trace reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DrfuseError, InputError
from ..fusion import (
    Estimate,
    fuse_bsc,
    fuse_ci,
    fuse_kf,
    fuse_le,
    le_gains,
    reduce_estimate,
    true_error_cov,
)
from ..metrics import MetricSeries, anees, coin, rmtr
from ..reduction import GevoInputs, gevo, gevo_ci, gevo_kf, gevo_le

# Private information of agent 1 (strong on late components).
PRIVATE_INFO_1 = np.diag([64.0, 32.0, 16.0, 8.0, 4.0, 2.0])
# Private information of agent 2 (strong on early components).
PRIVATE_INFO_2 = np.diag([5.0, 8.0, 13.0, 21.0, 34.0, 55.0])
# Shared information both agents absorbed.
SHARED_INFO = np.array(
    [
        [16.0, 4.0, 4.0, 0.0, -2.0, 0.0],
        [4.0, 20.0, 8.0, -8.0, -4.0, -4.0],
        [4.0, 8.0, 30.0, 0.0, -4.0, -4.0],
        [0.0, -8.0, 0.0, 50.0, 0.0, 0.0],
        [-2.0, -4.0, -4.0, 0.0, 10.0, 0.0],
        [0.0, -4.0, -4.0, 0.0, 0.0, 20.0],
    ]
)

METHODS = ("dkf", "ci", "le", "nkf")


def _default_grid() -> np.ndarray:
    return np.concatenate([np.round(np.arange(0.0, 0.96, 0.05), 2), [0.99]])


@dataclass
class RhoScenario:
    """Sweep configuration; the default grid is [0, 0.95] in 0.05 steps plus 0.99."""

    grid: np.ndarray = field(default_factory=_default_grid)
    m_values: tuple[int, ...] = (1, 2, 3)
    methods: tuple[str, ...] = METHODS

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        if np.any(self.grid < 0.0) or np.any(self.grid > 1.0):
            raise InputError("rho grid must lie in [0, 1]")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise InputError(f"unknown methods {sorted(bad)}; choose from {METHODS}")


@dataclass
class RhoResult:
    """Series per (method, m); a skipped cell records (method, m, rho, reason)."""

    grid: np.ndarray
    series: dict[tuple[str, int], MetricSeries]
    skipped: list[tuple[str, int, float, str]]


def model_at(rho: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """True covariances (r1, r2, r12) at a given correlation strength."""
    r1 = np.linalg.inv((1.0 - rho) * PRIVATE_INFO_1 + rho * SHARED_INFO)
    r2 = np.linalg.inv((1.0 - rho) * PRIVATE_INFO_2 + rho * SHARED_INFO)
    r12 = rho * r1 @ SHARED_INFO @ r2
    return r1, r2, r12


def _evaluate_cell(method: str, m: int, rho: float) -> tuple[float, float, float]:
    """One (method, m, rho) cell: returns (coin, anees, rmtr)."""
    r1, r2, r12 = model_at(rho)
    nx = r1.shape[0]
    e1 = Estimate(mean=np.zeros(nx), cov=r1)
    remote_full = Estimate(mean=np.zeros(nx), cov=r2)

    # Reference: known-correlation optimal fusion at the same rank.
    m_ref = gevo(GevoInputs(r1=r1, r2=r2, r12=r12, m=m))
    p_ref = fuse_bsc(e1, reduce_estimate(remote_full, m_ref), r12=r12).cov

    if method == "dkf":
        info_private = (1.0 - rho) * PRIVATE_INFO_2
        r2_dec = np.linalg.inv(info_private)
        mapping = gevo_kf(r1, r2_dec, m=m)
        fused = fuse_kf(e1, reduce_estimate(Estimate(np.zeros(nx), r2_dec), mapping))
        km = fused.gain
        k1 = np.eye(nx) - km @ mapping
        # The decorrelated message really is independent with covariance r2_dec.
        p_true = true_error_cov(k1, km, mapping, r1, r2_dec, None)
    elif method == "nkf":
        mapping = gevo_kf(r1, r2, m=m)
        fused = fuse_kf(e1, reduce_estimate(remote_full, mapping))
        km = fused.gain
        k1 = np.eye(nx) - km @ mapping
        p_true = true_error_cov(k1, km, mapping, r1, r2, r12)
    elif method == "ci":
        mapping, omega, _ = gevo_ci(r1, r2, m=m)
        reduced = reduce_estimate(remote_full, mapping)
        fused = fuse_ci(e1, reduced, omega=omega)
        km = fused.gain
        k1 = np.eye(nx) - km @ mapping
        p_true = true_error_cov(k1, km, mapping, r1, r2, r12)
    elif method == "le":
        mapping = gevo_le(r1, r2, m=m)
        reduced = reduce_estimate(remote_full, mapping)
        fused = fuse_le(e1, reduced)
        k1, km = le_gains(e1, reduced)
        p_true = true_error_cov(k1, km, mapping, r1, r2, r12)
    else:
        raise InputError(f"unknown method {method!r}")

    return (
        coin(fused.cov, p_true),
        anees(fused.cov, p_true),
        rmtr(fused.cov, p_ref),
    )


def run_rho_example(scenario: RhoScenario | None = None) -> RhoResult:
    """Sweep every configured (method, m) pair over the rho grid."""
    sc = scenario or RhoScenario()
    series: dict[tuple[str, int], MetricSeries] = {}
    skipped: list[tuple[str, int, float, str]] = []
    for method in sc.methods:
        for m in sc.m_values:
            steps, coins, aneeses, rmtrs = [], [], [], []
            for idx, rho in enumerate(sc.grid):
                try:
                    c, a, r = _evaluate_cell(method, m, float(rho))
                except (DrfuseError, np.linalg.LinAlgError) as exc:
                    skipped.append((method, m, float(rho), str(exc)))
                    continue
                steps.append(idx)
                coins.append(c)
                aneeses.append(a)
                rmtrs.append(r)
            series[(method, m)] = MetricSeries(
                times=np.asarray(steps, dtype=int),
                coin=np.asarray(coins),
                anees=np.asarray(aneeses),
                rmtr=np.asarray(rmtrs),
            )
    return RhoResult(grid=sc.grid.copy(), series=series, skipped=skipped)

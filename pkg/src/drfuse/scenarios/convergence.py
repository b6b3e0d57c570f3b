"""Convergence statistics of the alternating map/weight minimization.

Draws covariance pairs from a Wishart distribution (resampling the local one
whenever the remote dominates it, since that case terminates trivially) and
records how many rounds gevo_ci needs before the relative loss improvement
drops below epsilon.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InputError
from ..linalg import is_psd
from ..reduction import GevoCiConfig, gevo_ci


def sample_wishart(scale: np.ndarray, dof: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one Wishart(scale, dof) matrix via the Bartlett factorization.

    Requires dof >= dim; the expected value is dof * scale.
    """
    scale = np.asarray(scale, dtype=float)
    n = scale.shape[0]
    if scale.shape != (n, n):
        raise InputError(f"scale must be square, got {scale.shape}")
    if dof < n:
        raise InputError(f"dof must be >= dimension ({n}), got {dof}")
    try:
        chol = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError as exc:
        raise InputError("scale must be positive definite") from exc
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i] = np.sqrt(rng.chisquare(dof - i))
        a[i, :i] = rng.standard_normal(i)
    half = chol @ a
    return half @ half.T


@dataclass
class ConvergenceStudyConfig:
    """Grid of study cells plus sampling controls."""

    nx_values: tuple[int, ...] = (6, 9)
    epsilons: tuple[float, ...] = (1e-3, 1e-4)
    m_values: tuple[int, ...] = (1, 2, 3, 4)
    trials: int = 10_000
    seed: int = 0
    threads: int = 1


@dataclass
class IterationStats:
    """Histogram and summary of iteration counts for one study cell."""

    counts: np.ndarray      # counts[k] = number of trials that took k rounds
    mean: float
    std: float
    mode: int

    @property
    def trials(self) -> int:
        return int(self.counts.sum())


def _run_trials(nx: int, epsilon: float, m: int, seeds: list[np.random.SeedSequence]) -> list[int]:
    """Worker: iteration counts for one chunk of independent trials."""
    cfg = GevoCiConfig(epsilon=epsilon)
    eye = np.eye(nx)
    out = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        r2 = sample_wishart(eye, nx, rng)
        r1 = sample_wishart(eye, nx, rng)
        while is_psd(r2 - r1, tol=1e-12):
            r1 = sample_wishart(eye, nx, rng)
        _, _, trace = gevo_ci(r1, r2, m=m, config=cfg)
        out.append(trace.iterations)
    return out


def _summarize(counts_list: list[int]) -> IterationStats:
    arr = np.asarray(counts_list)
    hist = np.bincount(arr)
    return IterationStats(
        counts=hist,
        mean=float(arr.mean()),
        std=float(arr.std()),
        mode=int(np.argmax(hist)),
    )


def run_convergence_study(
    config: ConvergenceStudyConfig | None = None,
) -> dict[tuple[int, float, int], IterationStats]:
    """Iteration statistics per (nx, epsilon, m) cell.

    Every trial draws its randomness from its own child seed, and chunks are
    reduced in index order, so the result is identical for any thread count.
    """
    cfg = config or ConvergenceStudyConfig()
    if cfg.trials < 1:
        raise InputError("trials must be >= 1")
    cells = [
        (nx, eps, m)
        for nx in cfg.nx_values
        for eps in cfg.epsilons
        for m in cfg.m_values
    ]
    cell_seeds = np.random.SeedSequence(cfg.seed).spawn(len(cells))
    results: dict[tuple[int, float, int], IterationStats] = {}
    chunk = 250
    for (nx, eps, m), cell_seed in zip(cells, cell_seeds):
        trial_seeds = cell_seed.spawn(cfg.trials)
        chunks = [trial_seeds[i : i + chunk] for i in range(0, cfg.trials, chunk)]
        if cfg.threads > 1:
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                parts = list(pool.map(_run_trials, *zip(*[(nx, eps, m, c) for c in chunks])))
        else:
            parts = [_run_trials(nx, eps, m, c) for c in chunks]
        counts: list[int] = []
        for part in parts:
            counts.extend(part)
        results[(nx, eps, m)] = _summarize(counts)
    return results

"""Decentralized state estimation under communication constraints.

Agents exchange dimension-reduced estimates: a wide map M with orthonormal
rows compresses a remote estimate (y2, R2) into (M y2, M R2 M^T), a fusion
rule folds the message into the local estimate, and a bit-thrifty codec puts
it on the wire.  The map design (the gevo family) picks M from generalized
eigenvectors so the fused trace is as small as the chosen fusion rule allows.

Layout: linalg (symmetric-matrix primitives), fusion (bsc / kf / ci / le
rules), reduction (map design and baselines), codec (wire format and size
arithmetic), metrics (consistency measures), scenarios (bundled studies),
cli (command-line front end).
"""

from .codec import CostReport, WireMessage, cost_report, decode, deserialize, encode, serialize
from .exceptions import (
    CorruptMessageError,
    DefinitenessError,
    DegenerateInputError,
    DrfuseError,
    FramingError,
    InputError,
    RankError,
)
from .fusion import (
    Estimate,
    FusedEstimate,
    ReducedEstimate,
    fuse_bsc,
    fuse_ci,
    fuse_kf,
    fuse_le,
    le_gains,
    optimize_ci_omega,
    reduce_estimate,
    true_error_cov,
)
from .linalg import (
    EigenPairs,
    eig_sym,
    is_psd,
    orthonormalize_rows,
    psd_pinv,
    rank_psd,
    solve_gevp,
    solve_gevp_singular,
    symmetrize,
)
from .metrics import MetricSeries, anees, coin, mc_error_cov, rmtr
from .reduction import (
    ConvergenceTrace,
    GevoCiConfig,
    GevoInputs,
    LossLadder,
    dca_eig,
    gevo,
    gevo_ci,
    gevo_kf,
    gevo_le,
    loss_ladder,
    pco,
    select_m,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # exceptions
    "DrfuseError",
    "InputError",
    "DefinitenessError",
    "RankError",
    "DegenerateInputError",
    "FramingError",
    "CorruptMessageError",
    # linear algebra
    "EigenPairs",
    "eig_sym",
    "solve_gevp",
    "solve_gevp_singular",
    "orthonormalize_rows",
    "is_psd",
    "psd_pinv",
    "rank_psd",
    "symmetrize",
    # fusion
    "Estimate",
    "ReducedEstimate",
    "FusedEstimate",
    "reduce_estimate",
    "fuse_bsc",
    "fuse_kf",
    "fuse_ci",
    "fuse_le",
    "le_gains",
    "optimize_ci_omega",
    "true_error_cov",
    # reduction
    "GevoInputs",
    "GevoCiConfig",
    "ConvergenceTrace",
    "LossLadder",
    "gevo",
    "gevo_kf",
    "gevo_ci",
    "gevo_le",
    "pco",
    "dca_eig",
    "loss_ladder",
    "select_m",
    # codec
    "WireMessage",
    "CostReport",
    "encode",
    "decode",
    "serialize",
    "deserialize",
    "cost_report",
    # metrics
    "coin",
    "anees",
    "rmtr",
    "mc_error_cov",
    "MetricSeries",
]

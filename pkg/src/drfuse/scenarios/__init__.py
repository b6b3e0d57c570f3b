"""Reference experiments exercising the full map-design / fusion / metrics stack."""

from .convergence import (
    ConvergenceStudyConfig,
    IterationStats,
    run_convergence_study,
    sample_wishart,
)
from .io import load_convergence_config, load_dtt_config, load_rho_scenario
from .rho import RhoResult, RhoScenario, run_rho_example
from .tracking import DttConfig, DttResult, cvm_predict, kf_update, run_dtt

__all__ = [
    "ConvergenceStudyConfig",
    "IterationStats",
    "run_convergence_study",
    "sample_wishart",
    "RhoResult",
    "RhoScenario",
    "run_rho_example",
    "DttConfig",
    "DttResult",
    "cvm_predict",
    "kf_update",
    "run_dtt",
    "load_convergence_config",
    "load_dtt_config",
    "load_rho_scenario",
]

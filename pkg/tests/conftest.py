"""Shared fixtures, random-model factories, and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest


def random_spd(rng: np.random.Generator, n: int, scale: float = 1.0, jitter: float = 1e-2):
    """Random symmetric positive definite matrix with O(scale) entries."""
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T / n + jitter * np.eye(n))


def random_joint_model(rng: np.random.Generator, nx: int, n2: int, correlated: bool = True):
    """(r1, r2, r12, h2) with the stacked error covariance positive definite.

    r12 models correlation between the local estimation error and the remote
    measurement noise; h2 is a generic dense observation matrix.
    """
    joint = random_spd(rng, nx + n2)
    r1 = joint[:nx, :nx].copy()
    r2 = joint[nx:, nx:].copy()
    r12 = joint[:nx, nx:].copy() if correlated else None
    h2 = rng.standard_normal((n2, nx))
    return r1, r2, r12, h2


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


# One summary line per acceptance check, printed whether or not -s was given.
_ACCEPTANCE = [
    ("test_two_sensor_axis_selection", "2x2 axis selection matches the worked example"),
    ("test_reduction_map_beats_random_maps", "reduced-map fusion beats 1e4 random maps x200 instances"),
    ("test_loss_ladder_matches_fused_trace", "loss ladder equals the fused trace for every rank"),
    ("test_message_cost_accounting", "scalar counts, savings, and extra-bit ratios exact"),
    ("test_codec_roundtrip_and_golden_bytes", "1000 codec roundtrips within 1e-7; golden bytes bit-for-bit"),
    ("test_alternating_reduction_iteration_stats", "iteration statistics land in the reference bands"),
    ("test_alternating_reduction_monotone_loss", "alternating-reduction loss nonincreasing over 1e4 trials"),
    ("test_reduction_invariance_properties", "change-of-basis and null-row-append invariance"),
    ("test_weakest_component_selection_is_worst", "weakest-component map maximizes the fused trace"),
    ("test_correlation_sweep_consistency", "correlation sweep consistency flags"),
    ("test_tracking_scenario_metric_bands", "tracking scenario metric bands at 2000 runs"),
    ("test_fusion_gain_matches_oracle", "closed-form fusion matches the oracle and beats 1e4 gains"),
]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, str] = {}
    for key in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            outcomes.setdefault(nodeid.split("::")[-1], key)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for idx, (name, label) in enumerate(_ACCEPTANCE, start=1):
        if name not in outcomes:
            continue
        word = "PASS" if outcomes[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {idx:02d}: {word}  {label}")

"""Scenario-level tests: building blocks, determinism, config handling."""

from __future__ import annotations

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from drfuse.exceptions import InputError
from drfuse.fusion import Estimate
from drfuse.linalg import is_psd
from drfuse.scenarios.convergence import (
    ConvergenceStudyConfig,
    run_convergence_study,
    sample_wishart,
)
from drfuse.scenarios.io import load_convergence_config, load_dtt_config, load_rho_scenario
from drfuse.scenarios.rho import RhoScenario, model_at, run_rho_example
from drfuse.scenarios.tracking import (
    DttConfig,
    cvm_matrices,
    cvm_predict,
    kf_update,
    run_dtt,
    transmitter_at,
)


# ---------------------------------------------------------------- wishart

def test_wishart_moments_match_theory(rng):
    """E[W] = dof * scale and Var[W_ii] = 2 dof scale_ii^2."""
    scale = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.5]])
    dof = 5
    draws = 20_000
    diag_samples = np.empty((draws, 3))
    total = np.zeros((3, 3))
    for i in range(draws):
        w = sample_wishart(scale, dof, rng)
        total += w
        diag_samples[i] = np.diag(w)
    mean = total / draws
    # standard error of W_ij is a few percent of the mean here
    assert np.abs(mean - dof * scale).max() < 0.12
    var = diag_samples.var(axis=0)
    expected = 2.0 * dof * np.diag(scale) ** 2
    assert np.abs(var / expected - 1.0).max() < 0.15


def test_wishart_draws_are_positive_definite(rng):
    scale = np.eye(4)
    for _ in range(25):
        w = sample_wishart(scale, 4, rng)
        assert np.linalg.eigvalsh(w).min() > 0.0


def test_wishart_input_checking(rng):
    with pytest.raises(InputError, match="dof"):
        sample_wishart(np.eye(3), 2, rng)
    with pytest.raises(InputError, match="square"):
        sample_wishart(np.ones((2, 3)), 5, rng)
    with pytest.raises(InputError, match="positive definite"):
        sample_wishart(np.diag([1.0, -1.0]), 5, rng)


# ---------------------------------------------------------------- tracking pieces

def test_cvm_matrices_structure():
    f, q = cvm_matrices(dt=2.0, noise_std=0.0)
    expected_f = np.eye(4)
    expected_f[0, 2] = expected_f[1, 3] = 2.0
    assert_array_equal(f, expected_f)
    assert_array_equal(q, np.zeros((4, 4)))
    _, q = cvm_matrices(dt=1.0, noise_std=2.0)
    assert is_psd(q, tol=1e-12)
    assert_allclose(q[2, 2], 4.0)
    with pytest.raises(InputError):
        cvm_matrices(dt=0.0)
    with pytest.raises(InputError):
        cvm_matrices(noise_std=-1.0)


def test_cvm_predict_moves_position_by_velocity():
    est = Estimate(mean=np.array([0.0, 0.0, 3.0, -1.0]), cov=np.eye(4))
    out = cvm_predict(est, dt=1.0, noise_std=0.0)
    assert_allclose(out.mean, [3.0, -1.0, 3.0, -1.0])
    # deterministic motion cannot shrink uncertainty
    assert np.trace(out.cov) >= np.trace(est.cov) - 1e-12


def test_kf_update_limits():
    h = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    prior = Estimate(mean=np.zeros(4), cov=np.diag([9.0, 9.0, 4.0, 4.0]))
    z = np.array([5.0, -3.0])

    vague, _ = kf_update(prior, z, 1e12 * np.eye(2), h)
    assert_allclose(vague.mean, prior.mean, atol=1e-8)
    assert_allclose(vague.cov, prior.cov, rtol=1e-8)

    sharp, gain = kf_update(prior, z, 1e-12 * np.eye(2), h)
    assert_allclose(sharp.mean[:2], z, atol=1e-8)
    assert np.linalg.eigvalsh(sharp.cov).min() >= -1e-12
    assert np.trace(sharp.cov) <= np.trace(prior.cov)
    assert gain.shape == (4, 2)

    with pytest.raises(InputError):
        kf_update(prior, z, np.eye(2), np.eye(4))


def test_transmitter_schedule_is_round_robin():
    assert [transmitter_at(s) for s in range(1, 8)] == [1, 2, 3, 1, 2, 3, 1]


def test_dtt_config_validation():
    with pytest.raises(InputError, match="unknown banks"):
        DttConfig(banks=("nkf", "kalman"))
    with pytest.raises(InputError, match="self-loop"):
        DttConfig(links=((2, 2),))
    with pytest.raises(InputError, match="unknown agent"):
        DttConfig(links=((2, 4),))
    with pytest.raises(InputError, match="duplicate"):
        DttConfig(links=((2, 1), (2, 1)))
    with pytest.raises(InputError, match="m must"):
        DttConfig(m=5)
    with pytest.raises(InputError):
        DttConfig(runs=0)


def test_dtt_run_is_deterministic_and_thread_invariant():
    base = dict(steps=9, m=2, runs=300, seed=3)
    first = run_dtt(DttConfig(**base, threads=1))
    again = run_dtt(DttConfig(**base, threads=1))
    pooled = run_dtt(DttConfig(**base, threads=2))
    assert set(first.series) == set(again.series) == set(pooled.series)
    for key, series in first.series.items():
        for other in (again, pooled):
            assert_array_equal(series.times, other.series[key].times)
            assert_array_equal(series.coin, other.series[key].coin)
            assert_array_equal(series.anees, other.series[key].anees)
            assert_array_equal(series.rmtr, other.series[key].rmtr)
        assert_array_equal(first.mean_errors[key], pooled.mean_errors[key])


def test_dtt_estimators_are_unbiased_and_reduction_costs_trace():
    result = run_dtt(DttConfig(steps=9, m=2, runs=1000, seed=11))
    assert result.runs == 1000
    for key, errs in result.mean_errors.items():
        # Monte Carlo mean error: zero up to sampling noise
        assert np.abs(errs).max() < 2.0, key
    for bank in ("nkf-full", "ci-full", "le-full"):
        for agent in (1, 2, 3):
            assert_allclose(result.series[(bank, agent)].rmtr, 1.0, atol=1e-12)
    for bank in ("nkf", "ci", "nkf-pco", "ci-pco", "le-pco", "dca-eig"):
        for agent in (1, 2, 3):
            assert np.all(result.series[(bank, agent)].rmtr >= 1.0 - 1e-9), (bank, agent)


# ---------------------------------------------------------------- correlation sweep

def test_rho_model_is_a_valid_joint():
    for rho in (0.0, 0.35, 0.9):
        r1, r2, r12 = model_at(rho)
        joint = np.block([[r1, r12], [r12.T, r2]])
        assert np.linalg.eigvalsh(joint).min() > -1e-9
        assert np.linalg.eigvalsh(r1).min() > 0.0
        assert np.linalg.eigvalsh(r2).min() > 0.0
    r1, r2, r12 = model_at(0.0)
    assert_array_equal(r12, np.zeros_like(r12))


def test_rho_scenario_validation():
    with pytest.raises(InputError, match="grid"):
        RhoScenario(grid=np.array([0.0, 1.2]))
    with pytest.raises(InputError, match="unknown methods"):
        RhoScenario(methods=("dkf", "ekf"))


def test_rho_small_sweep_covers_every_cell():
    scenario = RhoScenario(grid=np.array([0.0, 0.5]), m_values=(1, 3),
                           methods=("dkf", "nkf"))
    result = run_rho_example(scenario)
    assert result.skipped == []
    assert set(result.series) == {("dkf", 1), ("dkf", 3), ("nkf", 1), ("nkf", 3)}
    for series in result.series.values():
        assert_array_equal(series.times, [0, 1])
    # decorrelated fusion stays exactly consistent on this model
    for m in (1, 3):
        assert_allclose(result.series[("dkf", m)].coin, 1.0, atol=1e-9)
    assert_allclose(result.series[("nkf", 1)].coin[0], 1.0, atol=1e-9)
    assert result.series[("nkf", 3)].coin[1] > 1.0


# ---------------------------------------------------------------- convergence study

def test_convergence_study_is_deterministic_and_thread_invariant():
    cfg = dict(nx_values=(4,), epsilons=(1e-2,), m_values=(1, 2), trials=60, seed=5)
    first = run_convergence_study(ConvergenceStudyConfig(**cfg, threads=1))
    again = run_convergence_study(ConvergenceStudyConfig(**cfg, threads=1))
    pooled = run_convergence_study(ConvergenceStudyConfig(**cfg, threads=2))
    assert set(first) == {(4, 1e-2, 1), (4, 1e-2, 2)}
    for key, stats in first.items():
        for other in (again, pooled):
            assert_array_equal(stats.counts, other[key].counts)
        assert stats.trials == 60
        rounds = np.arange(stats.counts.size)
        assert_allclose(stats.mean, (rounds * stats.counts).sum() / 60, rtol=1e-12)
        assert stats.mode == int(stats.counts.argmax())


def test_convergence_study_rejects_empty_sampling():
    with pytest.raises(InputError):
        run_convergence_study(ConvergenceStudyConfig(trials=0))


# ---------------------------------------------------------------- config files

def test_dtt_config_loads_from_json(tmp_path):
    path = tmp_path / "dtt.json"
    path.write_text(json.dumps({"runs": 7, "m": 1, "links": [[2, 1], [3, 2]]}))
    cfg = load_dtt_config(str(path))
    assert cfg.runs == 7 and cfg.m == 1
    assert cfg.links == ((2, 1), (3, 2))
    assert cfg.steps == 15  # untouched defaults survive


def test_rho_scenario_loads_from_json(tmp_path):
    path = tmp_path / "rho.json"
    path.write_text(json.dumps({"grid": [0.0, 0.5], "m_values": [2], "methods": ["ci"]}))
    scenario = load_rho_scenario(str(path))
    assert scenario.m_values == (2,)
    assert scenario.methods == ("ci",)
    assert_array_equal(scenario.grid, [0.0, 0.5])


def test_convergence_config_loads_from_json(tmp_path):
    path = tmp_path / "conv.json"
    path.write_text(json.dumps({"nx_values": [4], "epsilons": [0.01], "trials": 10}))
    cfg = load_convergence_config(str(path))
    assert cfg.nx_values == (4,)
    assert cfg.epsilons == (0.01,)
    assert cfg.trials == 10


def test_config_loading_failure_modes(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(InputError, match="cannot read"):
        load_dtt_config(str(missing))

    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{runs: 7")
    with pytest.raises(InputError, match="cannot read"):
        load_dtt_config(str(bad_json))

    not_object = tmp_path / "list.json"
    not_object.write_text("[1, 2]")
    with pytest.raises(InputError, match="JSON object"):
        load_dtt_config(str(not_object))

    typo = tmp_path / "typo.json"
    typo.write_text(json.dumps({"runz": 7}))
    with pytest.raises(InputError, match="unknown config keys"):
        load_dtt_config(str(typo))

"""Experiment runner: artifact layout, reproducibility across reruns and
worker counts, failure handling, and the two report generators."""

from __future__ import annotations

import json
import os

import numpy as np
import pytest

from abcsmc import (
    ConfigError,
    RunConfig,
    RunTrace,
    ScheduleInfeasibleError,
    gain_curve,
    run_experiment,
    run_replicate,
    table1_report,
    toy_accept_prob,
    validate_config,
)


def _sc_cfg(**kw):
    base = dict(
        sampler="self-calibrated",
        n=400,
        epsilon_target=0.09,
        seed=5,
        replicates=2,
    )
    base.update(kw)
    cfg = RunConfig(**base)
    validate_config(cfg)
    return cfg


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _summary_minus_wall(text):
    return [line.rsplit(",", 1)[0] for line in text.strip().splitlines()]


@pytest.fixture(scope="module")
def sc_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sc")
    cfg = _sc_cfg()
    output = run_experiment(cfg, str(out))
    return cfg, out, output


@pytest.fixture(scope="module")
def curve(tmp_path_factory):
    out = tmp_path_factory.mktemp("curve")
    cfg = _sc_cfg(n=500, replicates=1, seed=31)
    path = gain_curve(cfg, str(out))
    trace = RunTrace.from_dict(json.loads(_read(str(out / "trace_1.json"))))
    rows = [line.split(",") for line in _read(path).strip().splitlines()]
    return cfg, trace, rows[0], rows[1:]


class TestRunExperiment:
    def test_artifact_layout(self, sc_run):
        _, out, output = sc_run
        names = sorted(os.path.basename(p) for p in output.paths)
        assert names == [
            "particles_1.csv",
            "particles_2.csv",
            "summary.csv",
            "trace_1.json",
            "trace_2.json",
        ]
        for p in output.paths:
            assert os.path.exists(p)

    def test_summary_matches_traces(self, sc_run):
        _, out, output = sc_run
        lines = _read(str(out / "summary.csv")).strip().splitlines()
        assert lines[0] == "replicate,total_sims,final_eps,ess,gain,iterations,wall_ms"
        assert len(lines) == 3
        for res, line in zip(output.results, lines[1:]):
            fields = line.split(",")
            assert int(fields[0]) == res.replicate
            assert int(fields[1]) == res.trace.total_sims
            assert float(fields[2]) == res.trace.final_epsilon
            assert float(fields[3]) == res.trace.final_ess
            assert int(fields[5]) == len(res.trace.iterations)

    def test_particles_csv_shape(self, sc_run):
        _, out, output = sc_run
        lines = _read(str(out / "particles_1.csv")).strip().splitlines()
        assert lines[0] == "theta_1,z_1,dist,weight"
        n_final = output.results[0].trace.n_final
        assert len(lines) == n_final + 1
        first = lines[1].split(",")
        assert len(first) == 4
        assert float(first[3]) == pytest.approx(1.0 / n_final)
        assert float(first[2]) <= 0.09

    def test_trace_json_round_trip(self, sc_run):
        _, out, output = sc_run
        payload = json.loads(_read(str(out / "trace_2.json")))
        rebuilt = RunTrace.from_dict(payload)
        assert rebuilt.to_dict() == output.results[1].trace.to_dict()
        assert payload["config"]["replicate"] == 2
        assert payload["config"]["seed"] == 5

    def test_rerun_is_byte_identical_except_wall_clock(self, sc_run, tmp_path):
        cfg, out, _ = sc_run
        run_experiment(cfg, str(tmp_path))
        for name in ("particles_1.csv", "particles_2.csv", "trace_1.json", "trace_2.json"):
            assert _read(str(tmp_path / name)) == _read(str(out / name))
        assert _summary_minus_wall(_read(str(tmp_path / "summary.csv"))) == (
            _summary_minus_wall(_read(str(out / "summary.csv")))
        )

    def test_worker_count_does_not_change_results(self, sc_run, tmp_path):
        cfg, out, _ = sc_run
        cfg4 = _sc_cfg(workers=4, replicates=2)
        run_experiment(cfg4, str(tmp_path))
        for name in ("particles_1.csv", "particles_2.csv", "trace_1.json", "trace_2.json"):
            assert _read(str(tmp_path / name)) == _read(str(out / name))

    def test_zero_replicates(self, tmp_path):
        cfg = _sc_cfg(replicates=0)
        output = run_experiment(cfg, str(tmp_path))
        assert output.results == []
        assert _read(str(tmp_path / "summary.csv")).strip().splitlines() == [
            "replicate,total_sims,final_eps,ess,gain,iterations,wall_ms"
        ]

    def test_failures_leave_partial_artifacts(self, tmp_path):
        cfg = RunConfig(
            sampler="naive-smc",
            n=50,
            schedule=[1e-9],  # nothing survives the only tolerance
            seed=3,
            replicates=2,
        )
        validate_config(cfg)
        with pytest.raises(ScheduleInfeasibleError):
            run_experiment(cfg, str(tmp_path))
        names = sorted(os.listdir(tmp_path))
        assert names == [
            "summary.csv.partial",
            "trace_1.json.partial",
            "trace_2.json.partial",
        ]
        payload = json.loads(_read(str(tmp_path / "trace_1.json.partial")))
        assert payload["error"]["type"] == "ScheduleInfeasibleError"
        assert payload["replicate"] == 1


class TestOtherSamplers:
    def test_rejection_gain_is_near_one(self, tmp_path):
        cfg = RunConfig(
            sampler="reject", n_prior=20_000, epsilon_target=0.2, seed=11, replicates=1
        )
        validate_config(cfg)
        output = run_experiment(cfg, str(tmp_path))
        trace = output.results[0].trace
        assert trace.total_sims == 20_000
        # rejection is the gain baseline; Monte Carlo noise only
        assert trace.gain == pytest.approx(1.0, abs=0.2)

    def test_mcmc_chain_includes_start(self, tmp_path):
        cfg = RunConfig(
            sampler="mcmc",
            n_prior=20_000,
            epsilon_target=0.2,
            mcmc_steps=200,
            seed=12,
            replicates=1,
        )
        validate_config(cfg)
        output = run_experiment(cfg, str(tmp_path))
        res = output.results[0]
        assert res.trace.n_final == 201
        assert np.all(res.particles.dists <= 0.2)
        # warm-up pool plus at most one simulation per step
        assert 20_000 <= res.trace.total_sims <= 20_200

    def test_mcmc_fixed_proposal_sd(self, tmp_path):
        cfg = RunConfig(
            sampler="mcmc",
            n_prior=20_000,
            epsilon_target=0.2,
            mcmc_steps=50,
            proposal_sd=0.7,
            seed=13,
            replicates=1,
        )
        validate_config(cfg)
        output = run_experiment(cfg, str(tmp_path))
        assert output.results[0].trace.n_final == 51


class TestTable1:
    def test_report_layout_and_rejection_cost(self, tmp_path):
        reject = RunConfig(
            sampler="reject", n_prior=5000, epsilon_target=0.2, seed=21, replicates=2
        )
        adaptive = _sc_cfg(epsilon_target=0.2, seed=21, replicates=2)
        for c in (reject, adaptive):
            validate_config(c)
        path = table1_report([reject, adaptive], str(tmp_path))
        lines = _read(path).strip().splitlines()
        assert lines[0] == "sampler,replicates,cost,ess"
        assert len(lines) == 3
        r_fields = lines[1].split(",")
        assert r_fields[0] == "reject"
        assert float(r_fields[2]) == 5000.0  # rejection cost is exactly n_prior
        assert (tmp_path / "01-reject" / "summary.csv").exists()
        assert (tmp_path / "02-self-calibrated" / "summary.csv").exists()

    def test_mismatched_tolerances_rejected(self, tmp_path):
        a = RunConfig(sampler="reject", n_prior=100, epsilon_target=0.2, seed=0)
        b = _sc_cfg(epsilon_target=0.09)
        with pytest.raises(ConfigError, match="tolerance"):
            table1_report([a, b], str(tmp_path))

    def test_quantile_mode_has_no_tolerance(self, tmp_path):
        a = RunConfig(sampler="reject", n_prior=100, quantile=0.5, seed=0)
        with pytest.raises(ConfigError, match="tolerance"):
            table1_report([a], str(tmp_path))

    def test_empty_list_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            table1_report([], str(tmp_path))


class TestGainCurve:
    def test_header_and_length(self, curve):
        _, trace, header, rows = curve
        assert header == ["iter", "eps", "alpha", "rho", "cumulative_sims", "gain", "stop_iter"]
        assert len(rows) == len(trace.iterations) + 1

    def test_initialization_row(self, curve):
        cfg, trace, _, rows = curve
        k = trace.init["batches_used"]
        row0 = rows[0]
        assert row0[0] == "0"
        assert float(row0[1]) == trace.init["epsilon0"]
        assert float(row0[2]) == pytest.approx(1.0 / k)
        assert row0[3] == "nan"
        assert int(row0[4]) == k * cfg.n
        p0 = toy_accept_prob(trace.init["epsilon0"], 10.0)
        expected = (trace.init["ess"] / p0) / (k * cfg.n)
        assert float(row0[5]) == pytest.approx(expected, rel=1e-12)

    def test_iteration_rows_track_trace(self, curve):
        cfg, trace, _, rows = curve
        k = trace.init["batches_used"]
        stop = trace.stop_iter if trace.stop_iter is not None else -1
        for rec, row in zip(trace.iterations, rows[1:]):
            assert int(row[0]) == rec.t
            assert float(row[1]) == rec.epsilon
            assert float(row[2]) == rec.alpha
            assert float(row[3]) == rec.rho_hat
            assert int(row[4]) == k * cfg.n + rec.t * cfg.n
            assert int(row[6]) == stop

    def test_requires_self_calibrated(self, tmp_path):
        cfg = RunConfig(sampler="reject", n_prior=10, epsilon_target=0.2, seed=0)
        with pytest.raises(ConfigError, match="self-calibrated"):
            gain_curve(cfg, str(tmp_path))


def test_run_replicate_keyed_by_replicate():
    cfg = _sc_cfg(replicates=2)
    a = run_replicate(cfg, 1)
    b = run_replicate(cfg, 2)
    assert not np.array_equal(a.particles.thetas, b.particles.thetas)
    again = run_replicate(cfg, 1)
    assert np.array_equal(a.particles.thetas, again.particles.thetas)

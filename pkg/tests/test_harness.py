import csv
import json
import math
import os

import numpy as np
import pytest

from hotuner import analysis, harness
from hotuner.errors import ConfigError
from hotuner.harness import ExperimentConfig, export_trace, preset, preset_variants, run_experiment
from hotuner.losses import LogSumExpSample
from hotuner.tuners import max_stable_gamma

DATA = os.path.join(os.path.dirname(__file__), "data")


def small_config(**overrides):
    obj = {
        "name": "small",
        "loss": {"family": "logsumexp", "known_optimum": [0.0]},
        "schedule": {"kind": "constant",
                     "sample": {"kind": "logsumexp", "a": 0.5, "b": 2.0},
                     "horizon": 21},
        "tuner": "ht",
        "hyperparams": {"gamma": max_stable_gamma(0.1), "beta": 0.1},
        "theta0": [3.0],
        "iterations": 20,
    }
    obj.update(overrides)
    return ExperimentConfig.from_dict(obj)


class TestConfigParsing:
    def test_round_trip(self):
        config = small_config()
        again = ExperimentConfig.from_dict(config.to_dict())
        assert again.to_dict() == config.to_dict()
        assert again.config_hash() == config.config_hash()

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            small_config(bogus=1)

    def test_unknown_nested_keys(self):
        with pytest.raises(ConfigError):
            small_config(loss={"family": "logsumexp", "extra": 1})
        with pytest.raises(ConfigError):
            small_config(schedule={"kind": "constant", "sample": {"kind": "logsumexp",
                         "a": 0.5, "b": 1.0, "c": 2}, "horizon": 21})
        with pytest.raises(ConfigError):
            small_config(hyperparams={"gamma": 0.01, "beta": 0.1, "nope": 3})

    def test_missing_required(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"name": "x"})

    def test_unknown_tuner_and_family(self):
        with pytest.raises(ConfigError):
            small_config(tuner="adam")
        with pytest.raises(ConfigError):
            small_config(loss={"family": "hinge"})

    def test_horizon_must_cover_rows(self):
        with pytest.raises(ConfigError, match="horizon"):
            small_config(schedule={"kind": "constant",
                                   "sample": {"kind": "logsumexp", "a": 0.5, "b": 2.0},
                                   "horizon": 20})

    def test_malformed_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="line"):
            ExperimentConfig.from_file(path)

    def test_continuous_needs_t_end(self):
        with pytest.raises(ConfigError):
            small_config(tuner="ht-continuous", iterations=None)


class TestRunSemantics:
    def test_zero_iterations_single_row(self):
        trace = run_experiment(small_config(iterations=0, schedule={
            "kind": "constant", "sample": {"kind": "logsumexp", "a": 0.5, "b": 2.0},
            "horizon": 1}))
        assert len(trace) == 1
        assert trace.theta[0, 0] == 3.0
        assert not trace.hard_diverged

    def test_row_quantities(self):
        trace = run_experiment(small_config())
        assert len(trace) == 21
        # row 0 evaluates the initial state against sample 0
        ev_val = math.log(0.5) + 6.0 + math.log1p(math.exp(-12.0))
        assert trace.loss[0] == pytest.approx(ev_val, rel=1e-15)
        assert trace.normalizer[0] == 5.0
        assert trace.delta_v[0] == 0.0
        assert np.all(np.diff(trace.k) == 1)

    def test_determinism_bitwise(self):
        t1 = run_experiment(small_config())
        t2 = run_experiment(small_config())
        assert np.array_equal(t1.theta, t2.theta)
        assert np.array_equal(t1.lyapunov, t2.lyapunov)

    def test_hard_divergence_truncates(self):
        # raw-step Nesterov on a steep quadratic blows up to non-finite fast
        config = ExperimentConfig.from_dict({
            "name": "blowup",
            "loss": {"family": "quadratic-regression", "known_optimum": [0.0, 0.0]},
            "schedule": {"kind": "constant",
                         "sample": {"kind": "linear", "phi": [5.0, 5.0], "y": 0.0},
                         "horizon": 201},
            "tuner": "nesterov",
            "hyperparams": {"alpha_bar": 10.0, "beta_bar": 0.9},
            "theta0": [1.0, 1.0],
            "iterations": 200,
        })
        trace = run_experiment(config)
        assert trace.hard_diverged
        assert len(trace) < 201
        assert trace.diverged[-1]
        assert not trace.diverged[:-1].any()

    def test_vartheta0_defaults_to_theta0(self):
        trace = run_experiment(small_config())
        assert trace.vartheta[0, 0] == trace.theta[0, 0]

    def test_gd_modes_differ(self):
        base = {
            "name": "gd",
            "loss": {"family": "logsumexp", "known_optimum": [0.0]},
            "schedule": {"kind": "constant",
                         "sample": {"kind": "logsumexp", "a": 0.5, "b": 2.0},
                         "horizon": 11},
            "tuner": "normalized-gd",
            "hyperparams": {"alpha_bar": 0.5},
            "theta0": [2.0],
            "iterations": 10,
        }
        live = run_experiment(ExperimentConfig.from_dict({**base, "normalization": "live"}))
        raw = run_experiment(ExperimentConfig.from_dict({**base, "normalization": "none"}))
        assert live.normalizer[0] == 5.0
        assert raw.normalizer[0] == 1.0
        # raw steps are 5x larger here
        assert abs(raw.theta[1, 0] - 2.0) > abs(live.theta[1, 0] - 2.0)

    def test_continuous_run_matches_integrator(self):
        config = ExperimentConfig.from_dict({
            "name": "cont",
            "loss": {"family": "logsumexp", "known_optimum": [0.0]},
            "schedule": {"kind": "constant",
                         "sample": {"kind": "logsumexp", "a": 0.5, "b": 1.0},
                         "horizon": 10},
            "tuner": "ht-continuous",
            "hyperparams": {"gamma": 0.1, "beta": 0.3, "mode": "continuous"},
            "theta0": [5.0],
            "t_end": 5.0, "h": 0.01,
        })
        trace = run_experiment(config)
        assert len(trace) == 501
        from hotuner.losses import LogSumExpLoss
        from hotuner.schedules import ConstantSchedule
        from hotuner.tuners import HyperParams, TunerState, integrate_continuous
        run = integrate_continuous(
            TunerState([5.0], [5.0]), LogSumExpLoss(known_optimum=[0.0]),
            ConstantSchedule(LogSumExpSample(a=0.5, b=1.0), 10),
            HyperParams(gamma=0.1, beta=0.3, mode="continuous"), 5.0, 0.01)
        assert np.array_equal(trace.theta[:, 0], run.theta[:, 0])
        assert np.array_equal(trace.lyapunov, run.lyapunov)

    def test_generic_vector_path(self):
        config = ExperimentConfig.from_dict({
            "name": "vec",
            "loss": {"family": "quadratic-regression", "known_optimum": [1.0, -1.0]},
            "schedule": {"kind": "constant",
                         "sample": {"kind": "linear", "phi": [1.0, 0.5], "y": 0.5},
                         "horizon": 51},
            "tuner": "ht",
            "hyperparams": {"gamma": max_stable_gamma(0.1), "beta": 0.1},
            "theta0": [3.0, 2.0],
            "iterations": 50,
        })
        trace = run_experiment(config)
        assert trace.theta.shape == (51, 2)
        assert not trace.hard_diverged


class TestExport:
    def test_csv_header_and_quoting(self, tmp_path):
        trace = run_experiment(small_config(iterations=3, schedule={
            "kind": "constant", "sample": {"kind": "logsumexp", "a": 0.5, "b": 2.0},
            "horizon": 4}))
        path = tmp_path / "t.csv"
        export_trace(trace, path, "csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "k,b_or_phi,theta,vartheta,loss,grad_norm,normalizer,lyapunov,delta_v,diverged"
        assert lines[1].startswith('0,"2",')
        assert lines[1].endswith(",false")
        assert len(lines) == 5

    def test_csv_round_trip_exact(self, tmp_path):
        trace = run_experiment(small_config())
        path = tmp_path / "t.csv"
        export_trace(trace, path, "csv")
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        theta = np.array([[float(x) for x in r["theta"].split(";")] for r in rows])
        vartheta = np.array([[float(x) for x in r["vartheta"].split(";")] for r in rows])
        lyap = np.array([float(r["lyapunov"]) for r in rows])
        recomputed = analysis.lyapunov_series(theta, vartheta, trace.theta_star,
                                              trace.metadata["gamma_for_v"])
        assert np.array_equal(recomputed, lyap)
        assert np.array_equal(theta, trace.theta)

    def test_vector_fields_joined(self, tmp_path):
        config = ExperimentConfig.from_dict({
            "name": "vec",
            "loss": {"family": "quadratic-regression", "known_optimum": [0.0, 0.0]},
            "schedule": {"kind": "constant",
                         "sample": {"kind": "linear", "phi": [1.0, 2.0], "y": 0.0},
                         "horizon": 3},
            "tuner": "ht",
            "hyperparams": {"gamma": max_stable_gamma(0.2), "beta": 0.2},
            "theta0": [1.0, 1.0],
            "iterations": 2,
        })
        trace = run_experiment(config)
        path = tmp_path / "vec.csv"
        export_trace(trace, path, "csv")
        line = path.read_text().splitlines()[1]
        assert '"1;2"' in line
        assert '"1;1"' in line

    def test_json_export(self, tmp_path):
        trace = run_experiment(small_config(iterations=2, schedule={
            "kind": "constant", "sample": {"kind": "logsumexp", "a": 0.5, "b": 2.0},
            "horizon": 3}))
        path = tmp_path / "t.json"
        export_trace(trace, path, "json")
        doc = json.loads(path.read_text())
        assert set(doc) == {"metadata", "records"}
        assert len(doc["records"]) == 3
        assert doc["metadata"]["config_hash"] == trace.metadata["config_hash"]
        assert doc["records"][0]["sample"] == {"kind": "logsumexp", "a": 0.5, "b": 2.0}

    def test_unknown_format(self, tmp_path):
        trace = run_experiment(small_config())
        with pytest.raises(Exception):
            export_trace(trace, tmp_path / "t.xml", "xml")


class TestPresets:
    def test_all_presets_build(self):
        for name in harness.PRESET_NAMES:
            config = preset(name)
            assert config.name.startswith(name.split("-")[0])

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            preset("fig9")
        with pytest.raises(KeyError):
            preset("fig3-ht", tuner="nesterov")

    def test_fig1a_constants(self):
        ht = preset("fig1a")
        assert ht.hyperparams["gamma"] == 10.0
        assert ht.hyperparams["beta"] == 0.1
        gd = preset("fig1a", "normalized-gd")
        assert gd.hyperparams["alpha_bar"] == pytest.approx(1.0 / 49.0, rel=1e-15)
        assert gd.normalization == "none"
        sched = gd.schedule
        assert sched.switch_k == 25 and sched.before.b == 7.0 and sched.after.b == 14.0

    def test_fig1b_constants(self):
        gd = preset("fig1b", "normalized-gd")
        gamma = max_stable_gamma(0.1)
        assert gd.hyperparams["alpha_bar"] == pytest.approx(gamma * 0.1 / 50.0, rel=1e-15)
        assert gd.schedule.switch_k == 1500
        assert gd.iterations == 5000

    def test_fig3_gains(self):
        ht = preset("fig3-ht")
        ne = preset("fig3-nesterov")
        assert ne.hyperparams["beta_bar"] == pytest.approx(0.9721129004668205687, rel=1e-14)
        assert ne.hyperparams["alpha_bar"] == pytest.approx(1.0 / 0.5001, rel=1e-15)
        assert ht.hyperparams["beta"] == pytest.approx(1.0 - 0.9721129004668205687, rel=1e-12)
        assert ht.hyperparams["gamma"] == pytest.approx(
            ne.hyperparams["alpha_bar"] / ht.hyperparams["beta"], rel=1e-15)
        assert ht.stop_when_gap_below == 1e-10

    def test_provenance_matches_checked_in_table(self):
        with open(os.path.join(DATA, "preset_provenance.json")) as fh:
            table = json.load(fh)
        assert table == harness.PRESET_PROVENANCE
        for name in harness.PRESET_NAMES:
            key = name if name.startswith("fig3") else name
            assert preset(name).provenance == harness.PRESET_PROVENANCE[key]

    def test_variants(self):
        assert [c.tuner for c in preset_variants("fig1a")] == ["ht", "normalized-gd", "nesterov"]
        assert [c.name for c in preset_variants("fig3")] == ["fig3-ht", "fig3-nesterov"]
        with pytest.raises(KeyError):
            preset_variants("fig7")

    def test_fig3_truncates_at_gap_threshold(self):
        trace = run_experiment(preset("fig3-ht"))
        assert len(trace) < 100
        assert trace.gap[-1] <= 1e-10


class TestSummaries:
    def test_summary_fields(self):
        config = small_config()
        trace = run_experiment(config)
        summary = harness.summarize_run(config, trace)
        assert summary.stable
        assert summary.lyapunov_violations == 0
        assert summary.final_gap == trace.final_gap

    def test_reproduce_figure_outputs(self, tmp_path):
        summaries, traces = harness.reproduce_figure("fig1a", tmp_path)
        assert [s.tuner for s in summaries] == ["ht", "normalized-gd", "nesterov"]
        assert summaries[0].stable
        assert not summaries[1].stable and not summaries[2].stable
        for config in preset_variants("fig1a"):
            assert (tmp_path / f"{config.name}.csv").exists()
        assert (tmp_path / "fig1a.svg").exists()

    def test_reproduce_parallel_matches_serial(self, tmp_path):
        s_par, t_par = harness.reproduce_figure("fig1a", tmp_path / "a", make_plot=False)
        s_ser, t_ser = harness.reproduce_figure("fig1a", tmp_path / "b",
                                                make_plot=False, parallel=False)
        for a, b in zip(t_par, t_ser):
            assert np.array_equal(a.theta, b.theta)

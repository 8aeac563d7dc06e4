import json
import os

import pytest

from hotuner import harness
from hotuner.cli import main


def write_config(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config.to_dict()))
    return str(path)


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_summary(line):
    return dict(pair.split("=", 1) for pair in line.split())


class TestRun:
    def test_valid_config(self, tmp_path, capsys):
        path = write_config(tmp_path, harness.preset("fig1a"))
        code, out, _ = run_cli(["run", "--config", path, "--out", str(tmp_path)], capsys)
        assert code == 0
        assert (tmp_path / "fig1a-ht.csv").exists()
        summary = parse_summary(out.strip().splitlines()[-1])
        assert summary["diverged"] == "false"

    def test_missing_config(self, tmp_path, capsys):
        code, _, err = run_cli(["run", "--config", str(tmp_path / "nope.json"),
                                "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "not found" in err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x", ')
        code, _, err = run_cli(["run", "--config", str(path), "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "line" in err

    def test_divergent_baseline_is_not_an_error(self, tmp_path, capsys):
        path = write_config(tmp_path, harness.preset("fig1a", "nesterov"))
        code, out, _ = run_cli(["run", "--config", path, "--out", str(tmp_path)], capsys)
        assert code == 0
        summary = parse_summary(out.strip().splitlines()[-1])
        assert summary["diverged"] == "true"

    def test_json_format_and_plot(self, tmp_path, capsys):
        path = write_config(tmp_path, harness.preset("fig3-nesterov"))
        code, _, _ = run_cli(["run", "--config", path, "--out", str(tmp_path),
                              "--format", "json", "--plot"], capsys)
        assert code == 0
        assert (tmp_path / "fig3-nesterov.json").exists()
        assert (tmp_path / "fig3-nesterov.svg").exists()

    def test_out_env_default(self, tmp_path, capsys, monkeypatch):
        out_dir = tmp_path / "from-env"
        monkeypatch.setenv("HT_OPT_OUT", str(out_dir))
        path = write_config(tmp_path, harness.preset("fig3-nesterov"))
        code, _, _ = run_cli(["run", "--config", path], capsys)
        assert code == 0
        assert (out_dir / "fig3-nesterov.csv").exists()


class TestValidate:
    def test_smooth_pass(self, capsys):
        code, out, _ = run_cli(["validate", "--beta", "0.1", "--gamma", "0.02",
                                "--mode", "smooth"], capsys)
        assert code == 0
        assert "max_gamma=0.023456790123456789" in out
        assert "validation=pass" in out

    def test_smooth_fail(self, capsys):
        code, out, _ = run_cli(["validate", "--beta", "0.1", "--gamma", "10",
                                "--mode", "smooth"], capsys)
        assert code == 1
        assert "validation=fail" in out

    def test_strong_mode(self, capsys):
        code, out, _ = run_cli(["validate", "--beta", "0.1", "--gamma", "0.0118",
                                "--mu", "1e-4", "--mode", "strong"], capsys)
        assert code == 0
        assert "16+beta+mu" in out

    def test_continuous(self, capsys):
        code, out, _ = run_cli(["validate", "--beta", "0.3", "--gamma", "0.1",
                                "--mode", "continuous"], capsys)
        assert code == 0
        code, out, _ = run_cli(["validate", "--beta", "0.2", "--gamma", "0.1",
                                "--mode", "continuous"], capsys)
        assert code == 1

    def test_non_numeric_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["validate", "--beta", "abc", "--gamma", "1", "--mode", "smooth"])
        assert exc.value.code == 2


class TestReproduce:
    def test_fig1a_table(self, tmp_path, capsys):
        code, out, _ = run_cli(["reproduce", "fig1a", "--out", str(tmp_path)], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        rows = {parts[0]: parts[1] for parts in
                (line.split() for line in lines[2:])}
        assert rows["ht"] == "stable"
        assert rows["normalized-gd"] == "diverged"
        assert rows["nesterov"] == "diverged"
        assert (tmp_path / "fig1a.svg").exists()
        assert (tmp_path / "fig1a-nesterov.csv").exists()

    def test_unknown_figure(self, tmp_path, capsys):
        code, _, err = run_cli(["reproduce", "fig99", "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "unknown figure" in err


class TestCompare:
    def test_identical_configs(self, tmp_path, capsys):
        a = write_config(tmp_path, harness.preset("fig3-ht"), "a.json")
        b = write_config(tmp_path, harness.preset("fig3-ht"), "b.json")
        code, out, _ = run_cli(["compare", "--configs", a, b, "--epsilon", "1e-8",
                                "--out", str(tmp_path)], capsys)
        assert code == 0
        lines = [parse_summary(l) for l in out.strip().splitlines()]
        assert lines[0]["iterations_to_epsilon"] == lines[1]["iterations_to_epsilon"]
        assert lines[2]["winner"] == "fig3-ht"
        assert (tmp_path / "compare.svg").exists()

    def test_mismatched_losses(self, tmp_path, capsys):
        a = write_config(tmp_path, harness.preset("fig3-ht"), "a.json")
        b = write_config(tmp_path, harness.preset("fig1a"), "b.json")
        code, _, err = run_cli(["compare", "--configs", a, b, "--epsilon", "1e-8",
                                "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "sharing" in err

    def test_divergent_member_reported(self, tmp_path, capsys):
        a = write_config(tmp_path, harness.preset("fig1a"), "a.json")
        b = write_config(tmp_path, harness.preset("fig1a", "nesterov"), "b.json")
        code, out, _ = run_cli(["compare", "--configs", a, b, "--epsilon", "1e-6",
                                "--out", str(tmp_path)], capsys)
        assert code == 0
        lines = [parse_summary(l) for l in out.strip().splitlines()]
        assert lines[1]["iterations_to_epsilon"] == "diverged"
        assert lines[2]["winner"] == "fig1a-ht"


class TestGradcheck:
    @pytest.mark.parametrize("family", ["quadratic-regression", "logsumexp", "regularized"])
    def test_families_pass(self, family, capsys):
        code, out, _ = run_cli(["gradcheck", "--family", family,
                                "--samples", "100", "--seed", "1"], capsys)
        assert code == 0
        summary = parse_summary(out.strip())
        assert float(summary["max_rel_error"]) < 1e-6

    def test_unknown_family(self, capsys):
        code, _, err = run_cli(["gradcheck", "--family", "bogus"], capsys)
        assert code == 2
        assert "unknown family" in err

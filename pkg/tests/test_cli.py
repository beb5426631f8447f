"""CLI behaviour: exit codes, file handling, determinism, end-to-end runs."""

import json
from pathlib import Path

import pytest

from pmx.cli import main

TL_SETTING = "CTR=partial,UC=absent,SLD=complete"


@pytest.fixture()
def tl(models_dir):
    return str(models_dir / "traffic_light.pmx")


class TestExitCodes:
    def test_missing_file(self, capsys):
        assert main(["analyze", "/nonexistent/m.pmx"]) == 2

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.pmx"
        bad.write_text("system ???")
        assert main(["analyze", str(bad)]) == 3

    def test_validation_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.pmx"
        bad.write_text("system S\ncomponent A {\n  port p: Nope\n}\n")
        assert main(["analyze", str(bad)]) == 3

    def test_bad_setting(self, tl, capsys):
        assert main(["analyze", tl, "--setting", "CTR=weird"]) == 2

    def test_mutate_percent_out_of_range(self, tl, capsys):
        assert main(["mutate", tl, "--percent", "95"]) == 2


class TestAnalyze:
    def test_json_output(self, tl, capsys):
        assert main(["analyze", tl, "--setting", TL_SETTING, "--format", "json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["P7"] == ["off", "on"]
        assert report["CTR"]["P10"] == ["t13"]


class TestRefine:
    def test_refine_writes_model_and_metadata(self, tl, tmp_path, capsys):
        out = tmp_path / "refined.pmx"
        meta = tmp_path / "meta.json"
        assert main(["refine", tl, "--setting", TL_SETTING,
                     "-o", str(out), "--metadata", str(meta)]) == 0
        assert "dbg_agent" in out.read_text()
        blob = json.loads(meta.read_text())
        assert blob["CTR"]["introduced_vars"] == ["__pmx_sel"]
        assert blob["CTR"]["org"]["t13"] == "t13"
        # the refined model is itself a valid input
        assert main(["analyze", str(out)]) == 0


class TestRunPipeline:
    def test_batch_run_with_generated_rules(self, tl, tmp_path, capsys):
        rules = tmp_path / "default.rules"
        assert main(["gen-rules", tl, "--setting", TL_SETTING, "-o", str(rules)]) == 0
        assert "select state off using t13" in rules.read_text()
        trace = tmp_path / "out.trace"
        assert main(["run", tl, "--setting", TL_SETTING, "--rules", str(rules),
                     "--seed", "1", "--max-vtime", "30", "--trace", str(trace)]) == 0
        lines = [json.loads(x) for x in trace.read_text().splitlines()]
        assert lines and all("rule" in r and "vtime" in r for r in lines)

    def test_same_seed_byte_identical_trace(self, tl, tmp_path, capsys):
        rules = tmp_path / "d.rules"
        main(["gen-rules", tl, "--setting", TL_SETTING, "-o", str(rules)])
        t1, t2 = tmp_path / "a.trace", tmp_path / "b.trace"
        for t in (t1, t2):
            assert main(["run", tl, "--setting", TL_SETTING, "--rules", str(rules),
                         "--seed", "7", "--max-vtime", "30", "--trace", str(t)]) == 0
        assert t1.read_bytes() == t2.read_bytes()

    def test_zero_step_budget(self, tl, tmp_path, capsys):
        trace = tmp_path / "empty.trace"
        assert main(["run", tl, "--setting", TL_SETTING, "--mode", "batch",
                     "--max-steps", "0", "--trace", str(trace)]) == 0
        assert trace.read_text().strip() == ""

    def test_headless_without_rules_fails(self, tl, capsys):
        assert main(["run", tl, "--setting", TL_SETTING, "--mode", "batch"]) == 1
        assert "no rule matched" in capsys.readouterr().err


class TestMutateCli:
    def test_deterministic_output(self, tl, tmp_path, capsys):
        a, b = tmp_path / "a.pmx", tmp_path / "b.pmx"
        assert main(["mutate", tl, "--percent", "50", "--seed", "7", "-o", str(a)]) == 0
        assert main(["mutate", tl, "--percent", "50", "--seed", "7", "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_percent_zero_identity(self, tl, tmp_path, capsys):
        out = tmp_path / "same.pmx"
        assert main(["mutate", tl, "--percent", "0", "-o", str(out)]) == 0
        from pmx.parser import parse_model_file
        from pmx.printer import serialize_model
        assert serialize_model(parse_model_file(tl)) == out.read_text()


class TestVerifyCli:
    def test_progress_pass(self, tl, capsys):
        assert main(["verify", tl, "--setting", "CTR=partial,UC=partial,SLD=partial",
                     "--check", "progress", "--format", "json"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["ok"] is True

    def test_simulation_pass(self, tl, capsys):
        assert main(["verify", tl, "--setting", TL_SETTING,
                     "--check", "simulation", "--depth", "3"]) == 0

    def test_reach_pass_refined(self, tl, capsys):
        assert main(["verify", tl, "--setting", TL_SETTING, "--check", "reach",
                     "--component", "CTR", "--max-states", "12"]) == 0

    def test_apply_rule_cli(self, tl, tmp_path, capsys):
        rules = tmp_path / "d.rules"
        main(["gen-rules", tl, "--setting", TL_SETTING, "-o", str(rules)])
        name = next(line.split()[1] for line in rules.read_text().splitlines()
                    if "state off" in line and "timeout" in line)
        out = tmp_path / "fixed.pmx"
        assert main(["apply-rule", tl, "--rules", str(rules), "--rule", name,
                     "--component", "CTR", "--setting", TL_SETTING, "-o", str(out)]) == 0
        capsys.readouterr()
        assert main(["analyze", str(out), "--setting", TL_SETTING, "--format", "json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert "t13" not in report["CTR"]["P10"]

    def test_apply_multi_option_rule_fails(self, tl, tmp_path, capsys):
        rules = tmp_path / "d.rules"
        main(["gen-rules", tl, "--setting", TL_SETTING, "-o", str(rules)])
        name = next(line.split()[1] for line in rules.read_text().splitlines()
                    if "state green" in line)
        assert main(["apply-rule", tl, "--rules", str(rules), "--rule", name,
                     "--component", "CTR"]) == 1
        assert "MultiStateSelection" in capsys.readouterr().err


class TestBenchCli:
    def test_small_bench_reports_every_measure(self, capsys):
        assert main(["bench", "--states", "40", "--transitions", "60",
                     "--repeats", "3", "--format", "json"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["analysis_ms"]["median"] >= 0
        assert body["refine_ms"]["median"] >= 0
        assert set(body["rule_loading_ms"]) == {"10", "100", "1000", "10000"}
        assert body["selection_ms_median"] < 1.0

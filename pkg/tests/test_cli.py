from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

import helpers
from workteam.cli import main
from workteam.workflow import parse_workflow, serialize_workflow

GOLDEN = helpers.golden_session_fixture()
CONFIG = str(helpers.CASESTUDY / "config.json")
ECHO_CONFIG = str(helpers.FIXTURES / "echo_config.json")


@pytest.fixture()
def runner():
    return CliRunner()


class TestRegistryValidate:
    def test_fixture_registry_ok(self, runner):
        result = runner.invoke(main, ["registry", "validate", "--config", CONFIG])
        assert result.exit_code == 0, result.output
        assert "ok: 10 components" in result.output

    def test_explicit_paths(self, runner):
        result = runner.invoke(
            main,
            [
                "registry", "validate",
                "--components", str(helpers.CASESTUDY / "components.json"),
                "--descriptions", str(helpers.CASESTUDY / "param_descriptions.json"),
                "--templates", str(helpers.CASESTUDY / "blank_templates.json"),
            ],
        )
        assert result.exit_code == 0

    def test_broken_registry_fails(self, runner, tmp_path):
        comp = tmp_path / "c.json"
        comp.write_text('[{"name": "a", "description": "d"}]')
        empty = tmp_path / "e.json"
        empty.write_text("[]")
        result = runner.invoke(
            main,
            [
                "registry", "validate",
                "--components", str(comp),
                "--descriptions", str(empty),
                "--templates", str(empty),
            ],
        )
        assert result.exit_code == 1
        assert "error" in result.output


class TestRun:
    def test_golden_instruction_prints_workflow(self, runner):
        result = runner.invoke(
            main, ["run", "--config", CONFIG, "--instruction", GOLDEN["instruction"]]
        )
        assert result.exit_code == 0, result.output
        expected = serialize_workflow(parse_workflow(helpers.golden_workflow_text()))
        assert result.output.strip() == expected

    def test_json_output(self, runner):
        result = runner.invoke(
            main,
            ["run", "--config", CONFIG, "--instruction", GOLDEN["instruction"], "--json"],
        )
        assert result.exit_code == 0
        body = json.loads(result.output)
        assert [e["actor"] for e in body["transcript"]] == GOLDEN["actors"]
        assert "correct" in body["reply"]

    def test_failure_exit_code(self, runner, tmp_path):
        bad = tmp_path / "script.json"
        bad.write_text(json.dumps([{"agent": "supervisor", "turn": 0, "response": "junk"}]))
        config = json.loads((helpers.CASESTUDY / "config.json").read_text())
        for role in config["backends"].values():
            role["script_path"] = str(bad)
        config_path = tmp_path / "config.json"
        config["registry"] = {
            "components": str(helpers.CASESTUDY / "components.json"),
            "descriptions": str(helpers.CASESTUDY / "param_descriptions.json"),
            "templates": str(helpers.CASESTUDY / "blank_templates.json"),
        }
        config_path.write_text(json.dumps(config))
        result = runner.invoke(main, ["run", "--config", str(config_path), "--instruction", "x"])
        assert result.exit_code == 1
        assert "error" in result.output


class TestDatasetGen:
    def test_deterministic_output(self, runner, tmp_path):
        args = [
            "dataset", "gen", "--seed", "1", "--n-creation", "5", "--n-modification", "3",
            "--config", CONFIG,
        ]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert runner.invoke(main, args + ["--out", str(a)]).exit_code == 0
        assert runner.invoke(main, args + ["--out", str(b)]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().strip().splitlines()) == 8


class TestEval:
    @pytest.fixture()
    def dataset(self, runner, tmp_path):
        out = tmp_path / "synth.jsonl"
        result = runner.invoke(
            main,
            [
                "dataset", "gen", "--seed", "7", "--n-creation", "4", "--n-modification", "2",
                "--config", ECHO_CONFIG, "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        return str(out)

    def test_workteam_echo_perfect(self, runner, dataset):
        result = runner.invoke(
            main,
            ["eval", "--dataset", dataset, "--system", "workteam", "--config", ECHO_CONFIG, "--json"],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["emr"] == 1.0 and report["n_total"] == 6

    def test_single_llm_echo_perfect(self, runner, dataset):
        result = runner.invoke(
            main,
            ["eval", "--dataset", dataset, "--system", "single_llm", "--config", ECHO_CONFIG, "--json"],
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["emr"] == 1.0

    def test_rag_echo_perfect(self, runner, dataset):
        result = runner.invoke(
            main,
            ["eval", "--dataset", dataset, "--system", "rag", "--config", ECHO_CONFIG, "--json"],
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["emr"] == 1.0

    def test_table_output(self, runner, dataset):
        result = runner.invoke(
            main, ["eval", "--dataset", dataset, "--system", "workteam", "--config", ECHO_CONFIG]
        )
        assert result.exit_code == 0
        assert "EMR (%)" in result.output and "100.0" in result.output


class TestRepl:
    def test_golden_round_then_exit(self, runner):
        result = runner.invoke(
            main,
            ["repl", "--config", CONFIG],
            input=GOLDEN["instruction"] + "\nexit\n",
        )
        assert result.exit_code == 0, result.output
        assert '"task":"public-email"' in result.output

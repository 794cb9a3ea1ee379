import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from scirerank.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workspace(tmp_path, runner):
    """A generated fixture corpus plus a mock-backend config pointing at it."""
    data = tmp_path / "data"
    result = runner.invoke(
        main, ["make-fixture", str(data), "--docs", "30", "--queries", "5"]
    )
    assert result.exit_code == 0, result.output
    config = {
        "corpus": str(data / "corpus.jsonl"),
        "queries": str(data / "queries.jsonl"),
        "qrels": str(data / "qrels.txt"),
        "output_dir": str(tmp_path / "out"),
        "first_stage_m": 30,
        "backend": {"mode": "mock", "parallelism": 2},
        "rerank": {"coarse_m": 30, "fine_k": 5, "vanilla_m": 20,
                   "sliding_total": 30, "window": 10, "step": 5},
        "price_per_million": 0.4,
    }
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump(config))
    return tmp_path, config_path


def test_make_fixture_writes_three_files(tmp_path, runner):
    result = runner.invoke(main, ["make-fixture", str(tmp_path / "fx")])
    assert result.exit_code == 0
    for name in ("corpus.jsonl", "queries.jsonl", "qrels.txt"):
        assert (tmp_path / "fx" / name).exists()


def test_extract_rerank_eval_round_trip(workspace, runner):
    tmp_path, config_path = workspace

    result = runner.invoke(main, ["extract", "-c", str(config_path)])
    assert result.exit_code == 0, result.output
    assert "30 extracted, 0 skipped, 0 failed" in result.output
    assert (tmp_path / "out" / "features.jsonl").exists()

    result = runner.invoke(
        main, ["rerank", "-c", str(config_path), "--strategy", "corank"]
    )
    assert result.exit_code == 0, result.output
    run_path = tmp_path / "out" / "run_corank.txt"
    assert run_path.exists()
    assert (tmp_path / "out" / "run_corank.tokens.json").exists()

    result = runner.invoke(main, ["eval", "-c", str(config_path), str(run_path)])
    assert result.exit_code == 0, result.output
    assert "ndcg@10" in result.output
    assert run_path.with_suffix(".metrics.jsonl").exists()


def test_extract_rerun_skips_everything(workspace, runner):
    _, config_path = workspace
    assert runner.invoke(main, ["extract", "-c", str(config_path)]).exit_code == 0
    rerun = runner.invoke(main, ["extract", "-c", str(config_path)])
    assert rerun.exit_code == 0
    assert "0 extracted, 30 skipped, 0 failed" in rerun.output


def test_missing_corpus_path_fails_with_path_in_message(tmp_path, runner):
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump({
        "corpus": str(tmp_path / "nowhere.jsonl"),
        "queries": str(tmp_path / "nowhere.jsonl"),
        "qrels": str(tmp_path / "nowhere.txt"),
    }))
    result = runner.invoke(main, ["extract", "-c", str(config_path)])
    assert result.exit_code != 0
    assert "nowhere" in result.output


def test_rerank_determinism_byte_identical(workspace, runner):
    tmp_path, config_path = workspace
    assert runner.invoke(main, ["extract", "-c", str(config_path)]).exit_code == 0

    def run_once():
        result = runner.invoke(
            main, ["rerank", "-c", str(config_path), "--strategy", "corank"]
        )
        assert result.exit_code == 0, result.output
        return (tmp_path / "out" / "run_corank.txt").read_bytes()

    assert run_once() == run_once()


def test_eval_comparison_table_for_multiple_runs(workspace, runner):
    tmp_path, config_path = workspace
    assert runner.invoke(main, ["extract", "-c", str(config_path)]).exit_code == 0
    for strategy in ("vanilla", "corank"):
        result = runner.invoke(
            main, ["rerank", "-c", str(config_path), "--strategy", strategy]
        )
        assert result.exit_code == 0, result.output
    result = runner.invoke(main, [
        "eval", "-c", str(config_path),
        str(tmp_path / "out" / "run_vanilla.txt"),
        str(tmp_path / "out" / "run_corank.txt"),
    ])
    assert result.exit_code == 0, result.output
    assert "vanilla" in result.output and "corank" in result.output
    assert "$" in result.output


def test_token_stats_lists_all_forms(workspace, runner):
    _, config_path = workspace
    assert runner.invoke(main, ["extract", "-c", str(config_path)]).exit_code == 0
    result = runner.invoke(main, ["token-stats", "-c", str(config_path)])
    assert result.exit_code == 0, result.output
    for name in ("full_text", "form_1", "form_2", "form_3", "form_4"):
        assert name in result.output


def test_token_stats_without_features_fails(workspace, runner):
    _, config_path = workspace
    result = runner.invoke(main, ["token-stats", "-c", str(config_path)])
    assert result.exit_code != 0


def test_cost_report_command(runner):
    result = runner.invoke(
        main, ["cost-report", "--tokens", "29610000", "--price", "0.1"]
    )
    assert result.exit_code == 0
    assert result.output.strip() == "$2.96"


def test_token_sidecar_total_matches_stage_sum(workspace, runner):
    tmp_path, config_path = workspace
    assert runner.invoke(main, ["extract", "-c", str(config_path)]).exit_code == 0
    result = runner.invoke(
        main, ["rerank", "-c", str(config_path), "--strategy", "corank"]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(
        (tmp_path / "out" / "run_corank.tokens.json").read_text()
    )
    stage_sum = sum(
        prompt + completion
        for prompt, completion in payload["per_stage"].values()
    )
    assert payload["total_tokens"] == stage_sum > 0

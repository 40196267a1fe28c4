"""CLI behavior: exit codes, JSON output, artifact determinism."""

import hashlib
import json

import pytest
from click.testing import CliRunner

from thyrolens.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, tiny_csv, runner):
    out = tmp_path_factory.mktemp("model") / "model.json"
    res = runner.invoke(main, ["train", "--data", str(tiny_csv), "--out",
                               str(out), "--seed", "3", "--json"])
    assert res.exit_code == 0, res.output
    return out


def test_ingest_report(runner, tiny_csv):
    res = runner.invoke(main, ["ingest", "--data", str(tiny_csv), "--json"])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["rows_kept"] == 250
    assert doc["class_counts"] == [150, 60, 40]


def test_train_reports_metrics(runner, tiny_csv, tmp_path):
    out = tmp_path / "m.json"
    res = runner.invoke(main, ["train", "--data", str(tiny_csv), "--out",
                               str(out), "--seed", "1", "--json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert doc["evaluation"]["accuracy"] >= 0.8
    assert out.exists()


def test_train_kfold_table(runner, tiny_csv, tmp_path):
    out = tmp_path / "m.json"
    res = runner.invoke(main, ["train", "--data", str(tiny_csv), "--out",
                               str(out), "--kfold", "3", "--seed", "1", "--json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert len(doc["cross_validation"]["folds"]) == 3


def test_train_empty_dataset_exits_1(runner, tmp_path):
    from thyrolens.schema import FEATURE_NAMES
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(list(FEATURE_NAMES) + ["diagnosis"]) + "\n")
    out = tmp_path / "m.json"
    res = runner.invoke(main, ["train", "--data", str(empty), "--out", str(out)])
    assert res.exit_code == 1
    assert "empty dataset" in res.output


def test_train_artifact_deterministic(runner, tiny_csv, tmp_path):
    digests = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        res = runner.invoke(main, ["train", "--data", str(tiny_csv), "--out",
                                   str(out), "--seed", "5"])
        assert res.exit_code == 0
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_evaluate(runner, tiny_csv, model_path):
    res = runner.invoke(main, ["evaluate", "--model", str(model_path),
                               "--data", str(tiny_csv), "--json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert 0.0 <= doc["accuracy"] <= 1.0


def test_explain_json_and_tables(runner, tiny_csv, model_path):
    args = ["explain", "--model", str(model_path), "--data", str(tiny_csv),
            "--record-id", "r0", "--hypothesis", "negative",
            "--n-cf", "1", "--n-sc", "1", "--seed", "9"]
    res = runner.invoke(main, args + ["--json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert doc["hypothesis_name"] == "Negative"
    assert set(doc["counterexamples"]) == {"1", "2"}

    human = runner.invoke(main, args)
    assert human.exit_code == 0
    assert "record r0" in human.output
    assert "counterexamples toward" in human.output


def test_explain_importance_render(runner, tiny_csv, model_path):
    res = runner.invoke(main, ["explain", "--model", str(model_path),
                               "--data", str(tiny_csv), "--record-id", "r0",
                               "--hypothesis", "0", "--n-cf", "0", "--n-sc", "0",
                               "--importance", "--seed", "4"])
    assert res.exit_code == 0, res.output
    assert "feature importance" in res.output


def test_explain_unknown_record_exits_1(runner, tiny_csv, model_path):
    res = runner.invoke(main, ["explain", "--model", str(model_path),
                               "--data", str(tiny_csv), "--record-id", "ghost",
                               "--hypothesis", "0"])
    assert res.exit_code == 1
    assert "record not found" in res.output


def test_explain_count_bound_usage_error(runner, tiny_csv, model_path):
    res = runner.invoke(main, ["explain", "--model", str(model_path),
                               "--data", str(tiny_csv), "--record-id", "r0",
                               "--hypothesis", "0", "--n-cf", "11"])
    assert res.exit_code == 2


def test_unknown_subcommand_usage_error(runner):
    res = runner.invoke(main, ["transmogrify"])
    assert res.exit_code == 2


def test_unknown_flag_usage_error(runner, tiny_csv):
    res = runner.invoke(main, ["ingest", "--data", str(tiny_csv), "--frobnicate"])
    assert res.exit_code == 2


def test_cli_explain_matches_service(runner, tiny_csv, model_path, schema):
    """The CLI and the HTTP endpoint are one code path for the same seed."""
    from fastapi.testclient import TestClient

    from thyrolens import compute_stats, ingest_csv, load_model
    from thyrolens.service import create_app

    res = runner.invoke(main, ["explain", "--model", str(model_path),
                               "--data", str(tiny_csv), "--record-id", "r1",
                               "--hypothesis", "1", "--n-cf", "1", "--n-sc", "1",
                               "--seed", "21", "--json"])
    assert res.exit_code == 0, res.output
    cli_doc = json.loads(res.output)

    data = ingest_csv(tiny_csv, schema)
    app = create_app(load_model(model_path), data, compute_stats(data))
    with TestClient(app) as client:
        http_doc = client.post("/explain", json={
            "hypothesis": 1, "record_id": "r1", "seed": 21,
            "n_counterexamples_per_class": 1, "n_similar_cases": 1}).json()
    cli_doc["provenance"].pop("timing_ms")
    http_doc["provenance"].pop("timing_ms")
    assert cli_doc == http_doc


def test_oracle_check_passes(runner):
    res = runner.invoke(main, ["oracle-check", "--toy", "tsh_step",
                               "--seeds", "11", "--json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert doc["ok"] and all(r["ok"] for r in doc["results"])


def test_oracle_check_broken_config_fails(runner):
    res = runner.invoke(main, ["oracle-check", "--toy", "tsh_step",
                               "--seeds", "11", "--generations", "0"])
    assert res.exit_code == 1
    assert "FAIL" in res.output


def test_oracle_check_unknown_toy(runner):
    res = runner.invoke(main, ["oracle-check", "--toy", "nope"])
    assert res.exit_code == 1

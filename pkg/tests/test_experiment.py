import json
from pathlib import Path

import numpy as np
import pytest

from v2vbeam import experiment, metrics
from v2vbeam.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TINY = {
    "name": "tiny", "seed": 3,
    "scenarios": {"count": 5, "duration": 8.0},
    "identification": {"count": 2, "duration": 30.0, "num_samples": 120, "epochs": 5,
                       "hidden": [32, 32]},
    "beam": {"folds": 3, "split_modes": ["sequence", "scenario"], "hidden": 8, "epochs": 2},
}


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    return experiment.run_experiment(TINY, out), out


def test_smoke_config_emits_all_reports(tmp_path):
    res = experiment.run_experiment(CONFIGS / "smoke.json", tmp_path)
    assert res.report["status"] == "complete"
    for name in ("report.json", "report.txt", "predictions.csv", "identifier.json",
                 "manifest.jsonl", "folds_sequence.csv", "strata_sequence_beam_diff.csv",
                 "strata_sequence_rel_speed.csv", "strata_sequence_obj_count.csv",
                 "beam_sequence_fold0.json", "beam_sequence_fold4.json"):
        assert (tmp_path / name).exists(), name
    assert not (tmp_path / "INCOMPLETE").exists()


def test_identical_runs_give_identical_json(tiny_run, tmp_path):
    _, out = tiny_run
    experiment.run_experiment(TINY, tmp_path)
    assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_seed_changes_report(tiny_run):
    res, _ = tiny_run
    other = experiment.run_experiment(TINY, seed=4)
    assert experiment.report_json(other.report) != experiment.report_json(res.report)


def test_every_sequence_tested_once(tiny_run):
    res, _ = tiny_run
    for mode in ("sequence", "scenario"):
        recs = res.records[mode]
        assert len(recs) == res.report["tracking"]["sequences"]
        folds = res.report["beam"][mode]["folds"]
        assert sum(f["test_size"] for f in folds) == len(recs)


def test_scenario_folds_are_scenario_disjoint(tiny_run):
    res, _ = tiny_run
    fold_of = {}
    for r in res.records["scenario"]:
        assert fold_of.setdefault(r["scenario_id"], r["fold"]) == r["fold"]


def test_summary_matches_prediction_dump(tiny_run):
    res, out = tiny_run
    for mode in ("sequence", "scenario"):
        recs = experiment.read_predictions(out / "predictions.csv", mode)
        summary = res.report["beam"][mode]
        labels = [r["label"] for r in recs]
        assert abs(metrics.top_k_accuracy([r["top5"] for r in recs], labels, 5)
                   - summary["pooled_top5"]) <= 1e-12
        for f in summary["folds"]:
            sub = [r for r in recs if r["fold"] == f["fold"]]
            acc = metrics.top_k_accuracy([r["top5"] for r in sub], [r["label"] for r in sub], 1)
            assert abs(acc - f["top1"]) <= 1e-12
            pers = metrics.top_k_accuracy([r["persist_top5"] for r in sub],
                                          [r["label"] for r in sub], 5)
            assert abs(pers - f["persistence_top5"]) <= 1e-12


def test_report_invariants(tiny_run):
    res, _ = tiny_run
    for summary in res.report["beam"].values():
        for rows in summary["strata"].values():
            assert sum(r["count"] for r in rows) <= res.report["tracking"]["sequences"]
            for r in rows:
                if r["count"]:
                    assert 0.0 <= r["top1"] <= r["top5"] <= 1.0
        assert sum(r["count"] for r in summary["strata"]["obj_count"]) == \
            res.report["tracking"]["sequences"]
        for f in summary["folds"]:
            assert f["top1"] <= f["top5"]


def test_stage_failure_is_tagged_and_marked(tmp_path):
    bad = json.loads(json.dumps(TINY))
    bad["identification"]["num_samples"] = 10**6
    with pytest.raises(experiment.StageError) as info:
        experiment.run_experiment(bad, tmp_path)
    assert info.value.stage == "train-identifier"
    assert (tmp_path / "INCOMPLETE").exists()
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["status"] == "incomplete" and doc["failed_stage"] == "train-identifier"


def test_config_validation():
    with pytest.raises(ConfigError):
        experiment.load_config({"scenarios": {"colour": 1}})
    with pytest.raises(ConfigError):
        experiment.load_config({"beam": {"split_modes": ["random"]}})
    with pytest.raises(ConfigError):
        experiment.load_config({"scenarios": {"detector": {"miss_prob": 2.0}}})
    cfg = experiment.load_config({}, seed=12)
    assert cfg["seed"] == 12 and cfg["beam"]["epochs"] == 200


@pytest.mark.parametrize("name", ["smoke.json", "benchmark.json", "identification.json"])
def test_bundled_configs_load(name):
    cfg = experiment.load_config(CONFIGS / name)
    assert cfg["name"] == Path(name).stem


def test_oracle_identification_mode():
    cfg = json.loads(json.dumps(TINY))
    cfg["tracking"] = {"oracle_identification": True}
    cfg["beam"]["split_modes"] = ["sequence"]
    res = experiment.run_experiment(cfg)
    assert res.report["tracking"]["identification_top1"] == 1.0
    assert np.isfinite(res.report["beam"]["sequence"]["mean_top5"])

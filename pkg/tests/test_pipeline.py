from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from rai_scoring.data import generate_synthetic, write_csv
from rai_scoring.errors import ConfigurationError
from rai_scoring.pipeline import RunConfig, rescore, run

NOW = datetime(2024, 1, 1, tzinfo=timezone.utc)


def tiny_config(**overrides) -> dict:
    doc = {
        "datasets": [{"synthetic": {"n_rows": 200, "seed": 3, "name": "tiny"}}],
        "models": [{"architecture": "mlp", "hidden_dims": [6]},
                   {"architecture": "tab_resnet", "hidden_dims": [1, 6]}],
        "seeds": [0],
        "train": {"max_epochs": 15, "patience": 4},
        "attack": {"n_batches": 10, "batch_size": 5, "clever_samples": 3},
        "shap": {"background_size": 8, "n_explain": 4, "n_subsets": 10},
    }
    doc.update(overrides)
    return doc


@pytest.fixture(scope="module")
def report():
    return run(RunConfig.from_dict(tiny_config(seeds=[0, 1]), env={}), now=NOW)


def test_smoke_run_scores_every_cell(report):
    assert report["failed_cells"] == 0
    assert [(c["dataset"], c["model"]) for c in report["cells"]] == [("tiny", "MLP"), ("tiny", "TabResNet")]
    for cell in report["cells"]:
        prof = cell["profile"]
        assert len(prof["per_metric"]) == 21
        assert all(0.0 <= m["normalized"] <= 1.0 for m in prof["per_metric"])
        assert 0.0 <= prof["responsibility_score"] <= 1.0
        assert set(prof["dimension_scores"]) == {"explainability", "fairness", "sustainability", "robustness"}
        assert len(cell["repeats"]) == 2 and [r["seed"] for r in cell["repeats"]] == [0, 1]
        assert len(cell["attributions"]["values"]) == 4
    meta = report["metadata"]
    assert meta["timestamp"] == NOW.isoformat() and meta["clock"] == "modeled"
    assert meta["weights"] == [0.25] * 4 and len(meta["config_hash"]) == 64


def test_report_is_plain_json(report):
    assert json.loads(json.dumps(report, allow_nan=False)) == report


def test_rescore_reproduces_report(report):
    again = rescore(report)
    for cell in report["cells"]:
        prof = again[(cell["dataset"], cell["model"])]
        assert prof.responsibility_score == pytest.approx(cell["profile"]["responsibility_score"], abs=1e-12)
        assert prof.dimension_scores == pytest.approx(cell["profile"]["dimension_scores"], abs=1e-12)


def test_rescore_with_other_weights(report):
    only_fair = rescore(report, weights=(0, 1, 0, 0))
    for cell in report["cells"]:
        key = (cell["dataset"], cell["model"])
        assert only_fair[key].responsibility_score == pytest.approx(cell["profile"]["dimension_scores"]["fairness"])


def test_failed_job_is_isolated_to_its_cell():
    doc = tiny_config(models=[{"architecture": "mlp", "hidden_dims": [6]},
                              {"architecture": "mlp", "name": "broken", "hidden_dims": [6],
                               "dropout_rates": [0.1, 0.2]}])
    rep = run(RunConfig.from_dict(doc, env={}), now=NOW)
    status = {c["model"]: c["status"] for c in rep["cells"]}
    assert status == {"MLP": "ok", "broken": "failed"}
    assert rep["failed_cells"] == 1
    assert "ConfigurationError" in next(c["error"] for c in rep["cells"] if c["model"] == "broken")


def test_unreadable_dataset_becomes_failed_cell(tmp_path):
    ds = generate_synthetic(n_rows=20, seed=1, name="on_disk")
    (tmp_path / "s.json").write_text(json.dumps(ds.schema.to_dict()))
    doc = tiny_config(models=[{"architecture": "mlp", "hidden_dims": [4]}])
    doc["datasets"] = doc["datasets"] + [{"schema": "s.json", "csv": "missing.csv"}]
    rep = run(RunConfig.from_dict(doc, base_dir=tmp_path, env={}), now=NOW)
    assert [c["status"] for c in rep["cells"]] == ["ok", "failed"]
    assert rep["cells"][1]["model"] is None and rep["failed_cells"] == 1


def test_csv_dataset_paths_resolve_relative_to_config(tmp_path):
    ds = generate_synthetic(n_rows=120, seed=4, name="csvset")
    write_csv(ds, tmp_path / "d.csv")
    (tmp_path / "d.schema.json").write_text(json.dumps(ds.schema.to_dict()))
    doc = tiny_config(datasets=[{"schema": "d.schema.json", "csv": "d.csv"}],
                      models=[{"architecture": "mlp", "hidden_dims": [4]}])
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    cfg = RunConfig.from_json(tmp_path / "cfg.json", env={})
    assert cfg.datasets[0].csv == str(tmp_path / "d.csv")
    rep = run(cfg, now=NOW)
    assert rep["cells"][0]["dataset"] == "csvset" and rep["failed_cells"] == 0


@pytest.mark.parametrize("change,match", [
    ({"models": []}, "no models"),
    ({"datasets": []}, "no datasets"),
    ({"seeds": []}, "no seeds"),
    ({"train": {"epochs": 3}}, "unknown keys"),
    ({"pool_scope": "galactic"}, "pool_scope"),
    ({"clock": "sundial"}, "clock"),
    ({"weights": [1, 1, 1, 1]}, "weights"),
    ({"models": [{"architecture": "mlp"}, {"architecture": "mlp"}]}, "unique"),
    ({"split": {"test_fraction": 1.5}}, "test_fraction"),
])
def test_invalid_configs_rejected(change, match):
    with pytest.raises(ConfigurationError, match=match):
        RunConfig.from_dict(tiny_config(**change), env={})


def test_environment_overrides():
    cfg = RunConfig.from_dict(tiny_config(), env={"RAI_OUTPUT_DIR": "/tmp/elsewhere", "RAI_WORKERS": "3"})
    assert cfg.output_dir == "/tmp/elsewhere" and cfg.workers == 3


def test_seed_offset_and_fingerprint():
    cfg = RunConfig.from_dict(tiny_config(seeds=[0, 1]), env={})
    shifted = cfg.with_seed_offset(10)
    assert shifted.seeds == (10, 11)
    assert shifted.fingerprint() != cfg.fingerprint()
    assert RunConfig.from_dict(tiny_config(seeds=[0, 1]), env={}).fingerprint() == cfg.fingerprint()


def test_per_dataset_pools():
    doc = tiny_config(models=[{"architecture": "mlp", "hidden_dims": [4]},
                              {"architecture": "mlp", "name": "wide", "hidden_dims": [12]}],
                      pool_scope="per_dataset")
    doc["datasets"] = doc["datasets"] + [{"synthetic": {"n_rows": 150, "seed": 9, "name": "other"}}]
    rep = run(RunConfig.from_dict(doc, env={}), now=NOW)
    for name in ("tiny", "other"):
        wide = next(c for c in rep["cells"] if c["dataset"] == name and c["model"] == "wide")
        flops = next(m for m in wide["profile"]["per_metric"] if m["name"] == "flops")
        assert flops["normalized"] == 0.0  # largest model in its own pool


@pytest.mark.parametrize("name", ["synthetic.json", "uci.json"])
def test_shipped_configs_parse(name):
    path = Path(__file__).resolve().parents[1] / "configs" / name
    cfg = RunConfig.from_json(path, env={})
    assert [m.label for m in cfg.models] == ["MLP", "TabResNet"]

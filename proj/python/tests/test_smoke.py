import json

import numpy as np
import pytest

import tumorscope as ts


def test_shape_trace_matches_model_design_table():
    rows = ts.shape_trace("original", 240)
    assert [r[1] for r in rows][:2] == [[16, 238, 238], [16, 119, 119]]
    assert rows[8][1] == [2048]
    assert sum(r[2] for r in rows) == 17_072_929
    with pytest.raises(ts.ShapeError):
        ts.shape_trace("improved", 120)


def test_metrics_on_confusion_fixture():
    m = ts.prf1(tp=2353, fp=96, fn=376, tn=2633)
    assert m["precision"] == pytest.approx(0.9608, abs=5e-4)
    assert m["recall"] == pytest.approx(0.8622, abs=5e-4)
    assert m["f1"] == pytest.approx(0.9088, abs=5e-4)
    assert ts.roc_auc([0.9, 0.1, 0.8, 0.3], [1, 0, 0, 1]) == pytest.approx(0.75)
    rep = ts.evaluate_scores([1, 0, 1, 0], [0.9, 0.2, 0.4, 0.6])
    assert rep["confusion"] == {"tp": 1, "fp": 1, "fn": 1, "tn": 1}
    assert rep["misclassification"] is None


def test_explainers_on_untrained_model():
    model = ts.Model.build(input_side=120, hidden_units=16, seed=3)
    rng = np.random.default_rng(0)
    image = rng.random((120, 120), dtype=np.float32)
    p = model.predict(image)
    assert 0.0 < p < 1.0
    heat = ts.grad_cam(model, image)
    assert heat.shape == (120, 120)
    assert heat.min() >= 0.0 and heat.max() <= 1.0
    rel, drift = ts.lrp(model, image)
    assert rel.shape == (120, 120)
    assert drift < 1e-3
    shap = ts.kernel_shap(model, image, grid=2)
    assert shap["exact"]
    assert shap["base_value"] + sum(shap["values"]) == pytest.approx(p, abs=1e-6)
    with pytest.raises(ts.ShapeError):
        model.predict(np.zeros((64, 64), dtype=np.float32))


def test_pipeline_end_to_end(tmp_path):
    ids = ts.synth(tmp_path / "vols", subjects=6, tumour_rate=1.0, size=40, seed=5)
    assert len(ids) == 6
    vol = ts.read_nifti(tmp_path / "vols" / f"{ids[0]}.nii")
    assert vol.shape == (40, 40, 40)

    stats = ts.preprocess(tmp_path / "vols" / "volumes.json", tmp_path / "data",
                          config={"data": {"target_side": 120, "seed": 5}})
    assert stats["train"] > 0 and stats["test"] > 0

    cfg = {"model": {"hidden_units": 16}, "train": {"epochs": 1, "seed": 2},
           "explain": {"grid_rows": 2, "grid_cols": 2}}
    history = ts.train(tmp_path / "data", tmp_path / "run", config=cfg)
    assert [h["epoch"] for h in history] == [1]
    assert (tmp_path / "run" / "history.csv").exists()

    rep = ts.evaluate(tmp_path / "data", tmp_path / "run" / "last.tscp")
    assert 0.0 <= rep["auc"] <= 1.0

    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    first = next(r for r in manifest["records"] if r["split"] == "test")
    out = ts.explain(tmp_path / "run" / "last.tscp", tmp_path / "data" / first["file"],
                     tmp_path / "ex", config=cfg)
    assert out["ppm"].name.endswith("_combined.ppm")
    assert ts.read_ppm(out["ppm"]).shape == (2 * (120 + 11) + 4, 244, 3)
    assert ts.read_slice(tmp_path / "data" / first["file"]).shape == (120, 120)

    audit = ts.report(tmp_path / "data", tmp_path / "run" / "last.tscp", tmp_path / "audit", config=cfg)
    c = audit["report"]["confusion"]
    assert len(audit["composites"]) == c["fp"] + c["fn"]


def test_unknown_config_key_rejected(tmp_path):
    with pytest.raises(ts.ConfigError):
        ts.preprocess(tmp_path / "missing.json", tmp_path / "out", config={"data": {"resize": 200}})

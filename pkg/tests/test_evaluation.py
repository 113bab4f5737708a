import json
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from foldsim.evaluation import (
    MatchResult, MetricReport, Table, aggregate, binary_iou, improvement, load_manifest, load_reports,
    match_instances, recorded_results, render_overlay, write_report,
)
from foldsim.evaluation.evaluate import evaluate
from foldsim.evaluation.metrics import format_number
from foldsim.manifest import ManifestError, dataset_presets

masks = arrays(np.uint8, (6, 6), elements=st.integers(0, 1))


# --- binary IoU -------------------------------------------------------------

def test_iou_hand_cases():
    sq = np.ones((4, 4), np.uint8)
    assert binary_iou(sq, sq) == 1.0
    a, b = np.zeros((4, 4), np.uint8), np.zeros((4, 4), np.uint8)
    a[:2], b[2:] = 1, 1
    assert binary_iou(a, b) == 0.0
    left, top = np.zeros((4, 4), np.uint8), np.zeros((4, 4), np.uint8)
    left[:, :2], top[:2] = 1, 1
    assert binary_iou(left, top) == 4 / 12 == 1 / 3
    assert binary_iou(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0


def test_iou_errors():
    with pytest.raises(ValueError):
        binary_iou(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        binary_iou(np.full((2, 2), 2), np.zeros((2, 2)))


@settings(max_examples=200, deadline=None)
@given(masks, masks, st.integers(0, 35))
def test_iou_symmetric_bounded_monotone(a, b, k):
    v = binary_iou(a, b)
    assert v == binary_iou(b, a) and 0.0 <= v <= 1.0
    i = np.unravel_index(k, a.shape)
    grown = a.copy()
    grown[i] = 1
    if b[i]:
        assert binary_iou(grown, b) >= v
    else:
        assert binary_iou(grown, b) <= v


# --- aggregation ------------------------------------------------------------

def test_aggregate_hand_cases():
    assert str(aggregate([0.5, 0.5, 0.5])) == "50.0 ± 0.0"
    agg = aggregate([0.0, 1.0])
    assert (agg.mean, agg.std) == (50.0, 50.0)
    assert str(agg) == "50.0 ± 50.0"
    with pytest.raises(ValueError):
        aggregate([])


def test_number_format():
    assert format_number(44.3) == "44.3"
    assert format_number(11.47) == "11.47"
    assert format_number(50) == "50.0"
    assert f"{format_number(44.3)} ± {format_number(11.47)}" == "44.3 ± 11.47"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_report_recomputes(values):
    r = MetricReport.from_per_frame(values, model="m", train_sets=["Sim"], eval_set="EM")
    assert abs(r.mean - np.mean(values) * 100) <= 1e-9
    assert abs(r.std - np.std(values) * 100) <= 1e-9


def test_inconsistent_report_rejected():
    with pytest.raises(ValueError):
        MetricReport(model="m", train_sets=["Sim"], eval_set="EM", mean=10.0, std=0.0, per_frame=[0.5])


# --- instance matching ------------------------------------------------------

def test_identical_instances_match():
    gt = np.zeros((8, 8), int)
    gt[:3, :3], gt[5:, 5:] = 1, 2
    res = match_instances(gt, gt)
    assert sorted(res.matches) == [(1, 1, 1.0), (2, 2, 1.0)]
    assert res.unmatched_pred == [] and res.unmatched_gt == []


def test_threshold_semantics():
    gt, pred = np.zeros((1, 5), int), np.zeros((1, 5), int)
    gt[0, :], pred[0, :3] = 1, 1  # IoU 3 / 5 = 0.6
    assert match_instances(pred, gt, 0.5).matches == [(1, 1, 0.6)]
    res = match_instances(pred, gt, 0.7)
    assert res.matches == [] and res.unmatched_pred == [1] and res.unmatched_gt == [1]


def test_greedy_against_exhaustive():
    rng = np.random.default_rng(2024)
    for trial in range(500):
        gt, pred = oracles.random_instances(rng), oracles.random_instances(rng)
        tau = float(rng.choice([0.1, 0.3, 0.5, 0.7]))
        res = match_instances(pred, gt, tau)
        ids_p, ids_g = [p for p, _, _ in res.matches], [g for _, g, _ in res.matches]
        assert len(set(ids_p)) == len(ids_p) and len(set(ids_g)) == len(ids_g)
        assert all(v >= tau for _, _, v in res.matches)
        iou = np.zeros((pred.max(), gt.max()))
        for p in range(1, pred.max() + 1):
            for g in range(1, gt.max() + 1):
                iou[p - 1, g - 1] = np.sum((pred == p) & (gt == g)) / np.sum((pred == p) | (gt == g))
        best, optimal = oracles.best_assignment(iou, tau) if iou.size else (0.0, [frozenset()])
        got = frozenset((p - 1, g - 1) for p, g in res.pairs())
        assert res.total_iou >= 0.5 * best - 1e-12
        if tau >= 0.5:
            assert abs(res.total_iou - best) <= 1e-12
        if abs(res.total_iou - best) <= 1e-12:
            assert got in optimal
        assert res.pairs() == oracles.greedy_reference(pred, gt, tau)
        assert match_instances(pred, gt, tau).matches == res.matches


# --- overlay ----------------------------------------------------------------

def _img():
    return np.full((8, 8, 3), 0.3)


def test_overlay_no_predictions_is_identity():
    img = _img()
    out = render_overlay(img, np.zeros((8, 8), int), MatchResult())
    assert np.array_equal(out, img)


def test_overlay_white_region_is_unmatched_set():
    gt = np.zeros((8, 8), int)
    pred = np.zeros((8, 8), int)
    gt[:3, :3] = 1
    pred[:3, :3] = 1
    pred[5:, 5:] = 2
    res = match_instances(pred, gt)
    out = render_overlay(_img(), pred, res)
    white = np.all(out == 1.0, axis=-1)
    assert np.array_equal(white, pred == 2)
    assert len(res.unmatched_pred) == 1
    res_all = match_instances(gt, gt)
    assert not np.all(render_overlay(_img(), gt, res_all) == 1.0, axis=-1).any()


# --- reports ----------------------------------------------------------------

def test_recorded_table_cells():
    table = Table(recorded_results())
    assert table.columns == ["Sim-Aug", "EM"]
    assert table.cell("FoldIt", "EM & FI-VC", "N.A.", "EM") == "32.64 ± 10.26"
    assert table.cell("EndoFM-TU", "Sim-Aug", "Ours", "Sim-Aug") == "48.9 ± 9.62"
    assert table.cell("EndoFM-TU", "Sim-Aug & Sim", "Ours", "EM") == "44.3 ± 11.47"
    assert table.cell("FoldIt", "FI-OC & FI-VC", "N.A.", "Sim-Aug") == "36.50 ± 11.19"
    assert improvement(recorded_results()) == Decimal("11.66")


def test_report_outputs(tmp_path):
    run = MetricReport.from_per_frame([0.4, 0.6], model="EndoFM-TU", train_sets=["Sim"], eval_set="toy")
    paths = write_report([run], tmp_path / "table")
    rows = paths["csv"].read_text().splitlines()
    assert len(rows) == 2 and rows[1].endswith("50.0 ± 10.0")
    data = json.loads(paths["json"].read_text())
    assert data["rows"][0]["toy"] == "50.0 ± 10.0"
    assert "50.0 ± 10.0" in paths["txt"].read_text()
    run.save(tmp_path / "m.json")
    assert load_reports(tmp_path / "m.json")[0] == run


# --- manifests --------------------------------------------------------------

def test_presets():
    p = dataset_presets()
    assert p["Sim"].splits == {"train": 1400, "test": 500} and p["Sim"].annotations.depth
    assert p["EM"].splits["test"] == 100 and p["EM"].annotations.manual
    assert p["FI-OC"].splits == {"train": 1800} and p["FI-VC"].splits == {"train": 1800}
    assert p["Sim-Aug"].splits == {"train": 1400, "test": 500}


def test_manifest_missing_file_named(small_sim, tmp_path):
    data = json.loads((small_sim.base_dir / "manifest.json").read_text())
    data["frames"][1]["depth"] = "depth/gone.pfm"
    path = small_sim.base_dir / "broken.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ManifestError, match="gone.pfm"):
        load_manifest(path)
    data["frame_count"] = 99
    path.write_text(json.dumps(data))
    with pytest.raises(ManifestError, match="schema"):
        load_manifest(path, check_files=False)


# --- end to end scoring -----------------------------------------------------

def test_evaluate_ground_truth_against_itself(small_sim, tmp_path):
    report = evaluate(small_sim, small_sim, out_dir=tmp_path, model="oracle")
    assert report.per_frame == [1.0] * small_sim.frame_count
    assert report.cell() == "100.0 ± 0.0"
    matches = json.loads((tmp_path / "matches.json").read_text())
    assert all(not m["unmatched_pred"] for m in matches.values())
    assert len(list((tmp_path / "overlays").glob("*.png"))) == small_sim.frame_count
    assert load_reports(tmp_path / "metrics.json")[0].per_frame == report.per_frame

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from foldsim import cli
from foldsim.pipeline import (
    STAGES, ConfigError, ExperimentConfig, StageError, emit_figures, load_config, run_pipeline,
)
from foldsim.pipeline import stages as stage_mod
from foldsim.pipeline.figures import FigureError, paired_frames
from foldsim.pipeline.ledger import RunLedger
from foldsim.manifest import load_manifest
from foldsim.translate.train import read_loss_log

TINY = {
    "seed": 3,
    "gen-data": {"resolution": 16, "train_frames": 6, "test_frames": 3, "real_frames": 6},
    "train-translate": {"steps": 4, "weights": "1,10,0,1"},
    "train-seg": {"epochs": 2, "triples_per_batch": 4},
    "eval": {"sets": ["Sim", "Sim-Aug", "Real"]},
}


def write_config(path, data):
    path.write_text(json.dumps(data))
    return path


def _shuffled(obj, rng):
    if isinstance(obj, dict):
        items = list(obj.items())
        rng.shuffle(items)
        return {k: _shuffled(v, rng) for k, v in items}
    return obj


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_config_hash_ignores_key_order(seed):
    a = ExperimentConfig.model_validate(TINY)
    b = ExperimentConfig.model_validate(_shuffled(TINY, random.Random(seed)))
    assert a.config_hash() == b.config_hash()


def test_config_hash_changes_with_content():
    changed = json.loads(json.dumps(TINY))
    changed["train-seg"]["epochs"] = 3
    assert ExperimentConfig.model_validate(TINY).config_hash() != ExperimentConfig.model_validate(changed).config_hash()


def test_stage_hash_chains_upstream():
    cfg = ExperimentConfig.model_validate(TINY)
    assert cfg.stage_hash("translate", ["a"]) != cfg.stage_hash("translate", ["b"])


def test_unknown_field_is_named(tmp_path):
    bad = dict(TINY, **{"train-seg": {"epochz": 2}})
    with pytest.raises(ConfigError, match="epochz"):
        load_config(write_config(tmp_path / "c.json", bad))


def test_bad_weights_rejected(tmp_path):
    bad = dict(TINY, **{"train-translate": {"weights": "1,2"}})
    with pytest.raises(ConfigError, match="weights"):
        load_config(write_config(tmp_path / "c.json", bad))


def test_missing_mesh_fails_before_any_stage(tmp_path, capsys):
    root = tmp_path / "out"
    cfg = dict(TINY, output_root=str(root), **{"gen-data": {**TINY["gen-data"], "mesh": "no_such_mesh.obj"}})
    code = cli.main(["pipeline", "run", "--config", str(write_config(tmp_path / "c.json", cfg))])
    assert code == 1
    assert "gen-data.mesh" in capsys.readouterr().err
    assert not root.exists()


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    root = base / "run"
    cfg_path = write_config(base / "tiny.json", dict(TINY, output_root=str(root)))
    code = cli.main(["pipeline", "run", "--config", str(cfg_path)])
    assert code == 0
    return cfg_path, root


def test_cli_run_records_every_stage(tiny_run):
    _, root = tiny_run
    ledger = RunLedger.open(root / "ledger.json")
    assert [e["stage"] for e in ledger.entries[:6]] == list(STAGES)
    assert all(e["status"] == "completed" for e in ledger.entries[:6])
    seg = ledger.last_completed("train-seg")
    assert 0.0 <= seg["final_train_iou"] <= 1.0
    for e in ledger.entries[:6]:
        assert e["wall_time_s"] >= 0 and e["stage_hash"]
    assert ledger.config_hash == load_config(tiny_run[0]).config_hash()


def test_every_written_file_is_in_the_ledger(tiny_run):
    _, root = tiny_run
    ledger = RunLedger.open(root / "ledger.json")
    listed = set()
    for e in ledger.entries:
        listed |= set(e.get("files", []))
        listed |= set(e.get("outputs", {}).values())
    on_disk = {str(p.relative_to(root)) for p in root.rglob("*") if p.is_file()} - {"ledger.json"}
    assert on_disk <= listed


def test_figures(tiny_run, capsys):
    _, root = tiny_run
    assert cli.main(["pipeline", "figures", "--ledger", str(root / "ledger.json")]) == 0
    pngs = sorted((root / "figures").glob("*.png"))
    assert len(pngs) >= 3
    assert all(p.read_bytes()[:4] == b"\x89PNG" for p in pngs)
    ledger = RunLedger.open(root / "ledger.json")
    assert set(ledger.last_completed("figures")["files"]) == {str(p.relative_to(root)) for p in pngs}


def test_loss_log_covers_every_step(tiny_run):
    _, root = tiny_run
    ledger = RunLedger.open(root / "ledger.json")
    rows = read_loss_log(ledger.outputs("train-translate")["loss_log"])
    assert [r["step"] for r in rows] == list(range(1, TINY["train-translate"]["steps"] + 1))


def test_translation_pairs_share_ids(tiny_run):
    _, root = tiny_run
    ledger = RunLedger.open(root / "ledger.json")
    sim = load_manifest(ledger.outputs("gen-data")["sim_test"])
    aug = load_manifest(ledger.outputs("translate")["sim_aug_test"])
    aug.frames = list(reversed(aug.frames))
    pairs = paired_frames(sim, aug)
    assert [s.id for s, _ in pairs] == [r.id for r in sim.frames]
    assert all(s.id == t.id for s, t in pairs)


def test_figures_need_outputs(tmp_path):
    RunLedger(tmp_path / "ledger.json").save()
    with pytest.raises(FigureError, match="gen-data"):
        emit_figures(tmp_path / "ledger.json")
    assert cli.main(["pipeline", "figures", "--ledger", str(tmp_path / "missing.json")]) == 1


def test_resume_after_failure_at_stage_four(tmp_path, monkeypatch):
    cfg = load_config(write_config(tmp_path / "c.json", dict(TINY, output_root=str(tmp_path / "run"))))

    def boom(*args):
        raise RuntimeError("simulated crash")

    original = stage_mod.STAGE_FUNCS["train-seg"]
    monkeypatch.setitem(stage_mod.STAGE_FUNCS, "train-seg", boom)
    with pytest.raises(StageError, match="train-seg"):
        run_pipeline(cfg)
    ledger = RunLedger.open(tmp_path / "run" / "ledger.json")
    assert [(e["stage"], e["status"]) for e in ledger.entries] == [
        ("gen-data", "completed"), ("train-translate", "completed"), ("translate", "completed"),
        ("train-seg", "failed")]
    first = {e["stage"]: e["stage_hash"] for e in ledger.entries}

    monkeypatch.setitem(stage_mod.STAGE_FUNCS, "train-seg", original)
    ledger = run_pipeline(cfg, resume=True)
    second = ledger.entries[4:]
    assert [(e["stage"], e["status"]) for e in second] == [
        ("gen-data", "skipped"), ("train-translate", "skipped"), ("translate", "skipped"),
        ("train-seg", "completed"), ("eval", "completed"), ("report", "completed")]
    for e in second[:3]:
        assert e["stage_hash"] == first[e["stage"]]
        assert e["reason"] == "hash match"
    assert second[3]["stage_hash"] == first["train-seg"]


def test_changed_section_reruns_it_and_downstream(tmp_path):
    data = dict(TINY, output_root=str(tmp_path / "run"))
    run_pipeline(load_config(write_config(tmp_path / "c.json", data)))
    data["train-seg"] = {**TINY["train-seg"], "epochs": 1}
    ledger = run_pipeline(load_config(write_config(tmp_path / "c.json", data)), resume=True)
    assert [e["status"] for e in ledger.entries[6:]] == ["skipped"] * 3 + ["completed"] * 3


def test_resume_reruns_when_outputs_vanish(tmp_path):
    cfg = load_config(write_config(tmp_path / "c.json", dict(TINY, output_root=str(tmp_path / "run"))))
    ledger = run_pipeline(cfg)
    (tmp_path / "run" / ledger.last_completed("train-seg")["outputs"]["checkpoint"]).unlink()
    ledger = run_pipeline(cfg, resume=True)
    assert [e["status"] for e in ledger.entries[6:]] == ["skipped"] * 3 + ["completed"] * 3


def test_stage_failure_exit_code(tmp_path, monkeypatch):
    def boom(*args):
        raise RuntimeError("simulated crash")

    monkeypatch.setitem(stage_mod.STAGE_FUNCS, "gen-data", boom)
    cfg = write_config(tmp_path / "c.json", dict(TINY, output_root=str(tmp_path / "run")))
    assert cli.main(["pipeline", "run", "--config", str(cfg)]) == 2


def test_output_root_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FOLDSIM_OUTPUT_ROOT", str(tmp_path / "elsewhere"))
    monkeypatch.setenv("FOLDSIM_THREADS", "1")
    data = dict(TINY, output_root=str(tmp_path / "ignored"),
                **{"train-seg": {"enabled": False}, "eval": {"enabled": False}, "report": {"enabled": False}})
    cfg = write_config(tmp_path / "c.json", data)
    assert cli.main(["pipeline", "run", "--config", str(cfg)]) == 0
    ledger = RunLedger.open(tmp_path / "elsewhere" / "ledger.json")
    assert [e["status"] for e in ledger.entries] == ["completed"] * 3 + ["skipped"] * 3
    assert not (tmp_path / "ignored").exists()


def test_help_documents_environment(capsys):
    with pytest.raises(SystemExit):
        cli.main(["pipeline", "run", "--help"])
    out = capsys.readouterr().out
    assert "FOLDSIM_OUTPUT_ROOT" in out and "FOLDSIM_THREADS" in out


def test_module_commands_chain(tmp_path, capsys):
    def run(*argv):
        assert cli.main([str(a) for a in argv]) == 0, capsys.readouterr().err

    run("make-mesh", "--out", tmp_path / "tube.obj")
    run("gen-data", "--mesh", tmp_path / "tube.obj", "--n-frames", 4, "--width", 16, "--height", 16,
        "--out", tmp_path / "sim")
    run("gen-data", "--mesh", "builtin:bumpy_cylinder", "--n-frames", 4, "--width", 16, "--height", 16,
        "--style", "real", "--seed", 9, "--out", tmp_path / "real")
    run("train-translate", "--sim", tmp_path / "sim", "--real", tmp_path / "real", "--weights", "1,10,0,1",
        "--steps", 2, "--out", tmp_path / "tr")
    run("translate", "--ckpt", tmp_path / "tr" / "translate_step0000002.pt", "--in", tmp_path / "sim",
        "--out", tmp_path / "aug")
    run("train-seg", "--sim", tmp_path / "sim", "--sim-aug", tmp_path / "aug", "--epochs", 1,
        "--out", tmp_path / "seg")
    run("predict", "--ckpt", tmp_path / "seg" / "segmentation.pt", "--in", tmp_path / "sim",
        "--out", tmp_path / "pred")
    run("predict", "--ckpt", tmp_path / "seg" / "segmentation.pt", "--in", tmp_path / "sim" / "rgb" / "000000.png",
        "--out", tmp_path / "one")
    assert (tmp_path / "one" / "binary" / "000000.png").is_file()
    run("eval", "--pred", tmp_path / "pred", "--gt", tmp_path / "sim", "--out", tmp_path / "ev")
    run("report", "--runs", str(tmp_path / "ev" / "metrics.json"), "--include-recorded",
        "--out", tmp_path / "table")
    assert "32.64 ± 10.26" in (tmp_path / "table.txt").read_text(encoding="utf-8")


def test_cli_validation_errors(tmp_path, capsys):
    assert cli.main(["gen-data", "--mesh", str(tmp_path / "nope.obj"), "--n-frames", "2",
                     "--out", str(tmp_path / "x")]) == 1
    assert cli.main(["translate", "--ckpt", str(tmp_path / "nope.pt"), "--in", str(tmp_path),
                     "--out", str(tmp_path / "y")]) == 1
    assert cli.main(["report", "--runs", str(tmp_path / "*.json"), "--out", str(tmp_path / "t")]) == 1

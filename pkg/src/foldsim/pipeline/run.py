"""Sequential, resumable driver over the six pipeline stages."""

from __future__ import annotations

import logging
import os
import time
from pathlib import Path

from .config import STAGES, ExperimentConfig
from .ledger import RunLedger
from . import stages as stage_mod

logger = logging.getLogger(__name__)

ENV_OUTPUT_ROOT = "FOLDSIM_OUTPUT_ROOT"
ENV_THREADS = "FOLDSIM_THREADS"
LEDGER_NAME = "ledger.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def output_root(config: ExperimentConfig) -> Path:
    return Path(os.environ.get(ENV_OUTPUT_ROOT) or config.output_root)


def apply_thread_override() -> None:
    value = os.environ.get(ENV_THREADS)
    if not value:
        return
    import torch

    torch.set_num_threads(int(value))


def _snapshot(root: Path) -> dict[str, int]:
    return {str(p.relative_to(root)): p.stat().st_mtime_ns for p in root.rglob("*") if p.is_file()}


def _outputs_exist(root: Path, entry: dict) -> bool:
    paths = list(entry.get("outputs", {}).values()) + entry.get("files", [])
    return all((root / p).exists() for p in paths)


def run_pipeline(config: ExperimentConfig, resume: bool = False, root=None) -> RunLedger:
    """Run every enabled stage in order and return the ledger.

    With ``resume`` a stage is skipped when its last completed entry has the same stage
    hash, its outputs are still on disk and none of its inputs were rebuilt in this run.
    A failing stage is recorded and raised as :class:`StageError`; later stages do not run.
    """
    root = Path(root) if root is not None else output_root(config)
    root.mkdir(parents=True, exist_ok=True)
    apply_thread_override()
    ledger = RunLedger.open(root / LEDGER_NAME, config.config_hash())
    run_id = 1 + max((e.get("run", 0) for e in ledger.entries), default=0)

    hashes: dict[str, str] = {}
    upstream: dict[str, dict] = {}
    executed: set[str] = set()
    for stage in STAGES:
        deps = stage_mod.DEPENDS[stage]
        stage_hash = config.stage_hash(stage, [hashes.get(d, "") for d in deps])
        hashes[stage] = stage_hash
        prev = ledger.last_completed(stage)

        if not config.section(stage).enabled:
            ledger.append(stage, "skipped", run=run_id, stage_hash=stage_hash, reason="disabled")
            if prev is not None:
                hashes[stage] = prev["stage_hash"]
                upstream[stage] = {k: str(root / v) for k, v in prev["outputs"].items()}
            continue

        fresh_inputs = any(d in executed for d in deps)
        if (resume and not fresh_inputs and prev is not None and prev["stage_hash"] == stage_hash
                and _outputs_exist(root, prev)):
            logger.info("%s: up to date, skipping", stage)
            ledger.append(stage, "skipped", run=run_id, stage_hash=stage_hash, reason="hash match",
                          outputs=prev["outputs"], files=prev.get("files", []))
            upstream[stage] = {k: str(root / v) for k, v in prev["outputs"].items()}
            continue

        missing = [d for d in deps if d not in upstream]
        if missing:
            err = StageError(stage, RuntimeError(f"upstream stage(s) {missing} have no outputs"))
            ledger.append(stage, "failed", run=run_id, stage_hash=stage_hash, error=str(err))
            raise err

        logger.info("%s: running", stage)
        before = _snapshot(root)
        start = time.perf_counter()
        try:
            result = stage_mod.STAGE_FUNCS[stage](config, root, {d: upstream[d] for d in deps})
        except Exception as exc:
            ledger.append(stage, "failed", run=run_id, stage_hash=stage_hash,
                          wall_time_s=time.perf_counter() - start, error=f"{type(exc).__name__}: {exc}")
            raise StageError(stage, exc) from exc
        wall = time.perf_counter() - start
        result = dict(result)
        extra = result.pop("extra", {})
        after = _snapshot(root)
        written = sorted(p for p, t in after.items() if before.get(p) != t and p != LEDGER_NAME)
        ledger.append(stage, "completed", run=run_id, stage_hash=stage_hash, wall_time_s=wall,
                      outputs=result, files=written, **extra)
        upstream[stage] = {k: str(root / v) for k, v in result.items()}
        executed.add(stage)
    return ledger

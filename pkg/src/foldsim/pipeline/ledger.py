"""Append-only record of pipeline stage executions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .. import __version__
from ..io import atomic_write_bytes


@dataclass
class RunLedger:
    path: Path
    config_hash: str = ""
    code_version: str = __version__
    entries: list[dict] = field(default_factory=list)

    @classmethod
    def open(cls, path, config_hash: str = "") -> "RunLedger":
        path = Path(path)
        if path.is_file():
            data = json.loads(path.read_text(encoding="utf-8"))
            ledger = cls(path, data.get("config_hash", ""), data.get("code_version", __version__),
                         data.get("entries", []))
            if config_hash:
                ledger.config_hash = config_hash
            return ledger
        return cls(path, config_hash)

    @property
    def root(self) -> Path:
        return self.path.parent

    def append(self, stage: str, status: str, **fields) -> dict:
        entry = {"stage": stage, "status": status, "time": datetime.now(timezone.utc).isoformat(), **fields}
        self.entries.append(entry)
        self.save()
        return entry

    def save(self) -> None:
        payload = {"config_hash": self.config_hash, "code_version": self.code_version, "entries": self.entries}
        atomic_write_bytes(self.path, json.dumps(payload, indent=1).encode("utf-8"))

    def last_completed(self, stage: str) -> dict | None:
        for e in reversed(self.entries):
            if e["stage"] == stage and e["status"] == "completed":
                return e
        return None

    def outputs(self, stage: str) -> dict[str, Path]:
        """Absolute output paths of the latest completed run of ``stage``."""
        e = self.last_completed(stage)
        if e is None:
            raise KeyError(f"stage {stage!r} has no completed run in {self.path}")
        return {k: self.root / v for k, v in e.get("outputs", {}).items()}

    def status(self) -> dict[str, str]:
        out = {}
        for e in self.entries:
            out[e["stage"]] = e["status"]
        return out

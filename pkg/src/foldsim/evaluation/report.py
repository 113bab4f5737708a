"""Per-run metric records and the comparison table built from them."""

from __future__ import annotations

import csv
import io as _io
import json
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .metrics import aggregate, format_number


class MetricReport(BaseModel):
    """IoU summary of one (model, train sets, translation) run on one evaluation set.

    ``mean`` and ``std`` are percentages. Recorded results without per-frame
    values may give them as strings, which are then kept verbatim for display.
    """

    model: str
    train_sets: list[str]
    translation: str = "N.A."
    eval_set: str
    mean: float
    std: float
    per_frame: list[float] = Field(default_factory=list)
    frame_ids: list[str] = Field(default_factory=list)
    mean_text: Optional[str] = None
    std_text: Optional[str] = None
    meta: dict = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _keep_text(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            for key in ("mean", "std"):
                if isinstance(data.get(key), str):
                    data.setdefault(f"{key}_text", data[key])
                    data[key] = float(data[key])
        return data

    @model_validator(mode="after")
    def _consistent(self):
        if self.per_frame:
            vals = np.asarray(self.per_frame)
            if np.any(vals < 0) or np.any(vals > 1):
                raise ValueError("per-frame IoU outside [0, 1]")
            agg = aggregate(vals)
            if abs(agg.mean - self.mean) > 1e-9 or abs(agg.std - self.std) > 1e-9:
                raise ValueError("mean/std do not match the per-frame values")
        if self.frame_ids and len(self.frame_ids) != len(self.per_frame):
            raise ValueError("frame_ids and per_frame differ in length")
        return self

    @classmethod
    def from_per_frame(cls, per_frame, **fields) -> "MetricReport":
        agg = aggregate(per_frame)
        return cls(mean=agg.mean, std=agg.std, per_frame=[float(v) for v in per_frame], **fields)

    @property
    def row_key(self) -> tuple[str, str, str]:
        return self.model, " & ".join(self.train_sets), self.translation

    def mean_str(self) -> str:
        return self.mean_text or format_number(self.mean)

    def std_str(self) -> str:
        return self.std_text or format_number(self.std)

    def cell(self) -> str:
        return f"{self.mean_str()} ± {self.std_str()}"

    def to_json(self) -> dict:
        run = self.model_dump(exclude={"per_frame", "frame_ids", "mean", "std"}, exclude_none=True)
        return {"run": run, "per_frame": self.per_frame, "frame_ids": self.frame_ids,
                "mean": self.mean, "std": self.std}

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=1, sort_keys=True), encoding="utf-8")
        return path


def load_reports(path) -> list[MetricReport]:
    """A single metric JSON, or a collection ``{"reports": [...]}`` of them."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    items = data["reports"] if isinstance(data, dict) and "reports" in data else [data]
    out = []
    for item in items:
        if "run" in item:
            item = {**item["run"], **{k: v for k, v in item.items() if k != "run"}}
        out.append(MetricReport.model_validate(item))
    return out


def recorded_results() -> list[MetricReport]:
    """Published comparison results, shipped as records."""
    ref = resources.files("foldsim.data").joinpath("published_results.json")
    return [MetricReport.model_validate(r) for r in json.loads(ref.read_text("utf-8"))["reports"]]


class Table:
    def __init__(self, reports: list[MetricReport]):
        self.rows: list[tuple[str, str, str]] = []
        self.columns: list[str] = []
        self.cells: dict[tuple[tuple[str, str, str], str], MetricReport] = {}
        for r in reports:
            if r.row_key not in self.rows:
                self.rows.append(r.row_key)
            if r.eval_set not in self.columns:
                self.columns.append(r.eval_set)
            self.cells[(r.row_key, r.eval_set)] = r

    def cell(self, model: str, train: str, translation: str, eval_set: str) -> str:
        r = self.cells.get(((model, train, translation), eval_set))
        return r.cell() if r else ""

    def records(self) -> list[dict]:
        out = []
        for key in self.rows:
            row = {"model": key[0], "train": key[1], "translation": key[2]}
            for col in self.columns:
                r = self.cells.get((key, col))
                row[col] = r.cell() if r else ""
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = _io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["model", "train", "translation", *self.columns])
        writer.writeheader()
        writer.writerows(self.records())
        return buf.getvalue()

    def to_text(self) -> str:
        header = ["Model", "Train set", "Translation", *self.columns]
        body = [list(r.values()) for r in self.records()]
        widths = [max(len(str(row[i])) for row in [header, *body]) for i in range(len(header))]
        line = lambda row: "  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip()  # noqa: E731
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([line(header), rule, *map(line, body)]) + "\n"


def improvement(reports: list[MetricReport], eval_set: str = "EM", ours_model: str = "EndoFM-TU",
                ours_translation: str = "Ours", baseline_model: str = "FoldIt") -> Decimal:
    """Best of our runs minus the best baseline run on ``eval_set``, in points, as displayed."""
    def best(rows):
        if not rows:
            raise ValueError(f"no matching runs on {eval_set}")
        return max(Decimal(r.mean_str()) for r in rows)
    on_set = [r for r in reports if r.eval_set == eval_set]
    ours = [r for r in on_set if r.model == ours_model and r.translation == ours_translation]
    base = [r for r in on_set if r.model == baseline_model]
    return best(ours) - best(base)


def write_report(reports: list[MetricReport], out) -> dict[str, Path]:
    """Write ``<out>.csv``, ``<out>.json`` and ``<out>.txt``; returns the paths."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stem = out.with_suffix("") if out.suffix in (".csv", ".json", ".txt") else out
    table = Table(reports)
    paths = {"csv": stem.with_suffix(".csv"), "json": stem.with_suffix(".json"), "txt": stem.with_suffix(".txt")}
    paths["csv"].write_text(table.to_csv(), encoding="utf-8")
    paths["json"].write_text(json.dumps({"columns": table.columns, "rows": table.records(),
                                         "reports": [r.to_json() for r in reports]}, indent=1), encoding="utf-8")
    paths["txt"].write_text(table.to_text(), encoding="utf-8")
    return paths

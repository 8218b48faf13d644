"""Run-directory artifact names, presence/staleness checks, JSONL helpers."""

from __future__ import annotations

import json
from pathlib import Path

__all__ = [
    "MissingArtifactError", "StaleArtifactError",
    "DATASET", "DATASET_META", "CHECKPOINT", "EMBEDDINGS", "HISTORY",
    "PROJECTION", "EXPLANATIONS", "EDGE_WEIGHTS", "METRICS_CSV", "PER_GRAPH",
    "REPORT_DIR", "require", "check_hash", "write_json", "read_json",
    "write_jsonl", "read_jsonl",
]

DATASET = "dataset.jsonl"
DATASET_META = "dataset.meta.json"
CHECKPOINT = "checkpoint.json"
EMBEDDINGS = "embeddings.jsonl"
HISTORY = "history.json"
PROJECTION = "projection.json"
EXPLANATIONS = "explanations.jsonl"
EDGE_WEIGHTS = "edge_weights.jsonl"
METRICS_CSV = "metrics.csv"
PER_GRAPH = "per_graph_metrics.jsonl"
REPORT_DIR = "report"


class MissingArtifactError(FileNotFoundError):
    """A stage input artifact does not exist."""


class StaleArtifactError(RuntimeError):
    """An input artifact was produced under a different configuration."""


def require(path, stage: str, producer: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(
            f"{stage} requires {path}; run `tgx {producer}` first")
    return path


def check_hash(found: str | None, expected: str, artifact: str) -> None:
    if found != expected:
        raise StaleArtifactError(
            f"{artifact} carries config hash {found!r} but the current "
            f"configuration expects {expected!r}; re-run the producing stage")


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path, header: dict, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record": "header", **header}, separators=(",", ":")) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_jsonl(path):
    """Returns (records, header); header is the first header-typed record."""
    records, header = [], {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("record") == "header":
                header = obj
            else:
                records.append(obj)
    return records, header

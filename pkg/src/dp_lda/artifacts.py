import csv
import hashlib
import json
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from .cgs import Hyperparams, TopicModel
from .corpus import Vocabulary
from .model import LedgerSummary, RunConfig, RunMetadata
from .monitor import COMPOSITION_NOTE, PrivacyLedger, ledger_total

logger = logging.getLogger("dp-lda")

MODEL_CSV = "model.csv"
MODEL_JSON = "model.json"
LEDGER_CSV = "ledger.csv"
LEDGER_JSON = "ledger.json"
LEDGER_FIELDS = ["iteration", "max_cumulative_eps", "mean_cumulative_eps"]


def format_float(x: float) -> str:
    return f"{x:.17g}"


def git_blob_hash(path: str | Path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def input_hashes(paths: Iterable[Path | None]) -> dict[str, str]:
    hashes = {}
    for path in paths:
        if path is None:
            continue
        hashes[str(path)] = git_blob_hash(path)
        sidecar = path.with_suffix(".vocab")
        if sidecar.exists():
            hashes[str(sidecar)] = git_blob_hash(sidecar)
    return hashes


def config_snapshot(config: RunConfig) -> dict[str, Any]:
    return config.model_dump(mode="json")


def write_json(path: Path, payload: BaseModel | dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_model(model: TopicModel, out_dir: Path, metadata: RunMetadata) -> tuple[Path, Path]:
    """phi as CSV (K rows, one column per vocabulary word) plus a JSON sidecar."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / MODEL_CSV
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(model.vocab.words)
        for row in model.phi.tolist():
            writer.writerow([format_float(x) for x in row])
    json_path = write_json(out_dir / MODEL_JSON, metadata)
    logger.info(f"💾 Model written to {csv_path}")
    return csv_path, json_path


def read_model(csv_path: str | Path) -> TopicModel:
    csv_path = Path(csv_path)
    with open(csv_path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    phi = np.array(rows, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[1] != len(header):
        raise ValueError(f"{csv_path}: expected {len(header)} columns in every row")

    sidecar = csv_path.with_suffix(".json")
    if sidecar.exists():
        meta = RunMetadata.model_validate_json(sidecar.read_text(encoding="utf-8"))
        hyper = Hyperparams(K=meta.K, alpha=meta.alpha, beta=meta.beta)
    else:
        logger.warning(f"⚠️ No metadata next to {csv_path}; using default alpha/beta.")
        hyper = Hyperparams(K=phi.shape[0])
    if hyper.K != phi.shape[0]:
        raise ValueError(f"{csv_path}: metadata says K={hyper.K} but the matrix has {phi.shape[0]} rows")
    return TopicModel(phi, hyper, Vocabulary(tuple(header)))


def write_ledger(
    ledger: PrivacyLedger, out_dir: Path, config: dict[str, Any], inputs: dict[str, str]
) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / LEDGER_CSV
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=LEDGER_FIELDS)
        writer.writeheader()
        for row in ledger.history:
            writer.writerow(
                {
                    "iteration": row.iteration,
                    "max_cumulative_eps": format_float(row.max_cumulative_eps),
                    "mean_cumulative_eps": format_float(row.mean_cumulative_eps),
                }
            )
    summary = LedgerSummary(
        level=ledger.level.kind.value,
        N=ledger.level.N,
        total_eps=ledger_total(ledger),
        n_iters=ledger.iterations_recorded,
        records=ledger.records,
        note=COMPOSITION_NOTE,
        config=config,
        inputs=inputs,
    )
    json_path = write_json(out_dir / LEDGER_JSON, summary)
    logger.info(f"💾 Privacy ledger written to {csv_path}")
    return csv_path, json_path


def write_rows(path: Path, fieldnames: list[str], rows: Iterable[dict[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_float(v) if isinstance(v, float) else v for k, v in row.items()})
    return path

"""Result persistence: one CSV per campaign plus a JSON run manifest."""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from .config import ResultRecord


def fresh_path(path) -> Path:
    """``path`` if unused, else the first free ``stem.N.suffix``; earlier
    results are never overwritten."""
    path = Path(path)
    if not path.exists():
        return path
    k = 1
    while True:
        cand = path.with_name(f"{path.stem}.{k}{path.suffix}")
        if not cand.exists():
            return cand
        k += 1


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(rows: list[dict], path) -> Path:
    """Rows with the union of their keys as header (first-seen order)."""
    header = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    path = fresh_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(k)) for k in header])
    return path


def write_records(records: list[ResultRecord], path) -> Path:
    return write_rows([r.row() for r in records], path)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def environment() -> dict:
    return {"gridid": __version__, "numpy": np.__version__, "python": platform.python_version(),
            "kernel_backend": kernels.BACKEND}


def write_manifest(path, campaign: str, records: list[ResultRecord] | None = None,
                   extra: dict | None = None, outputs: list | None = None) -> Path:
    doc = {"campaign": campaign, "environment": environment(),
           "outputs": [str(p) for p in (outputs or [])]}
    if records is not None:
        doc["records"] = [r.to_dict() for r in records]
    if extra:
        doc.update(extra)
    path = fresh_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")

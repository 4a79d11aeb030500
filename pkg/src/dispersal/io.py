"""Point-cloud serialisation: ``kind,position`` CSV and a JSON envelope."""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .model import ModelParams, PointClouds

CSV_HEADER = ["kind", "position"]


def write_clouds_csv(clouds: PointClouds, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for x in clouds.parents:
            writer.writerow(["parent", repr(float(x))])
        for y in clouds.offspring:
            writer.writerow(["offspring", repr(float(y))])


def read_clouds_csv(path) -> PointClouds:
    parents, offspring = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            kind, pos = row
            if kind == "parent":
                parents.append(float(pos))
            elif kind == "offspring":
                offspring.append(float(pos))
            else:
                raise ValueError(f"{path}:{lineno}: unknown kind {kind!r}")
    return PointClouds.from_unsorted(parents, offspring, check_parent_range=False)


def clouds_to_json(clouds: PointClouds, params: ModelParams | None = None, **extra) -> dict:
    doc = {
        "parents": clouds.parents.tolist(),
        "offspring": clouds.offspring.tolist(),
        "parentage": None if clouds.parentage is None else clouds.parentage.tolist(),
    }
    if params is not None:
        doc["params"] = params.to_dict()
    doc.update(extra)
    return doc


def clouds_from_json(doc: dict):
    """Return ``(clouds, params)``; ``params`` is None when absent."""
    parentage = doc.get("parentage")
    clouds = PointClouds(
        np.asarray(doc["parents"], dtype=float),
        np.asarray(doc["offspring"], dtype=float),
        None if parentage is None else np.asarray(parentage, dtype=np.int64),
    )
    params = ModelParams.from_dict(doc["params"]) if "params" in doc else None
    return clouds, params


def write_sidecar(path, params: ModelParams, seed: dict, model: str, **extra) -> None:
    doc = {
        "params": params.to_dict(),
        "seed": seed,
        "model": model,
        **extra,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_clouds(path):
    """Load clouds from CSV or a JSON envelope; returns ``(clouds, params_or_None)``."""
    path = Path(path)
    if path.suffix == ".json":
        return clouds_from_json(json.loads(path.read_text()))
    clouds = read_clouds_csv(path)
    sidecar = path.with_suffix(".json")
    params = None
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if "params" in meta:
            params = ModelParams.from_dict(meta["params"])
    return clouds, params

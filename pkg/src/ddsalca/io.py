"""File formats: JSONL datasets with a metadata header, JSON documents, CSV reports."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .behavior import LSequence
from .pac import PacCertificate
from .qlearn import QLearnConfig, QTable
from .salca import Salca, WindowSet, build_salca
from .sampler import Dataset
from .synthesis import AbstractController, ReachAvoidSpec

DATASET_FORMAT = "ddsalca-dataset/1"
ABSTRACTION_FORMAT = "ddsalca-abstraction/1"
CONTROLLER_FORMAT = "ddsalca-controller/1"
QTABLE_FORMAT = "ddsalca-qtable/1"
COMPARE_COLUMNS = ("trial", "steps_abstract", "steps_rl", "diff")
PARAM_COLUMNS = ("N", "ell", "windows", "states", "transitions", "s_star", "eps", "eps_bar")


class ProvenanceError(RuntimeError):
    """An input file does not match the hash recorded by its consumer."""


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".meta.json")


def save_dataset(d: Dataset, path) -> str:
    """Write one JSON record per line plus ``<path>.meta.json``; returns the records' sha256."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for rid, x, u, y in zip(d.ids.tolist(), d.x0.tolist(), d.inputs.tolist(), d.outputs.tolist()):
            f.write(json.dumps({"id": rid, "x0": x, "u": u, "y": y}, separators=(",", ":")))
            f.write("\n")
    meta = {"format": DATASET_FORMAT, "system": d.system, "H": d.H, "N": d.N, "seed": d.seed,
            "output_labels": list(d.output_labels), "input_labels": list(d.input_labels),
            "config": d.meta}
    meta_path(path).write_text(json.dumps(meta, indent=1))
    return file_sha256(path)


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta = json.loads(meta_path(path).read_text())
    if meta.get("format") != DATASET_FORMAT:
        raise ValueError(f"{path}: not a dataset header")
    ids, x0, u, y = [], [], [], []
    with open(path) as f:
        for line in f:
            r = json.loads(line)
            ids.append(r["id"])
            x0.append(r["x0"])
            u.append(r["u"])
            y.append(r["y"])
    H = meta["H"]
    return Dataset(meta["system"], H, meta["output_labels"], meta["input_labels"],
                   np.array(ids, dtype=np.int64), np.array(x0, dtype=np.float64).reshape(len(ids), -1),
                   np.array(u, dtype=np.int16).reshape(len(ids), H),
                   np.array(y, dtype=np.int16).reshape(len(ids), H + 1), meta["seed"], meta["config"])


def _write_json(obj, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True))
    return file_sha256(path)


def save_abstraction(w: WindowSet, path, dataset_sha256: str | None = None, stats=None) -> str:
    wins = w.windows()
    doc = {"format": ABSTRACTION_FORMAT, "ell": w.ell,
           "output_labels": list(w.output_labels), "input_labels": list(w.input_labels),
           "windows": [list(z.symbols()) for z in wins],
           "dataset_sha256": dataset_sha256, "stats": stats or {}}
    return _write_json(doc, path)


def load_abstraction(path) -> tuple[Salca, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != ABSTRACTION_FORMAT:
        raise ValueError(f"{path}: not an abstraction document")
    wins = [LSequence.from_symbols(s) for s in doc["windows"]]
    w = WindowSet.from_windows(wins, doc["ell"], doc["output_labels"], doc["input_labels"])
    return build_salca(w), doc


def save_certificate(c: PacCertificate, path) -> str:
    return _write_json({"format": "ddsalca-certificate/1", **c.to_dict()}, path)


def load_certificate(path) -> PacCertificate:
    doc = json.loads(Path(path).read_text())
    doc.pop("format", None)
    return PacCertificate.from_dict(doc)


def save_controller(ctrl: AbstractController, a: Salca, path, provenance=None) -> str:
    states = []
    for s in ctrl.winning.tolist():
        states.append({"window": list(a.state(s).symbols()), "rank": int(ctrl.rank[s]),
                       "allowed": list(ctrl.allowed.get(s, ())), "choice": int(ctrl.choice[s])})
    states.sort(key=lambda r: LSequence.from_symbols(r["window"]))
    spec = ctrl.spec
    doc = {"format": CONTROLLER_FORMAT,
           "spec": {"goal": sorted(map(str, spec.goal)), "avoid": sorted(map(str, spec.avoid)),
                    "max_steps": spec.max_steps},
           "ell": a.ell, "states": states, "provenance": provenance or {}}
    return _write_json(doc, path)


def load_controller(path, a: Salca) -> tuple[AbstractController, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CONTROLLER_FORMAT:
        raise ValueError(f"{path}: not a controller document")
    spec = ReachAvoidSpec(doc["spec"]["goal"], doc["spec"]["avoid"], doc["spec"]["max_steps"])
    rank = np.full(a.n_states, -1, dtype=np.int64)
    choice = np.full(a.n_states, -1, dtype=np.int64)
    allowed = {}
    for r in doc["states"]:
        s = a.index(LSequence.from_symbols(r["window"]))
        if s is None:
            raise ProvenanceError("controller state missing from the abstraction")
        rank[s] = r["rank"]
        choice[s] = r["choice"]
        if r["allowed"]:
            allowed[s] = tuple(r["allowed"])
    goal, _ = spec.resolve(a.output_labels)
    return AbstractController(spec, rank, allowed, choice, frozenset(goal)), doc


def save_qtable(q: QTable, path) -> str:
    cfg = q.cfg
    doc = {"format": QTABLE_FORMAT, "counts": list(cfg.counts), "lower": list(cfg.lower),
           "upper": list(cfg.upper), "n_actions": int(q.values.shape[1]),
           "values": q.values.reshape(*cfg.counts, -1).tolist(),
           "config": {k: getattr(cfg, k) for k in ("learning_rate", "exploration", "reward",
                                                     "discount", "episodes", "episode_cap")}}
    return _write_json(doc, path)


def load_qtable(path) -> QTable:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != QTABLE_FORMAT:
        raise ValueError(f"{path}: not a Q-table document")
    cfg = QLearnConfig(counts=tuple(doc["counts"]), lower=tuple(doc["lower"]),
                       upper=tuple(doc["upper"]), **doc["config"])
    vals = np.array(doc["values"], dtype=np.float64).reshape(-1, doc["n_actions"])
    return QTable(vals, cfg)


def write_jsonl(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


def write_csv(rows, columns, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(columns)
        for r in rows:
            wr.writerow(["" if v is None else v for v in r])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))

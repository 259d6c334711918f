"""File formats: dataset CSV, graph edge lists, schedules, run manifests.

CSV: UTF-8, comma-separated, header row, floats as ``%.17g`` (exact
round-trip), booleans as ``true``/``false``, categoricals as labels,
``batch_id`` last.

Edge list: ``node <name> <domain> <visibility>`` lines, then
``edge <a> -> <b>`` and ``edge <a> <-> <b>`` lines. Domains are written as
``continuous``, ``boolean``, ``discrete:<k>`` or ``categorical:<l1>|<l2>|...``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .line import PRESETS, build, config_from_dict, preset
from .projection import Admg
from .sampling import BatchConfig, Column, Dataset
from .scm import (Boolean, Categorical, Continuous, Discrete, ScmGraph, Visibility,
                  validate)
from .serialize import (FormatError, canonical_json, graph_from_dict, graph_to_dict,
                        intervention_from_dict, intervention_to_dict)

TOOL_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# Graph sources


def load_graph(source: str) -> ScmGraph:
    """A preset name, a graph JSON document, or a line-config JSON document.

    Raises OSError if the file cannot be read and FormatError/ValueError if
    its content is not a valid graph.
    """
    if source in PRESETS:
        return build(preset(source))
    doc = json.loads(Path(source).read_text(encoding="utf-8"))
    if doc.get("format") == "causalman-line":
        return build(config_from_dict(doc))
    graph = graph_from_dict(doc)
    validate(graph).raise_if_invalid()
    return graph


def write_graph_json(graph: ScmGraph, path) -> None:
    Path(path).write_text(canonical_json(graph_to_dict(graph)) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Dataset CSV


def _format_float(arr: np.ndarray) -> list[str]:
    return ["%.17g" % x for x in arr.tolist()]


def _column_strings(ds: Dataset, col: Column) -> list[str]:
    arr = ds.data[col.name]
    if isinstance(col.domain, Continuous):
        return _format_float(arr)
    if isinstance(col.domain, Boolean):
        return np.where(arr, "true", "false").tolist()
    if isinstance(col.domain, Categorical):
        return np.asarray(col.domain.labels, dtype=object)[arr].tolist()
    return [str(x) for x in arr.tolist()]


def write_csv(ds: Dataset, path, chunk: int = 50_000) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.names + ["batch_id"])
        for lo in range(0, ds.n_rows, chunk):
            part = ds.select_rows(slice(lo, lo + chunk))
            cols = [_column_strings(part, c) for c in part.columns]
            cols.append([str(x) for x in part.batch_ids.tolist()])
            w.writerows(zip(*cols))


def _parse_column(col: Column, raw: np.ndarray) -> np.ndarray:
    dom = col.domain
    try:
        if isinstance(dom, Continuous):
            return raw.astype(np.float64)
        if isinstance(dom, Boolean):
            ok = np.isin(raw, ["true", "false"])
            if not ok.all():
                raise ValueError(f"bad boolean {raw[~ok][0]!r}")
            return raw == "true"
        if isinstance(dom, Categorical):
            index = {lab: i for i, lab in enumerate(dom.labels)}
            return np.fromiter((index[x] for x in raw), dtype=np.int64, count=len(raw))
        out = raw.astype(np.int64)
        if np.any((out < 0) | (out >= dom.cardinality)):
            raise ValueError("discrete value out of range")
        return out
    except (KeyError, ValueError) as exc:
        raise FormatError(f"column {col.name}: {exc}") from None


def read_csv(path, graph: ScmGraph, seed: int = 0, fingerprint: str = "") -> Dataset:
    """Read a dataset CSV whose columns are nodes of ``graph`` plus ``batch_id``."""
    import pandas as pd
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    names = list(frame.columns)
    if not names or names[-1] != "batch_id":
        raise FormatError("last CSV column must be batch_id")
    cols = []
    for n in names[:-1]:
        spec = graph.node(n)
        cols.append(Column(spec.name, spec.domain, spec.visibility))
    data = {c.name: _parse_column(c, frame[c.name].to_numpy()) for c in cols}
    batch_ids = frame["batch_id"].to_numpy().astype(np.int64)
    return Dataset(cols, data, batch_ids, seed, fingerprint)


# ---------------------------------------------------------------------------
# Edge lists


def _domain_token(dom) -> str:
    if isinstance(dom, Continuous):
        return "continuous"
    if isinstance(dom, Boolean):
        return "boolean"
    if isinstance(dom, Discrete):
        return f"discrete:{dom.cardinality}"
    for lab in dom.labels:
        if not lab or any(ch in lab for ch in " \t\n|"):
            raise FormatError(f"label {lab!r} cannot be written to an edge list")
    return "categorical:" + "|".join(dom.labels)


def _parse_domain(tok: str):
    if tok == "continuous":
        return Continuous()
    if tok == "boolean":
        return Boolean()
    kind, _, rest = tok.partition(":")
    if kind == "discrete":
        return Discrete(int(rest))
    if kind == "categorical":
        return Categorical(tuple(rest.split("|")))
    raise FormatError(f"unknown domain token {tok!r}")


@dataclass(frozen=True)
class EdgeList:
    nodes: list[tuple[str, Any, Visibility]]
    directed: list[tuple[str, str]]
    bidirected: list[tuple[str, str]]

    def to_admg(self) -> Admg:
        return Admg(tuple(n for n, _, _ in self.nodes), frozenset(self.directed),
                    frozenset(self.bidirected))


def graph_edge_list(graph: ScmGraph) -> EdgeList:
    name = [n.name for n in graph.nodes]
    return EdgeList([(n.name, n.domain, n.visibility) for n in graph.nodes],
                    [(name[a], name[b]) for a, b in graph.edges], [])


def admg_edge_list(admg: Admg, graph: ScmGraph | None = None) -> EdgeList:
    def dom(n):
        return graph.node(n).domain if graph is not None else Continuous()
    return EdgeList([(n, dom(n), Visibility.OBSERVABLE) for n in admg.nodes],
                    sorted(admg.directed), sorted(admg.bidirected))


def format_edge_list(el: EdgeList) -> str:
    lines = [f"node {n} {_domain_token(d)} {v.value}" for n, d, v in el.nodes]
    lines += [f"edge {a} -> {b}" for a, b in el.directed]
    lines += [f"edge {a} <-> {b}" for a, b in el.bidirected]
    return "\n".join(lines) + "\n"


def write_edge_list(el: EdgeList, path) -> None:
    Path(path).write_text(format_edge_list(el), encoding="utf-8")


def parse_edge_list(text: str) -> EdgeList:
    nodes, directed, bidirected = [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "node" and len(parts) == 4:
                nodes.append((parts[1], _parse_domain(parts[2]), Visibility(parts[3])))
            elif parts[0] == "edge" and len(parts) == 4 and parts[2] in ("->", "<->"):
                (directed if parts[2] == "->" else bidirected).append((parts[1], parts[3]))
            else:
                raise FormatError("unrecognized line")
        except (ValueError, FormatError) as exc:
            raise FormatError(f"line {lineno}: {exc}: {line!r}") from None
    known = {n for n, _, _ in nodes}
    for a, b in directed + bidirected:
        if a not in known or b not in known:
            raise FormatError(f"edge {a} - {b} references an undeclared node")
    return EdgeList(nodes, directed, bidirected)


def read_edge_list(path) -> EdgeList:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Schedules


def schedule_to_dict(graph: ScmGraph, batches: Iterable[BatchConfig]) -> dict:
    return {
        "format": "causalman-schedule",
        "batches": [
            {"batch_id": b.batch_id, "n_samples": b.n_samples,
             "parametrization": {graph.node(k).name: v for k, v in b.parametrization.items()},
             "interventions": [intervention_to_dict(graph, iv) for iv in b.interventions]}
            for b in batches
        ],
    }


def schedule_from_dict(graph: ScmGraph, doc: dict) -> list[BatchConfig]:
    """Explicit ``batches`` list, or the ``n_rows`` / ``batch_size`` shorthand."""
    from .line import default_schedule
    if doc.get("format") != "causalman-schedule":
        raise FormatError("not a causalman schedule document")
    try:
        if "batches" not in doc:
            return default_schedule(int(doc["n_rows"]), int(doc.get("batch_size", 1000)))
        return [BatchConfig(int(b["batch_id"]), int(b["n_samples"]),
                            {graph.node(k).id: v for k, v in b.get("parametrization", {}).items()},
                            tuple(intervention_from_dict(graph, iv)
                                  for iv in b.get("interventions", [])))
                for b in doc["batches"]]
    except KeyError as exc:
        raise FormatError(f"schedule: unknown or missing key {exc}") from None


def read_schedule(graph: ScmGraph, path) -> list[BatchConfig]:
    return schedule_from_dict(graph, json.loads(Path(path).read_text(encoding="utf-8")))


def schedule_digest(graph: ScmGraph, batches) -> str:
    return hashlib.sha256(canonical_json(schedule_to_dict(graph, batches)).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Manifest


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for fully reproducible manifests.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
         else _dt.datetime.now(_dt.timezone.utc))
    return t.replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class RunManifest:
    command: str
    graph_fingerprint: str
    master_seed: int
    schedule_digest: str
    tool_version: str
    timestamp: str
    extra: dict

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("command", "graph_fingerprint", "master_seed",
                                           "schedule_digest", "tool_version", "timestamp")}
        d.update(self.extra)
        d["format"] = "causalman-manifest"
        return d


def make_manifest(command: str, graph: ScmGraph, seed: int, batches, ds: Dataset, **extra) -> RunManifest:
    info = {"n_rows": ds.n_rows, "columns": ds.names, "batches": ds.metadata.get("batches", [])}
    info.update(extra)
    return RunManifest(command, ds.fingerprint, seed, schedule_digest(graph, batches),
                       TOOL_VERSION, _timestamp(), info)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

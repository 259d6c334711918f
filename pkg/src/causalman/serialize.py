"""JSON (de)serialization of graphs, mechanisms and interventions."""

from __future__ import annotations

import hashlib
import json
from typing import Any

from . import scm
from .scm import (AffineMix, Boolean, Categorical, CategoricalDist, ConditionalCategorical,
                  ConditionalGaussian, Continuous, Discrete, ExogenousNoise, Gaussian, HalfNormal,
                  HardIntervention, LogicalAnd, Max, NodeSpec, PhysicsFormula, PointMass, Relu,
                  ScmGraph, SoftIntervention, Sum, TableLookup, ToleranceCheck, TruncatedGaussian,
                  Uniform, Visibility)

GRAPH_FORMAT = "causalman-graph"


class FormatError(ValueError):
    pass


def domain_to_dict(d: scm.Domain) -> dict:
    if isinstance(d, Continuous):
        return {"kind": "continuous", "unit": d.unit}
    if isinstance(d, Boolean):
        return {"kind": "boolean"}
    if isinstance(d, Discrete):
        return {"kind": "discrete", "cardinality": d.cardinality}
    if isinstance(d, Categorical):
        return {"kind": "categorical", "labels": list(d.labels)}
    raise TypeError(d)


def domain_from_dict(d: dict) -> scm.Domain:
    kind = d["kind"]
    if kind == "continuous":
        return Continuous(d.get("unit", ""))
    if kind == "boolean":
        return Boolean()
    if kind == "discrete":
        return Discrete(int(d["cardinality"]))
    if kind == "categorical":
        return Categorical(tuple(d["labels"]))
    raise FormatError(f"unknown domain kind {kind!r}")


def dist_to_dict(dist: scm.Distribution) -> dict:
    if isinstance(dist, Gaussian):
        return {"kind": "gaussian", "mu": dist.mu, "sigma": dist.sigma}
    if isinstance(dist, TruncatedGaussian):
        return {"kind": "truncated_gaussian", "mu": dist.mu, "sigma": dist.sigma, "lower": dist.lower}
    if isinstance(dist, HalfNormal):
        return {"kind": "half_normal", "sigma": dist.sigma}
    if isinstance(dist, Uniform):
        return {"kind": "uniform", "lo": dist.lo, "hi": dist.hi}
    if isinstance(dist, PointMass):
        return {"kind": "point_mass", "value": dist.value}
    if isinstance(dist, CategoricalDist):
        return {"kind": "categorical", "probabilities": list(dist.probabilities)}
    raise TypeError(dist)


def dist_from_dict(d: dict) -> scm.Distribution:
    kind = d["kind"]
    if kind == "gaussian":
        return Gaussian(d["mu"], d["sigma"])
    if kind == "truncated_gaussian":
        return TruncatedGaussian(d["mu"], d["sigma"], d["lower"])
    if kind == "half_normal":
        return HalfNormal(d["sigma"])
    if kind == "uniform":
        return Uniform(d["lo"], d["hi"])
    if kind == "point_mass":
        return PointMass(d["value"])
    if kind == "categorical":
        return CategoricalDist(tuple(d["probabilities"]))
    raise FormatError(f"unknown distribution kind {kind!r}")


def _table_out(table) -> list:
    return [[list(k), list(v) if isinstance(v, tuple) else v] for k, v in table]


def _table_in(table, tuple_values: bool) -> tuple:
    return tuple((tuple(k), tuple(v) if tuple_values else v) for k, v in table)


def mechanism_to_dict(m: scm.Mechanism) -> dict:
    if isinstance(m, PhysicsFormula):
        return {"kind": "physics", "formula": m.formula,
                "bindings": [list(b) for b in m.bindings],
                "constants": [list(c) for c in m.constants],
                "noise": None if m.noise is None else dist_to_dict(m.noise)}
    if isinstance(m, ConditionalGaussian):
        return {"kind": "conditional_gaussian", "parents": list(m.parents),
                "table": _table_out(m.table), "lower": m.lower}
    if isinstance(m, ConditionalCategorical):
        return {"kind": "conditional_categorical", "parents": list(m.parents), "table": _table_out(m.table)}
    if isinstance(m, TableLookup):
        return {"kind": "table_lookup", "parents": list(m.parents), "table": _table_out(m.table)}
    if isinstance(m, ToleranceCheck):
        return {"kind": "tolerance_check", "monitored": m.monitored, "ltl": m.ltl, "utl": m.utl}
    if isinstance(m, (LogicalAnd, Sum, Max)):
        kind = {LogicalAnd: "logical_and", Sum: "sum", Max: "max"}[type(m)]
        return {"kind": kind, "parents": list(m.parents)}
    if isinstance(m, Relu):
        return {"kind": "relu", "parent": m.parent}
    if isinstance(m, ExogenousNoise):
        return {"kind": "noise", "distribution": dist_to_dict(m.distribution)}
    if isinstance(m, AffineMix):
        return {"kind": "affine_mix", "beta": m.beta, "hi": m.hi, "lo": m.lo}
    raise TypeError(m)


def mechanism_from_dict(d: dict) -> scm.Mechanism:
    kind = d.get("kind")
    try:
        if kind == "physics":
            return PhysicsFormula(d["formula"],
                                  tuple((r, int(i)) for r, i in d["bindings"]),
                                  tuple((r, float(v)) for r, v in d.get("constants", [])),
                                  None if d.get("noise") is None else dist_from_dict(d["noise"]))
        if kind == "conditional_gaussian":
            return ConditionalGaussian(tuple(d["parents"]), _table_in(d["table"], True), d.get("lower"))
        if kind == "conditional_categorical":
            return ConditionalCategorical(tuple(d["parents"]), _table_in(d["table"], True))
        if kind == "table_lookup":
            return TableLookup(tuple(d["parents"]), _table_in(d["table"], False))
        if kind == "tolerance_check":
            return ToleranceCheck(d["monitored"], d["ltl"], d["utl"])
        if kind == "logical_and":
            return LogicalAnd(tuple(d["parents"]))
        if kind == "sum":
            return Sum(tuple(d["parents"]))
        if kind == "max":
            return Max(tuple(d["parents"]))
        if kind == "relu":
            return Relu(d["parent"])
        if kind == "noise":
            return ExogenousNoise(dist_from_dict(d["distribution"]))
        if kind == "affine_mix":
            return AffineMix(d["beta"], d["hi"], d["lo"])
    except KeyError as exc:
        raise FormatError(f"mechanism {kind!r} missing field {exc}") from None
    raise FormatError(f"unknown mechanism kind {kind!r}")


def graph_to_dict(graph: ScmGraph) -> dict:
    return {
        "format": GRAPH_FORMAT,
        "name": graph.name,
        "version": graph.version,
        "nodes": [
            {"id": n.id, "name": n.name, "domain": domain_to_dict(n.domain),
             "visibility": n.visibility.value, "parameter": n.parameter,
             "mechanism": mechanism_to_dict(n.mechanism)}
            for n in graph.nodes
        ],
    }


def graph_from_dict(d: dict) -> ScmGraph:
    if d.get("format") != GRAPH_FORMAT:
        raise FormatError("not a causalman graph document")
    try:
        nodes = tuple(
            NodeSpec(int(n["id"]), n["name"], domain_from_dict(n["domain"]),
                     Visibility(n["visibility"]), mechanism_from_dict(n["mechanism"]),
                     bool(n.get("parameter", False)))
            for n in d["nodes"]
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"malformed graph document: {exc}") from None
    return ScmGraph(nodes, d.get("name", "scm"), str(d.get("version", "1")))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def fingerprint(graph: ScmGraph) -> str:
    """Stable content hash of the serialized graph."""
    return hashlib.sha256(canonical_json(graph_to_dict(graph)).encode()).hexdigest()


def intervention_to_dict(graph: ScmGraph, iv: scm.Intervention) -> dict:
    name = graph.node(iv.target).name
    if isinstance(iv, HardIntervention):
        return {"target": name, "value": iv.value}
    return {"target": name, "mechanism": mechanism_to_dict(iv.mechanism)}


def intervention_from_dict(graph: ScmGraph, d: dict) -> scm.Intervention:
    target = graph.node(d["target"]).id
    if "mechanism" in d:
        return SoftIntervention(target, mechanism_from_dict(d["mechanism"]))
    if "value" not in d:
        raise FormatError("intervention needs 'value' or 'mechanism'")
    return HardIntervention(target, d["value"])

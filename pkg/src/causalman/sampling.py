"""Batch-wise ancestral sampling with counter-addressed noise.

Every random draw is addressed by ``(master_seed, batch_id, node_id, slot)``
plus the row index: the key selects a Philox stream and row ``i`` consumes
exactly the ``i``-th 64-bit word of it. Uniforms are mapped through inverse
CDFs, never through rejection samplers, so the word-per-row contract holds
for every distribution. Outputs therefore depend only on
``(graph, schedule, master_seed)``, not on batch composition, evaluation
order, or worker count.
"""

from __future__ import annotations

import os
from itertools import product
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import physics
from .physics import FORMULAS
from .scm import (AffineMix, Boolean, Categorical, CategoricalDist, ConditionalCategorical,
                  ConditionalGaussian, Continuous, Discrete, Domain, ExogenousNoise, Gaussian,
                  GraphError, HalfNormal, HardIntervention, Intervention, LogicalAnd, Max,
                  PhysicsFormula, PointMass, Relu, ScmGraph, Sum, TableLookup, ToleranceCheck,
                  TruncatedGaussian, Uniform, Visibility, coerce_value, domain_values, intervene,
                  topological_order, validate)
from .serialize import fingerprint, intervention_to_dict

ROW_SLOT = 0
PARAM_SLOT = 1

# ---------------------------------------------------------------------------
# Noise streams


def uniforms(master_seed: int, batch_id: int, node_id: int, n: int, slot: int = ROW_SLOT,
             start: int = 0) -> np.ndarray:
    """Open-interval uniforms for rows ``start .. start+n-1`` of one stream."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(batch_id, node_id, slot))
    bg = np.random.Philox(key=ss.generate_state(2, np.uint64))
    if start:
        # Philox emits 4 words per counter step.
        q, r = divmod(start, 4)
        bg.advance(q)
        if r:
            bg.random_raw(r)
    raw = bg.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def _dtype(domain: Domain):
    if isinstance(domain, Continuous):
        return np.float64
    if isinstance(domain, Boolean):
        return np.bool_
    return np.int64


def encode(domain: Domain, value: Any):
    """Canonical value -> array representation (label -> code)."""
    v = coerce_value(domain, value)
    if isinstance(domain, Categorical):
        return domain.labels.index(v)
    return v


def decode(domain: Domain, x: Any):
    if isinstance(domain, Categorical):
        return domain.labels[int(x)]
    if isinstance(domain, Boolean):
        return bool(x)
    if isinstance(domain, Discrete):
        return int(x)
    return float(x)


def _draw(dist, domain: Domain, u: np.ndarray) -> np.ndarray:
    n = len(u)
    if isinstance(dist, PointMass):
        return np.full(n, encode(domain, dist.value), dtype=_dtype(domain))
    if isinstance(dist, Gaussian):
        return dist.mu + dist.sigma * ndtri(u)
    if isinstance(dist, TruncatedGaussian):
        return _truncated(dist.mu, dist.sigma, dist.lower, u)
    if isinstance(dist, HalfNormal):
        return -dist.sigma * ndtri(0.5 * u)
    if isinstance(dist, Uniform):
        return dist.lo + (dist.hi - dist.lo) * u
    if isinstance(dist, CategoricalDist):
        cum = np.cumsum(dist.probabilities)
        codes = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        return codes.astype(_dtype(domain))
    raise TypeError(f"unknown distribution {dist!r}")


def _truncated(mu, sigma, lower, u):
    # Upper-tail inversion: P(Z > z) = u * P(Z > a), accurate for a far in either tail.
    a = (lower - mu) / sigma
    z = -ndtri(u * ndtr(-a))
    return np.maximum(mu + sigma * z, lower)


# ---------------------------------------------------------------------------
# Mechanism evaluation


def _table_index(graph: ScmGraph, parent_ids, values) -> tuple[np.ndarray, dict[tuple, int]]:
    """Mixed-radix row index into a table over the parents' joint domain."""
    domains = [graph.nodes[p].domain for p in parent_ids]
    cards = [len(domain_values(d)) for d in domains]
    idx = None
    for p, card in zip(parent_ids, cards):
        codes = values[p].astype(np.int64)
        idx = codes if idx is None else idx * card + codes
    key_pos = {}
    strides = np.cumprod([1] + cards[::-1])[::-1][1:]
    for key in _keys(domains):
        key_pos[key] = int(sum(encode(d, k) * s for d, k, s in zip(domains, key, strides)))
    return idx, key_pos


def _keys(domains):
    return product(*(domain_values(d) for d in domains))


def _lookup_arrays(graph, mech, values, width):
    idx, key_pos = _table_index(graph, mech.parents, values)
    domains = [graph.nodes[p].domain for p in mech.parents]
    table = np.empty((len(key_pos), width) if width else len(key_pos), dtype=object)
    for key, entry in mech.table:
        canon = tuple(coerce_value(d, k) for d, k in zip(domains, key))
        table[key_pos[canon]] = entry if not width else list(entry)
    return idx, table


def evaluate_node(graph: ScmGraph, node_id: int, values: Mapping[int, np.ndarray], n: int,
                  master_seed: int, batch_id: int, slot: int = ROW_SLOT) -> np.ndarray:
    spec = graph.nodes[node_id]
    mech = spec.mechanism
    dom = spec.domain

    def u():
        return uniforms(master_seed, batch_id, node_id, n, slot)

    if isinstance(mech, ExogenousNoise):
        if isinstance(mech.distribution, PointMass):
            return _draw(mech.distribution, dom, np.empty(n))
        return _draw(mech.distribution, dom, u())
    if isinstance(mech, PhysicsFormula):
        kwargs = {role: values[pid] for role, pid in mech.bindings}
        kwargs.update(dict(mech.constants))
        out = np.asarray(FORMULAS[mech.formula].fn(**kwargs), dtype=np.float64)
        out = np.broadcast_to(out, (n,)).copy() if out.shape != (n,) else out
        if mech.noise is not None:
            out = out + _draw(mech.noise, dom, u())
        return out
    if isinstance(mech, ConditionalGaussian):
        idx, table = _lookup_arrays(graph, mech, values, 2)
        params = np.array(table.tolist(), dtype=np.float64)
        mu, sigma = params[idx, 0], params[idx, 1]
        if mech.lower is None:
            return mu + sigma * ndtri(u())
        return _truncated(mu, sigma, mech.lower, u())
    if isinstance(mech, ConditionalCategorical):
        idx, table = _lookup_arrays(graph, mech, values, len(domain_values(dom)))
        cum = np.cumsum(np.array(table.tolist(), dtype=np.float64), axis=1)[idx]
        codes = np.minimum((u()[:, None] >= cum).sum(axis=1), cum.shape[1] - 1)
        return codes.astype(_dtype(dom))
    if isinstance(mech, TableLookup):
        idx, table = _lookup_arrays(graph, mech, values, 0)
        enc = np.array([encode(dom, v) for v in table], dtype=_dtype(dom))
        return enc[idx]
    if isinstance(mech, ToleranceCheck):
        # An intervened window may end up empty (ltl > utl); nothing passes it.
        x = values[mech.monitored]
        return (values[mech.ltl] <= x) & (x <= values[mech.utl])
    if isinstance(mech, LogicalAnd):
        return physics.process_result([values[p] for p in mech.parents])
    if isinstance(mech, Sum):
        out = np.zeros(n)
        for p in mech.parents:
            out = out + values[p]
        return out
    if isinstance(mech, Max):
        return np.maximum.reduce([values[p] for p in mech.parents]).astype(np.float64)
    if isinstance(mech, Relu):
        return np.maximum(values[mech.parent], 0.0)
    if isinstance(mech, AffineMix):
        return mech.beta * values[mech.hi] + (1.0 - mech.beta) * values[mech.lo]
    raise TypeError(f"unknown mechanism {type(mech).__name__}")


def _ancestral(graph: ScmGraph, n: int, master_seed: int, batch_id: int,
               order: Iterable[int] | None = None, slot: int = ROW_SLOT) -> dict[int, np.ndarray]:
    values: dict[int, np.ndarray] = {}
    for v in (order if order is not None else topological_order(graph)):
        values[v] = evaluate_node(graph, v, values, n, master_seed, batch_id, slot)
    return values


# ---------------------------------------------------------------------------
# Datasets


@dataclass(frozen=True)
class Column:
    name: str
    domain: Domain
    visibility: Visibility


@dataclass
class Dataset:
    """Column-typed sample table.

    ``data`` holds one array per column: float64 for continuous, bool for
    boolean, int64 for discrete, and int64 label codes for categorical.
    """

    columns: list[Column]
    data: dict[str, np.ndarray]
    batch_ids: np.ndarray
    seed: int
    fingerprint: str
    metadata: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.batch_ids)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"unknown column {name!r}")

    def values(self, name: str) -> np.ndarray:
        """Decoded column: labels for categoricals, raw arrays otherwise."""
        col = self.column(name)
        arr = self.data[name]
        if isinstance(col.domain, Categorical):
            return np.asarray(col.domain.labels, dtype=object)[arr]
        return arr

    def numeric(self, name: str) -> np.ndarray:
        """Column as float64 (codes for categoricals, 1/0 for booleans)."""
        return self.data[name].astype(np.float64)

    def row(self, i: int) -> dict[str, Any]:
        return {c.name: decode(c.domain, self.data[c.name][i]) for c in self.columns}

    def select_rows(self, mask: np.ndarray) -> Dataset:
        return Dataset(list(self.columns), {k: v[mask] for k, v in self.data.items()},
                       self.batch_ids[mask], self.seed, self.fingerprint, dict(self.metadata))

    def to_pandas(self):
        import pandas as pd
        frame = pd.DataFrame({c.name: self.values(c.name) for c in self.columns})
        frame["batch_id"] = self.batch_ids
        return frame


# ---------------------------------------------------------------------------
# Batches


@dataclass(frozen=True)
class BatchConfig:
    batch_id: int
    n_samples: int
    parametrization: Mapping[int | str, Any] = field(default_factory=dict)
    interventions: Sequence[Intervention] = ()

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.batch_id < 0:
            raise ValueError("batch_id must be non-negative")


def parametrize(graph: ScmGraph, batch: BatchConfig, master_seed: int) -> ScmGraph:
    """Fix every parameter node to one value for the batch.

    Pinned values come from ``batch.parametrization``; the remaining parameter
    nodes are drawn once from their own mechanisms on the per-batch stream.
    """
    pinned: dict[int, Any] = {}
    for key, value in batch.parametrization.items():
        spec = graph.node(key)
        if not spec.parameter:
            raise GraphError(f"{spec.name} is not a parameter node")
        pinned[spec.id] = coerce_value(spec.domain, value)
    param_ids = [v for v in topological_order(graph) if graph.nodes[v].parameter]
    if not param_ids:
        return graph
    g = graph
    for v in param_ids:
        spec = g.nodes[v]
        if v in pinned:
            value = pinned[v]
        else:
            drawn = evaluate_node(g, v, _param_values(g, param_ids, v), 1,
                                  master_seed, batch.batch_id, PARAM_SLOT)
            value = decode(spec.domain, drawn[0])
        g = g.with_node(replace(spec, mechanism=ExogenousNoise(PointMass(value))))
    return g


def _param_values(g: ScmGraph, param_ids, upto):
    out = {}
    for v in param_ids:
        if v == upto:
            break
        mech = g.nodes[v].mechanism
        out[v] = np.array([encode(g.nodes[v].domain, mech.distribution.value)],
                          dtype=_dtype(g.nodes[v].domain))
    return out


def prepare_batch_graph(graph: ScmGraph, batch: BatchConfig, master_seed: int) -> ScmGraph:
    g = parametrize(graph, batch, master_seed)
    for iv in batch.interventions:
        g = intervene(g, iv)
    if batch.interventions and any(not isinstance(iv, HardIntervention) for iv in batch.interventions):
        validate(g).raise_if_invalid()
    return g


def _columns(graph: ScmGraph) -> list[Column]:
    return [Column(n.name, n.domain, n.visibility) for n in graph.nodes]


def _batch_values(graph, batch, master_seed, order):
    g = prepare_batch_graph(graph, batch, master_seed)
    # Hard surgery only removes edges, so the base order stays valid.
    o = order if all(isinstance(iv, HardIntervention) for iv in batch.interventions) else None
    return _ancestral(g, batch.n_samples, master_seed, batch.batch_id, o)


def _batch_meta(graph, batch):
    return {"batch_id": batch.batch_id, "n_samples": batch.n_samples,
            "interventions": [intervention_to_dict(graph, iv) for iv in batch.interventions]}


def sample_batch(graph: ScmGraph, batch: BatchConfig, master_seed: int) -> Dataset:
    """Sample one batch: parametrize, intervene, then ancestral sampling."""
    values = _batch_values(graph, batch, master_seed, topological_order(graph))
    data = {graph.nodes[v].name: values[v] for v in range(len(graph.nodes))}
    return Dataset(_columns(graph), data, np.full(batch.n_samples, batch.batch_id, dtype=np.int64),
                   master_seed, fingerprint(graph), {"batches": [_batch_meta(graph, batch)]})


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CAUSALMAN_THREADS", "1")))
    except ValueError:
        return 1


def sample_schedule(graph: ScmGraph, batches: Sequence[BatchConfig], master_seed: int,
                    threads: int | None = None) -> Dataset:
    """Concatenate per-batch samples in schedule order.

    Output arrays are preallocated, so peak memory is the final table plus
    ``threads`` batches in flight.
    """
    ids = [b.batch_id for b in batches]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate batch ids in schedule")
    threads = default_threads() if threads is None else max(1, threads)
    order = topological_order(graph)
    total = sum(b.n_samples for b in batches)
    cols = _columns(graph)
    data = {c.name: np.empty(total, dtype=_dtype(c.domain)) for c in cols}
    batch_ids = np.empty(total, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum([b.n_samples for b in batches])]).astype(int)

    def run(i):
        b = batches[i]
        values = _batch_values(graph, b, master_seed, order)
        lo, hi = offsets[i], offsets[i + 1]
        for v, c in enumerate(cols):
            data[c.name][lo:hi] = values[v]
        batch_ids[lo:hi] = b.batch_id

    if threads == 1:
        for i in range(len(batches)):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(len(batches))))
    meta = {"batches": [_batch_meta(graph, b) for b in batches]}
    return Dataset(cols, data, batch_ids, master_seed, fingerprint(graph), meta)


def observe(dataset: Dataset) -> Dataset:
    """Drop latent columns, keeping rows and batch ids."""
    keep = [c for c in dataset.columns if c.visibility is Visibility.OBSERVABLE]
    return Dataset(keep, {c.name: dataset.data[c.name] for c in keep}, dataset.batch_ids,
                   dataset.seed, dataset.fingerprint, dict(dataset.metadata))


def empirical_distribution(dataset: Dataset, column: str, bins: int | None = None) -> np.ndarray:
    """Normalized histogram of one column.

    Finite domains use one cell per domain value in code order (False, True
    for booleans). Continuous columns need ``bins`` equal-width cells over
    the observed range; cells are right-closed, except the first, which also
    takes the minimum. A constant column puts all mass in the first cell.
    """
    if dataset.n_rows == 0:
        raise ValueError("empty dataset")
    col = dataset.column(column)
    arr = dataset.data[column]
    if not isinstance(col.domain, Continuous):
        k = len(domain_values(col.domain))
        counts = np.bincount(arr.astype(np.int64), minlength=k).astype(np.float64)
        return counts / counts.sum()
    if bins is None or bins < 1:
        raise ValueError("bins required for continuous columns")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        idx = np.zeros(len(arr), dtype=np.int64)
    else:
        width = (hi - lo) / bins
        idx = np.clip(np.ceil((arr - lo) / width).astype(np.int64) - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    return counts / counts.sum()

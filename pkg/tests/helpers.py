"""Small graph builders shared by the tests."""

from __future__ import annotations

import itertools

import numpy as np

from causalman.scm import (Boolean, Categorical, CategoricalDist, ConditionalCategorical, Continuous,
                           ExogenousNoise, Gaussian, LogicalAnd, NodeSpec, PointMass, ScmGraph,
                           Sum, Visibility)

OBS, LAT = Visibility.OBSERVABLE, Visibility.LATENT


def dag(names, edges, latent=()):
    """Continuous DAG: roots are N(0, 1) noise, other nodes sum their parents."""
    idx = {n: i for i, n in enumerate(names)}
    pa = {n: [] for n in names}
    for a, b in edges:
        pa[b].append(idx[a])
    nodes = []
    for i, n in enumerate(names):
        mech = Sum(tuple(pa[n])) if pa[n] else ExogenousNoise(Gaussian(0.0, 1.0))
        nodes.append(NodeSpec(i, n, Continuous(), LAT if n in latent else OBS, mech))
    return ScmGraph(tuple(nodes))


def random_dag(rng: np.random.Generator, max_nodes=8, p=None):
    n = int(rng.integers(2, max_nodes + 1))
    names = [f"V{i}" for i in range(n)]
    p = rng.uniform(0.15, 0.6) if p is None else p
    perm = rng.permutation(n)
    edges = [(names[perm[i]], names[perm[j]]) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    latent = {nm for nm in names if rng.random() < 0.35}
    return dag(names, edges, latent)


def bool_node(i, name, p_true, vis=OBS):
    return NodeSpec(i, name, Boolean(), vis, ExogenousNoise(CategoricalDist((1 - p_true, p_true))))


def and_graph(p1=0.7, p2=0.6):
    """Two independent flags feeding an AND."""
    return ScmGraph((bool_node(0, "F1", p1), bool_node(1, "F2", p2),
                     NodeSpec(2, "Y", Boolean(), OBS, LogicalAnd((0, 1)))))


def discrete4():
    """A -> B -> C, A -> D <- C over small categorical domains, with exact tables."""
    ab = Categorical(("a0", "a1"))
    bb = Categorical(("b0", "b1", "b2"))
    cb = Categorical(("c0", "c1"))
    db = Categorical(("d0", "d1"))
    pa = (0.3, 0.7)
    pb = {("a0",): (0.2, 0.5, 0.3), ("a1",): (0.6, 0.1, 0.3)}
    pc = {("b0",): (0.9, 0.1), ("b1",): (0.25, 0.75), ("b2",): (0.5, 0.5)}
    pd = {k: (q, 1 - q) for k, q in zip(itertools.product(ab.labels, cb.labels), (0.1, 0.4, 0.8, 0.65))}
    nodes = (
        NodeSpec(0, "A", ab, OBS, ExogenousNoise(CategoricalDist(pa))),
        NodeSpec(1, "B", bb, OBS, ConditionalCategorical((0,), tuple(pb.items()))),
        NodeSpec(2, "C", cb, OBS, ConditionalCategorical((1,), tuple(pc.items()))),
        NodeSpec(3, "D", db, OBS, ConditionalCategorical((0, 2), tuple(pd.items()))),
    )
    return ScmGraph(nodes), dict(pa=pa, pb=pb, pc=pc, pd=pd)


def point_chain():
    return ScmGraph((
        NodeSpec(0, "A", Continuous(), OBS, ExogenousNoise(PointMass(2.0))),
        NodeSpec(1, "B", Continuous(), OBS, Sum((0,))),
        NodeSpec(2, "C", Continuous(), OBS, Sum((0, 1))),
    ))

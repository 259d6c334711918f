"""Latent projection of a DAG onto its observables, plus d-/m-separation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .scm import ScmGraph, topological_order


@dataclass(frozen=True)
class Admg:
    """Acyclic directed mixed graph over named nodes.

    Bidirected pairs are stored as 2-tuples sorted by node position.
    """

    nodes: tuple[str, ...]
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[tuple[str, str]]

    def __post_init__(self):
        pos = {n: i for i, n in enumerate(self.nodes)}
        for a, b in self.directed | self.bidirected:
            if a == b:
                raise ValueError(f"self-edge on {a}")
            if a not in pos or b not in pos:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
        object.__setattr__(self, "bidirected",
                           frozenset(tuple(sorted(p, key=pos.__getitem__)) for p in self.bidirected))

    def adjacent_pairs(self) -> set[frozenset]:
        return {frozenset(e) for e in self.directed} | {frozenset(e) for e in self.bidirected}

    def parents(self, node: str) -> set[str]:
        return {a for a, b in self.directed if b == node}

    def ancestors(self, nodes: Iterable[str]) -> set[str]:
        pa: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.directed:
            pa[b].append(a)
        return _closure(nodes, pa)


def _closure(start: Iterable, nbrs: dict) -> set:
    seen = set(start)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def latent_project(graph: ScmGraph) -> Admg:
    """Marginalize latent nodes out of ``graph``.

    a -> b  iff a directed path a => b exists whose intermediates are latent;
    a <-> b iff some latent node reaches both a and b along directed paths
    with latent intermediates.
    """
    observable = {n.id for n in graph.nodes if n.visibility.value == "observable"}
    kids = graph.children_map
    # reach[v]: observables reachable from v through latent-only intermediates
    reach: dict[int, set[int]] = {}
    for v in reversed(topological_order(graph)):
        r: set[int] = set()
        for c in kids[v]:
            if c in observable:
                r.add(c)
            else:
                r |= reach[c]
        reach[v] = r
    name = [n.name for n in graph.nodes]
    directed = {(name[a], name[b]) for a in observable for b in reach[a]}
    bidirected = set()
    for v in range(len(graph.nodes)):
        if v in observable or len(reach[v]) < 2:
            continue
        for a, b in combinations(sorted(reach[v]), 2):
            bidirected.add((name[a], name[b]))
    nodes = tuple(name[i] for i in sorted(observable))
    return Admg(nodes, frozenset(directed), frozenset(bidirected))


def _as_names(graph: ScmGraph, nodes) -> set[str]:
    return {graph.node(x).name for x in nodes}


def _check_disjoint(x, y, z):
    if x & y or x & z or y & z:
        raise ValueError("x, y and z must be disjoint")
    if not x or not y:
        raise ValueError("x and y must be non-empty")


def d_separated(graph: ScmGraph, x: Iterable, y: Iterable, z: Iterable = ()) -> bool:
    """d-separation via the moralized ancestral graph.

    Nodes may be given by id or name.
    """
    xs, ys, zs = _as_names(graph, x), _as_names(graph, y), _as_names(graph, z)
    _check_disjoint(xs, ys, zs)
    name = [n.name for n in graph.nodes]
    pa = {n: [] for n in name}
    for a, b in graph.edges:
        pa[name[b]].append(name[a])
    anc = _closure(xs | ys | zs, pa)
    moral: dict[str, set[str]] = {v: set() for v in anc}
    for v in anc:
        ps = pa[v]
        for p in ps:
            moral[v].add(p)
            moral[p].add(v)
        for p, q in combinations(ps, 2):
            moral[p].add(q)
            moral[q].add(p)
    seen = set(xs)
    queue = deque(xs)
    while queue:
        v = queue.popleft()
        for w in moral[v]:
            if w in zs or w in seen:
                continue
            if w in ys:
                return False
            seen.add(w)
            queue.append(w)
    return True


def m_separated(admg: Admg, x: Iterable[str], y: Iterable[str], z: Iterable[str] = ()) -> bool:
    """m-separation by reachability over (node, arrowhead-at-node) states.

    A collider passes iff it is an ancestor of (or in) z; a non-collider
    passes iff it is not in z. Bidirected edges carry arrowheads at both ends.
    """
    xs, ys, zs = set(x), set(y), set(z)
    _check_disjoint(xs, ys, zs)
    unknown = (xs | ys | zs) - set(admg.nodes)
    if unknown:
        raise KeyError(f"unknown nodes {sorted(unknown)}")
    an_z = admg.ancestors(zs)
    # incident[v]: (w, arrowhead at v, arrowhead at w)
    incident: dict[str, list[tuple[str, bool, bool]]] = {n: [] for n in admg.nodes}
    for a, b in admg.directed:
        incident[a].append((b, False, True))
        incident[b].append((a, True, False))
    for a, b in admg.bidirected:
        incident[a].append((b, True, True))
        incident[b].append((a, True, True))

    seen: set[tuple[str, bool]] = set()
    queue: deque[tuple[str, bool]] = deque()
    for s in xs:
        for w, _, head_w in incident[s]:
            if (w, head_w) not in seen:
                seen.add((w, head_w))
                queue.append((w, head_w))
    while queue:
        v, head_v = queue.popleft()
        if v in ys:
            return False
        for w, head_here, head_w in incident[v]:
            collider = head_v and head_here
            if (v in an_z) if collider else (v not in zs):
                if (w, head_w) not in seen:
                    seen.add((w, head_w))
                    queue.append((w, head_w))
    return True

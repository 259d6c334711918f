"""Typed structural causal models over mixed domains.

A graph is a list of :class:`NodeSpec`, each carrying exactly one mechanism.
Edges are never stored: they are read off the parent references of the
mechanisms, so graph surgery only ever touches mechanisms.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from itertools import product
from typing import Any, Union

# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Continuous:
    unit: str = ""


@dataclass(frozen=True)
class Boolean:
    pass


@dataclass(frozen=True)
class Discrete:
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError("Discrete cardinality must be positive")


@dataclass(frozen=True)
class Categorical:
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))


Domain = Union[Continuous, Boolean, Discrete, Categorical]


def is_finite_domain(domain: Domain) -> bool:
    return not isinstance(domain, Continuous)


def cardinality(domain: Domain) -> int:
    if isinstance(domain, Boolean):
        return 2
    if isinstance(domain, Discrete):
        return domain.cardinality
    if isinstance(domain, Categorical):
        return len(domain.labels)
    raise TypeError("continuous domains have no cardinality")


def domain_values(domain: Domain) -> list:
    """Canonical values of a finite domain, in code order."""
    if isinstance(domain, Boolean):
        return [False, True]
    if isinstance(domain, Discrete):
        return list(range(domain.cardinality))
    if isinstance(domain, Categorical):
        return list(domain.labels)
    raise TypeError("continuous domains are not enumerable")


class DomainError(ValueError):
    """A value does not belong to a node's domain."""


def coerce_value(domain: Domain, value: Any) -> Any:
    """Return ``value`` in the canonical form of ``domain`` or raise DomainError.

    Canonical forms: float for Continuous, bool for Boolean, int for Discrete,
    label string for Categorical.
    """
    if isinstance(domain, Continuous):
        if isinstance(value, bool):
            raise DomainError(f"boolean {value!r} is not a continuous value")
        try:
            x = float(value)
        except (TypeError, ValueError):
            raise DomainError(f"{value!r} is not a real number") from None
        if not math.isfinite(x):
            raise DomainError(f"{value!r} is not finite")
        return x
    if isinstance(domain, Boolean):
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("true", "1"):
                return True
            if low in ("false", "0"):
                return False
            raise DomainError(f"{value!r} is not a boolean")
        if isinstance(value, (bool, int)) or (isinstance(value, float) and value.is_integer()):
            if value in (0, 1):
                return bool(value)
        raise DomainError(f"{value!r} is not a boolean")
    if isinstance(domain, Discrete):
        try:
            x = float(value)
        except (TypeError, ValueError):
            raise DomainError(f"{value!r} is not an integer") from None
        if isinstance(value, bool) or not x.is_integer() or not 0 <= x < domain.cardinality:
            raise DomainError(f"{value!r} outside 0..{domain.cardinality - 1}")
        return int(x)
    if isinstance(domain, Categorical):
        label = str(value)
        if label not in domain.labels:
            raise DomainError(f"{value!r} not among labels {list(domain.labels)}")
        return label
    raise TypeError(f"unknown domain {domain!r}")


class Visibility(str, Enum):
    OBSERVABLE = "observable"
    LATENT = "latent"


# ---------------------------------------------------------------------------
# Distributions


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Gaussian sigma must be > 0")


@dataclass(frozen=True)
class TruncatedGaussian:
    mu: float
    sigma: float
    lower: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("TruncatedGaussian sigma must be > 0")


@dataclass(frozen=True)
class HalfNormal:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("HalfNormal sigma must be > 0")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("Uniform requires lo < hi")


@dataclass(frozen=True)
class PointMass:
    value: Any


@dataclass(frozen=True)
class CategoricalDist:
    probabilities: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if not probs or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")


Distribution = Union[Gaussian, TruncatedGaussian, HalfNormal, Uniform, PointMass, CategoricalDist]

# ---------------------------------------------------------------------------
# Mechanisms
#
# Parent references are node ids. ``parent_ids`` returns them in role order,
# which is also the order reported by ``ScmGraph.parents``.


@dataclass(frozen=True)
class PhysicsFormula:
    """A closed-form press-fit equation.

    ``bindings`` maps formula roles to parent node ids, ``constants`` maps the
    remaining roles to fixed numbers (machine settings). ``noise`` is an
    optional additive disturbance on the formula output.
    """

    formula: str
    bindings: tuple[tuple[str, int], ...]
    constants: tuple[tuple[str, float], ...] = ()
    noise: Distribution | None = None

    def parent_ids(self) -> tuple[int, ...]:
        return tuple(pid for _, pid in self.bindings)


@dataclass(frozen=True)
class ConditionalGaussian:
    """Gaussian whose (mu, sigma) is selected by the joint value of finite parents.

    Table keys are tuples of canonical parent values in ``parents`` order.
    """

    parents: tuple[int, ...]
    table: tuple[tuple[tuple, tuple[float, float]], ...]
    lower: float | None = None

    def parent_ids(self) -> tuple[int, ...]:
        return self.parents


@dataclass(frozen=True)
class ConditionalCategorical:
    parents: tuple[int, ...]
    table: tuple[tuple[tuple, tuple[float, ...]], ...]

    def parent_ids(self) -> tuple[int, ...]:
        return self.parents


@dataclass(frozen=True)
class TableLookup:
    """Deterministic value keyed by the joint value of finite parents."""

    parents: tuple[int, ...]
    table: tuple[tuple[tuple, Any], ...]

    def parent_ids(self) -> tuple[int, ...]:
        return self.parents


@dataclass(frozen=True)
class ToleranceCheck:
    monitored: int
    ltl: int
    utl: int

    def parent_ids(self) -> tuple[int, ...]:
        return (self.monitored, self.ltl, self.utl)


@dataclass(frozen=True)
class LogicalAnd:
    parents: tuple[int, ...]

    def parent_ids(self) -> tuple[int, ...]:
        return self.parents


@dataclass(frozen=True)
class Sum:
    parents: tuple[int, ...]

    def parent_ids(self) -> tuple[int, ...]:
        return self.parents


@dataclass(frozen=True)
class Max:
    parents: tuple[int, ...]

    def parent_ids(self) -> tuple[int, ...]:
        return self.parents


@dataclass(frozen=True)
class Relu:
    parent: int

    def parent_ids(self) -> tuple[int, ...]:
        return (self.parent,)


@dataclass(frozen=True)
class ExogenousNoise:
    distribution: Distribution

    def parent_ids(self) -> tuple[int, ...]:
        return ()


@dataclass(frozen=True)
class AffineMix:
    """beta * hi + (1 - beta) * lo."""

    beta: float
    hi: int
    lo: int

    def parent_ids(self) -> tuple[int, ...]:
        return (self.hi, self.lo)


Mechanism = Union[
    PhysicsFormula,
    ConditionalGaussian,
    ConditionalCategorical,
    TableLookup,
    ToleranceCheck,
    LogicalAnd,
    Sum,
    Max,
    Relu,
    ExogenousNoise,
    AffineMix,
]

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class NodeSpec:
    id: int
    name: str
    domain: Domain
    visibility: Visibility
    mechanism: Mechanism
    # Batch-level parameter: constant within a batch, set by the batch
    # parametrization or drawn once per batch.
    parameter: bool = False


# ---------------------------------------------------------------------------
# Graph


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ScmGraph:
    nodes: tuple[NodeSpec, ...]
    name: str = "scm"
    version: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {n.name: n.id for n in self.nodes}

    def node(self, key: int | str) -> NodeSpec:
        if isinstance(key, str):
            if key not in self._index:
                raise KeyError(f"unknown node {key!r}")
            key = self._index[key]
        if not isinstance(key, int) or not 0 <= key < len(self.nodes):
            raise KeyError(f"unknown node id {key!r}")
        return self.nodes[key]

    def node_id(self, name: str) -> int:
        return self.node(name).id

    @property
    def names(self) -> list[str]:
        return [n.name for n in self.nodes]

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        out = []
        for n in self.nodes:
            seen = set()
            for p in n.mechanism.parent_ids():
                if p not in seen:
                    seen.add(p)
                    out.append((p, n.id))
        return tuple(out)

    @cached_property
    def children_map(self) -> dict[int, list[int]]:
        kids: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            if a in kids:
                kids[a].append(b)
        return kids

    def parent_map(self) -> dict[int, list[int]]:
        return {n.id: parents(self, n.id) for n in self.nodes}

    def latent_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.visibility is Visibility.LATENT]

    def observable_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.visibility is Visibility.OBSERVABLE]

    def with_node(self, spec: NodeSpec) -> ScmGraph:
        nodes = list(self.nodes)
        nodes[spec.id] = spec
        return ScmGraph(tuple(nodes), self.name, self.version)


def parents(graph: ScmGraph, node: int | str) -> list[int]:
    """Parent ids in mechanism role order, duplicates removed."""
    spec = graph.node(node)
    out: list[int] = []
    for p in spec.mechanism.parent_ids():
        if p not in out:
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)
    cycle: list[str] | None = None

    @property
    def ok(self) -> bool:
        return not self.issues

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self) -> None:
        if self.issues:
            raise GraphError("; ".join(self.issues))


def _find_cycle(graph: ScmGraph) -> list[int] | None:
    n = len(graph.nodes)
    kids = {i: [] for i in range(n)}
    for a, b in graph.edges:
        if 0 <= a < n:
            kids[a].append(b)
    color = [0] * n
    stack_path: list[int] = []
    for start in range(n):
        if color[start]:
            continue
        # iterative DFS keeping the gray path
        it_stack = [(start, iter(sorted(kids[start])))]
        color[start] = 1
        stack_path.append(start)
        while it_stack:
            v, it = it_stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[v] = 2
                stack_path.pop()
                it_stack.pop()
            elif color[nxt] == 1:
                return stack_path[stack_path.index(nxt):]
            elif color[nxt] == 0:
                color[nxt] = 1
                stack_path.append(nxt)
                it_stack.append((nxt, iter(sorted(kids[nxt]))))
    return None


def _check_table_keys(graph, spec, issues, keys, label):
    domains = [graph.nodes[p].domain for p in spec.mechanism.parents]
    if any(not is_finite_domain(d) for d in domains):
        issues.append(f"{spec.name}: {label} parents must have finite domains")
        return
    try:
        seen = {tuple(coerce_value(d, v) for d, v in zip(domains, k, strict=True)) for k in keys}
    except (DomainError, ValueError) as exc:
        issues.append(f"{spec.name}: bad {label} key ({exc})")
        return
    expected = set(product(*(domain_values(d) for d in domains)))
    missing = expected - seen
    if missing:
        issues.append(f"{spec.name}: incomplete table, {len(missing)} parent tuple(s) missing "
                      f"(e.g. {sorted(missing, key=str)[0]})")


def _check_distribution(spec: NodeSpec, dist: Distribution, issues: list[str]) -> None:
    dom = spec.domain
    if isinstance(dist, PointMass):
        try:
            coerce_value(dom, dist.value)
        except DomainError as exc:
            issues.append(f"{spec.name}: point mass outside domain ({exc})")
    elif isinstance(dist, CategoricalDist):
        if not is_finite_domain(dom):
            issues.append(f"{spec.name}: categorical distribution on continuous node")
        elif len(dist.probabilities) != cardinality(dom):
            issues.append(f"{spec.name}: probability vector length != domain cardinality")
    elif not isinstance(dom, Continuous):
        issues.append(f"{spec.name}: continuous distribution on non-continuous node")


def validate(graph: ScmGraph) -> ValidationReport:
    """Check every type invariant and acyclicity; never raises."""
    from .physics import FORMULAS

    report = ValidationReport()
    issues = report.issues
    n = len(graph.nodes)
    names: set[str] = set()
    for i, spec in enumerate(graph.nodes):
        if spec.id != i:
            issues.append(f"node at position {i} has id {spec.id}; ids must be dense 0..n-1")
        if not _NAME_RE.match(spec.name):
            issues.append(f"invalid node name {spec.name!r}")
        if spec.name in names:
            issues.append(f"duplicate node name {spec.name!r}")
        names.add(spec.name)
        if isinstance(spec.domain, Categorical):
            if not spec.domain.labels:
                issues.append(f"{spec.name}: empty label list")
            elif len(set(spec.domain.labels)) != len(spec.domain.labels):
                issues.append(f"{spec.name}: duplicate labels")
    if issues:
        return report

    for spec in graph.nodes:
        mech = spec.mechanism
        pids = mech.parent_ids()
        bad = [p for p in pids if not isinstance(p, int) or not 0 <= p < n]
        if bad:
            issues.append(f"{spec.name}: parent reference(s) {bad} do not exist")
            continue
        if spec.id in pids:
            issues.append(f"{spec.name}: self-loop")
        pdoms = [graph.nodes[p].domain for p in pids]
        dom = spec.domain

        if isinstance(mech, ExogenousNoise):
            _check_distribution(spec, mech.distribution, issues)
        elif isinstance(mech, PhysicsFormula):
            formula = FORMULAS.get(mech.formula)
            if formula is None:
                issues.append(f"{spec.name}: unknown formula {mech.formula!r}")
            else:
                bound = [r for r, _ in mech.bindings] + [r for r, _ in mech.constants]
                if sorted(bound) != sorted(formula.roles):
                    issues.append(f"{spec.name}: formula {mech.formula} roles {sorted(formula.roles)} "
                                  f"bound as {sorted(bound)}")
            if not isinstance(dom, Continuous) or any(not isinstance(d, Continuous) for d in pdoms):
                issues.append(f"{spec.name}: physics formulas are continuous-valued")
            if mech.noise is not None:
                _check_distribution(spec, mech.noise, issues)
        elif isinstance(mech, ConditionalGaussian):
            if not isinstance(dom, Continuous):
                issues.append(f"{spec.name}: ConditionalGaussian on non-continuous node")
            for _, (mu, sigma) in mech.table:
                if not sigma > 0 or not math.isfinite(mu):
                    issues.append(f"{spec.name}: table entry needs finite mu and sigma > 0")
                    break
            _check_table_keys(graph, spec, issues, [k for k, _ in mech.table], "ConditionalGaussian")
        elif isinstance(mech, ConditionalCategorical):
            if not is_finite_domain(dom):
                issues.append(f"{spec.name}: ConditionalCategorical on continuous node")
            else:
                for _, probs in mech.table:
                    if len(probs) != cardinality(dom) or any(p < 0 for p in probs) \
                            or abs(sum(probs) - 1.0) > 1e-9:
                        issues.append(f"{spec.name}: invalid probability vector {probs}")
                        break
            _check_table_keys(graph, spec, issues, [k for k, _ in mech.table], "ConditionalCategorical")
        elif isinstance(mech, TableLookup):
            for _, v in mech.table:
                try:
                    coerce_value(dom, v)
                except DomainError as exc:
                    issues.append(f"{spec.name}: lookup value outside domain ({exc})")
                    break
            _check_table_keys(graph, spec, issues, [k for k, _ in mech.table], "TableLookup")
        elif isinstance(mech, ToleranceCheck):
            if not isinstance(dom, Boolean):
                issues.append(f"{spec.name}: ToleranceCheck must be boolean")
            if any(not isinstance(d, Continuous) for d in pdoms):
                issues.append(f"{spec.name}: ToleranceCheck parents must be continuous")
        elif isinstance(mech, LogicalAnd):
            if not isinstance(dom, Boolean) or any(not isinstance(d, Boolean) for d in pdoms):
                issues.append(f"{spec.name}: LogicalAnd is boolean over boolean parents")
            if not pids:
                issues.append(f"{spec.name}: LogicalAnd needs at least one parent")
        elif isinstance(mech, (Sum, Max, Relu, AffineMix)):
            if not isinstance(dom, Continuous) or any(not isinstance(d, Continuous) for d in pdoms):
                issues.append(f"{spec.name}: {type(mech).__name__} is continuous over continuous parents")
            if isinstance(mech, Max) and not pids:
                issues.append(f"{spec.name}: Max needs at least one parent")
            if isinstance(mech, AffineMix) and not 0.0 <= mech.beta <= 1.0:
                issues.append(f"{spec.name}: AffineMix beta outside [0, 1]")
        else:
            issues.append(f"{spec.name}: unknown mechanism {type(mech).__name__}")

        if spec.parameter:
            nonparam = [graph.nodes[p].name for p in pids if not graph.nodes[p].parameter]
            if nonparam:
                issues.append(f"{spec.name}: parameter node depends on non-parameter nodes {nonparam}")

    cycle = _find_cycle(graph)
    if cycle is not None:
        report.cycle = [graph.nodes[i].name for i in cycle]
        issues.append("cycle: " + " -> ".join(report.cycle + [report.cycle[0]]))
    return report


def topological_order(graph: ScmGraph) -> list[int]:
    """Kahn's algorithm; ties broken by ascending node id."""
    indeg = {n.id: 0 for n in graph.nodes}
    for _, b in graph.edges:
        indeg[b] += 1
    heap = [i for i, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    kids = graph.children_map
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in kids[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(graph.nodes):
        raise GraphError("graph contains a cycle")
    return order


# ---------------------------------------------------------------------------
# Interventions


@dataclass(frozen=True)
class HardIntervention:
    target: int
    value: Any


@dataclass(frozen=True)
class SoftIntervention:
    target: int
    mechanism: Mechanism


Intervention = Union[HardIntervention, SoftIntervention]


def intervene(graph: ScmGraph, intervention: Intervention) -> ScmGraph:
    """Return a new graph with the target's structural equation replaced.

    Hard interventions install ``PointMass(value)``, which has no parents, so
    every incoming edge of the target disappears.
    """
    spec = graph.node(intervention.target)
    if isinstance(intervention, HardIntervention):
        value = coerce_value(spec.domain, intervention.value)
        mech: Mechanism = ExogenousNoise(PointMass(value))
    elif isinstance(intervention, SoftIntervention):
        mech = intervention.mechanism
    else:
        raise TypeError(f"not an intervention: {intervention!r}")
    return graph.with_node(replace(spec, mechanism=mech))


def hard(graph: ScmGraph, node: int | str, value: Any) -> HardIntervention:
    """Convenience constructor resolving node names."""
    return HardIntervention(graph.node(node).id, value)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalman.scm import (Boolean, Categorical, CategoricalDist, ConditionalGaussian, Continuous,
                           DomainError, ExogenousNoise, Gaussian, GraphError, HardIntervention,
                           LogicalAnd, NodeSpec, PointMass, ScmGraph, SoftIntervention, Sum,
                           ToleranceCheck, Visibility, coerce_value, hard, intervene, parents,
                           topological_order, validate)
from causalman.serialize import fingerprint, graph_from_dict, graph_to_dict

from helpers import LAT, OBS, and_graph, dag, random_dag


def test_validate_minimal_chain():
    report = validate(dag(["A", "B"], [("A", "B")]))
    assert report.ok and report.issues == []


def test_validate_two_cycle_names_nodes():
    g = ScmGraph((NodeSpec(0, "A", Continuous(), OBS, Sum((1,))),
                  NodeSpec(1, "B", Continuous(), OBS, Sum((0,)))))
    report = validate(g)
    assert not report.ok
    assert report.cycle == ["A", "B"]
    assert any(i.startswith("cycle: A -> B -> A") for i in report.issues)
    with pytest.raises(GraphError):
        report.raise_if_invalid()
    with pytest.raises(GraphError):
        topological_order(g)


def test_validate_incomplete_table():
    sup = Categorical(("S1", "S2"))
    g = ScmGraph((
        NodeSpec(0, "Supplier", sup, OBS, ExogenousNoise(CategoricalDist((0.5, 0.5)))),
        NodeSpec(1, "E", Continuous(), LAT, ConditionalGaussian((0,), ((("S1",), (1.0, 0.1)),))),
    ))
    report = validate(g)
    assert any("incomplete table" in i for i in report.issues)


@pytest.mark.parametrize("nodes, needle", [
    ((NodeSpec(0, "A", Continuous(), OBS, ExogenousNoise(Gaussian(0, 1))),
      NodeSpec(1, "A", Continuous(), OBS, Sum((0,)))), "duplicate node name"),
    ((NodeSpec(0, "A.b", Continuous(), OBS, ExogenousNoise(Gaussian(0, 1))),), "invalid node name"),
    ((NodeSpec(0, "A", Continuous(), OBS, Sum((0,))),), "self-loop"),
    ((NodeSpec(0, "A", Continuous(), OBS, Sum((3,))),), "do not exist"),
    ((NodeSpec(0, "C", Categorical(("x", "x")), OBS, ExogenousNoise(CategoricalDist((0.5, 0.5)))),),
     "duplicate labels"),
    ((NodeSpec(0, "F", Boolean(), OBS, ExogenousNoise(CategoricalDist((0.5, 0.5)))),
      NodeSpec(1, "Y", Boolean(), OBS, LogicalAnd(()))), "at least one parent"),
])
def test_validate_reports_invariant_violations(nodes, needle):
    report = validate(ScmGraph(nodes))
    assert any(needle in i for i in report.issues), report.issues


def test_validate_rejects_bad_probabilities():
    g = ScmGraph((NodeSpec(0, "F", Boolean(), OBS, ExogenousNoise(CategoricalDist((0.5, 0.5)))),))
    assert validate(g).ok
    with pytest.raises(ValueError):
        CategoricalDist((0.5, 0.6))


def test_topological_order_examples():
    assert topological_order(dag(["A", "B", "C"], [("A", "B"), ("B", "C")])) == [0, 1, 2]
    assert topological_order(dag(["A", "B", "C"], [("A", "B"), ("A", "C")])) == [0, 1, 2]
    assert topological_order(ScmGraph(())) == []
    # C has the lowest id but must wait for its parent
    g = dag(["C", "A", "B"], [("A", "C"), ("B", "A")])
    assert topological_order(g) == [2, 1, 0]


def test_parents_role_order():
    g = ScmGraph((
        NodeSpec(0, "UTL", Continuous(), OBS, ExogenousNoise(PointMass(2.0))),
        NodeSpec(1, "X", Continuous(), OBS, ExogenousNoise(Gaussian(0, 1))),
        NodeSpec(2, "LTL", Continuous(), OBS, ExogenousNoise(PointMass(-2.0))),
        NodeSpec(3, "Good", Boolean(), OBS, ToleranceCheck(1, 2, 0)),
    ))
    assert parents(g, 3) == [1, 2, 0]
    assert parents(g, "X") == []
    three = ScmGraph(tuple(NodeSpec(i, f"F{i}", Boolean(), OBS,
                                    ExogenousNoise(CategoricalDist((0.5, 0.5)))) for i in (0, 1, 2))
                     + (NodeSpec(3, "Y", Boolean(), OBS, LogicalAnd((2, 0, 1))),))
    assert parents(three, "Y") == [2, 0, 1]
    assert parents(three, "Y") == parents(three, "Y")
    with pytest.raises(KeyError):
        parents(three, 17)


def test_hard_intervention_removes_incoming_edges():
    g = dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    g2 = intervene(g, hard(g, "B", 1))
    assert parents(g2, "B") == []
    assert g2.node("B").mechanism == ExogenousNoise(PointMass(1.0))
    assert (0, 1) not in g2.edges and (1, 2) in g2.edges
    # the original is untouched
    assert (0, 1) in g.edges
    assert g2.node("A") == g.node("A") and g2.node("C") == g.node("C")
    assert validate(g2).ok


def test_soft_intervention_keeps_parents():
    g = dag(["A", "B"], [("A", "B")])
    g2 = intervene(g, SoftIntervention(1, Sum((0,))))
    assert g2.edges == ((0, 1),)
    g3 = intervene(g, SoftIntervention(1, ExogenousNoise(Gaussian(0.0, 5.0))))
    assert g3.edges == ()


def test_intervention_on_latent_stays_latent():
    g = dag(["A", "L", "B"], [("L", "A"), ("L", "B")], latent={"L"})
    g2 = intervene(g, HardIntervention("L", 3.0))
    assert g2.node("L").visibility is Visibility.LATENT


def test_intervention_domain_errors():
    g = and_graph()
    with pytest.raises(DomainError):
        intervene(g, hard(g, "F1", 0.5))
    with pytest.raises(KeyError):
        intervene(g, HardIntervention("nope", True))
    c = dag(["B"], [])
    with pytest.raises(DomainError):
        intervene(c, hard(c, "B", "banana"))


def test_hard_intervention_idempotent():
    g = dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    iv = hard(g, "B", 2.5)
    once = intervene(g, iv)
    assert intervene(once, iv) == once


@pytest.mark.parametrize("domain, value, want", [
    (Continuous(), "2.5", 2.5), (Boolean(), "true", True), (Boolean(), 0, False),
    (Categorical(("921", "935")), 921, "921")])
def test_coerce_value(domain, value, want):
    assert coerce_value(domain, value) == want


def test_serialization_round_trip(small_graph):
    for g in (dag(["A", "L", "B"], [("A", "L"), ("L", "B")], latent={"L"}), and_graph(), small_graph):
        back = graph_from_dict(graph_to_dict(g))
        assert back == g
        assert fingerprint(back) == fingerprint(g)


def test_fingerprint_sensitive_to_changes():
    g = dag(["A", "B"], [("A", "B")])
    g2 = intervene(g, hard(g, "A", 0.0))
    assert fingerprint(g) != fingerprint(g2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_intervene_preserves_validity_and_order_on_ancestral_subsets(seed):
    rng = np.random.default_rng(seed)
    g = random_dag(rng)
    order = topological_order(g)
    pos = {v: i for i, v in enumerate(order)}
    for a, b in g.edges:
        assert pos[a] < pos[b]
    # an ancestral subset keeps a consistent order
    target = int(rng.integers(len(g)))
    anc, stack = {target}, [target]
    while stack:
        for p in parents(g, stack.pop()):
            if p not in anc:
                anc.add(p)
                stack.append(p)
    sub = [v for v in order if v in anc]
    for v in sub:
        assert all(pos[p] < pos[v] for p in parents(g, v))
    g2 = intervene(g, hard(g, target, 1.0))
    assert validate(g2).ok

import itertools

import numpy as np
import pytest
from scipy import stats

from causalman.line import TYPE_NODE, default_schedule
from causalman.sampling import (BatchConfig, Column, Dataset, empirical_distribution, observe,
                                sample_batch, sample_schedule, uniforms)
from causalman.scm import (Boolean, Categorical, CategoricalDist, ConditionalGaussian, Continuous,
                           DomainError, ExogenousNoise, Gaussian, GraphError, HalfNormal,
                           HardIntervention, NodeSpec, ScmGraph, TruncatedGaussian, Uniform,
                           hard)

from helpers import LAT, OBS, and_graph, dag, discrete4, point_chain


def assert_same(a: Dataset, b: Dataset):
    assert a.names == b.names
    for n in a.names:
        np.testing.assert_array_equal(a.data[n], b.data[n])
    np.testing.assert_array_equal(a.batch_ids, b.batch_ids)


def test_point_mass_root_gives_identical_rows():
    ds = sample_batch(point_chain(), BatchConfig(0, 4), 1)
    assert ds.n_rows == 4
    assert ds.data["A"].tolist() == [2.0] * 4
    assert ds.data["B"].tolist() == [2.0] * 4
    assert ds.data["C"].tolist() == [4.0] * 4


def test_hard_intervention_column_constant():
    g = dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    ds = sample_batch(g, BatchConfig(0, 50, interventions=(hard(g, "B", 1),)), 3)
    assert np.all(ds.data["B"] == 1.0)
    np.testing.assert_array_equal(ds.data["C"], 1.0)
    assert np.std(ds.data["A"]) > 0


def test_sample_batch_deterministic():
    g = dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    b = BatchConfig(5, 100)
    assert_same(sample_batch(g, b, 11), sample_batch(g, b, 11))
    other = sample_batch(g, b, 12)
    assert not np.array_equal(other.data["A"], sample_batch(g, b, 11).data["A"])


def test_schedule_concatenation_and_independence():
    g = dag(["A", "B"], [("A", "B")])
    b0, b1 = BatchConfig(0, 3), BatchConfig(1, 3)
    both = sample_schedule(g, [b0, b1], 9)
    assert both.n_rows == 6
    assert both.batch_ids.tolist() == [0, 0, 0, 1, 1, 1]
    alone = sample_schedule(g, [b0], 9)
    assert_same(alone, both.select_rows(both.batch_ids == 0))
    assert_same(sample_batch(g, b1, 9), both.select_rows(both.batch_ids == 1))


def test_schedule_rejects_duplicate_ids():
    g = dag(["A"], [])
    with pytest.raises(ValueError):
        sample_schedule(g, [BatchConfig(0, 2), BatchConfig(0, 2)], 1)


def test_interventional_batch_mixed_with_observational():
    g = dag(["A", "B"], [("A", "B")])
    batches = [BatchConfig(0, 20), BatchConfig(1, 20, interventions=(hard(g, "B", 7.0),)),
               BatchConfig(2, 20)]
    ds = sample_schedule(g, batches, 4)
    b = ds.data["B"]
    assert np.all(b[ds.batch_ids == 1] == 7.0)
    assert not np.any(b[ds.batch_ids != 1] == 7.0)
    meta = ds.metadata["batches"]
    assert [len(m["interventions"]) for m in meta] == [0, 1, 0]


def test_thread_count_does_not_change_output(small_graph):
    sched = default_schedule(900, batch_size=100)
    assert_same(sample_schedule(small_graph, sched, 42, threads=1),
                sample_schedule(small_graph, sched, 42, threads=4))


def test_observe():
    g = dag(["A", "B"], [("A", "B")])
    ds = sample_batch(g, BatchConfig(0, 5), 0)
    assert observe(ds).names == ds.names
    allat = dag(["L1", "L2"], [("L1", "L2")], latent={"L1", "L2"})
    ds = sample_batch(allat, BatchConfig(3, 5), 0)
    obs = observe(ds)
    assert obs.names == [] and obs.n_rows == 5 and obs.batch_ids.tolist() == [3] * 5


def test_observe_small_preset(small_graph):
    ds = sample_batch(small_graph, BatchConfig(0, 10), 0)
    assert len(ds.names) == len(small_graph.nodes)
    obs = observe(ds)
    assert len(obs.names) == 53 and obs.n_rows == 10


def test_empirical_distribution_examples():
    cols = [Column("F", Boolean(), OBS), Column("X", Continuous(), OBS)]
    ds = Dataset(cols, {"F": np.array([True, True, False, False]), "X": np.array([3.0] * 4)},
                 np.zeros(4, dtype=np.int64), 0, "")
    np.testing.assert_allclose(empirical_distribution(ds, "F"), [0.5, 0.5])
    np.testing.assert_allclose(empirical_distribution(ds, "X", bins=4), [1.0, 0, 0, 0])
    ds = Dataset([Column("X", Continuous(), OBS)], {"X": np.array([0.0, 0.5, 1.0])},
                 np.zeros(3, dtype=np.int64), 0, "")
    np.testing.assert_allclose(empirical_distribution(ds, "X", bins=2), [2 / 3, 1 / 3])
    with pytest.raises(ValueError):
        empirical_distribution(ds, "X")
    empty = Dataset([Column("X", Continuous(), OBS)], {"X": np.array([])},
                    np.zeros(0, dtype=np.int64), 0, "")
    with pytest.raises(ValueError):
        empirical_distribution(empty, "X", bins=2)


def test_uniform_stream_offsets():
    full = uniforms(5, 2, 3, 13)
    for start in (1, 3, 4, 7):
        np.testing.assert_array_equal(uniforms(5, 2, 3, 13 - start, start=start), full[start:])
    assert np.all((full > 0) & (full < 1))
    assert not np.array_equal(full, uniforms(5, 2, 4, 13))
    assert not np.array_equal(full, uniforms(5, 3, 3, 13))


def test_rows_are_prefix_stable():
    # Row i only depends on word i of each stream, so a longer batch extends a shorter one.
    g = dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    short = sample_batch(g, BatchConfig(1, 10), 8)
    long = sample_batch(g, BatchConfig(1, 25), 8)
    assert_same(short, long.select_rows(slice(0, 10)))


@pytest.mark.parametrize("dist, ref", [
    (Gaussian(1.5, 2.0), stats.norm(1.5, 2.0)),
    (TruncatedGaussian(0.0, 1.0, 0.5), stats.truncnorm(0.5, np.inf)),
    (TruncatedGaussian(10.0, 1.0, 0.0), stats.norm(10.0, 1.0)),
    (HalfNormal(3.0), stats.halfnorm(scale=3.0)),
    (Uniform(-1.0, 4.0), stats.uniform(-1.0, 5.0)),
])
def test_distributions_match_reference_cdf(dist, ref):
    g = ScmGraph((NodeSpec(0, "X", Continuous(), OBS, ExogenousNoise(dist)),))
    x = sample_batch(g, BatchConfig(0, 20000), 123).data["X"]
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3


def test_categorical_frequencies():
    p = (0.1, 0.6, 0.3)
    g = ScmGraph((NodeSpec(0, "K", Categorical(("a", "b", "c")), OBS, ExogenousNoise(CategoricalDist(p))),))
    n = 50000
    freq = empirical_distribution(sample_batch(g, BatchConfig(0, n), 9), "K")
    for f, q in zip(freq, p):
        assert abs(f - q) < 4.5 * np.sqrt(q * (1 - q) / n)


def test_mutilated_graph_matches_enumeration():
    g, t = discrete4()
    n = 120_000
    ds = sample_batch(g, BatchConfig(0, n, interventions=(hard(g, "B", "b1"),)), 77)
    assert set(ds.values("B")) == {"b1"}
    # exact interventional joint of (A, C, D) under do(B = b1)
    a_lab, c_lab, d_lab = ("a0", "a1"), ("c0", "c1"), ("d0", "d1")
    for (ia, a), (ic, c), (id_, d) in itertools.product(enumerate(a_lab), enumerate(c_lab), enumerate(d_lab)):
        exact = t["pa"][ia] * t["pc"][("b1",)][ic] * t["pd"][(a, c)][id_]
        emp = np.mean((ds.values("A") == a) & (ds.values("C") == c) & (ds.values("D") == d))
        assert abs(emp - exact) < 4.5 * np.sqrt(exact * (1 - exact) / n), (a, c, d)
    # A and B are no longer connected: A keeps its marginal
    assert abs(np.mean(ds.values("A") == "a1") - 0.7) < 4.5 * np.sqrt(0.21 / n)


def test_observational_discrete_matches_enumeration():
    g, t = discrete4()
    n = 120_000
    ds = sample_batch(g, BatchConfig(0, n), 78)
    b_lab = ("b0", "b1", "b2")
    for ib, b in enumerate(b_lab):
        exact = sum(t["pa"][ia] * t["pb"][(a,)][ib] for ia, a in enumerate(("a0", "a1")))
        emp = np.mean(ds.values("B") == b)
        assert abs(emp - exact) < 4.5 * np.sqrt(exact * (1 - exact) / n)


def test_process_result_is_and_of_flags(small_graph):
    ds = sample_schedule(small_graph, default_schedule(3000, batch_size=300), 5)
    flags = [n for n in ds.names if n.endswith("_MpGood")]
    assert len(flags) == 10
    expect = np.logical_and.reduce([ds.data[f] for f in flags])
    np.testing.assert_array_equal(ds.data["Sec_C2_Machine1_ProcessResult"], expect)
    for f in flags:
        base = f[: -len("_MpGood")]
        x, lo, hi = ds.data[base], ds.data[base + "_LTL"], ds.data[base + "_UTL"]
        np.testing.assert_array_equal(ds.data[f], (lo <= x) & (x <= hi))
    # a working line mostly passes, but not always
    assert 0.5 < expect.mean() < 1.0


def test_parameter_columns_constant_within_batch(small_graph):
    ds = sample_schedule(small_graph, default_schedule(2000, batch_size=100), 6)
    params = [n.name for n in small_graph.nodes if n.parameter]
    assert TYPE_NODE in params and "PF_M1_MV_Supplier" in params
    for name in params:
        col = ds.data[name]
        for b in np.unique(ds.batch_ids):
            assert len(np.unique(col[ds.batch_ids == b])) == 1
        # but they vary across batches
        assert len(np.unique(col)) > 1


def test_parametrization_pins_values(small_graph):
    b = BatchConfig(0, 20, parametrization={TYPE_NODE: "947", "PF_M1_MV_Supplier": "S2"})
    ds = sample_batch(small_graph, b, 1)
    assert set(ds.values(TYPE_NODE)) == {"947"}
    assert set(ds.values("PF_M1_MV_Supplier")) == {"S2"}
    assert set(ds.data["PF_M1_T1_Force_LTL"]) == {15720.0}


def test_parametrization_errors(small_graph):
    with pytest.raises(GraphError):
        sample_batch(small_graph, BatchConfig(0, 2, parametrization={"PF_M1_T1_Force": 1.0}), 1)
    with pytest.raises(DomainError):
        sample_batch(small_graph, BatchConfig(0, 2, parametrization={TYPE_NODE: "999"}), 1)
    with pytest.raises(ValueError):
        BatchConfig(0, 0)


def test_conditional_gaussian_means_and_multimodality():
    sup = Categorical(("S1", "S2"))
    table = ((("S1",), (0.0, 1.0)), (("S2",), (6.0, 1.0)))
    g = ScmGraph((
        NodeSpec(0, "Supplier", sup, OBS, ExogenousNoise(CategoricalDist((0.5, 0.5)))),
        NodeSpec(1, "E", Continuous(), LAT, ConditionalGaussian((0,), table)),
    ))
    n = 40000
    ds = sample_batch(g, BatchConfig(0, n), 31)
    s, e = ds.values("Supplier"), ds.data["E"]
    for (lab,), (mu, sigma) in table:
        sub = e[s == lab]
        assert abs(sub.mean() - mu) < 4 * sigma / np.sqrt(len(sub))
    # pooled marginal: the valley between the modes is far below both peaks
    hist, edges = np.histogram(e, bins=30, range=(-3, 9))
    centers = 0.5 * (edges[1:] + edges[:-1])
    valley = hist[np.argmin(np.abs(centers - 3.0))]
    peaks = hist[np.argmin(np.abs(centers - 0.0))], hist[np.argmin(np.abs(centers - 6.0))]
    assert valley < 0.1 * min(peaks)


def test_preset_supplier_means_within_bound(small_graph):
    ds = sample_schedule(small_graph, default_schedule(20000, batch_size=200), 12)
    node = small_graph.node("PF_M1_T1_D_mvMax")
    table = dict(node.mechanism.table)
    sup, typ = ds.values("PF_M1_MV_Supplier"), ds.values(TYPE_NODE)
    x = ds.data["PF_M1_T1_D_mvMax"]
    seen = 0
    for (s, t), (mu, sigma) in table.items():
        mask = (sup == s) & (typ == t)
        if mask.sum() < 200:
            continue
        seen += 1
        assert abs(x[mask].mean() - mu) < 4 * sigma / np.sqrt(mask.sum())
    assert seen >= 4


def test_positive_parameters_never_negative(small_graph):
    ds = sample_schedule(small_graph, default_schedule(5000, batch_size=500), 2)
    for name in ("PF_M1_T1_E_mv", "HU_E_hu", "PF_M1_T1_L_mvPF", "PF_M1_T1_dF_trigger_stop",
                 "PF_M1_T1_A_leak_MV", "PF_M1_C1_A_leak_tot"):
        assert ds.data[name].min() >= 0.0


def test_intervention_with_bad_value_fails():
    g = and_graph()
    with pytest.raises(DomainError):
        sample_batch(g, BatchConfig(0, 2, interventions=(HardIntervention(0, 0.5),)), 1)

import numpy as np
import pytest

from causalman.scm import (AffineMix, Continuous, ExogenousNoise, Gaussian, HardIntervention,
                           NodeSpec, ScmGraph)
from causalman.sampling import BatchConfig, sample_batch
from causalman.tasks import (CONDITION, OUTCOME, TASK_IDS, TaskSpec, builtin_task,
                             ground_truth_effect, minmax_normalize, null_task, numeric_frame,
                             ordinal_encode, uniform_quantize)

from helpers import OBS, and_graph


def linear_toy():
    n = lambda i, name: NodeSpec(i, name, Continuous(), OBS, ExogenousNoise(Gaussian(0.0, 1.0)))  # noqa: E731
    return ScmGraph((
        n(0, "A"), n(1, "N_B"), n(2, "N_C"),
        NodeSpec(3, "B", Continuous(), OBS, AffineMix(0.75, 0, 1)),
        NodeSpec(4, "C", Continuous(), OBS, AffineMix(0.5, 3, 2)),
    ))


def test_builtin_tasks():
    assert TASK_IDS == ("T1", "T2", "T3", "T4", "ADDITIONAL")
    t1 = builtin_task("T1")
    assert t1.treatment.value == 18000 and t1.control.value == 15000
    assert t1.treatment.target == "PF_M1_T1_Force_LTL" and t1.conditioning is None
    t2 = builtin_task("T2")
    assert (t2.treatment.value, t2.control.value) == (30000, 16000)
    assert t2.treatment.target == "PF_M1_T1_Force"
    assert builtin_task("T3").conditioning[1] == "921"
    assert builtin_task("T4").conditioning == CONDITION
    add = builtin_task("ADDITIONAL")
    assert add.control.value == 1 and add.treatment.value == 0
    assert add.outcome == OUTCOME == "Sec_C2_Machine1_ProcessResult"
    for tid in TASK_IDS:
        t = builtin_task(tid)
        assert t.treatment != t.control
        assert (t.conditioning is not None) == (tid in ("T3", "T4"))
    with pytest.raises(KeyError):
        builtin_task("T9")


def test_linear_toy_effect_is_coefficient_product():
    g = linear_toy()
    task = TaskSpec("lin", "C", HardIntervention("A", 1.0), HardIntervention("A", 0.0))
    est = ground_truth_effect(g, task, n_per_arm=20000, seed=3)
    assert abs(est.effect - 0.375) <= 3 * est.se
    assert est.n_treated == est.n_control == 20000
    assert est.se > 0


def test_additional_task_on_discretized_toy():
    p1, p2 = 0.7, 0.6
    g = and_graph(p1, p2)
    task = TaskSpec("add", "Y", HardIntervention("F1", False), HardIntervention("F1", True))
    est = ground_truth_effect(g, task, n_per_arm=20000, seed=1)
    assert est.treated_mean == 0.0
    # enumeration: P(Y = 1 | do(F1 = 1)) = P(F2 = 1)
    assert abs(est.effect - (-p2)) <= 3 * est.se


def test_null_effect_on_toys():
    for g, task in ((linear_toy(), TaskSpec("lin", "C", HardIntervention("A", 1.0), HardIntervention("A", 0.0))),
                    (and_graph(), TaskSpec("add", "Y", HardIntervention("F1", False), HardIntervention("F1", True)))):
        nt = null_task(task)
        assert nt.treatment == nt.control == task.control
        for seed in range(3):
            est = ground_truth_effect(g, nt, n_per_arm=5000, seed=seed)
            assert abs(est.effect) <= 3 * est.se


def test_additional_treated_arm_is_zero_on_small(small_graph):
    est = ground_truth_effect(small_graph, builtin_task("ADDITIONAL"), n_per_arm=1000, seed=0)
    assert est.treated_mean == 0.0
    assert est.control_mean > 0.9


def test_cate_task_restricts_to_stratum(small_graph):
    est = ground_truth_effect(small_graph, builtin_task("T3"), n_per_arm=2000, seed=0)
    assert 0 < est.n_treated < 2000 and 0 < est.n_control < 2000
    assert est.treated_mean < 0.01


def test_ground_truth_errors(small_graph):
    bad = TaskSpec("x", "Nope", HardIntervention("PF_M1_T1_Force", 1.0), HardIntervention("PF_M1_T1_Force", 2.0))
    with pytest.raises(KeyError):
        ground_truth_effect(small_graph, bad, n_per_arm=10)
    g = and_graph()
    task = TaskSpec("c", "Y", HardIntervention("F1", True), HardIntervention("F1", False),
                    conditioning=("F2", "false"))
    # F2 is boolean, "false" coerces; a stratum that never occurs is an error
    task_empty = TaskSpec("c", "Y", HardIntervention("F2", True), HardIntervention("F2", True),
                          conditioning=("F2", False))
    assert ground_truth_effect(g, task, n_per_arm=500).n_treated > 0
    with pytest.raises(ValueError):
        ground_truth_effect(g, task_empty, n_per_arm=200)


def test_arms_use_disjoint_batches():
    g = linear_toy()
    task = TaskSpec("lin", "C", HardIntervention("A", 1.0), HardIntervention("A", 1.0))
    est = ground_truth_effect(g, task, n_per_arm=300, seed=0, batch_size=100)
    # identical arms would give an exact zero if they shared noise streams
    assert est.effect != 0.0


def test_ordinal_encode():
    codes, labels = ordinal_encode(["B", "A", "B"])
    assert codes.tolist() == [1, 0, 1] and labels == ["A", "B"]
    assert ordinal_encode(["x", "x"])[0].tolist() == [0, 0]
    assert [labels[c] for c in codes] == ["B", "A", "B"]
    again, _ = ordinal_encode(["B", "A", "B"], labels)
    assert again.tolist() == codes.tolist()
    with pytest.raises(ValueError):
        ordinal_encode(["C"], labels)


def test_minmax_normalize():
    assert minmax_normalize([0, 5, 10]).tolist() == [-1.0, 0.0, 1.0]
    assert minmax_normalize([7, 7]).tolist() == [0.0, 0.0]
    assert minmax_normalize([-1, 1]).tolist() == [-1.0, 1.0]
    with pytest.raises(ValueError):
        minmax_normalize([])


def test_uniform_quantize():
    assert uniform_quantize([0, 0.5, 1], 2).tolist() == [0, 1, 1]
    assert uniform_quantize([3, 3, 3], 5).tolist() == [0, 0, 0]
    x = np.array([0.0, 0.05, 0.999, 1.0])
    assert uniform_quantize(x, 20).tolist() == [0, 1, 19, 19]
    with pytest.raises(ValueError):
        uniform_quantize([1, 2], 1)


def test_numeric_frame(small_graph):
    ds = sample_batch(small_graph, BatchConfig(0, 50), 0)
    frame = numeric_frame(ds)
    assert list(frame.columns) == ds.names
    vals = frame.to_numpy()
    assert np.all((vals >= -1.0) & (vals <= 1.0))

"""Benchmark treatment-effect tasks, their Monte-Carlo ground truth, and preprocessing."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, NamedTuple, Sequence

import numpy as np

from .sampling import BatchConfig, Dataset, sample_schedule
from .scm import Categorical, HardIntervention, ScmGraph, coerce_value

TASK_IDS = ("T1", "T2", "T3", "T4", "ADDITIONAL")
OUTCOME = "Sec_C2_Machine1_ProcessResult"
FORCE = "PF_M1_T1_Force"
CONDITION = ("HU_HU_Block_Type_ID_num", "921")


@dataclass(frozen=True)
class TaskSpec:
    """A two-arm interventional query E[Y | do(treatment)] - E[Y | do(control)].

    Interventions name their target node; ``conditioning`` turns the ATE
    into a CATE on ``node == value``.
    """

    task_id: str
    outcome: str
    treatment: HardIntervention
    control: HardIntervention
    conditioning: tuple[str, Any] | None = None


def builtin_task(task_id: str) -> TaskSpec:
    def do(node, value):
        return HardIntervention(node, value)

    if task_id in ("T1", "T3"):
        arms = do(f"{FORCE}_LTL", 18000.0), do(f"{FORCE}_LTL", 15000.0)
    elif task_id in ("T2", "T4"):
        arms = do(FORCE, 30000.0), do(FORCE, 16000.0)
    elif task_id == "ADDITIONAL":
        arms = do(f"{FORCE}_MpGood", False), do(f"{FORCE}_MpGood", True)
    else:
        raise KeyError(f"unknown task {task_id!r}; known: {list(TASK_IDS)}")
    cond = CONDITION if task_id in ("T3", "T4") else None
    return TaskSpec(task_id, OUTCOME, arms[0], arms[1], cond)


class EffectEstimate(NamedTuple):
    effect: float
    se: float
    n_treated: int
    n_control: int
    treated_mean: float
    control_mean: float


def _mean_var(y: np.ndarray, clusters: np.ndarray) -> float:
    """Cluster-robust variance of the sample mean (rows share a batch)."""
    n = len(y)
    resid = y - y.mean()
    _, inv = np.unique(clusters, return_inverse=True)
    g = int(inv.max()) + 1
    if g < 2:
        return float(resid.var(ddof=1) / n) if n > 1 else 0.0
    s = np.bincount(inv, weights=resid, minlength=g)
    return float(g / (g - 1) * np.sum(s * s) / (n * n))


def arm_batches(n: int, batch_size: int, first_id: int, iv: HardIntervention) -> list[BatchConfig]:
    out = []
    done = 0
    while done < n:
        k = min(batch_size, n - done)
        out.append(BatchConfig(first_id + len(out), k, interventions=(iv,)))
        done += k
    return out


def sample_arm(graph: ScmGraph, iv: HardIntervention, n: int, seed: int, first_id: int,
               batch_size: int = 100, threads: int | None = None) -> Dataset:
    return sample_schedule(graph, arm_batches(n, batch_size, first_id, iv), seed, threads)


def ground_truth_effect(graph: ScmGraph, task: TaskSpec, n_per_arm: int = 10_000, seed: int = 0,
                        batch_size: int = 100, threads: int | None = None) -> EffectEstimate:
    """Monte-Carlo ATE (or CATE) of ``task`` with a batch-clustered standard error.

    Each arm is a schedule of interventional batches. Batch parameters (product
    type, suppliers) are redrawn per batch, and the arms use disjoint batch
    ids, so they are independent samples.
    """
    for name in (task.outcome, task.treatment.target, task.control.target):
        graph.node(name)
    if n_per_arm < 1:
        raise ValueError("n_per_arm must be >= 1")
    n_batches = -(-n_per_arm // batch_size)
    arms = []
    for i, iv in enumerate((task.treatment, task.control)):
        ds = sample_arm(graph, iv, n_per_arm, seed, i * n_batches, batch_size, threads)
        y = ds.numeric(task.outcome)
        clusters = ds.batch_ids
        if task.conditioning is not None:
            node, value = task.conditioning
            mask = ds.values(node) == coerce_value(graph.node(node).domain, value)
            if not mask.any():
                raise ValueError(f"empty stratum {node} = {value!r} in the "
                                 f"{'treated' if i == 0 else 'control'} arm")
            y, clusters = y[mask], clusters[mask]
        arms.append((y, clusters))
    (yt, ct), (yc, cc) = arms
    se = float(np.sqrt(_mean_var(yt, ct) + _mean_var(yc, cc)))
    return EffectEstimate(float(yt.mean() - yc.mean()), se, len(yt), len(yc),
                          float(yt.mean()), float(yc.mean()))


def null_task(task: TaskSpec) -> TaskSpec:
    """The same query with the control arm used for both arms."""
    return replace(task, treatment=task.control)


# ---------------------------------------------------------------------------
# Preprocessing


def ordinal_encode(column: Sequence, labels: Sequence | None = None) -> tuple[np.ndarray, list]:
    """Map labels to 0..k-1 in lexicographic order of their string form.

    Passing back the returned ``labels`` re-encodes a column identically.
    """
    values = list(column)
    if labels is None:
        labels = sorted(set(values), key=str)
    index = {v: i for i, v in enumerate(labels)}
    try:
        codes = np.fromiter((index[v] for v in values), dtype=np.int64, count=len(values))
    except KeyError as exc:
        raise ValueError(f"value {exc.args[0]!r} not in label map") from None
    return codes, list(labels)


def minmax_normalize(column) -> np.ndarray:
    """Scale to [-1, 1]; a constant column maps to zeros."""
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise ValueError("empty column")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return 2.0 * (x - lo) / (hi - lo) - 1.0


def uniform_quantize(column, k: int) -> np.ndarray:
    """Equal-width bin index in 0..k-1 over [min, max]; the max lands in bin k-1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise ValueError("empty column")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.shape, dtype=np.int64)
    idx = np.floor((x - lo) / (hi - lo) * k).astype(np.int64)
    return np.minimum(idx, k - 1)


def numeric_frame(dataset: Dataset):
    """Model-ready table: ordinal categoricals, booleans as 0/1, all columns min-max scaled."""
    import pandas as pd
    cols = {}
    for c in dataset.columns:
        if isinstance(c.domain, Categorical):
            x, _ = ordinal_encode(dataset.values(c.name))
        else:
            x = dataset.numeric(c.name)
        cols[c.name] = minmax_normalize(x) if len(x) else x.astype(float)
    return pd.DataFrame(cols)

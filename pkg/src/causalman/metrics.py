"""Graph-recovery, distribution and treatment-effect metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .projection import Admg


def _adjacency(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency matrix must be square")
    a = a.astype(bool)
    if a.diagonal().any():
        raise ValueError("adjacency matrix has self-loops")
    return a


def _pair(a, a_star):
    a, a_star = _adjacency(a), _adjacency(a_star)
    if a.shape != a_star.shape:
        raise ValueError(f"size mismatch {a.shape} vs {a_star.shape}")
    return a, a_star


def shd(a, a_star) -> int:
    """Number of differing directed entries. A reversed edge costs 2."""
    a, a_star = _pair(a, a_star)
    return int(np.count_nonzero(a != a_star))


@dataclass(frozen=True)
class EdgeCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision_defined(self) -> bool:
        return self.tp + self.fp > 0

    @property
    def recall_defined(self) -> bool:
        return self.tp + self.fn > 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.precision_defined else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.recall_defined else 0.0


def edge_counts(a, a_star) -> EdgeCounts:
    a, a_star = _pair(a, a_star)
    return EdgeCounts(int(np.count_nonzero(a & a_star)), int(np.count_nonzero(a & ~a_star)),
                      int(np.count_nonzero(~a & a_star)))


def precision_recall(a, a_star) -> tuple[float, float]:
    """Edge precision and recall over directed entries; 0/0 is reported as 0.

    Use :func:`edge_counts` to tell a genuine 0 from an undefined one.
    """
    c = edge_counts(a, a_star)
    return c.precision, c.recall


def admg_adjacency(admg: Admg, nodes: Sequence[str] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(directed, bidirected) boolean matrices; the bidirected one is symmetric."""
    nodes = list(admg.nodes if nodes is None else nodes)
    pos = {n: i for i, n in enumerate(nodes)}
    d = np.zeros((len(nodes), len(nodes)), dtype=bool)
    b = np.zeros_like(d)
    for x, y in admg.directed:
        d[pos[x], pos[y]] = True
    for x, y in admg.bidirected:
        b[pos[x], pos[y]] = b[pos[y], pos[x]] = True
    return d, b


def shd_admg(pred: Admg, truth: Admg, include_bidirected: bool = True) -> int:
    """SHD on mixed graphs: directed entries, plus differing bidirected pairs if requested."""
    if set(pred.nodes) != set(truth.nodes):
        raise ValueError("graphs are over different node sets")
    nodes = list(truth.nodes)
    dp, bp = admg_adjacency(pred, nodes)
    dt, bt = admg_adjacency(truth, nodes)
    out = shd(dp, dt)
    if include_bidirected:
        out += int(np.count_nonzero(np.triu(bp != bt, k=1)))
    return out


def _probability(p, name) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in bits, so it lies in [0, 1]."""
    p, q = _probability(p, "p"), _probability(q, "q")
    if len(p) != len(q):
        raise ValueError("length mismatch")
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / m[nz])))

    return min(1.0, max(0.0, 0.5 * kl(p) + 0.5 * kl(q)))


def _samples(x, name) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty sample matrix")
    return x


def median_bandwidth(x, y) -> float:
    """Median pairwise Euclidean distance over the pooled sample; 1.0 if that is 0."""
    z = np.vstack([_samples(x, "x"), _samples(y, "y")])
    if len(z) < 2:
        return 1.0
    h = float(np.median(pdist(z)))
    return h if h > 0 else 1.0


def mmd(x, y, bandwidth: float | None = None) -> float:
    """Biased (V-statistic) squared MMD with an RBF kernel.

    k(a, b) = exp(-|a - b|^2 / (2 h^2)) with h the median heuristic unless given.
    """
    x, y = _samples(x, "x"), _samples(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValueError("x and y need the same number of columns")
    h = median_bandwidth(x, y) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be > 0")
    g = -1.0 / (2.0 * h * h)

    def k_mean(a, b):
        return float(np.mean(np.exp(g * cdist(a, b, "sqeuclidean"))))

    return max(0.0, k_mean(x, x) + k_mean(y, y) - 2.0 * k_mean(x, y))


def mse(u, v) -> float:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError("length mismatch")
    if u.size == 0:
        raise ValueError("empty input")
    return float(np.mean((u - v) ** 2))


def ate(y_treated, y_control) -> float:
    yt, yc = np.asarray(y_treated, dtype=float), np.asarray(y_control, dtype=float)
    if yt.size == 0 or yc.size == 0:
        raise ValueError("both arms must be non-empty")
    return float(yt.mean() - yc.mean())


def cate(y_treated, x_treated, y_control, x_control, value) -> float:
    """ATE restricted to the rows whose covariate equals ``value``."""
    mt = np.asarray(x_treated, dtype=object) == value
    mc = np.asarray(x_control, dtype=object) == value
    if not mt.any() or not mc.any():
        raise ValueError(f"empty stratum x = {value!r} in at least one arm")
    return ate(np.asarray(y_treated, dtype=float)[mt], np.asarray(y_control, dtype=float)[mc])


def random_er_dag(n: int, p: float, seed: int) -> np.ndarray:
    """Erdos-Renyi DAG: each edge i -> j with i < j kept independently with probability p."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    return np.triu(rng.random((n, n)) < p, k=1)

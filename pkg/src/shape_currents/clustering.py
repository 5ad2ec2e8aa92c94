"""Kernel k-means on a Gram matrix plus validation measures.

Centroids are never materialized: a cluster is an index set and the squared
distance from shape ``l`` to the mean of ``C`` expands to

    G[l, l] - 2/|C| sum_{m in C} G[l, m] + 1/|C|^2 sum_{m, m' in C} G[m, m'].
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCluster, EmptyGram, InvalidK, LengthMismatch, SingleCluster
from .rkhs import GramMatrix, default_threads

INITS = ("kmeans++", "random", "provided")


def _entries(gram) -> np.ndarray:
    g = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
        raise EmptyGram("Gram matrix is empty or not square")
    return g


@dataclass
class ClusterModel:
    k: int
    assignment: list[int]
    objective_trace: list[float]
    seed: int | None
    init: str
    restarts_used: int
    converged: bool
    iterations: int = 0

    @property
    def W(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ValidationReport:
    per_shape_silhouette: list[float]
    mean_silhouette: float
    W: float
    k: int


@dataclass
class SweepRow:
    k: int
    W: float
    mean_silhouette: float | None
    model: ClusterModel = field(repr=False, compare=False, default=None)


def point_to_centroid_sq(gram, l: int, C: Iterable[int]) -> float:
    g = _entries(gram)
    idx = np.fromiter(C, dtype=np.int64)
    if idx.size == 0:
        raise EmptyCluster("distance to the centroid of an empty cluster")
    n = idx.size
    val = g[l, l] - 2.0 * g[l, idx].sum() / n + g[np.ix_(idx, idx)].sum() / (n * n)
    return max(0.0, float(val))


def _centroid_sq(g: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """(m, k) squared distances to every cluster mean; inf for empty clusters."""
    m = len(g)
    onehot = np.zeros((m, k))
    onehot[np.arange(m), labels] = 1.0
    counts = onehot.sum(axis=0)
    cross = g @ onehot
    within = np.einsum("ic,ic->c", onehot, cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.diag(g)[:, None] - 2.0 * cross / counts + within / (counts * counts)
    d = np.maximum(d, 0.0)
    d[:, counts == 0] = np.inf
    return d


def _objective(g: np.ndarray, labels: np.ndarray, k: int) -> float:
    d = _centroid_sq(g, labels, k)
    return float(d[np.arange(len(g)), labels].sum())


def objective(gram, assignment: Sequence[int]) -> float:
    g = _entries(gram)
    labels = np.asarray(assignment, dtype=np.int64)
    if labels.shape != (len(g),):
        raise LengthMismatch(f"{len(labels)} labels for {len(g)} shapes")
    k = int(labels.max()) + 1
    if len(np.unique(labels)) != k or labels.min() < 0:
        raise EmptyCluster("cluster labels must be 0..k-1 with every cluster nonempty")
    return _objective(g, labels, k)


def _repair_empty(g, labels, k):
    """Move the point farthest from its own centroid into each empty cluster.

    Donors come from clusters of size >= 2, so W never increases.
    """
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels
        d = _centroid_sq(g, labels, k)
        own = d[np.arange(len(g)), labels]
        own[counts[labels] < 2] = -np.inf
        labels[int(np.argmax(own))] = int(empty[0])


def _kmeanspp(g, k, rng):
    m = len(g)
    diag = np.diag(g)
    seeds = [int(rng.integers(m))]
    best = np.maximum(diag + diag[seeds[0]] - 2.0 * g[:, seeds[0]], 0.0)
    for _ in range(1, k):
        p = best.copy()
        p[seeds] = 0.0
        total = p.sum()
        if total > 0:
            nxt = int(rng.choice(m, p=p / total))
        else:
            rest = np.setdiff1d(np.arange(m), seeds)
            nxt = int(rng.choice(rest))
        seeds.append(nxt)
        best = np.minimum(best, np.maximum(diag + diag[nxt] - 2.0 * g[:, nxt], 0.0))
    sq = np.maximum(diag[:, None] + diag[seeds][None, :] - 2.0 * g[:, seeds], 0.0)
    labels = np.argmin(sq, axis=1)
    labels[seeds] = np.arange(k)  # a seed always owns its cluster
    return labels


def _random_partition(m, k, rng):
    labels = rng.integers(k, size=m)
    perm = rng.permutation(m)[:k]
    labels[perm] = np.arange(k)
    return labels


def _lloyd(g, k, labels, max_iter, tol):
    labels = _repair_empty(g, labels, k)
    trace = [_objective(g, labels, k)]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        d = _centroid_sq(g, labels, k)
        new = np.argmin(d, axis=1)  # first minimum: lowest cluster index wins ties
        new = _repair_empty(g, new, k)
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
        trace.append(_objective(g, labels, k))
        if tol > 0 and trace[-2] - trace[-1] <= tol * abs(trace[-2]):
            converged = True
            break
    return labels, trace, converged, it


def kernel_kmeans(gram, k: int, seed: int | None = 0, init: str = "kmeans++",
                  max_iter: int = 100, restarts: int = 10, tol: float = 0.0,
                  initial_assignment: Sequence[int] | None = None,
                  threads: int | None = None) -> ClusterModel:
    """Lloyd iterations in the RKHS, best of ``restarts`` runs by final W.

    Each restart draws from its own stream spawned from ``seed``; the
    result is independent of ``threads``.
    """
    g = _entries(gram)
    m = len(g)
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= m):
        raise InvalidK(f"k must be in 1..{m}, got {k}")
    if init not in INITS:
        raise ValueError(f"init must be one of {INITS}, got {init!r}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    k = int(k)

    if init == "provided":
        if initial_assignment is None:
            raise ValueError("init='provided' needs initial_assignment")
        start = np.asarray(initial_assignment, dtype=np.int64)
        if start.shape != (m,) or start.min() < 0 or start.max() >= k:
            raise LengthMismatch("initial assignment must hold m labels in 0..k-1")
        restarts = 1
        streams = [None]
    else:
        streams = np.random.SeedSequence(seed).spawn(restarts)

    def run(ss):
        if init == "provided":
            labels = start.copy()
        else:
            rng = np.random.default_rng(ss)
            labels = _kmeanspp(g, k, rng) if init == "kmeans++" else _random_partition(m, k, rng)
        return _lloyd(g, k, labels, max_iter, tol)

    threads = default_threads() if threads is None else threads
    if threads > 1 and len(streams) > 1:
        with ThreadPoolExecutor(min(threads, len(streams))) as pool:
            runs = list(pool.map(run, streams))
    else:
        runs = [run(ss) for ss in streams]

    best = min(range(len(runs)), key=lambda r: (runs[r][1][-1], r))
    labels, trace, converged, it = runs[best]
    return ClusterModel(
        k=k,
        assignment=[int(x) for x in labels],
        objective_trace=[float(w) for w in trace],
        seed=seed,
        init=init,
        restarts_used=len(runs),
        converged=bool(converged),
        iterations=it,
    )


def silhouette(gram, assignment: Sequence[int]) -> ValidationReport:
    """Silhouette from RKHS distances; shapes alone in their cluster score 0."""
    g = _entries(gram)
    labels = np.asarray(assignment, dtype=np.int64)
    if labels.shape != (len(g),):
        raise LengthMismatch(f"{len(labels)} labels for {len(g)} shapes")
    ks = np.unique(labels)
    if len(ks) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    diag = np.diag(g)
    dist = np.sqrt(np.maximum(diag[:, None] + diag[None, :] - 2.0 * g, 0.0))
    np.fill_diagonal(dist, 0.0)
    onehot = (labels[:, None] == ks[None, :]).astype(float)
    counts = onehot.sum(axis=0)
    sums = dist @ onehot
    own = np.searchsorted(ks, labels)
    own_n = counts[own]
    rows = np.arange(len(g))
    a = np.where(own_n > 1, sums[rows, own] / np.maximum(own_n - 1, 1), 0.0)
    other = sums / counts
    other[rows, own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own_n == 1] = 0.0
    per = [float(v) for v in s]
    return ValidationReport(per, float(np.mean(s)), objective(g, np.searchsorted(ks, labels)), len(ks))


def sweep_k(gram, k_range: Iterable[int], **opts) -> list[SweepRow]:
    rows = []
    for k in k_range:
        model = kernel_kmeans(gram, k, **opts)
        sil = silhouette(gram, model.assignment).mean_silhouette if k >= 2 else None
        rows.append(SweepRow(k, model.W, sil, model))
    return rows


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * (x - 1.0) / 2.0))


def adjusted_rand_index(labels_a: Sequence, labels_b: Sequence) -> float:
    """Chance-corrected pair-counting agreement between two labelings."""
    a, b = list(labels_a), list(labels_b)
    if len(a) != len(b):
        raise LengthMismatch(f"labelings have lengths {len(a)} and {len(b)}")
    if len(a) < 2:
        raise LengthMismatch("need at least two items")
    _, ia = np.unique(np.asarray(a, dtype=object).astype(str), return_inverse=True)
    _, ib = np.unique(np.asarray(b, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    index = _comb2(table)
    sum_a = _comb2(table.sum(axis=1))
    sum_b = _comb2(table.sum(axis=0))
    expected = sum_a * sum_b / _comb2([len(a)])
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both labelings trivial (all-one or all-singletons) and identical
        return 1.0
    return (index - expected) / (max_index - expected)

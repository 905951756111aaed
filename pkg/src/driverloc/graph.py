"""k-MST similarity graphs over Euclidean distances between feature vectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DimensionMismatch

log = logging.getLogger(__name__)

_REMOVED = np.iinfo(np.int64).max


@dataclass(frozen=True)
class SimilarityGraph:
    n: int
    edges: np.ndarray  # (m, 2) int, each row i < j, rows sorted
    k: int
    trees: tuple = field(default=(), repr=False)
    # False when the remaining graph disconnected before k trees were built
    complete: bool = True

    @property
    def m(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class GraphStats:
    m: int
    degrees: np.ndarray
    shared_pairs: int


def pairwise_distances(vectors) -> np.ndarray:
    """Full symmetric Euclidean distance matrix with an exact zero diagonal."""
    if isinstance(vectors, np.ndarray):
        x = vectors
    else:
        vectors = list(vectors)
        dims = {np.shape(getattr(v, "values", v)) for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"vectors have differing shapes {sorted(dims)}")
        x = np.array([getattr(v, "values", v) for v in vectors], dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("expected a 2-D (observation, feature) array")
    if len(x) < 2:
        raise ValueError("need at least two vectors")
    return squareform(pdist(x, "euclidean"))


def edge_ranks(dm: np.ndarray) -> np.ndarray:
    """Rank every edge by (weight, i, j); returns an int64 matrix of ranks.

    Any MST built by strict comparison of these ranks is the unique MST under
    lexicographic tie-breaking of equal weights.
    """
    n = len(dm)
    cond = squareform(np.asarray(dm, dtype=float), checks=False)
    # condensed order is already lexicographic in (i, j), so a stable sort
    # settles ties by edge index
    order = np.argsort(cond, kind="stable")
    ranks = np.empty(len(cond), dtype=np.int64)
    ranks[order] = np.arange(len(cond), dtype=np.int64)
    r = np.full((n, n), _REMOVED, dtype=np.int64)
    iu = np.triu_indices(n, 1)
    r[iu] = ranks
    r.T[iu] = ranks
    return r


@numba.njit(cache=True)
def _prim_forest(r, removed):
    n = r.shape[0]
    in_tree = np.zeros(n, np.bool_)
    best = np.full(n, removed, np.int64)
    parent = np.full(n, -1, np.int64)
    edges = np.empty((n - 1, 2), np.int64)
    ne = 0
    components = 0
    for root in range(n):
        if in_tree[root]:
            continue
        components += 1
        u = root
        while u >= 0:
            in_tree[u] = True
            if parent[u] >= 0:
                a, b = parent[u], u
                if a > b:
                    a, b = b, a
                edges[ne, 0] = a
                edges[ne, 1] = b
                ne += 1
            row = r[u]
            nxt = -1
            nbest = removed
            for w in range(n):
                if in_tree[w]:
                    continue
                if row[w] < best[w]:
                    best[w] = row[w]
                    parent[w] = u
                if best[w] < nbest:
                    nbest = best[w]
                    nxt = w
            u = nxt
    return edges[:ne], components == 1


@numba.njit(cache=True)
def _remove_edges(r, edges, removed):
    for e in range(edges.shape[0]):
        i, j = edges[e, 0], edges[e, 1]
        r[i, j] = removed
        r[j, i] = removed


def kmst(dm: np.ndarray, k: int) -> SimilarityGraph:
    """Union of k successive, edge-disjoint minimum spanning trees.

    Tree i is the MST of the complete graph after deleting the edges of trees
    1..i-1. Equal weights are ordered by (i, j). If the remaining graph is
    disconnected, its minimum spanning forest is added, extraction stops and
    the result is marked ``complete=False``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    dm = np.asarray(dm, dtype=float)
    n = len(dm)
    if n < 2:
        raise ValueError("need at least two nodes")
    r = edge_ranks(dm)
    trees = []
    complete = True
    for t in range(k):
        edges, spanning = _prim_forest(r, _REMOVED)
        if len(edges):
            trees.append(edges.copy())
            _remove_edges(r, edges, _REMOVED)
        if not spanning:
            complete = False
            log.info("k-MST: graph disconnected after %d of %d trees (n=%d)", t, k, n)
            break
    all_edges = np.concatenate(trees) if trees else np.empty((0, 2), dtype=np.int64)
    all_edges = all_edges[np.lexsort((all_edges[:, 1], all_edges[:, 0]))]
    return SimilarityGraph(n, all_edges, k, tuple(trees), complete)


def graph_stats(g: SimilarityGraph) -> GraphStats:
    deg = np.bincount(g.edges.reshape(-1), minlength=g.n).astype(np.int64)
    shared = int((deg * (deg - 1) // 2).sum())
    return GraphStats(g.m, deg, shared)


def write_edges_csv(g: SimilarityGraph, path) -> None:
    """Dump the edge list as 0-based ``i,j`` rows."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("i,j\n")
        for i, j in g.edges:
            fh.write(f"{i},{j}\n")

"""Changed-interval detection with edge-count scan statistics.

For a candidate interval of observations ``(t1, t2]`` (0-based nodes
``t1 .. t2-1``) every similarity-graph edge is either inside the interval
(r1), outside it (r2) or straddles the boundary (r0). Under the permutation
null the interval is a uniformly random subset of size ``n1 = t2 - t1``;
the counts are standardized with their exact null moments and combined into
four statistics:

* ``o``: original, ``-(r0 - E r0) / sd(r0)``
* ``w``: weighted, standardized ``((n0-1) r1 + (n1-1) r2) / (n-2)``
* ``g``: generalized, ``zw**2 + zd**2`` where zd standardizes ``r1 - r2``
* ``m``: max-type, ``max(zw, |zd|)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .config import STAT_KINDS, DetectionConfig
from .errors import DegenerateGroup, NoValidCandidate, ZeroVariance
from .graph import GraphStats, SimilarityGraph, graph_stats, kmst, pairwise_distances
from .intervals import ActivityInterval
from .keypoints import KeypointSeries

_KIND_CODE = {k: i for i, k in enumerate(STAT_KINDS)}
# variances at or below this are treated as zero
_VAR_EPS = 1e-10


@dataclass(frozen=True)
class EdgeCounts:
    r0: int
    r1: int
    r2: int

    @property
    def m(self) -> int:
        return self.r0 + self.r1 + self.r2


@dataclass(frozen=True)
class NullMoments:
    n: int
    n1: int
    m: int
    mean_r1: float
    mean_r2: float
    var_r1: float
    var_r2: float
    cov_r1_r2: float

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def mean_r0(self) -> float:
        return self.m - self.mean_r1 - self.mean_r2

    @property
    def var_r0(self) -> float:
        return self.var_r1 + self.var_r2 + 2 * self.cov_r1_r2

    @property
    def weights(self) -> tuple[float, float]:
        """Weights on (r1, r2) in the weighted statistic."""
        return (self.n0 - 1) / (self.n - 2), (self.n1 - 1) / (self.n - 2)


@dataclass(frozen=True)
class StatValues:
    z0: float
    zw: float
    zd: float
    s: float
    mstat: float

    def value(self, kind: str) -> float:
        return {"o": self.z0, "w": self.zw, "g": self.s, "m": self.mstat}[kind]


@dataclass(frozen=True)
class ScanResult:
    t1: int
    t2: int
    stat_kind: str
    value: float
    p_value: float | None = None
    n: int = 0

    @property
    def length(self) -> int:
        return self.t2 - self.t1


# ---------------------------------------------------------------------------
# counts and moments

def edge_counts(g: SimilarityGraph, t1: int, t2: int) -> EdgeCounts:
    if not 0 <= t1 < t2 <= g.n:
        raise ValueError(f"need 0 <= t1 < t2 <= n, got ({t1}, {t2}) with n={g.n}")
    inside = np.zeros(g.n, dtype=bool)
    inside[t1:t2] = True
    a = inside[g.edges[:, 0]]
    b = inside[g.edges[:, 1]]
    r1 = int(np.count_nonzero(a & b))
    r2 = int(np.count_nonzero(~a & ~b))
    return EdgeCounts(g.m - r1 - r2, r1, r2)


def _falling(a, j):
    out = np.ones_like(np.asarray(a, dtype=float))
    for i in range(j):
        out = out * (a - i)
    return out


def _moment_arrays(m: int, shared: int, n: int, n1):
    """Null means, variances and covariance of (r1, r2) for group sizes n1."""
    n1 = np.asarray(n1, dtype=float)
    n0 = n - n1
    nf = float(n)
    d2, d3, d4 = _falling(nf, 2), _falling(nf, 3), _falling(nf, 4)
    same_node = 2.0 * shared  # ordered edge pairs sharing exactly one node
    disjoint = m * (m - 1.0) - same_node

    def first_two(a):
        p1 = _falling(a, 2) / d2
        p2 = _falling(a, 3) / d3
        p3 = _falling(a, 4) / d4
        mean = m * p1
        second = m * p1 + same_node * p2 + disjoint * p3
        return mean, second - mean * mean

    mean1, var1 = first_two(n1)
    mean2, var2 = first_two(n0)
    cross = disjoint * _falling(n1, 2) * _falling(n0, 2) / d4
    cov = cross - mean1 * mean2
    return mean1, mean2, var1, var2, cov


def null_moments(gs: GraphStats, n: int, n1: int) -> NullMoments:
    if n1 < 2 or n - n1 < 2:
        raise DegenerateGroup(f"group sizes ({n1}, {n - n1}) must both be >= 2")
    mean1, mean2, var1, var2, cov = (float(v) for v in _moment_arrays(gs.m, gs.shared_pairs, n, n1))
    return NullMoments(n, n1, gs.m, mean1, mean2, max(var1, 0.0), max(var2, 0.0), cov)


def _coef_table(m: int, shared: int, n: int) -> np.ndarray:
    """Per-length standardization constants, shape (n + 1, 8).

    Columns: mean/sd of r0, weights a/b, mean/sd of rw, mean/sd of r1 - r2.
    Rows of inadmissible lengths hold NaN; zero standard deviations stay 0.
    """
    coef = np.full((n + 1, 8), np.nan)
    lengths = np.arange(2, n - 1)
    if len(lengths) == 0:
        return coef
    mean1, mean2, var1, var2, cov = _moment_arrays(m, shared, n, lengths)
    a = (n - lengths - 1) / (n - 2)
    b = (lengths - 1) / (n - 2)
    var0 = var1 + var2 + 2 * cov
    varw = a * a * var1 + b * b * var2 + 2 * a * b * cov
    vard = var1 + var2 - 2 * cov

    def sd(v):
        return np.where(v > _VAR_EPS, np.sqrt(np.clip(v, 0, None)), 0.0)

    coef[lengths] = np.column_stack([
        m - mean1 - mean2, sd(var0),
        a, b, a * mean1 + b * mean2, sd(varw),
        mean1 - mean2, sd(vard),
    ])
    return coef


def _moments_row(mo: NullMoments) -> np.ndarray:
    a, b = mo.weights
    varw = a * a * mo.var_r1 + b * b * mo.var_r2 + 2 * a * b * mo.cov_r1_r2
    vard = mo.var_r1 + mo.var_r2 - 2 * mo.cov_r1_r2

    def sd(v):
        return math.sqrt(v) if v > _VAR_EPS else 0.0

    return np.array([mo.mean_r0, sd(mo.var_r0), a, b,
                     a * mo.mean_r1 + b * mo.mean_r2, sd(varw),
                     mo.mean_r1 - mo.mean_r2, sd(vard)])


# ---------------------------------------------------------------------------
# statistics

@numba.njit(cache=True)
def _zscores(r0, r1, r2, c):
    z0 = -(r0 - c[0]) / c[1] if c[1] > 0 else np.nan
    zw = (c[2] * r1 + c[3] * r2 - c[4]) / c[5] if c[5] > 0 else np.nan
    zd = (r1 - r2 - c[6]) / c[7] if c[7] > 0 else np.nan
    return z0, zw, zd


@numba.njit(cache=True)
def _combine(kind, z0, zw, zd):
    if kind == 0:
        return z0
    if kind == 1:
        return zw
    if kind == 2:
        return zw * zw + zd * zd
    return max(zw, abs(zd))


def statistics(c: EdgeCounts, mo: NullMoments) -> StatValues:
    row = _moments_row(mo)
    if row[1] == 0 or row[5] == 0 or row[7] == 0:
        raise ZeroVariance(f"zero null variance for n={mo.n}, n1={mo.n1}")
    z0, zw, zd = _zscores(float(c.r0), float(c.r1), float(c.r2), row)
    return StatValues(z0, zw, zd, _combine(2, z0, zw, zd), _combine(3, z0, zw, zd))


def _usable(coef: np.ndarray, kind: str) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        if kind == "o":
            return coef[:, 1] > 0
        if kind == "w":
            return coef[:, 5] > 0
        return (coef[:, 5] > 0) & (coef[:, 7] > 0)


@numba.njit(cache=True)
def _scan_kernel(edges, n, m, l0, l1, kind, coef, usable):
    # within[t1][t2] = #edges with both ends in t1..t2-1, built row by row
    # from t1 = n-1 down, keeping only the row below
    adj = np.zeros((n, n), np.int32)
    deg = np.zeros(n + 1, np.int64)
    for e in range(edges.shape[0]):
        i, j = edges[e, 0], edges[e, 1]
        if i > j:
            i, j = j, i
        adj[i, j] += 1
        deg[i + 1] += 1
        deg[j + 1] += 1
    for i in range(n):
        deg[i + 1] += deg[i]
    below = np.zeros(n + 1, np.int64)
    row = np.zeros(n + 1, np.int64)
    best = -np.inf
    bt1 = -1
    bt2 = -1
    n_ok = 0
    for t1 in range(n - 1, -1, -1):
        c = 0
        row[: t1 + 1] = 0
        for t2 in range(t1 + 1, n + 1):
            c += adj[t1, t2 - 1]
            row[t2] = below[t2] + c
        hi = min(t1 + l1, n)
        for t2 in range(t1 + l0, hi + 1):
            length = t2 - t1
            if not usable[length]:
                continue
            r1 = row[t2]
            dsum = deg[t2] - deg[t1]
            r0 = dsum - 2 * r1
            r2 = m - r1 - r0
            z0, zw, zd = _zscores(float(r0), float(r1), float(r2), coef[length])
            v = _combine(kind, z0, zw, zd)
            n_ok += 1
            if v > best or (v == best and (t1 < bt1 or (t1 == bt1 and t2 < bt2))):
                best = v
                bt1 = t1
                bt2 = t2
        below, row = row, below
    return best, bt1, bt2, n_ok


class Scanner:
    """Scan one similarity graph, reusing its null-moment table.

    The moment table depends only on (n, m, shared pairs), all of which are
    invariant under node relabeling, so permutation replicates share it.
    """

    def __init__(self, g: SimilarityGraph, n: int, l0: int, l1: int, kind: str = "m"):
        if kind not in _KIND_CODE:
            raise ValueError(f"kind must be one of {STAT_KINDS}")
        if not 2 <= l0 <= l1 <= n - 2:
            raise ValueError(f"need 2 <= l0 <= l1 <= n-2, got l0={l0}, l1={l1}, n={n}")
        if g.n != n:
            raise ValueError(f"graph has {g.n} nodes, expected {n}")
        self.g, self.n, self.l0, self.l1, self.kind = g, n, l0, l1, kind
        gs = graph_stats(g)
        self.coef = _coef_table(gs.m, gs.shared_pairs, n)
        self.usable = _usable(self.coef, kind)
        self.edges = np.ascontiguousarray(g.edges, dtype=np.int64)

    def max_stat(self, edges=None) -> tuple[float, int, int]:
        e = self.edges if edges is None else edges
        best, t1, t2, n_ok = _scan_kernel(e, self.n, self.g.m, self.l0, self.l1,
                                          _KIND_CODE[self.kind], self.coef, self.usable)
        if n_ok == 0:
            raise NoValidCandidate("every candidate interval had zero null variance")
        return best, t1, t2

    def scan(self) -> ScanResult:
        v, t1, t2 = self.max_stat()
        return ScanResult(t1, t2, self.kind, v, None, self.n)

    def permutation_pvalue(self, B: int, seed=None, observed: float | None = None) -> float:
        if B < 1:
            raise ValueError("B must be >= 1")
        if observed is None:
            observed = self.max_stat()[0]
        rng = np.random.default_rng(seed)
        hits = 0
        for _ in range(B):
            perm = rng.permutation(self.n)
            if self.max_stat(perm[self.edges])[0] >= observed:
                hits += 1
        return (1 + hits) / (B + 1)


def scan(g: SimilarityGraph, n: int, l0: int, l1: int, kind: str = "m") -> ScanResult:
    """Best interval (t1, t2] with l0 <= t2 - t1 <= l1 for the chosen statistic.

    Ties go to the smaller t1, then the shorter interval.
    """
    return Scanner(g, n, l0, l1, kind).scan()


def permutation_pvalue(g: SimilarityGraph, n: int, l0: int, l1: int, kind: str = "m",
                       B: int = 100, seed=None) -> float:
    """``(1 + #{b: max scan of relabeled graph >= observed}) / (B + 1)``."""
    return Scanner(g, n, l0, l1, kind).permutation_pvalue(B, seed)


def window_seed(cfg_seed: int, window: KeypointSeries) -> np.random.SeedSequence:
    """Seed for one window's permutations, fixed by config seed and window start."""
    start_ms = int(round(window.start_s * 1000))
    return np.random.SeedSequence([int(cfg_seed), start_ms, len(window)])


def detect(window: KeypointSeries, cfg: DetectionConfig, seed=None) -> ActivityInterval | None:
    """Run distance -> k-MST -> scan -> permutation test on one window.

    Returns the most changed interval in seconds, or None if its permutation
    p-value exceeds ``cfg.alpha`` or no candidate is admissible.
    """
    n = len(window)
    l0, l1 = cfg.interval_bounds(n)
    if n < max(20, l0 + 4):
        raise ValueError(f"window too short for detection: {n} observations")
    if l0 > l1:
        return None
    g = kmst(pairwise_distances(window.values), cfg.k)
    scanner = Scanner(g, n, l0, l1, cfg.stat)
    try:
        value, t1, t2 = scanner.max_stat()
    except NoValidCandidate:
        return None
    if seed is None:
        seed = window_seed(cfg.seed, window)
    p = scanner.permutation_pvalue(cfg.perm_B, seed, observed=value)
    if p > cfg.alpha:
        return None
    return ActivityInterval(
        video_id=window.video_id,
        view=window.view,
        start_s=window.start_s + t1 / window.sample_hz,
        end_s=window.start_s + t2 / window.sample_hz,
        stat_value=float(value),
        p_value=float(p),
    )

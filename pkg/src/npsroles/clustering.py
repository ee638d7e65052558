"""K-means on subspace rows, misclassification error, role extraction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import maximum_bipartite_matching

from ._rng import make_rng, trial_seed
from .nps import BetaPolicy, choose_beta, working_matrix
from .sbm import Assignment
from .spectral import (
    SpectralReport,
    algorithm1_subspace,
    similarity_spectrum,
    _window,
)

__all__ = [
    "KMeansResult",
    "MisclassificationScore",
    "RoleExtraction",
    "kmeans",
    "lloyd",
    "kmeans_plusplus",
    "misclassification",
    "misclassification_exhaustive",
    "misclassification_bottleneck",
    "extract_roles",
]

MAX_LLOYD_ITER = 300
DEFAULT_RESTARTS = 20
EXHAUSTIVE_MAX_Q = 8


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: Assignment
    centers: np.ndarray
    inertia: float
    restarts_used: int
    n_iter: int
    history: tuple[float, ...] = ()


def _sq_dist(x, centers):
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plusplus(x: np.ndarray, q: int, rng) -> np.ndarray:
    """D^2-weighted seeding."""
    n = x.shape[0]
    centers = np.empty((q, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(1)
    for c in range(1, q):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = x[idx]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(1))
    return centers


def lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = MAX_LLOYD_ITER):
    """Lloyd iterations until the assignment stops changing.

    Returns ``(labels, centers, inertia, n_iter, history)`` where ``history``
    lists the inertia after every assignment step.  A cluster that empties
    is re-seeded at the point farthest from its current center.
    """
    centers = centers.copy()
    q = centers.shape[0]
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dist(x, centers)
        # argmin returns the lowest index among ties
        new = d.argmin(1)
        history.append(float(d[np.arange(len(x)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(q):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean(0)
        empty = [c for c in range(q) if not np.any(labels == c)]
        for c in empty:
            far = int(d[np.arange(len(x)), labels].argmax())
            centers[c] = x[far]
            labels[far] = c
            d[far, :] = 0.0
    d = _sq_dist(x, centers)
    labels = d.argmin(1)
    inertia = float(d[np.arange(len(x)), labels].sum())
    return labels, centers, inertia, it, history


def kmeans(rows, q: int, restarts: int = DEFAULT_RESTARTS, seed=0) -> KMeansResult:
    """Best of ``restarts`` k-means++ seeded Lloyd runs (lowest inertia,
    earliest restart on ties)."""
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not 1 <= q <= x.shape[0]:
        raise ValueError(f"q={q} must lie in 1..{x.shape[0]}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = make_rng(trial_seed(seed, r))
        labels, centers, inertia, n_iter, hist = lloyd(x, kmeans_plusplus(x, q, rng))
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, n_iter, hist)
    labels, centers, inertia, n_iter, hist = best
    return KMeansResult(Assignment(labels, q), centers, inertia, restarts, n_iter, tuple(hist))


@dataclass(frozen=True)
class MisclassificationScore:
    """``value = min_pi max_i |T_pi(i) symdiff C_i| / |C_i|``;
    ``matching[i]`` is the found label paired with true cluster ``i``."""

    value: float
    matching: tuple[int, ...]


def _cost_matrix(truth: Assignment, found: Assignment, q: int) -> np.ndarray:
    """cost[i, j] = |T_j symdiff C_i| / |C_i|."""
    if len(truth) != len(found):
        raise ValueError("assignments have different lengths")
    t = truth.labels
    f = found.labels
    if f.size and f.max() >= q:
        raise ValueError("found label outside the truth's label range")
    overlap = np.zeros((q, q))
    np.add.at(overlap, (t, f), 1.0)
    c_size = np.bincount(t, minlength=q).astype(float)
    t_size = np.bincount(f, minlength=q).astype(float)
    if np.any(c_size == 0):
        raise ValueError("every true cluster must be non-empty")
    sym = c_size[:, None] + t_size[None, :] - 2.0 * overlap
    return sym / c_size[:, None]


def _q_of(truth: Assignment, found: Assignment) -> int:
    if found.labels.size and found.labels.max() >= truth.q:
        raise ValueError("found label outside the truth's label range")
    return truth.q


def misclassification_exhaustive(truth: Assignment, found: Assignment) -> MisclassificationScore:
    q = _q_of(truth, found)
    cost = _cost_matrix(truth, found, q)
    best_val, best_perm = np.inf, None
    rows = np.arange(q)
    for perm in itertools.permutations(range(q)):
        val = cost[rows, perm].max()
        if val < best_val:
            best_val, best_perm = val, perm
    return MisclassificationScore(float(best_val), tuple(int(p) for p in best_perm))


def misclassification_bottleneck(truth: Assignment, found: Assignment) -> MisclassificationScore:
    """Smallest threshold admitting a perfect matching, by bisection over
    the sorted distinct costs."""
    q = _q_of(truth, found)
    cost = _cost_matrix(truth, found, q)
    levels = np.unique(cost)

    def matching_at(th):
        graph = sp.csr_matrix((cost <= th).astype(np.int8))
        m = maximum_bipartite_matching(graph, perm_type="column")
        return m if np.all(m >= 0) else None

    lo, hi = 0, levels.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if matching_at(levels[mid]) is not None:
            hi = mid
        else:
            lo = mid + 1
    match = matching_at(levels[lo])
    return MisclassificationScore(float(cost[np.arange(q), match].max()), tuple(int(j) for j in match))


def misclassification(truth: Assignment, found: Assignment) -> MisclassificationScore:
    """Misclassification error; exact for every q (exhaustive up to q=8)."""
    if _q_of(truth, found) <= EXHAUSTIVE_MAX_Q:
        return misclassification_exhaustive(truth, found)
    return misclassification_bottleneck(truth, found)


@dataclass(frozen=True, eq=False)
class RoleExtraction:
    assignment: Assignment
    spectrum: SpectralReport | None
    kmeans: KMeansResult
    basis: np.ndarray
    beta: float
    rank_warning: bool


def extract_roles(
    a,
    q: int,
    policy: BetaPolicy | str = "safe",
    k: int = 1,
    restarts: int = DEFAULT_RESTARTS,
    seed=0,
    backend: str = "subspace",
    spectrum: bool = True,
) -> RoleExtraction:
    """Partition the nodes of a digraph into ``q`` roles.

    Picks beta by ``policy``, computes the q-dimensional subspace ``X_k``
    with :func:`algorithm1_subspace`, and runs k-means on its rows.  The
    leading eigenvalues of ``S_1`` are returned with a rank estimate; when it
    disagrees with ``q`` the result carries ``rank_warning=True`` (``q``
    is still used).  ``spectrum=False`` skips that diagnostic.
    """
    a = working_matrix(a)
    n = a.shape[0]
    if q == 1:
        labels = Assignment(np.zeros(n, dtype=np.int64), 1)
        basis = np.full((n, 1), 1.0 / np.sqrt(n))
        spec = similarity_spectrum(a, _window(n, 1))
        km = KMeansResult(labels, basis[:1].copy(), 0.0, 0, 0)
        report = SpectralReport(spec, basis)
        return RoleExtraction(labels, report, km, basis, 0.0, _rank_warning(report, q))
    beta = choose_beta(a, policy) if k > 1 else 0.0
    basis = algorithm1_subspace(a, q, beta, k, seed=seed, backend=backend)
    km = kmeans(basis, q, restarts=restarts, seed=seed)
    if not spectrum:
        return RoleExtraction(km.labels, None, km, basis, beta, False)
    spec = similarity_spectrum(a, _window(n, q))
    report = SpectralReport(spec, basis)
    return RoleExtraction(km.labels, report, km, basis, beta, _rank_warning(report, q))


def _rank_warning(report: SpectralReport, q: int) -> bool:
    return report.estimated_rank is None or report.estimated_rank != q

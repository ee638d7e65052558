"""Stochastic Block Model digraphs.

A :class:`RoleModel` fixes the number of roles ``q``, the relative cluster
sizes ``m_1..m_q`` and the normalised role matrix ``upsilon`` (largest entry
1).  At scale ``n`` cluster ``a`` holds ``round(m_a * n)`` nodes and an edge
``i -> j`` appears independently with probability
``f(n) * upsilon[label(i), label(j)]``.

Nodes are always emitted cluster-contiguous; use :func:`shuffle_nodes` to
obtain a relabelled copy.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ._rng import make_rng

__all__ = [
    "RoleModel",
    "Digraph",
    "Assignment",
    "ExpectedAdjacency",
    "ParseError",
    "cycle_model",
    "sample_adjacency",
    "expected_adjacency",
    "ideal_adjacency",
    "shuffle_nodes",
    "block_densities",
    "write_edge_list",
    "read_edge_list",
    "write_assignment",
    "read_assignment",
]

_RANK_RTOL = 1e-10


def _numerical_rank(a: np.ndarray, rtol: float = _RANK_RTOL) -> int:
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RoleModel:
    """Generator of role-structured random digraphs.

    Parameters
    ----------
    upsilon : array-like, (q, q)
        Block connection probabilities.  They are rescaled so that the
        largest entry is 1; the removed factor is folded into the density.
    fractions : array-like, (q,)
        Positive relative cluster sizes ``m_i``.
    density : float or callable, default 1.0
        ``f(n)``.  A constant or a function of the scale ``n``.
    """

    upsilon: np.ndarray
    fractions: np.ndarray
    density: float | Callable[[int], float] = 1.0
    scale: float = field(init=False)

    def __post_init__(self):
        ups = np.array(self.upsilon, dtype=float)
        fr = np.array(self.fractions, dtype=float).ravel()
        if ups.ndim != 2 or ups.shape[0] != ups.shape[1]:
            raise ValueError(f"upsilon must be square, got shape {ups.shape}")
        if fr.shape != (ups.shape[0],):
            raise ValueError("need one fraction per role")
        if np.any(fr <= 0):
            raise ValueError("cluster fractions must be positive")
        if np.any(ups < 0) or np.any(ups > 1):
            raise ValueError("upsilon entries must lie in [0, 1]")
        top = ups.max()
        # an all-zero model has nothing to normalise
        scale = float(top) if top > 0 else 1.0
        object.__setattr__(self, "upsilon", _frozen(ups / scale))
        object.__setattr__(self, "fractions", _frozen(fr))
        object.__setattr__(self, "scale", scale)

    @property
    def q(self) -> int:
        return self.upsilon.shape[0]

    @property
    def m(self) -> float:
        return float(self.fractions.sum())

    @property
    def m_min(self) -> float:
        return float(self.fractions.min())

    @property
    def m_max(self) -> float:
        return float(self.fractions.max())

    @cached_property
    def s(self) -> int:
        """rank(upsilon)"""
        return _numerical_rank(self.upsilon)

    @cached_property
    def compound(self) -> np.ndarray:
        """The q x 2q matrix ``[upsilon, upsilon^T]``."""
        return _frozen(np.hstack([self.upsilon, self.upsilon.T]))

    @cached_property
    def compound_singular_values(self) -> np.ndarray:
        return _frozen(np.linalg.svd(self.compound, compute_uv=False))

    @cached_property
    def r(self) -> int:
        """rank([upsilon, upsilon^T])"""
        return _numerical_rank(self.compound)

    def f(self, n: int) -> float:
        """Effective density ``f(n)`` including the normalisation factor."""
        base = self.density(n) if callable(self.density) else self.density
        return self.scale * float(base)

    def delta(self, n: int) -> float:
        """Noise scale ``2 sqrt(m n f(n))``."""
        return 2.0 * np.sqrt(self.m * n * self.f(n))

    def probabilities(self, n: int) -> np.ndarray:
        p = self.f(n) * self.upsilon
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"edge probabilities leave [0, 1] at n={n}")
        return p

    def cluster_sizes(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("scale n must be >= 1")
        sizes = np.rint(self.fractions * n).astype(int)
        if np.any(sizes == 0):
            raise ValueError(f"a cluster is empty at n={n}")
        return sizes

    def n_nodes(self, n: int) -> int:
        return int(self.cluster_sizes(n).sum())

    def assignment(self, n: int) -> "Assignment":
        sizes = self.cluster_sizes(n)
        return Assignment(np.repeat(np.arange(self.q), sizes), self.q)


def cycle_model(p: float) -> RoleModel:
    """Three roles of ten units each; role a links to a+1 (mod 3) with
    probability p and everywhere else with 1 - p."""
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    cyc = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    rest = np.array([[1, 0, 1], [1, 1, 0], [0, 1, 1]], dtype=float)
    return RoleModel(p * cyc + (1 - p) * rest, [10, 10, 10])


@dataclass(frozen=True, eq=False)
class Digraph:
    """Unweighted digraph stored as a CSR 0/1 adjacency matrix."""

    adjacency: sp.csr_matrix

    def __post_init__(self):
        a = sp.csr_matrix(self.adjacency, dtype=float)
        if a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        a.sum_duplicates()
        a.eliminate_zeros()
        if a.nnz and not np.all(a.data == 1.0):
            raise ValueError("adjacency entries must be 0 or 1")
        a.sort_indices()
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "Digraph":
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n_nodes):
            raise ValueError("edge endpoint out of range")
        a = sp.csr_matrix(
            (np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n_nodes, n_nodes)
        )
        # collapse repeated pairs to a single edge
        a.sum_duplicates()
        a.data[:] = 1.0
        return cls(a)

    @classmethod
    def from_dense(cls, a) -> "Digraph":
        return cls(sp.csr_matrix(np.asarray(a, dtype=float)))

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz

    def edges(self) -> np.ndarray:
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order]]).astype(np.int64)

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return self.n_nodes == other.n_nodes and (self.adjacency != other.adjacency).nnz == 0


@dataclass(frozen=True, eq=False)
class Assignment:
    """Role label (0-based) of every node."""

    labels: np.ndarray
    q: int | None = None

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if lab.size and not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise ValueError("labels must be integers")
        lab = lab.astype(np.int64)
        q = self.q if self.q is not None else (int(lab.max()) + 1 if lab.size else 0)
        if lab.size and (lab.min() < 0 or lab.max() >= q):
            raise ValueError(f"labels must lie in 0..{q - 1}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "q", int(q))

    def __len__(self):
        return self.labels.size

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.labels, other.labels)

    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == a) for a in range(self.q)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.q)

    def indicator(self) -> sp.csr_matrix:
        """N x q 0/1 membership matrix."""
        n = self.labels.size
        return sp.csr_matrix(
            (np.ones(n), (np.arange(n), self.labels)), shape=(n, self.q)
        )


def sample_adjacency(model: RoleModel, n: int, seed=None) -> tuple[Digraph, Assignment]:
    """Draw one digraph from ``model`` at scale ``n``.

    Entry ``(i, j)`` is an independent Bernoulli variable with success
    probability ``f(n) * upsilon[label(i), label(j)]``; self-loops are drawn
    like any other entry.  The output is a pure function of
    ``(model, n, seed)``.
    """
    probs = model.probabilities(n)
    assignment = model.assignment(n)
    labels = assignment.labels
    n_nodes = labels.size
    rng = make_rng(seed)
    rows, cols = [], []
    start = 0
    for a, size in enumerate(model.cluster_sizes(n)):
        p_row = probs[a, labels]
        hits = rng.random((size, n_nodes)) < p_row
        r, c = np.nonzero(hits)
        rows.append(r + start)
        cols.append(c)
        start += size
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    adj = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n_nodes, n_nodes))
    return Digraph(adj), assignment


def shuffle_nodes(graph: Digraph, assignment: Assignment, seed=None):
    """Relabel nodes by a random permutation.

    Returns ``(graph, assignment, perm)`` where new node ``i`` is old node
    ``perm[i]``.
    """
    perm = make_rng(seed).permutation(graph.n_nodes)
    adj = graph.adjacency[perm][:, perm]
    return Digraph(adj), Assignment(assignment.labels[perm], assignment.q), perm


@dataclass(frozen=True, eq=False)
class ExpectedAdjacency:
    """Low-rank form ``M = Z @ core @ Z.T`` of the expected adjacency."""

    indicator: sp.csr_matrix
    core: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.indicator.shape[0]

    def dense(self) -> np.ndarray:
        z = self.indicator
        return np.asarray(z @ (z @ self.core).T).T

    def matvec(self, x: np.ndarray) -> np.ndarray:
        z = self.indicator
        return z @ (self.core @ (z.T @ x))

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        z = self.indicator
        return z @ (self.core.T @ (z.T @ x))

    def singular_values(self) -> np.ndarray:
        """Nonzero-block singular values via the q x q form ``D core D``."""
        d = np.sqrt(np.asarray(self.indicator.sum(axis=0)).ravel())
        return np.linalg.svd(d[:, None] * self.core * d[None, :], compute_uv=False)

    def compound_singular_values(self) -> np.ndarray:
        """Singular values of ``[M, M^T]`` (q of them; the rest are zero)."""
        d2 = np.asarray(self.indicator.sum(axis=0)).ravel()
        c = self.core
        gram = c @ (d2[:, None] * c.T) + c.T @ (d2[:, None] * c)
        d = np.sqrt(d2)
        ev = np.linalg.eigvalsh(d[:, None] * gram * d[None, :])[::-1]
        return np.sqrt(np.clip(ev, 0, None))


def expected_adjacency(model: RoleModel, n: int) -> ExpectedAdjacency:
    """``E[A] = f(n) Z upsilon Z^T`` in factored form."""
    assignment = model.assignment(n)
    return ExpectedAdjacency(assignment.indicator(), _frozen(model.f(n) * model.upsilon))


def ideal_adjacency(assignment: Assignment, binary_roles) -> Digraph:
    """Block-constant digraph whose block (a, b) is full iff
    ``binary_roles[a, b]`` is 1."""
    b = np.asarray(binary_roles)
    q = assignment.q
    if b.shape != (q, q):
        raise ValueError(f"binary_roles must be {q}x{q}")
    if not np.all((b == 0) | (b == 1)):
        raise ValueError("binary_roles must be 0/1")
    z = assignment.indicator()
    adj = z @ sp.csr_matrix(b.astype(float)) @ z.T
    return Digraph(sp.csr_matrix(adj))


def block_densities(graph: Digraph, assignment: Assignment) -> np.ndarray:
    """Fraction of present edges in every (a, b) block."""
    z = assignment.indicator()
    counts = np.asarray((z.T @ graph.adjacency @ z).todense())
    sizes = assignment.sizes().astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return counts / np.outer(sizes, sizes)


class ParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def write_edge_list(path: str | os.PathLike, graph: Digraph) -> None:
    edges = graph.edges()
    with open(path, "w") as fh:
        fh.write(f"{graph.n_nodes} {len(edges)}\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")


def read_edge_list(path: str | os.PathLike) -> Digraph:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "missing header 'n_nodes n_edges'")
    head = lines[0].split()
    try:
        n_nodes, n_edges = (int(t) for t in head)
    except ValueError:
        raise ParseError(path, 1, f"bad header {lines[0]!r}") from None
    if n_nodes < 0 or n_edges < 0:
        raise ParseError(path, 1, "negative counts in header")
    body = [(k, ln) for k, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(body) != n_edges:
        raise ParseError(path, len(lines), f"header promises {n_edges} edges, found {len(body)}")
    edges = np.empty((n_edges, 2), dtype=np.int64)
    for row, (lineno, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError(path, lineno, f"expected 'i j', got {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(path, lineno, f"non-integer node in {ln!r}") from None
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ParseError(path, lineno, f"node out of range 0..{n_nodes - 1}")
        edges[row] = i, j
    return Digraph.from_edges(n_nodes, edges)


def write_assignment(path: str | os.PathLike, assignment: Assignment) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in assignment.labels)


def read_assignment(path: str | os.PathLike, q: int | None = None) -> Assignment:
    labels = []
    with open(path) as fh:
        for lineno, ln in enumerate(fh, start=1):
            if not ln.strip():
                continue
            try:
                labels.append(int(ln))
            except ValueError:
                raise ParseError(path, lineno, f"bad label {ln.strip()!r}") from None
    try:
        return Assignment(np.array(labels, dtype=np.int64), q)
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None

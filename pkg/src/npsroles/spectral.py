"""Dominant subspaces, spectra and subspace distances.

:func:`algorithm1_subspace` computes the q-dimensional subspace used for
role extraction without ever forming the dense similarity matrix: only
products with the sparse adjacency matrix and thin SVDs of ``N x 3q``
blocks are needed.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._rng import make_rng
from .nps import SimilarityState, working_matrix

__all__ = [
    "SpectralConvergenceError",
    "SpectralReport",
    "RankEstimate",
    "SubspaceAngles",
    "dominant_singular_subspace",
    "thin_left_singular",
    "algorithm1_subspace",
    "similarity_spectrum",
    "truncated_evd",
    "gap_table",
    "estimate_rank",
    "principal_angle_sines",
    "write_spectrum_csv",
    "read_spectrum_csv",
]

NO_SIGNAL_FLOOR = 1e-12
SIGNIFICANT_RATIO = 2.0


class SpectralConvergenceError(RuntimeError):
    pass


def _bibliometric_operator(a):
    """v -> A A^T v + A^T A v, the action of S_1 = [A, A^T][A, A^T]^T."""
    at = a.T.tocsr() if sp.issparse(a) else a.T

    def apply(v):
        return a @ (at @ v) + at @ (a @ v)

    return apply


def dominant_singular_subspace(
    a,
    q: int,
    tol: float = 1e-10,
    max_iter: int = 3000,
    extra: int = 4,
    seed=0,
    backend: str = "subspace",
) -> tuple[np.ndarray, np.ndarray]:
    """q dominant left singular vectors of ``[A, A^T]`` and their singular values.

    ``backend="subspace"`` runs block subspace iteration on
    ``v -> A A^T v + A^T A v`` with ``q + extra`` vectors and stops once the
    Ritz residuals of the leading q pairs fall below ``tol * theta_1``.
    ``backend="lanczos"`` uses ARPACK through :func:`scipy.sparse.linalg.svds`.
    """
    a = working_matrix(a)
    n = a.shape[0]
    if q > n:
        raise ValueError(f"q={q} exceeds the number of nodes {n}")
    if q < 1:
        raise ValueError("q must be positive")
    if backend == "lanczos":
        return _lanczos_subspace(a, q, tol)
    if backend != "subspace":
        raise ValueError(f"unknown backend {backend!r}")

    apply = _bibliometric_operator(a)
    block = min(n, q + extra)
    if block >= n or n <= 2 * block:
        return _dense_subspace(a, q)
    x = make_rng(seed).standard_normal((n, block))
    x, _ = np.linalg.qr(x)
    for _ in range(max_iter):
        ax = apply(x)
        # Rayleigh-Ritz on the current block
        h = x.T @ ax
        theta, w = np.linalg.eigh((h + h.T) / 2)
        theta, w = theta[::-1], w[:, ::-1]
        x = x @ w
        ax = ax @ w
        if theta[0] <= 0:
            return x[:, :q], np.zeros(q)
        res = np.linalg.norm(ax[:, :q] - x[:, :q] * theta[:q], axis=0)
        if np.all(res <= tol * theta[0]):
            return x[:, :q], np.sqrt(np.clip(theta[:q], 0, None))
        x, _ = np.linalg.qr(ax)
    raise SpectralConvergenceError(
        f"subspace iteration did not reach residual {tol:g} in {max_iter} steps"
    )


def _dense_subspace(a, q):
    dense = a.toarray() if sp.issparse(a) else np.asarray(a)
    s1 = dense @ dense.T + dense.T @ dense
    n = s1.shape[0]
    theta, vec = sla.eigh(s1, subset_by_index=[n - q, n - 1])
    return vec[:, ::-1], np.sqrt(np.clip(theta[::-1], 0, None))


def _lanczos_subspace(a, q, tol):
    n = a.shape[0]
    if q >= n - 1:
        return _dense_subspace(a, q)
    compound = sp.hstack([a, a.T]).tocsr() if sp.issparse(a) else np.hstack([a, a.T])
    try:
        u, s, _ = spla.svds(compound, k=q, tol=tol, v0=np.ones(n))
    except spla.ArpackNoConvergence as exc:
        raise SpectralConvergenceError(str(exc)) from exc
    order = np.argsort(s)[::-1]
    return u[:, order], s[order]


def thin_left_singular(y: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """q dominant left singular vectors of a tall matrix via its Gram matrix."""
    gram = y.T @ y
    theta, w = np.linalg.eigh((gram + gram.T) / 2)
    theta, w = theta[::-1][:q], w[:, ::-1][:, :q]
    sv = np.sqrt(np.clip(theta, 0, None))
    if sv[-1] <= 1e-8 * sv[0]:
        # Gram route loses the small directions; fall back to a direct SVD
        u, s, _ = np.linalg.svd(y, full_matrices=False)
        return u[:, :q], s[:q]
    u = (y @ w) / sv
    # one re-orthogonalisation pass to undo Gram squaring error
    u, rfac = np.linalg.qr(u)
    u = u * np.sign(np.diag(rfac))
    return u, sv


def algorithm1_subspace(a, q: int, beta: float, k: int, seed=0, backend: str = "subspace") -> np.ndarray:
    """Orthonormal N x q basis ``X_k``.

    ``X_1`` holds the q dominant left singular vectors of ``[A, A^T]``; for
    ``h = 2..k``, ``X_h`` holds those of ``[beta A X_{h-1}, beta A^T X_{h-1}, X_1]``.
    """
    if k < 1:
        raise ValueError("depth k must be >= 1")
    a = working_matrix(a)
    at = a.T.tocsr() if sp.issparse(a) else a.T
    x1, _ = dominant_singular_subspace(a, q, seed=seed, backend=backend)
    x = x1
    for _ in range(2, k + 1):
        y = np.hstack([beta * np.asarray(a @ x), beta * np.asarray(at @ x), x1])
        x, _ = thin_left_singular(y, q)
    return x


@dataclass(frozen=True)
class RankEstimate:
    rank: int
    ratio: float
    runner_up: float
    ambiguous: bool


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Leading eigenvalues (descending), an r-dimensional basis and gaps."""

    eigenvalues: np.ndarray
    basis: np.ndarray
    abs_gaps: np.ndarray = field(init=False)
    rel_gaps: np.ndarray = field(init=False)
    rank: RankEstimate | None = field(init=False)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        abs_g, rel_g = gap_table(ev)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "abs_gaps", abs_g)
        object.__setattr__(self, "rel_gaps", rel_g)
        try:
            est = estimate_rank(ev) if ev.size >= 2 else None
        except ValueError:
            est = None
        object.__setattr__(self, "rank", est)

    @property
    def estimated_rank(self) -> int | None:
        return None if self.rank is None else self.rank.rank


def gap_table(eigenvalues) -> tuple[np.ndarray, np.ndarray]:
    """Absolute gaps ``l_i - l_{i+1}`` and relative gaps ``l_i / l_{i+1}``.

    Values at or below ``NO_SIGNAL_FLOOR`` (absolute, or relative to the
    largest) count as zero: a ratio into a zero is ``inf`` and a ratio
    between zeros is 1.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size < 2:
        return np.empty(0), np.empty(0)
    floor = NO_SIGNAL_FLOOR * max(1.0, abs(ev[0]))
    clipped = np.where(ev > floor, ev, 0.0)
    num, den = clipped[:-1], clipped[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 1.0))
    return ev[:-1] - ev[1:], rel


def estimate_rank(spectrum, method: str = "last-gap", min_ratio: float = SIGNIFICANT_RATIO) -> RankEstimate:
    """Number of signal eigenvalues in a descending spectrum.

    ``method="last-gap"`` returns the deepest index whose relative gap is at
    least ``min_ratio``; signal eigenvalues may be spread out among
    themselves, but the noise tail below them is flat.  ``method="argmax"``
    returns the index of the largest relative gap.  Either way, when no gap
    reaches ``min_ratio`` the argmax is used (ties to the smaller index) and
    the estimate is marked ambiguous.  It is also ambiguous when the two
    largest relative gaps are within a factor 2 of each other.
    """
    if isinstance(spectrum, SpectralReport):
        ev = spectrum.eigenvalues
    else:
        ev = np.asarray(spectrum, dtype=float)
    if ev.size < 2:
        raise ValueError("need at least two eigenvalues")
    if np.all(ev <= NO_SIGNAL_FLOOR):
        raise ValueError("no signal: every eigenvalue is below the floor")
    _, rel = gap_table(ev)
    order = np.argsort(-rel, kind="stable")
    top = rel[order[0]]
    runner = rel[order[1]] if rel.size > 1 else 1.0
    significant = np.flatnonzero(rel >= min_ratio)
    if method == "argmax":
        idx = int(order[0])
    elif method == "last-gap":
        idx = int(significant[-1]) if significant.size else int(order[0])
    else:
        raise ValueError(f"unknown method {method!r}")
    ambiguous = significant.size == 0 or (rel.size > 1 and runner * 2 > top)
    ratio = rel[idx]
    others = np.delete(rel, idx)
    return RankEstimate(idx + 1, float(ratio), float(others.max()) if others.size else 1.0, bool(ambiguous))


def _window(n: int, r: int) -> int:
    return min(n, max(3 * r + 5, r + 5))


def truncated_evd(s, r: int, window: int | None = None) -> SpectralReport:
    """Leading ``r`` eigenpairs of a symmetric matrix plus a gap window."""
    mat = s.matrix if isinstance(s, SimilarityState) else np.asarray(s, dtype=float)
    n = mat.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"r must lie in 1..{n}")
    w = _window(n, r) if window is None else min(n, max(window, r))
    vals, vecs = sla.eigh((mat + mat.T) / 2, subset_by_index=[n - w, n - 1])
    vals, vecs = vals[::-1], vecs[:, ::-1]
    return SpectralReport(vals, vecs[:, :r])


def similarity_spectrum(a, count: int) -> np.ndarray:
    """Leading ``count`` eigenvalues of ``S_1 = A A^T + A^T A`` (descending),
    i.e. the squared singular values of ``[A, A^T]``."""
    a = working_matrix(a)
    n = a.shape[0]
    count = min(count, n)
    if n <= 600 or count >= n - 1:
        dense = a.toarray() if sp.issparse(a) else a
        s1 = dense @ dense.T + dense.T @ dense
        return sla.eigh(s1, eigvals_only=True, subset_by_index=[n - count, n - 1])[::-1]
    op = spla.LinearOperator((n, n), matvec=_bibliometric_operator(a), dtype=float)
    vals = spla.eigsh(op, k=count, which="LA", v0=np.ones(n), tol=1e-10, return_eigenvectors=False)
    return np.sort(vals)[::-1]


@dataclass(frozen=True, eq=False)
class SubspaceAngles:
    """Sines of the principal angles, descending."""

    sines: np.ndarray

    @property
    def norm(self) -> float:
        """Spectral norm of ``P_U - P_V``, the largest sine."""
        return float(self.sines[0]) if self.sines.size else 0.0


def _check_orthonormal(u, name, tol=1e-8):
    err = np.abs(u.T @ u - np.eye(u.shape[1])).max() if u.size else 0.0
    if err > tol:
        raise ValueError(f"{name} is not orthonormal (max deviation {err:.2e})")


def principal_angle_sines(u, v) -> SubspaceAngles:
    """Principal-angle sines between ``span(U)`` and ``span(V)``.

    Taken as the singular values of ``(I - U U^T) V``, which equal the
    nonzero singular values of ``U U^T - V V^T`` and stay accurate for
    nearly equal subspaces.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if v.ndim == 1:
        v = v[:, None]
    if u.shape != v.shape:
        raise ValueError(f"subspace shapes differ: {u.shape} vs {v.shape}")
    _check_orthonormal(u, "U")
    _check_orthonormal(v, "V")
    resid = v - u @ (u.T @ v)
    sines = np.linalg.svd(resid, compute_uv=False)
    return SubspaceAngles(np.clip(np.sort(sines)[::-1], 0.0, 1.0))


def write_spectrum_csv(path: str | os.PathLike, eigenvalues) -> None:
    """Rows ``index,eigenvalue,abs_gap,rel_gap`` (1-based; gaps empty on the last row)."""
    ev = np.asarray(eigenvalues, dtype=float)
    abs_g, rel_g = gap_table(ev)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "abs_gap", "rel_gap"])
        for i, val in enumerate(ev):
            if i < abs_g.size:
                w.writerow([i + 1, repr(float(val)), repr(float(abs_g[i])), repr(float(rel_g[i]))])
            else:
                w.writerow([i + 1, repr(float(val)), "", ""])


def read_spectrum_csv(path: str | os.PathLike) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([float(row["eigenvalue"]) for row in csv.DictReader(fh)])

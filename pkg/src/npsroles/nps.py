"""Neighbourhood Pattern Similarity matrices.

The similarity matrices are generated by

    S_0 = 0,    S_{k+1} = Gamma_W[I + beta^2 S_k],
    Gamma_W[X] = W X W^T + W^T X W,

with ``W`` the adjacency matrix ``A`` of a sampled digraph (giving ``S_k``) or
its expectation ``M`` (giving ``T_k``).  The sequence converges when
``beta^2 * ||Gamma_W|| < 1`` where ``||Gamma_W||`` is the operator norm
induced by the spectral norm; that norm equals ``||W W^T + W^T W||``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .sbm import Digraph, ExpectedAdjacency, RoleModel, expected_adjacency

__all__ = [
    "ConvergenceError",
    "SimilarityState",
    "BetaPolicy",
    "as_operator_input",
    "working_matrix",
    "gamma_apply",
    "gamma_matrix",
    "gamma_norm",
    "gamma_norm_bound",
    "spectral_norm",
    "symmetric_norm",
    "choose_beta",
    "iterate_similarity",
    "similarity_recurrence",
    "similarity_limit",
    "similarity_limit_oracle",
    "expected_similarity",
    "expected_spectrum",
    "save_similarity",
    "load_similarity",
    "ORACLE_CAP",
]

ORACLE_CAP = 64
LIMIT_RTOL = 1e-12
LIMIT_MAX_STEPS = 200


class ConvergenceError(ValueError):
    """beta is too large for the similarity recurrence to converge."""


def as_operator_input(w):
    """Accept a Digraph, sparse matrix or array; return array or CSR."""
    if isinstance(w, Digraph):
        return w.adjacency
    if isinstance(w, ExpectedAdjacency):
        return w.dense()
    if sp.issparse(w):
        return sp.csr_matrix(w, dtype=float)
    return np.asarray(w, dtype=float)


DENSE_FILL = 0.05


def working_matrix(w):
    """Operator input in the cheaper storage: dense above 5% fill."""
    w = as_operator_input(w)
    if sp.issparse(w) and w.nnz > DENSE_FILL * w.shape[0] * w.shape[1]:
        return w.toarray()
    return w


def _square(w) -> int:
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    return w.shape[0]


def _conj(w, x):
    """``w @ x @ w.T`` for dense ``x`` and dense or sparse ``w``."""
    wx = np.asarray(w @ x)
    return np.asarray(w @ wx.T).T


def gamma_apply(w, x) -> np.ndarray:
    """``W X W^T + W^T X W``."""
    w = working_matrix(w)
    x = np.asarray(x, dtype=float)
    n = _square(w)
    if x.shape != (n, n):
        raise ValueError(f"X has shape {x.shape}, W is {n}x{n}")
    wt = w.T.tocsr() if sp.issparse(w) else w.T
    return _conj(w, x) + _conj(wt, x)


def gamma_matrix(w) -> np.ndarray:
    """Dense N^2 x N^2 matrix of Gamma_W acting on column-stacked vec(X).

    ``vec(W X W^T) = (W kron W) vec(X)``, so the operator is
    ``W kron W + W^T kron W^T``.
    """
    w = as_operator_input(w)
    w = w.toarray() if sp.issparse(w) else w
    _square(w)
    return np.kron(w, w) + np.kron(w.T, w.T)


def _sym_top_eig(apply, n: int) -> float:
    if n <= 400:
        dense = apply(np.eye(n))
        return float(np.linalg.eigvalsh((dense + dense.T) / 2)[-1])
    op = spla.LinearOperator((n, n), matvec=apply, matmat=apply, dtype=float)
    v0 = np.ones(n) / np.sqrt(n)
    return float(spla.eigsh(op, k=1, which="LA", v0=v0, tol=1e-12)[0][0])


def spectral_norm(w) -> float:
    """Largest singular value of a dense or sparse matrix."""
    w = working_matrix(w)
    if max(w.shape) <= 400:
        dense = w.toarray() if sp.issparse(w) else w
        return float(np.linalg.norm(dense, 2)) if dense.size else 0.0
    wt = w.T.tocsr() if sp.issparse(w) else w.T
    return float(np.sqrt(max(_sym_top_eig(lambda v: wt @ (w @ v), w.shape[1]), 0.0)))


def symmetric_norm(x: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix from its extreme eigenvalues."""
    n = x.shape[0]
    if n == 0:
        return 0.0
    if n <= 400:
        ev = np.linalg.eigvalsh(x)
        return float(max(abs(ev[0]), abs(ev[-1])))
    hi = sla.eigh(x, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
    lo = sla.eigh(x, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(max(abs(hi), abs(lo)))


def gamma_norm(w) -> float:
    """Exact ``||Gamma_W|| = ||[W, W^T]||^2 = ||W W^T + W^T W||``."""
    w = working_matrix(w)
    n = _square(w)
    if n == 0:
        return 0.0
    wt = w.T.tocsr() if sp.issparse(w) else w.T
    return max(_sym_top_eig(lambda v: w @ (wt @ v) + wt @ (w @ v), n), 0.0)


def gamma_norm_bound(w) -> float:
    """The cheap upper bound ``2 ||W||^2``."""
    return 2.0 * spectral_norm(w) ** 2


@dataclass(frozen=True)
class BetaPolicy:
    """How to pick the scaling factor beta from an adjacency matrix.

    ``safe``          beta^2 = 1 / (4 ||A||^2)
    ``half-gamma``    beta^2 = 1 / (2 ||Gamma_A||)
    ``fig4-literal``  beta   = 1 / (2 ||[A, A^T]||^2)  (beta, not beta^2)
    ``explicit``      a fixed beta, validated against ||Gamma_A||

    ``fig4-literal`` reproduces a published experiment setting verbatim;
    whether beta or beta^2 was intended there is unclear, and with beta it
    gives a far smaller scaling than the other policies.
    """

    kind: Literal["safe", "half-gamma", "fig4-literal", "explicit"] = "safe"
    value: float | None = None

    KINDS = ("safe", "half-gamma", "fig4-literal", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown beta policy {self.kind!r}")
        if self.kind == "explicit" and (self.value is None or self.value < 0):
            raise ValueError("explicit policy needs a non-negative beta")

    @classmethod
    def parse(cls, text: str) -> "BetaPolicy":
        """``safe``, ``half-gamma``, ``fig4-literal`` or a number / ``explicit:<beta>``."""
        text = text.strip()
        if text in ("safe", "half-gamma", "fig4-literal"):
            return cls(text)
        val = text.split(":", 1)[1] if text.startswith("explicit:") else text
        try:
            return cls("explicit", float(val))
        except ValueError:
            raise ValueError(f"cannot parse beta policy {text!r}") from None


def choose_beta(a, policy: BetaPolicy | str = "safe") -> float:
    if isinstance(policy, str):
        policy = BetaPolicy.parse(policy)
    a = working_matrix(a)
    if policy.kind == "explicit":
        beta = float(policy.value)
        if beta > 0 and beta**2 * gamma_norm(a) >= 1:
            raise ConvergenceError(f"beta={beta} violates beta^2 ||Gamma_A|| < 1")
        return beta
    if policy.kind == "safe":
        nrm = spectral_norm(a)
        if nrm == 0:
            raise ValueError("cannot scale beta for a zero matrix")
        return float(np.sqrt(1.0 / (4.0 * nrm**2)))
    g = gamma_norm(a)
    if g == 0:
        raise ValueError("cannot scale beta for a zero matrix")
    if policy.kind == "half-gamma":
        return float(np.sqrt(1.0 / (2.0 * g)))
    # ||[A, A^T]||^2 == ||Gamma_A||
    return float(1.0 / (2.0 * g))


@dataclass(frozen=True, eq=False)
class SimilarityState:
    """A similarity matrix together with how it was produced.

    ``k`` is the recurrence depth or ``"limit"``; ``steps`` is the number of
    recurrence steps actually taken.  ``source`` is ``"A"`` for a sampled
    adjacency and ``"M"`` for an expectation.
    """

    matrix: np.ndarray
    k: int | str
    beta2: float
    source: str = "A"
    steps: int | None = None

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def eigvalsh(self) -> np.ndarray:
        """All eigenvalues, descending."""
        return np.linalg.eigvalsh(self.matrix)[::-1]


def _check_beta(w, beta: float) -> float:
    beta2 = float(beta) ** 2
    if beta2 > 0 and beta2 * gamma_norm(w) >= 1:
        raise ConvergenceError(
            f"beta^2 ||Gamma_W|| = {beta2 * gamma_norm(w):.4g} >= 1; the recurrence diverges"
        )
    return beta2


def iterate_similarity(w, beta: float) -> Iterator[np.ndarray]:
    """Yield S_0, S_1, S_2, ... without end."""
    w = working_matrix(w)
    n = _square(w)
    beta2 = _check_beta(w, beta)
    s = np.zeros((n, n))
    yield s
    s1 = gamma_apply(w, np.eye(n))
    s = s1
    while True:
        yield s
        s = s1 + beta2 * gamma_apply(w, s)
        s = (s + s.T) / 2


def similarity_recurrence(w, beta: float, k: int, source: str = "A") -> SimilarityState:
    """``S_k`` by ``k`` dense steps of the recurrence from ``S_0 = 0``."""
    if k < 0:
        raise ValueError("depth k must be non-negative")
    it = iterate_similarity(w, beta)
    for _ in range(k + 1):
        s = next(it)
    return SimilarityState(s, int(k), float(beta) ** 2, source, int(k))


def similarity_limit(
    w, beta: float, rtol: float = LIMIT_RTOL, max_steps: int = LIMIT_MAX_STEPS, source: str = "A"
) -> SimilarityState:
    """Iterate until ``||S_{k+1} - S_k|| <= rtol ||S_{k+1}||`` or ``max_steps``."""
    it = iterate_similarity(w, beta)
    prev = next(it)
    steps = 0
    for steps in range(1, max_steps + 1):
        cur = next(it)
        if symmetric_norm(cur - prev) <= rtol * symmetric_norm(cur):
            break
        prev = cur
    return SimilarityState(cur, "limit", float(beta) ** 2, source, steps)


def similarity_limit_oracle(w, beta: float, cap: int = ORACLE_CAP, source: str = "A") -> SimilarityState:
    """Limit S from one dense solve of the vectorised fixed-point equation

        (I - beta^2 (W kron W + W^T kron W^T)) vec(S) = vec(W W^T + W^T W).

    Independent of the recurrence; limited to ``N <= cap``.
    """
    w = as_operator_input(w)
    w = w.toarray() if sp.issparse(w) else w
    n = _square(w)
    if n > cap:
        raise ValueError(f"oracle limited to N <= {cap}, got {n}")
    beta2 = float(beta) ** 2
    k = gamma_matrix(w)
    if beta2 > 0:
        rho = _spectral_radius(k)
        if beta2 * rho >= 1:
            raise ConvergenceError(f"beta^2 rho = {beta2 * rho:.4g} >= 1; system is singular or divergent")
    rhs = (w @ w.T + w.T @ w).reshape(-1, order="F")
    try:
        vec = sla.solve(np.eye(n * n) - beta2 * k, rhs)
    except sla.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    s = vec.reshape(n, n, order="F")
    return SimilarityState((s + s.T) / 2, "limit", beta2, source, None)


def _spectral_radius(k: np.ndarray) -> float:
    if k.shape[0] <= 256:
        return float(np.max(np.abs(np.linalg.eigvals(k)))) if k.size else 0.0
    vals = spla.eigs(k, k=1, which="LM", return_eigenvectors=False, tol=1e-10)
    return float(np.abs(vals[0]))


def expected_similarity(model: RoleModel, n: int, beta: float, k: int | str) -> SimilarityState:
    """``T_k`` for the expectation of ``model`` at scale ``n``.

    Runs the recurrence on the q x q core (``T_k = Z C_k Z^T``) and expands
    at the end, so the cost is dominated by forming the dense N x N result.
    ``k="limit"`` iterates to the same stopping rule as :func:`similarity_limit`.
    """
    ex = expected_adjacency(model, n)
    core, steps = _expected_core(ex, beta, k)
    z = ex.indicator
    dense = np.asarray(z @ (z @ core).T).T
    return SimilarityState((dense + dense.T) / 2, k, float(beta) ** 2, "M", steps)


def expected_spectrum(model: RoleModel, n: int, beta: float, k: int | str) -> np.ndarray:
    """The q leading eigenvalues of ``T_k`` (descending) from the core alone."""
    ex = expected_adjacency(model, n)
    core, _ = _expected_core(ex, beta, k)
    sd = np.sqrt(np.asarray(ex.indicator.sum(axis=0)).ravel())
    return np.linalg.eigvalsh(sd[:, None] * core * sd[None, :])[::-1]


def _expected_core(ex: ExpectedAdjacency, beta: float, k: int | str):
    c = ex.core
    d = np.asarray(ex.indicator.sum(axis=0)).ravel()
    beta2 = float(beta) ** 2
    if beta2 > 0:
        gram = c @ (d[:, None] * c.T) + c.T @ (d[:, None] * c)
        sd = np.sqrt(d)
        g_norm = np.linalg.eigvalsh(sd[:, None] * gram * sd[None, :])[-1]
        if beta2 * g_norm >= 1:
            raise ConvergenceError("beta^2 ||Gamma_M|| >= 1; the recurrence diverges")

    def gamma_core(x):
        # Z^T Z = diag(d), so M (Z x Z^T) M^T = Z (c D x D c^T) Z^T
        dxd = d[:, None] * x * d[None, :]
        return c @ dxd @ c.T + c.T @ dxd @ c

    t1 = gamma_core(np.diag(1.0 / d))  # Gamma_M[I] = Z c D c^T Z^T + ...
    t = np.zeros_like(c)
    if k == "limit":
        steps = 0
        sd = np.sqrt(d)
        for steps in range(1, LIMIT_MAX_STEPS + 1):
            new = t1 + beta2 * gamma_core(t)
            diff = np.linalg.norm(sd[:, None] * (new - t) * sd[None, :], 2)
            if diff <= LIMIT_RTOL * np.linalg.norm(sd[:, None] * new * sd[None, :], 2):
                t = new
                break
            t = new
        return (t + t.T) / 2, steps
    for _ in range(int(k)):
        t = t1 + beta2 * gamma_core(t)
    return (t + t.T) / 2, int(k)


_HEADER = struct.Struct("<qqd")


def save_similarity(path: str | os.PathLike, state: SimilarityState) -> None:
    """Binary dump: little-endian header (int64 N, int64 k, float64 beta^2)
    followed by N*N row-major float64 values.  ``k = -1`` marks a limit."""
    k = -1 if state.k == "limit" else int(state.k)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(state.n_nodes, k, state.beta2))
        fh.write(np.ascontiguousarray(state.matrix, dtype="<f8").tobytes())


def load_similarity(path: str | os.PathLike, source: str = "A") -> SimilarityState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated similarity file")
    n, k, beta2 = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n * n:
        raise ValueError(f"expected {n * n} values, found {body.size}")
    return SimilarityState(body.reshape(n, n).copy(), "limit" if k == -1 else k, beta2, source)

"""Numerical checks of the spectral and clustering bounds.

Each ``check_*`` function draws one or more concrete instances, evaluates
both sides of an inequality and returns :class:`BoundRecord` objects with
the orientation fixed as ``lhs <= rhs``.  Most of the inequalities only hold
for ``n`` large enough; :func:`scan_thresholds` finds, on a grid, the first
``n`` from which a bound keeps holding.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng, trial_seed
from .nps import (
    BetaPolicy,
    choose_beta,
    expected_similarity,
    gamma_apply,
    gamma_norm,
    similarity_limit,
    similarity_recurrence,
    spectral_norm,
    symmetric_norm,
)
from .sbm import RoleModel, expected_adjacency, sample_adjacency
from .spectral import principal_angle_sines

__all__ = [
    "BoundRecord",
    "Instance",
    "ConjectureStats",
    "build_instance",
    "check_noise_norm",
    "check_conjecture",
    "check_deviation",
    "check_gap_bounds",
    "check_sin_theta",
    "gamma_difference_bounds",
    "deviation_bound",
    "sin_theta_rhs",
    "lambda_r_floor",
    "fhat_bound_factor",
    "fit_fhat_constant",
    "scan_thresholds",
    "write_bounds_csv",
]

HOLDS_RTOL = 1e-9


@dataclass(frozen=True)
class BoundRecord:
    """One evaluated inequality ``lhs <= rhs``.

    ``kind`` is ``"exact"`` when both sides are computed quantities,
    ``"measured"`` when the right side is a computed upper bound standing
    in for a quantity that cannot be evaluated exactly, and ``"analytic"``
    when the right side is a closed-form bound.
    """

    name: str
    lhs: float
    rhs: float
    n: int
    k: int | str = 1
    seed: int | None = None
    beta: float = 0.0
    kind: str = "exact"
    trial: int | None = None
    holds: bool = field(init=False)

    def __post_init__(self):
        # equality cases are exact in theory; allow for rounding
        ok = self.lhs <= self.rhs + HOLDS_RTOL * max(abs(self.lhs), abs(self.rhs))
        object.__setattr__(self, "holds", bool(ok))

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True, eq=False)
class Instance:
    """One sampled digraph together with the matching expectation matrices."""

    model: RoleModel
    n: int
    k: int | str
    seed: int | None
    adjacency: np.ndarray
    expectation: np.ndarray
    beta: float
    s: np.ndarray
    t: np.ndarray
    gamma: float

    @property
    def delta(self) -> float:
        return self.model.delta(self.n)

    @property
    def r(self) -> int:
        return self.model.r

    def k_power(self) -> float:
        """``gamma**k`` (0 in the limit)."""
        return 0.0 if self.k == "limit" else self.gamma ** int(self.k)


def build_instance(model: RoleModel, n: int, k: int | str = 1, policy="half-gamma", seed=0, exact=False) -> Instance:
    """Sample ``A`` and compute dense ``S_k`` (from A) and ``T_k`` (from M).

    ``exact=True`` replaces the sample by the expectation itself.  beta is
    chosen from ``A`` by ``policy`` and shared by both recurrences.
    """
    ex = expected_adjacency(model, n)
    m_dense = ex.dense()
    if exact:
        a_dense = m_dense.copy()
    else:
        graph, _ = sample_adjacency(model, n, seed)
        a_dense = graph.dense()
    if isinstance(policy, str):
        policy = BetaPolicy.parse(policy)
    beta = choose_beta(a_dense, policy)
    if k == "limit":
        s = similarity_limit(a_dense, beta).matrix
    else:
        s = similarity_recurrence(a_dense, beta, int(k)).matrix
    t = expected_similarity(model, n, beta, k).matrix
    beta2 = beta**2
    gamma = max(beta2 * gamma_norm(m_dense), beta2 * gamma_norm(a_dense))
    return Instance(model, n, k, seed, a_dense, m_dense, beta, s, t, gamma)


def _top_eigs(mat: np.ndarray, count: int) -> np.ndarray:
    import scipy.linalg as sla

    n = mat.shape[0]
    count = min(count, n)
    return sla.eigh((mat + mat.T) / 2, eigvals_only=True, subset_by_index=[n - count, n - 1])[::-1]


def _top_vecs(mat: np.ndarray, count: int) -> np.ndarray:
    import scipy.linalg as sla

    n = mat.shape[0]
    _, vec = sla.eigh((mat + mat.T) / 2, subset_by_index=[n - count, n - 1])
    return vec[:, ::-1]


# -- noise -------------------------------------------------------------------


def check_noise_norm(model: RoleModel, n: int, trials: int = 1, seed=0) -> list[BoundRecord]:
    """``||A - E[A]|| <= delta`` for ``trials`` independent samples."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m_dense = expected_adjacency(model, n).dense()
    delta = model.delta(n)
    out = []
    for t in range(trials):
        graph, _ = sample_adjacency(model, n, trial_seed(seed, t))
        y = graph.dense() - m_dense
        out.append(BoundRecord("noise-norm", spectral_norm(y), delta, n, seed=seed, trial=t, kind="analytic"))
    return out


@dataclass(frozen=True)
class ConjectureStats:
    """Samples of ``||[Z, Z^T]|| / sqrt(2N)`` for iid centred ``Z``."""

    n: int
    sigma: float
    ratios: np.ndarray
    sharp: float
    loose: float

    @property
    def mean(self) -> float:
        return float(self.ratios.mean())

    @property
    def max(self) -> float:
        return float(self.ratios.max())

    @property
    def std(self) -> float:
        return float(self.ratios.std())


def _draw_centered(rng, n: int, distribution: str, p: float):
    if distribution == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=(n, n)), 1.0
    if distribution == "centered-bernoulli":
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        return (rng.random((n, n)) < p).astype(float) - p, float(np.sqrt(p * (1 - p)))
    raise ValueError(f"unknown distribution {distribution!r}")


def check_conjecture(n: int = 1000, trials: int = 10, distribution: str = "rademacher", seed=0, p: float = 0.5) -> ConjectureStats:
    """Monte Carlo of the compound-matrix norm against ``(1 + sqrt(1/2)) sigma``.

    ``loose`` is the normalised form of the proven bound
    ``||[Z, Z^T]|| <= sqrt(2) ||Z|| <= 2 sqrt(2) sigma sqrt(N)``, i.e. ``2 sigma``.
    """
    ratios = np.empty(trials)
    sigma = 0.0
    for t in range(trials):
        rng = make_rng(trial_seed(seed, t))
        z, sigma = _draw_centered(rng, n, distribution, p)
        ratios[t] = np.sqrt(gamma_norm(z)) / np.sqrt(2 * n)
    return ConjectureStats(n, sigma, ratios, (1 + np.sqrt(0.5)) * sigma, 2.0 * sigma)


# -- deviation ---------------------------------------------------------------


def gamma_difference_bounds(a, m) -> tuple[float, float]:
    """Computable bracket ``lo <= ||Gamma_A - Gamma_M|| <= hi``.

    ``lo = ||Gamma_A[I] - Gamma_M[I]||``; ``hi`` expands
    ``Gamma_A - Gamma_M`` in ``Y = A - M`` and bounds each term by exact
    spectral norms: ``||[Y, Y^T]||^2 + 2 ||[M, M^T]|| ||[Y, Y^T]||``.
    """
    a = np.asarray(a, dtype=float)
    m = np.asarray(m, dtype=float)
    y = a - m
    eye = np.eye(a.shape[0])
    lo = symmetric_norm(gamma_apply(a, eye) - gamma_apply(m, eye))
    yy = np.sqrt(gamma_norm(y))
    mm = np.sqrt(gamma_norm(m))
    return lo, yy**2 + 2 * mm * yy


def deviation_bound(model: RoleModel, n: int) -> float:
    """``delta^3 ||[U, U^T]|| / sqrt(2) + 2 delta^2``."""
    d = model.delta(n)
    return d**3 * model.compound_singular_values[0] / np.sqrt(2) + 2 * d**2


def check_deviation(model: RoleModel, n: int, k: int | str = 10, policy="half-gamma", seed=0, exact=False, instance: Instance | None = None) -> list[BoundRecord]:
    """``||S_k - T_k||`` against the deviation bounds.

    Records, in order:

    ``deviation-analytic``  ||S_k - T_k|| <= 4 * (delta^3 ||[U,U^T]||/sqrt2 + 2 delta^2)
    ``deviation-bound-below-normA`` the analytic bound <= ||A||^2
    ``deviation-measured``  ||S_k - T_k|| <= hi * sum_i (b^2||G_A||)^i * sum_i (b^2||G_M||)^i
    ``gamma-diff-measured`` ||S_1 - T_1|| = ||G_A[I] - G_M[I]|| <= hi
    ``gamma-diff-analytic`` hi <= the analytic bound
    """
    inst = instance or build_instance(model, n, k, policy, seed, exact=exact)
    dev = symmetric_norm(inst.s - inst.t)
    analytic = deviation_bound(model, n)
    lo, hi = gamma_difference_bounds(inst.adjacency, inst.expectation)
    b2 = inst.beta**2
    ga = b2 * gamma_norm(inst.adjacency)
    gm = b2 * gamma_norm(inst.expectation)
    steps = 200 if inst.k == "limit" else int(inst.k)
    geo = sum(ga**i for i in range(steps)) * sum(gm**i for i in range(steps))
    kw = dict(n=n, k=inst.k, seed=inst.seed, beta=inst.beta)
    return [
        BoundRecord("deviation-analytic", dev, 4 * analytic, kind="analytic", **kw),
        BoundRecord("deviation-bound-below-normA", analytic, spectral_norm(inst.adjacency) ** 2, kind="analytic", **kw),
        BoundRecord("deviation-measured", dev, hi * geo, kind="measured", **kw),
        BoundRecord("gamma-diff-measured", lo, hi, kind="measured", **kw),
        BoundRecord("gamma-diff-analytic", hi, analytic, kind="analytic", **kw),
    ]


# -- spectral gap ------------------------------------------------------------


def lambda_r_floor(model: RoleModel, n: int, r: int | None = None) -> float:
    """``[sigma_r([U, U^T]) m_min / (4 q m_max)]^2 delta^4``."""
    r = model.r if r is None else r
    sig = model.compound_singular_values[r - 1]
    return (sig * model.m_min / (4 * model.q * model.m_max)) ** 2 * model.delta(n) ** 4


def check_gap_bounds(model: RoleModel, n: int, k: int | str = 1, policy="half-gamma", seed=0, exact=False, instance: Instance | None = None) -> list[BoundRecord]:
    """Eigenvalue floor and ceilings of ``T_k`` and ``S_k``.

    ``r`` is recomputed from ``[U, U^T]`` so rank-deficient models (for
    instance the cycle model at p = 0.5, r = 1) take the degenerate path.
    """
    inst = instance or build_instance(model, n, k, policy, seed, exact=exact)
    r = model.r
    d = model.delta(n)
    ev_s = _top_eigs(inst.s, r + 1)
    ev_t = _top_eigs(inst.t, r)
    lam_r_t = ev_t[r - 1]
    one_minus = 1.0 - inst.k_power()
    comp = model.compound_singular_values[0]
    kw = dict(n=n, k=inst.k, seed=inst.seed, beta=inst.beta, kind="analytic")
    return [
        BoundRecord("lambda_r(T_k)-floor", lambda_r_floor(model, n, r), lam_r_t, **kw),
        BoundRecord("lambda_r(S_k)-half-T", lam_r_t / 2, ev_s[r - 1], n=n, k=inst.k, seed=inst.seed, beta=inst.beta, kind="exact"),
        BoundRecord("lambda_r+1(S_k)-ceiling", ev_s[r] if ev_s.size > r else 0.0, 4 * one_minus * d**2, **kw),
        BoundRecord("norm(S_k)-ceiling", ev_s[0], 0.5 * one_minus * comp**2 * d**4, **kw),
    ]


# -- subspaces ---------------------------------------------------------------


def sin_theta_rhs(model: RoleModel, n: int) -> float:
    """Closed-form bound on ``||sin Theta||``; decays like ``1/delta``."""
    d = model.delta(n)
    comp = model.compound_singular_values[0]
    num = 4 * np.sqrt(2) * d**3 * comp + 16 * d**2
    return num / lambda_r_floor(model, n)


def check_sin_theta(model: RoleModel, n: int, k: int | str = 1, policy="half-gamma", seed=0, exact=False, instance: Instance | None = None) -> list[BoundRecord]:
    """Principal angles between the r-dominant subspaces of ``S_k`` and ``T_k``.

    ``sin-theta-analytic``  measured ||sin Theta|| <= closed-form bound
    ``sin-theta-davis-kahan`` measured ||sin Theta|| <= 2 ||S_k - T_k|| / lambda_r(T_k)
    """
    inst = instance or build_instance(model, n, k, policy, seed, exact=exact)
    r = model.r
    u = _top_vecs(inst.s, r)
    v = _top_vecs(inst.t, r)
    sin = principal_angle_sines(u, v).norm
    lam_r_t = _top_eigs(inst.t, r)[r - 1]
    dk = 2 * symmetric_norm(inst.s - inst.t) / lam_r_t
    kw = dict(n=n, k=inst.k, seed=inst.seed, beta=inst.beta)
    return [
        BoundRecord("sin-theta-analytic", sin, sin_theta_rhs(model, n), kind="analytic", **kw),
        BoundRecord("sin-theta-davis-kahan", sin, float(dk), kind="exact", **kw),
    ]


# -- clustering error --------------------------------------------------------


def fhat_bound_factor(model: RoleModel, n: int) -> float:
    """Right-hand side of the misclassification bound with ``C = 1``:
    ``q^5/delta^2 (m_max/m_min)^5 ||[U,U^T]||^2 / sigma_q([U,U^T])^4``."""
    sv = model.compound_singular_values
    q = model.q
    if sv.size < q or sv[q - 1] <= 0:
        return np.inf
    return q**5 / model.delta(n) ** 2 * (model.m_max / model.m_min) ** 5 * sv[0] ** 2 / sv[q - 1] ** 4


def fit_fhat_constant(model: RoleModel, ns, mean_fhat) -> float:
    """Smallest ``C`` making ``mean_fhat[i] <= C * fhat_bound_factor(n_i)`` on the grid."""
    ratios = [f / fhat_bound_factor(model, n) for n, f in zip(ns, mean_fhat)]
    return float(max(ratios)) if ratios else 0.0


# -- scanning and output -----------------------------------------------------


def scan_thresholds(records: list[BoundRecord]) -> dict[str, int | None]:
    """First grid ``n`` from which every later record of a bound holds.

    ``None`` means the bound fails at the largest ``n`` scanned.
    """
    by_name: dict[str, dict[int, bool]] = {}
    for rec in records:
        slot = by_name.setdefault(rec.name, {})
        slot[rec.n] = slot.get(rec.n, True) and rec.holds
    out = {}
    for name, per_n in by_name.items():
        threshold = None
        for n in sorted(per_n, reverse=True):
            if not per_n[n]:
                break
            threshold = n
        out[name] = threshold
    return out


def write_bounds_csv(path: str | os.PathLike, records: list[BoundRecord]) -> None:
    """Columns ``name,n,k,seed,lhs,rhs,holds``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "n", "k", "seed", "lhs", "rhs", "holds"])
        for r in records:
            seed = "" if r.seed is None else r.seed
            if r.trial is not None:
                seed = f"{seed}/{r.trial}"
            w.writerow([r.name, r.n, r.k, seed, repr(r.lhs), repr(r.rhs), int(r.holds)])

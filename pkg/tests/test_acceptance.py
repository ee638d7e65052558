"""Acceptance criteria, one test each, at the pinned tolerances.

Every test prints a single ``criterion N: PASS|FAIL`` line with the measured
values, then asserts.  Runtime budgets are part of each criterion.
"""

import time
from functools import lru_cache

import numpy as np
import pytest
import scipy.linalg as sla

from npsroles._rng import substream
from npsroles.clustering import (
    kmeans,
    misclassification,
    misclassification_bottleneck,
    misclassification_exhaustive,
)
from npsroles.diagnostics import check_conjecture
from npsroles.experiments import fhat_overlay, fhat_rows, noise_estimate
from npsroles.nps import (
    choose_beta,
    expected_similarity,
    gamma_apply,
    gamma_matrix,
    similarity_limit_oracle,
    similarity_recurrence,
)
from npsroles.sbm import Assignment, cycle_model, expected_adjacency, sample_adjacency
from npsroles.spectral import _window, estimate_rank, principal_angle_sines, similarity_spectrum

SEED = 2024
MODEL = cycle_model(0.6)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@lru_cache(maxsize=None)
def s1_spectrum(n, trial):
    """Leading eigenvalues of S_1 for one cycle-model sample (shared across criteria)."""
    graph, _ = sample_adjacency(MODEL, n, substream(SEED, n, trial))
    return similarity_spectrum(graph.adjacency, _window(MODEL.n_nodes(n), MODEL.q))


def top_vectors(mat, count):
    n = mat.shape[0]
    _, vecs = sla.eigh(mat, subset_by_index=[n - count, n - 1])
    return vecs[:, ::-1]


def test_criterion_1_oracle_equivalence(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    errors = []
    while len(errors) < 20:
        a = (rng.random((6, 6)) < 0.5).astype(float)
        if not a.any():
            continue
        beta = choose_beta(a, "safe")
        rec = similarity_recurrence(a, beta, 60).matrix
        ora = similarity_limit_oracle(a, beta).matrix
        errors.append(np.linalg.norm(rec - ora, 2) / np.linalg.norm(ora, 2))
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    ok = worst <= 1e-8 and elapsed < 5
    report(capsys, 1, ok, f"max relative error {worst:.2e} (<= 1e-8), {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_2_exact_recovery_on_expectation(capsys):
    t0 = time.perf_counter()
    n = 20
    truth = MODEL.assignment(n)
    m = expected_adjacency(MODEL, n).dense()
    details, ok = [], True
    for k in (1, 10):
        beta = choose_beta(m, "half-gamma") if k > 1 else 0.0
        t = expected_similarity(MODEL, n, beta, k).matrix
        ev = np.linalg.eigvalsh(t)[::-1]
        rank = int(np.sum(ev > 1e-8 * ev[0]))
        labels = kmeans(top_vectors(t, MODEL.q), MODEL.q, seed=SEED).labels
        fhat = misclassification(truth, labels).value
        ok &= rank == 3 and fhat == 0.0
        details.append(f"k={k}: rank {rank}, fhat {fhat}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    report(capsys, 2, ok, "; ".join(details) + f", {elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_3_noise_line(capsys):
    t0 = time.perf_counter()
    lam4 = np.mean([s1_spectrum(50, t)[3] for t in range(20)])
    ratio = lam4 / noise_estimate(0.6, 50)
    elapsed = time.perf_counter() - t0
    ok = 0.80 <= ratio <= 1.10 and elapsed < 120
    report(capsys, 3, ok, f"mean lambda_4(S_1) / (3+sqrt8)0.24*1500 = {ratio:.4f} in [0.80, 1.10], {elapsed:.1f}s")
    assert ok


def test_criterion_4_gap_growth(capsys):
    t0 = time.perf_counter()
    gaps = {}
    for n in (10, 50):
        gaps[n] = np.mean([s1_spectrum(n, t)[2] / s1_spectrum(n, t)[3] for t in range(20)])
    growth = gaps[50] / gaps[10]
    elapsed = time.perf_counter() - t0
    ok = growth >= 3 and elapsed < 120
    report(capsys, 4, ok, f"mean lambda_3/lambda_4: n=10 {gaps[10]:.3f}, n=50 {gaps[50]:.3f}, growth {growth:.2f}x (>= 3x)")
    assert ok


@pytest.mark.slow
def test_criterion_5_misclassification_scaling(capsys):
    t0 = time.perf_counter()
    grid = [10, 20, 30, 40, 50]
    rows = fhat_rows(0.6, grid, trials=500, ks=(1,), seed=SEED)
    mean = np.array([r["fhat_k1"] for r in rows])
    ratio = mean / fhat_overlay(grid)
    scaled = np.array(grid) * mean
    spread_ok = scaled.max() <= 2 * scaled.min()
    elapsed = time.perf_counter() - t0
    ok = bool(np.all((ratio >= 0.5) & (ratio <= 2.0)) and spread_ok and elapsed < 900)
    detail = ", ".join(f"n={n}: {f:.5f} (ratio {r:.3f})" for n, f, r in zip(grid, mean, ratio))
    report(
        capsys, 5, ok,
        f"mean fhat {detail}; ratios must lie in [0.5, 2.0]; "
        f"max n*fhat {scaled.max():.4f} vs 2*min {2 * scaled.min():.4f}; {elapsed:.0f}s",
    )
    assert ok


def test_criterion_6_sin_theta_decay(capsys):
    t0 = time.perf_counter()
    means = {}
    for n in (10, 40):
        # T_1 does not depend on the sample
        v = top_vectors(expected_similarity(MODEL, n, 0.0, 1).matrix, MODEL.q)
        sines = []
        for t in range(20):
            graph, _ = sample_adjacency(MODEL, n, substream(SEED, 6, n, t))
            a = graph.dense()
            u = top_vectors(a @ a.T + a.T @ a, MODEL.q)
            sines.append(principal_angle_sines(u, v).norm)
        means[n] = float(np.mean(sines))
    ratio = means[40] / means[10]
    elapsed = time.perf_counter() - t0
    ok = ratio <= 0.75 and elapsed < 180
    report(capsys, 6, ok, f"mean ||sin Theta||: n=10 {means[10]:.4f}, n=40 {means[40]:.4f}, ratio {ratio:.3f} (<= 0.75), {elapsed:.1f}s")
    assert ok


def test_criterion_7_compound_norm_statistic(capsys):
    t0 = time.perf_counter()
    stats = check_conjecture(n=1000, trials=10, distribution="rademacher", seed=SEED)
    elapsed = time.perf_counter() - t0
    ok = 1.60 <= stats.mean <= 1.75 and elapsed < 120
    report(capsys, 7, ok, f"mean ||[Z Z^T]||/sqrt(2N) = {stats.mean:.4f} in [1.60, 1.75] (target {stats.sharp:.4f}), {elapsed:.1f}s")
    assert ok


def test_criterion_8_rank_detection(capsys):
    t0 = time.perf_counter()
    ranks = [estimate_rank(s1_spectrum(50, t)).rank for t in range(100)]
    hits = sum(r == 3 for r in ranks)
    elapsed = time.perf_counter() - t0
    ok = hits >= 95 and elapsed < 180
    report(capsys, 8, ok, f"rank 3 detected in {hits}/100 trials (>= 95), {elapsed:.1f}s")
    assert ok


def _psd_floor(mat, scale):
    return np.linalg.eigvalsh(mat).min() >= -1e-9 * scale


def test_criterion_9_property_suites(capsys):
    rng = np.random.default_rng(SEED)
    cases = 120
    failures = dict.fromkeys(
        ["loewner-monotone", "psd-floor", "fhat-permutation", "fhat-exhaustive-vs-bottleneck", "gamma-kronecker", "principal-angle-projector"],
        0,
    )
    for _ in range(cases):
        n = int(rng.integers(2, 8))
        a = (rng.random((n, n)) < 0.5).astype(float)
        a[0, -1] = 1.0
        beta = choose_beta(a, "safe")
        k = int(rng.integers(1, 8))
        s1 = similarity_recurrence(a, beta, 1).matrix
        sk = similarity_recurrence(a, beta, k).matrix
        sk1 = similarity_recurrence(a, beta, k + 1).matrix
        scale = max(1.0, np.abs(sk1).max())
        failures["loewner-monotone"] += not _psd_floor(sk1 - sk, scale)
        failures["psd-floor"] += not (_psd_floor(s1, scale) and _psd_floor(sk - s1, scale))

        w = rng.standard_normal((n, n))
        x = rng.standard_normal((n, n))
        lhs = gamma_apply(w, x).reshape(-1, order="F")
        rhs = gamma_matrix(w) @ x.reshape(-1, order="F")
        failures["gamma-kronecker"] += not np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

        q = int(rng.integers(2, 7))
        size = int(rng.integers(q, 5 * q))
        truth = Assignment(np.concatenate([np.arange(q), rng.integers(0, q, size - q)]), q)
        found = Assignment(rng.integers(0, q, size), q)
        ref = misclassification_exhaustive(truth, found).value
        perm = rng.permutation(q)
        renamed = misclassification(truth, Assignment(perm[found.labels], q)).value
        failures["fhat-permutation"] += not np.isclose(renamed, ref, atol=1e-12)
        bott = misclassification_bottleneck(truth, found).value
        failures["fhat-exhaustive-vs-bottleneck"] += not np.isclose(bott, ref, atol=1e-12)

        dim = int(rng.integers(2, 12))
        kk = int(rng.integers(1, dim))
        u, _ = np.linalg.qr(rng.standard_normal((dim, kk)))
        v, _ = np.linalg.qr(rng.standard_normal((dim, kk)))
        sines = principal_angle_sines(u, v).sines
        proj_sv = np.linalg.svd(u @ u.T - v @ v.T, compute_uv=False)
        expected = np.sort(np.concatenate([sines, sines, np.zeros(dim)]))[::-1][:dim]
        failures["principal-angle-projector"] += not np.allclose(proj_sv, expected, atol=1e-10)
    ok = not any(failures.values())
    detail = ", ".join(f"{name} {cases - f}/{cases}" for name, f in failures.items())
    report(capsys, 9, ok, detail)
    assert ok

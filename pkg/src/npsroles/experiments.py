"""Cycle-model experiments: eigenvalue curves and misclassification error.

Every trial draws from its own substream ``(seed, p index, n, trial)`` so the
results do not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable

import numpy as np

from ._rng import substream
from .clustering import extract_roles, misclassification
from .nps import BetaPolicy, choose_beta, expected_spectrum, similarity_recurrence
from .sbm import cycle_model, sample_adjacency
from .spectral import similarity_spectrum
from . import svg

__all__ = [
    "noise_estimate",
    "fhat_overlay",
    "spectra_rows",
    "fhat_rows",
    "write_rows",
    "read_rows",
    "spectra_svg",
    "fhat_svg",
    "worker_count",
]


def noise_estimate(p: float, n: int, m: float = 30.0) -> float:
    """Predicted first noise eigenvalue of S_1: ``(3 + sqrt 8) p (1-p) m n``."""
    return (3 + np.sqrt(8)) * p * (1 - p) * m * n


def fhat_overlay(n) -> float:
    """Reference curve ``3 / (10 n + 24)``."""
    return 3.0 / (10.0 * np.asarray(n, dtype=float) + 24.0)


def worker_count() -> int:
    """Worker processes for trial loops, from ``NPS_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("NPS_THREADS", "1")))
    except ValueError:
        return 1


def _run(fn, jobs: list, workers: int | None = None, progress: Callable[[int, int], None] | None = None) -> list:
    workers = worker_count() if workers is None else workers
    out = []
    if workers <= 1:
        for i, job in enumerate(jobs):
            out.append(fn(job))
            if progress:
                progress(i + 1, len(jobs))
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i, res in enumerate(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (8 * workers)))):
            out.append(res)
            if progress:
                progress(i + 1, len(jobs))
    return out


def _spectra_trial(job):
    p, pi, n, t, k, policy, seed = job
    model = cycle_model(p)
    graph, _ = sample_adjacency(model, n, substream(seed, pi, n, t))
    a = graph.adjacency
    beta = choose_beta(a, policy) if policy.kind != "explicit" or policy.value else 0.0
    q, r = model.q, model.r
    count = max(q, r + 1)
    if k == 1:
        s_eigs = similarity_spectrum(a, count)
    else:
        s = similarity_recurrence(graph.dense(), beta, k).matrix
        s_eigs = np.linalg.eigvalsh(s)[::-1][:count]
    t_eigs = expected_spectrum(model, n, beta, k)
    return beta, s_eigs[:q], t_eigs[:q], s_eigs[r]


def spectra_rows(
    ps: Iterable[float],
    n_grid: Iterable[int],
    k: int,
    policy: BetaPolicy | str,
    seed: int = 0,
    trials: int = 1,
    progress=None,
    workers: int | None = None,
) -> list[dict]:
    """Leading eigenvalues of ``S_k`` and ``T_k`` along an ``n`` grid.

    One row per ``(p, n)`` with ``trials``-averaged values: ``S1..Sq`` and
    ``T1..Tq`` (descending), ``S_noise`` (eigenvalue ``r+1`` of ``S_k``) and
    the predicted noise level ``noise_est``.
    """
    if isinstance(policy, str):
        policy = BetaPolicy.parse(policy)
    ps, n_grid = list(ps), list(n_grid)
    jobs = [(p, pi, n, t, k, policy, seed) for pi, p in enumerate(ps) for n in n_grid for t in range(trials)]
    results = _run(_spectra_trial, jobs, workers, progress)
    rows = []
    for pi, p in enumerate(ps):
        for n in n_grid:
            chunk = [res for job, res in zip(jobs, results) if job[1] == pi and job[2] == n]
            beta = np.mean([c[0] for c in chunk])
            s_mean = np.mean([c[1] for c in chunk], axis=0)
            t_mean = np.mean([c[2] for c in chunk], axis=0)
            row = {"p": p, "n": n, "k": k, "beta": float(beta), "trials": trials}
            row.update({f"S{i + 1}": float(v) for i, v in enumerate(s_mean)})
            row.update({f"T{i + 1}": float(v) for i, v in enumerate(t_mean)})
            row["S_noise"] = float(np.mean([c[3] for c in chunk]))
            row["noise_est"] = float(noise_estimate(p, n))
            rows.append(row)
    return rows


def _fhat_trial(job):
    p, n, t, ks, policy, seed, restarts = job
    model = cycle_model(p)
    graph, truth = sample_adjacency(model, n, substream(seed, n, t))
    out = []
    for k in ks:
        res = extract_roles(graph, model.q, policy, k=k, restarts=restarts, seed=substream(seed, n, t, k), spectrum=False)
        out.append(misclassification(truth, res.assignment).value)
    return out


def fhat_rows(
    p: float,
    n_grid: Iterable[int],
    trials: int,
    ks: Iterable[int] = (1, 10),
    policy: BetaPolicy | str = "fig4-literal",
    seed: int = 0,
    restarts: int = 20,
    progress=None,
    workers: int | None = None,
) -> list[dict]:
    """Mean misclassification error over ``trials`` samples per ``n``.

    Columns: ``n``, ``trials``, ``fhat_k<k>`` for each depth and the
    reference ``overlay = 3/(10n+24)``.
    """
    if isinstance(policy, str):
        policy = BetaPolicy.parse(policy)
    ks = tuple(ks)
    rows = []
    for n in n_grid:
        jobs = [(p, n, t, ks, policy, seed, restarts) for t in range(trials)]
        vals = np.array(_run(_fhat_trial, jobs, workers, progress))
        row = {"n": n, "trials": trials}
        for j, k in enumerate(ks):
            row[f"fhat_k{k}"] = float(vals[:, j].mean())
        row["overlay"] = float(fhat_overlay(n))
        rows.append(row)
    return rows


def write_rows(path: str | os.PathLike, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("nothing to write")
    fields = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({key: repr(v) if isinstance(v, float) else v for key, v in row.items()})


def read_rows(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return [{key: float(v) for key, v in row.items()} for row in csv.DictReader(fh)]


def spectra_svg(rows: list[dict], title: str) -> str:
    """One panel per p: markers for S_k, lines for T_k, squares for the
    first noise eigenvalue and a dashed predicted noise level."""
    panels = []
    for p in sorted({r["p"] for r in rows}):
        sub = sorted((r for r in rows if r["p"] == p), key=lambda r: r["n"])
        ns = [r["n"] for r in sub]
        k = int(sub[0]["k"])
        q = sum(1 for key in sub[0] if key.startswith("S") and key[1:].isdigit())
        series = []
        for i in range(1, q + 1):
            # one legend entry per family
            s_label = f"lambda_1..{q}(S_{k})" if i == 1 else ""
            t_label = f"lambda_1..{q}(T_{k})" if i == 1 else ""
            series.append(svg.Series(s_label, ns, [r[f"S{i}"] for r in sub], "circles", "#1f77b4"))
            series.append(svg.Series(t_label, ns, [r[f"T{i}"] for r in sub], "line", "#2ca02c"))
        series.append(svg.Series(f"lambda_r+1(S_{k})", ns, [r["S_noise"] for r in sub], "squares", "#d62728"))
        series.append(svg.Series("(3+sqrt8)p(1-p)mn", ns, [r["noise_est"] for r in sub], "dashed", "#d62728"))
        panels.append(svg.Panel(f"{title}, p={p:g}", series, "n", "eigenvalue", logy=True))
    return svg.render(panels)


def fhat_svg(rows: list[dict]) -> str:
    ns = [r["n"] for r in rows]
    series = []
    for key in rows[0]:
        if key.startswith("fhat_k"):
            series.append(svg.Series(f"mean fhat, S_{key[6:]}", ns, [r[key] for r in rows], "circles"))
    series.append(svg.Series("3/(10n+24)", ns, [r["overlay"] for r in rows], "dashed", "#000000"))
    return svg.render([svg.Panel("Average misclassification error", series, "n", "fhat")])


def stderr_progress(label: str, every: int = 50):
    def report(done, total):
        if done == total or done % every == 0:
            print(f"{label}: {done}/{total}", file=sys.stderr, flush=True)

    return report

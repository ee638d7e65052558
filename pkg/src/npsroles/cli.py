"""Command-line front end.

Subcommands: generate, extract, figure2, figure3, figure4, bounds, conjecture.
The shared flags (``--seed --out --trials --n-grid --p --k --beta-policy``)
follow the subcommand name.  ``NPS_THREADS`` caps the number of worker
processes used for trial loops.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from ._rng import substream
from .clustering import extract_roles, misclassification
from .diagnostics import (
    build_instance,
    check_conjecture,
    check_deviation,
    check_gap_bounds,
    check_noise_norm,
    check_sin_theta,
    fit_fhat_constant,
    scan_thresholds,
    write_bounds_csv,
)
from .nps import BetaPolicy, save_similarity, similarity_recurrence
from .sbm import ParseError, cycle_model, read_assignment, read_edge_list, sample_adjacency, write_assignment, write_edge_list
from .spectral import write_spectrum_csv

DEFAULT_GRID = (10, 20, 30, 40, 50)
FIGURE_PS = (0.6, 0.75)
MUST_HOLD = ("exact", "measured")


@dataclass(frozen=True)
class ExperimentConfig:
    p: tuple[float, ...]
    n_grid: tuple[int, ...]
    k: int
    policy: BetaPolicy
    trials: int
    seed: int
    out: Path
    q: int = 3
    fractions: tuple[float, ...] = (10.0, 10.0, 10.0)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n-grid must be strictly increasing")
        if any(n < 1 for n in self.n_grid):
            raise ValueError("n-grid entries must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def single_p(self) -> float:
        if len(self.p) != 1:
            raise ValueError(f"this command takes one --p value, got {len(self.p)}")
        return self.p[0]


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _policy(text: str) -> BetaPolicy:
    try:
        return BetaPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _config(args, *, p=(0.6,), k=1, policy="safe", trials=1) -> ExperimentConfig:
    return ExperimentConfig(
        p=args.p or p,
        n_grid=args.n_grid or DEFAULT_GRID,
        k=args.k if args.k is not None else k,
        policy=args.beta_policy or BetaPolicy.parse(policy),
        trials=args.trials if args.trials is not None else trials,
        seed=args.seed,
        out=Path(args.out),
    )


def _progress(label: str):
    def report(done, total):
        step = max(1, total // 10)
        if done == total or done % step == 0:
            print(f"{label}: {done}/{total}", file=sys.stderr, flush=True)

    return report


# -- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _config(args)
    p = cfg.single_p()
    model = cycle_model(p)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for n in cfg.n_grid:
        for t in range(cfg.trials):
            graph, truth = sample_adjacency(model, n, substream(cfg.seed, n, t))
            stem = cfg.out / f"cycle_p{p:g}_n{n}_seed{cfg.seed}_t{t}"
            write_edge_list(f"{stem}.edges", graph)
            write_assignment(f"{stem}.roles", truth)
            print(f"{stem}.edges  nodes={graph.n_nodes} edges={graph.n_edges}")
    return 0


def _extract_one(args, graph, q, truth, stem: Path):
    res = extract_roles(graph, q, args.beta_policy or "safe", k=args.k or 1, seed=args.seed)
    path = stem.with_name(stem.name + ".found.roles")
    write_assignment(path, res.assignment)
    line = {"q": q, "path": str(path), "inertia": res.kmeans.inertia}
    if truth is not None:
        score = misclassification(truth, res.assignment)
        line.update(fhat=score.value, matching=list(score.matching))
    return res, line


def cmd_extract(args) -> int:
    try:
        graph = read_edge_list(args.graph)
        truth = read_assignment(args.truth) if args.truth else None
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if truth is not None and len(truth) != graph.n_nodes:
        print(f"error: truth has {len(truth)} labels for {graph.n_nodes} nodes", file=sys.stderr)
        return 2
    if args.fhat and truth is None:
        print("error: --fhat needs --truth", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / Path(args.graph).name.removesuffix(".edges")

    res, line = _extract_one(args, graph, args.q, truth, stem)
    rank = res.spectrum.rank
    est = None if rank is None else rank.rank
    print(f"wrote {line['path']}")
    print(f"estimated rank: {est}" + (" (ambiguous)" if rank is not None and rank.ambiguous else ""))
    if res.rank_warning:
        print(f"warning: estimated rank {est} differs from q={args.q}; try --sweep")
    if truth is not None:
        print(f"fhat: {line['fhat']!r}")
        if args.fhat:
            print(json.dumps(line))
    if args.spectrum_csv:
        write_spectrum_csv(args.spectrum_csv, res.spectrum.eigenvalues)
    if args.dump_similarity:
        state = similarity_recurrence(graph.dense(), res.beta, args.k or 1)
        save_similarity(args.dump_similarity, state)
    if args.sweep:
        start = max(1, min(est or 1, args.sweep))
        for q in range(start, args.sweep + 1):
            if q > graph.n_nodes:
                break
            if truth is not None and q > truth.q:
                # f-hat is defined for q up to the true number of roles
                sweep_truth = None
            else:
                sweep_truth = truth
            _, row = _extract_one(args, graph, q, sweep_truth, stem.with_name(f"{stem.name}.q{q}"))
            print(json.dumps(row))
    return 0


def _spectra_command(args, name: str, title: str, k: int, policy: str) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    if not args.from_csv:
        cfg = _config(args, p=FIGURE_PS, k=k, policy=policy)
        rows = ex.spectra_rows(cfg.p, cfg.n_grid, cfg.k, cfg.policy, cfg.seed, cfg.trials, progress=_progress(name))
        ex.write_rows(csv_path, rows)
    else:
        csv_path = Path(args.from_csv)
    (out / f"{name}.svg").write_text(ex.spectra_svg(ex.read_rows(csv_path), title))
    print(f"wrote {csv_path} and {out / (name + '.svg')}")
    return 0


def cmd_figure2(args) -> int:
    if args.k not in (None, 1) or args.beta_policy is not None:
        print("note: figure2 always uses k=1 and beta=0", file=sys.stderr)
    args.k, args.beta_policy = 1, BetaPolicy.parse("explicit:0")
    return _spectra_command(args, "figure2", "S_1 and T_1", 1, "explicit:0")


def cmd_figure3(args) -> int:
    return _spectra_command(args, "figure3", f"S_{args.k or 10} and T_{args.k or 10}", 10, "half-gamma")


def cmd_figure4(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "figure4.csv"
    if not args.from_csv:
        cfg = _config(args, k=10, policy="fig4-literal", trials=500)
        p = cfg.single_p()
        ks = (1,) if cfg.k == 1 else (1, cfg.k)
        rows = ex.fhat_rows(p, cfg.n_grid, cfg.trials, ks, cfg.policy, cfg.seed, progress=_progress("figure4"))
        ex.write_rows(csv_path, rows)
        model = cycle_model(p)
        for key in rows[0]:
            if key.startswith("fhat_k"):
                c = fit_fhat_constant(model, [r["n"] for r in rows], [r[key] for r in rows])
                print(f"fitted constant C for {key}: {c!r}")
    else:
        csv_path = Path(args.from_csv)
    (out / "figure4.svg").write_text(ex.fhat_svg(ex.read_rows(csv_path)))
    print(f"wrote {csv_path} and {out / 'figure4.svg'}")
    return 0


def _print_conjecture(stats) -> None:
    print(f"conjecture N={stats.n} trials={stats.ratios.size}")
    print(f"  mean ||[Z Z^T]||/sqrt(2N) = {stats.mean:.4f}  (max {stats.max:.4f}, std {stats.std:.4f})")
    print(f"  sharp constant {stats.sharp:.4f}, proven bound {stats.loose:.4f}")


def bounds_records(cfg: ExperimentConfig, progress=None):
    """Every bound record on the config grid, in a fixed order."""
    model = cycle_model(cfg.single_p())
    records = []
    jobs = [(n, t) for n in cfg.n_grid for t in range(cfg.trials)]
    for done, (n, t) in enumerate(jobs, start=1):
        seed = substream(cfg.seed, n, t)
        inst = build_instance(model, n, cfg.k, cfg.policy, seed)
        batch = check_noise_norm(model, n, 1, seed)
        batch += check_deviation(model, n, instance=inst)
        batch += check_gap_bounds(model, n, instance=inst)
        batch += check_sin_theta(model, n, instance=inst)
        # the CSV identifies trials by the user seed and trial index
        records.extend(_retag(r, cfg.seed, t) for r in batch)
        if progress:
            progress(done, len(jobs))
    return records


def _retag(rec, seed, trial):
    return replace(rec, seed=seed, trial=trial)


def summarize_bounds(records) -> tuple[list[dict], bool]:
    thresholds = scan_thresholds(records)
    rows, ok = [], True
    for name in dict.fromkeys(r.name for r in records):
        recs = [r for r in records if r.name == name]
        must = recs[0].kind in MUST_HOLD
        th = thresholds[name]
        failed = must and th is None
        ok &= not failed
        worst = min(r.rhs / r.lhs if r.lhs > 0 else np.inf for r in recs)
        rows.append(
            dict(
                name=name,
                kind=recs[0].kind,
                held=sum(r.holds for r in recs),
                total=len(recs),
                threshold=th,
                worst_ratio=worst,
                status="FAIL" if failed else ("pass" if th is not None else "open"),
            )
        )
    return rows, ok


def cmd_bounds(args) -> int:
    cfg = _config(args, policy="half-gamma", trials=3)
    cfg.out.mkdir(parents=True, exist_ok=True)
    records = bounds_records(cfg, progress=_progress("bounds"))
    csv_path = Path(args.bounds_csv) if args.bounds_csv else cfg.out / "bounds.csv"
    write_bounds_csv(csv_path, records)
    rows, ok = summarize_bounds(records)
    print(f"{'bound':<30}{'kind':<10}{'held':>9}  {'from n':>6}  {'min rhs/lhs':>12}  status")
    for r in rows:
        th = "-" if r["threshold"] is None else str(r["threshold"])
        print(f"{r['name']:<30}{r['kind']:<10}{r['held']:>4}/{r['total']:<4}  {th:>6}  {r['worst_ratio']:>12.4g}  {r['status']}")
    print(f"wrote {csv_path}")
    if args.conjecture:
        _print_conjecture(check_conjecture(1000, 10, seed=cfg.seed))
    return 0 if ok else 1


def cmd_conjecture(args) -> int:
    trials = args.trials if args.trials is not None else 10
    if trials < 1:
        print("error: trials must be >= 1", file=sys.stderr)
        return 2
    _print_conjecture(check_conjecture(args.size, trials, args.distribution, seed=args.seed))
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--trials", type=int, default=None, help="samples per grid point")
    common.add_argument("--n-grid", type=_int_list, default=None, help="comma-separated n values, strictly increasing")
    common.add_argument("--p", type=_float_list, default=None, help="cycle-model probability (comma list for figure2/3)")
    common.add_argument("--k", type=int, default=None, help="recurrence depth")
    common.add_argument("--beta-policy", type=_policy, default=None, help="safe | half-gamma | fig4-literal | explicit:<beta>")

    parser = argparse.ArgumentParser(prog="npsroles", description="Role extraction with neighbourhood pattern similarity.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="sample cycle-model digraphs").set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", parents=[common], help="partition the nodes of an edge-list graph")
    p.add_argument("graph", help="edge-list file")
    p.add_argument("--q", type=int, default=3, help="number of roles (default 3)")
    p.add_argument("--truth", help="ground-truth assignment file")
    p.add_argument("--fhat", action="store_true", help="print score and matching as a JSON line")
    p.add_argument("--dump-similarity", metavar="PATH", help="write S_k in binary form")
    p.add_argument("--spectrum-csv", metavar="PATH", help="write leading eigenvalues of S_1")
    p.add_argument("--sweep", type=int, metavar="QMAX", help="also extract with q from the estimated rank to QMAX")
    p.set_defaults(func=cmd_extract)

    for name, func, text in (
        ("figure2", cmd_figure2, "eigenvalues of S_1 and T_1 against n"),
        ("figure3", cmd_figure3, "eigenvalues of S_k and T_k against n"),
        ("figure4", cmd_figure4, "mean misclassification error against n"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--from-csv", metavar="PATH", help="only re-render the SVG from an existing CSV")
        p.set_defaults(func=func)

    p = sub.add_parser("bounds", parents=[common], help="evaluate the spectral bounds on an n grid")
    p.add_argument("--bounds-csv", metavar="PATH", help="CSV path (default OUT/bounds.csv)")
    p.add_argument("--conjecture", action="store_true", help="also run the compound-norm experiment with N=1000")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("conjecture", parents=[common], help="compound-matrix norm of random centred matrices")
    p.add_argument("--size", type=int, default=1000, help="matrix dimension N (default 1000)")
    p.add_argument("--distribution", default="rademacher", choices=["rademacher", "centered-bernoulli"])
    p.set_defaults(func=cmd_conjecture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

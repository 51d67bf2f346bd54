"""Command-line front end. Every subcommand writes schema-stable CSV.

Exit codes: 0 success, 1 statistical validation failure, 2 usage or
parameter error, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import collision as cm
from .coding import CodingParams, Scheme
from .dataio import load_dataset, write_bin, write_csv
from .errors import DatasetFormatError, InvalidParams, LshError
from .evaluation import BENCHMARK, SweepSpec, make_synthetic, recall, ground_truth, run_sweep
from .lsh_index import LshConfig, LshIndex
from .projections import normalize_rows

CURVE_HEADER = ["scheme", "rho", "w", "p"]
GAP_HEADER = ["scheme", "rho0", "c", "w", "p1", "p2", "gap"]
SWEEP_HEADER = ["scheme", "w", "target_recall", "best_fraction", "achieved_recall", "K", "L", "feasible"]
QUERY_HEADER = ["query_id", "num_retrieved", "fraction_retrieved", "recall"]

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Scheme):
        return x.value
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def parse_floats(text: str) -> list[float]:
    vals = [float(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise UsageError("expected a nonempty comma-separated list")
    return vals


def parse_ints(text: str) -> list[int]:
    return [int(v) for v in parse_floats(text)]


def parse_range(text: str) -> list[float]:
    """``lo:hi:step`` inclusive of ``hi`` (up to rounding)."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"range must look like lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise UsageError(f"bad range {text!r}")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def schemes_of(value: str) -> list[Scheme]:
    return [Scheme.UQ, Scheme.UQ_OFFSET] if value == "both" else [Scheme.parse(value)]


def _w_values(args, default) -> list[float]:
    if args.w is not None:
        return parse_floats(args.w)
    if args.w_range is not None:
        return parse_range(args.w_range)
    return list(default)


def _open_out(path: str | None):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", newline="")


class _Stdout(io.StringIO):
    def close(self) -> None:
        sys.stdout.write(self.getvalue())
        super().close()


def write_rows(path: str | None, header: list[str], rows) -> None:
    fh = _open_out(path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    finally:
        fh.close()


def _pool_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _curve_cell(cell, tol):
    scheme, rho, w = cell
    return cm.collision_prob(scheme, rho, w, tol)


def cmd_collision(args) -> int:
    rhos = parse_floats(args.rho)
    ws = _w_values(args, cm.DEFAULT_W_GRID)
    cells = [(s, r, w) for s in schemes_of(args.scheme) for r in rhos for w in ws]
    for _, r, w in cells:
        if not (0.0 <= r <= 1.0) or w <= 0:
            raise InvalidParams(f"need 0 <= rho <= 1 and w > 0, got rho={r}, w={w}")
    probs = _pool_map(partial(_curve_cell, tol=args.tol), cells, args.workers)
    write_rows(args.out, CURVE_HEADER, [(s, r, w, p) for (s, r, w), p in zip(cells, probs)])
    return EXIT_OK


def _gap_cell(cell, tol):
    scheme, rho0, c, w = cell
    try:
        return cm.gap_at(scheme, rho0, c, w, tol)
    except cm.DegenerateGap:
        return None


def _gap_row(g: cm.GapResult):
    return (g.scheme, g.rho0, g.c, g.w, g.p1, g.p2, g.gap)


def cmd_gap(args) -> int:
    ws = _w_values(args, cm.DEFAULT_W_GRID)
    schemes = schemes_of(args.scheme)
    rows, summary = [], []
    for rho0 in parse_floats(args.rho0):
        bound = cm.max_c(rho0)
        cs = parse_range(args.c_range) if args.c_range else parse_range(f"1:{bound}:0.05")
        kept = []
        for c in cs:
            if c > bound * (1 + 1e-12):
                print(f"warning: skipping c={c:g} > max_c={bound:.6g} for rho0={rho0:g}", file=sys.stderr)
            else:
                kept.append(c)
        cells = [(s, rho0, c, w) for s in schemes for c in kept for w in ws]
        results = _pool_map(partial(_gap_cell, tol=args.tol), cells, args.workers)
        rows += [_gap_row(g) for g in results if g is not None]
        for c in kept:
            for s in schemes:
                cand = [g for g in results if g is not None and g.scheme is s and g.c == c]
                if cand:
                    # Grid order is increasing w, so min keeps the smaller w on ties.
                    summary.append(_gap_row(min(cand, key=lambda g: g.gap)))
    write_rows(args.out, GAP_HEADER, rows)
    if args.summary_out:
        write_rows(args.summary_out, GAP_HEADER, summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    scheme = Scheme.parse(args.scheme)
    analytic = cm.collision_prob(scheme, args.rho, args.w, args.tol)
    est, se = cm.monte_carlo_collision(scheme, args.rho, args.w, args.n, args.seed)
    if se > 0:
        z = (est - analytic) / se
    else:
        z = 0.0 if est == analytic else math.inf
    write_rows(
        args.out,
        ["scheme", "rho", "w", "n", "seed", "analytic", "estimate", "stderr", "z"],
        [(scheme, args.rho, args.w, args.n, args.seed, analytic, est, se, z)],
    )
    return EXIT_OK if abs(z) <= 4.0 else EXIT_VALIDATION


def _load_unit(path, fmt_, id_column=False):
    ids, X = load_dataset(path, fmt_, id_column)
    return ids, normalize_rows(X)


def cmd_synth(args) -> int:
    data = make_synthetic(args.num_points, args.dim, args.clusters, args.spread, args.seed, args.num_queries)
    fmt = args.format or ("csv" if args.out.lower().endswith(".csv") else "bin")
    writer = write_csv if fmt == "csv" else write_bin
    writer(args.out, data.X)
    if args.queries_out:
        writer(args.queries_out, data.Q)
    return EXIT_OK


def _config(args, scheme: Scheme) -> LshConfig:
    return LshConfig(args.K, args.L, CodingParams(scheme, args.w_single), args.seed)


def cmd_index(args) -> int:
    ids, X = _load_unit(args.dataset, args.format, args.id_column)
    index = LshIndex.from_arrays(ids, X, _config(args, Scheme.parse(args.scheme)))
    index.save(args.out)
    sizes = [len(b) for t in index.tables for b in t.values()]
    print(f"indexed {index.size} points into {index.config.L} tables, {len(sizes)} buckets, largest {max(sizes)}",
          file=sys.stderr)
    return EXIT_OK


def cmd_query(args) -> int:
    if args.index:
        index = LshIndex.load(args.index)
    elif args.dataset:
        ids, X = _load_unit(args.dataset, args.format, args.id_column)
        index = LshIndex.from_arrays(ids, X, _config(args, Scheme.parse(args.scheme)))
    else:
        raise UsageError("query needs --index or --dataset")
    qids, Q = _load_unit(args.queries, args.format, args.id_column)
    truth = None
    if args.top_t:
        if not args.dataset:
            raise UsageError("--top-t needs --dataset for ground truth")
        ids, X = _load_unit(args.dataset, args.format, args.id_column)
        truth = ground_truth(X, ids, Q, args.top_t)
    rows = []
    for i, (qid, q) in enumerate(zip(qids.tolist(), Q)):
        got = index.query(q)
        rows.append((qid, len(got), len(got) / index.size, recall(got, truth[i]) if truth is not None else None))
    write_rows(args.out, QUERY_HEADER, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.dataset:
        if not args.queries:
            raise UsageError("--dataset needs --queries")
        ids, X = _load_unit(args.dataset, args.format, args.id_column)
        qids, Q = _load_unit(args.queries, args.format, args.id_column)
        # Query ids are renumbered after the data ids so the two sets are disjoint.
        qids = np.arange(len(Q), dtype=np.int64) + int(ids.max()) + 1
    else:
        data = make_synthetic(args.num_points, args.dim, args.clusters, args.spread, args.seed, args.num_queries)
        ids, X, qids, Q = data.ids, data.X, data.query_ids, data.Q
    rows = []
    for scheme in schemes_of(args.scheme):
        spec = SweepSpec(
            K_values=tuple(parse_ints(args.K_list)),
            L_values=tuple(parse_ints(args.L_list)),
            w_values=tuple(_w_values(args, (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0))),
            scheme=scheme,
            T=args.top_t,
            target_recalls=tuple(parse_floats(args.target_recalls)),
            seed=args.seed,
        )
        for r in run_sweep(ids, X, qids, Q, spec, workers=args.workers, cache_dir=args.cache_dir):
            rows.append((r.scheme, r.w, r.target_recall, r.best_fraction_retrieved, r.achieved_recall,
                         r.K_at_best, r.L_at_best, r.feasible))
    write_rows(args.out, SWEEP_HEADER, rows)
    return EXIT_OK


def _add_common(p, scheme_choices=("uq", "uq-offset", "both"), scheme_default="both"):
    p.add_argument("--scheme", choices=scheme_choices, default=scheme_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker processes; output is identical for any value")


def _add_w(p):
    p.add_argument("--w", help="comma-separated bin widths (overrides --w-range)")
    p.add_argument("--w-range", help="lo:hi:step bin-width grid (default 0.25:8:0.25)")


def _add_dataset(p, required=True):
    p.add_argument("--dataset", required=required, help="CSV or LSHV binary file")
    p.add_argument("--format", choices=("csv", "bin"), help="dataset format (default: from suffix)")
    p.add_argument("--id-column", action="store_true", help="CSV rows start with an integer id")


def _add_lsh(p):
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--L", type=int, default=16)
    p.add_argument("--w", dest="w_single", type=float, default=1.5)


def _add_synthetic(p):
    p.add_argument("--num-points", type=int, default=BENCHMARK["N"])
    p.add_argument("--dim", type=int, default=BENCHMARK["D"])
    p.add_argument("--clusters", type=int, default=BENCHMARK["num_clusters"])
    p.add_argument("--spread", type=float, default=BENCHMARK["spread"])
    p.add_argument("--num-queries", type=int, default=BENCHMARK["num_queries"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantlsh", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, help=help, description=help)

    p = add("collision", help="collision probability curves; CSV columns: " + ",".join(CURVE_HEADER))
    _add_common(p)
    p.add_argument("--rho", default=",".join(str(r) for r in cm.FIGURE_RHOS))
    _add_w(p)
    p.add_argument("--tol", type=float, default=cm.DEFAULT_TOL)
    p.set_defaults(func=cmd_collision)

    p = add("gap", help="gap curves over (c, w); CSV columns: " + ",".join(GAP_HEADER))
    _add_common(p)
    p.add_argument("--rho0", required=True, help="comma-separated target correlations")
    p.add_argument("--c-range", help="lo:hi:step (default 1:max_c:0.05); c above max_c is skipped with a warning")
    _add_w(p)
    p.add_argument("--tol", type=float, default=cm.DEFAULT_TOL)
    p.add_argument("--summary-out", help="optimal-w rows per (scheme, rho0, c), same columns")
    p.set_defaults(func=cmd_gap)

    p = add("validate", help="Monte Carlo vs analytic collision probability; exit 1 if |z| > 4")
    _add_common(p, ("uq", "uq-offset"), "uq")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--tol", type=float, default=cm.DEFAULT_TOL)
    p.set_defaults(func=cmd_validate)

    p = add("synth", help="write the synthetic benchmark dataset")
    p.add_argument("--seed", type=int, default=0)
    _add_synthetic(p)
    p.add_argument("--format", choices=("csv", "bin"), help="output format (default: from suffix)")
    p.add_argument("--out", required=True)
    p.add_argument("--queries-out")
    p.set_defaults(func=cmd_synth)

    p = add("index", help="build a (K, L) index and write a binary snapshot")
    _add_common(p, ("uq", "uq-offset"), "uq")
    _add_dataset(p)
    _add_lsh(p)
    p.set_defaults(func=cmd_index)

    p = add("query", help="query an index; CSV columns: " + ",".join(QUERY_HEADER))
    _add_common(p, ("uq", "uq-offset"), "uq")
    _add_dataset(p, required=False)
    p.add_argument("--index", help="snapshot written by 'index'")
    p.add_argument("--queries", required=True)
    p.add_argument("--top-t", type=int, default=0)
    _add_lsh(p)
    p.set_defaults(func=cmd_query)

    p = add("sweep", help="best fraction retrieved per (w, target recall); CSV columns: "
                       + ",".join(SWEEP_HEADER))
    _add_common(p)
    _add_dataset(p, required=False)
    p.add_argument("--queries", help="query file (required with --dataset)")
    _add_synthetic(p)
    p.add_argument("--K-list", default="3,4,5,6,7,8,9,10,11,12,13,14,15,16")
    p.add_argument("--L-list", default="1,2,4,8,16,32,64")
    _add_w(p)
    p.add_argument("--top-t", type=int, default=BENCHMARK["T"])
    p.add_argument("--target-recalls", default="0.5,0.8,0.95")
    p.add_argument("--cache-dir", help="directory for cached ground truth")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetFormatError, OSError) as exc:
        print(f"quantlsh {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, LshError, ValueError) as exc:
        print(f"quantlsh {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``rrgrowth <command> [options]``.

Parameters come from flags or a TOML file (``--config``); flags win.  The
output directory and thread count can also be set through ``RRGROWTH_OUTPUT_DIR``
and ``RRGROWTH_THREADS``, which sit between flags and the file.

Exit codes: 0 all gates pass, 2 a statistical gate failed, 3 an exact identity
failed, 5 a work budget was exceeded, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import limitproc as lp
from . import stats as st
from .graph import Clock, GraphState, RandomStreams, advance, cycle_lengths
from .words import ENUMERATION_BUDGET, BudgetExceeded, a_count, enumerate_classes, identity_checks, mu_weight

EXIT_OK = 0
EXIT_STAT_FAIL = 2
EXIT_EXACT_FAIL = 3
EXIT_BUDGET = 5
EXIT_USAGE = 64

ENV_OUTPUT = "RRGROWTH_OUTPUT_DIR"
ENV_THREADS = "RRGROWTH_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _ints(text) -> tuple[int, ...]:
    items = text if isinstance(text, (list, tuple)) else str(text).replace(",", " ").split()
    try:
        return tuple(int(x) for x in items)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _floats(text) -> tuple[float, ...]:
    items = text if isinstance(text, (list, tuple)) else str(text).replace(",", " ").split()
    try:
        return tuple(float(x) for x in items)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


# config values arrive untyped from TOML; these are re-coerced after parsing
_LIST_ARGS = {
    "limit": {"times": _floats},
    "compare": {"s": _floats, "t": _floats},
    "tvscan": {"n": _ints},
    "oulimit": {"d_list": _ints, "k_list": _ints},
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file of parameters (top level or a table named after the command)")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out", default=None, help=f"output directory (env {ENV_OUTPUT}, default .)")
    common.add_argument("--threads", type=int, default=None, help=f"worker threads (env {ENV_THREADS}, default 1)")

    parser = _Parser(prog="rrgrowth", description="Cycle counts of growing random regular graphs and their limit process.")
    parser.add_argument("--version", action="version", version=f"rrgrowth {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("words", parents=[common], help="enumerate word classes with h, c and mu")
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-k", type=int, default=3)
    p.add_argument("--identities", action="store_true", help="run the exact identity checks for lengths 1..k")
    p.add_argument("--budget", type=int, default=ENUMERATION_BUDGET, help="maximum words enumerated per length")

    p = sub.add_parser("grow", parents=[common], help="grow graphs and record short-cycle counts")
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-t", "--t-end", dest="t_end", type=float, default=5.0)
    p.add_argument("-K", type=int, default=4)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--emit", choices=["paths", "snapshot", "both"], default="paths")
    p.add_argument("--resume", help="snapshot file to continue from")

    p = sub.add_parser("limit", parents=[common], help="simulate the limit process and test stationarity")
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-L", type=int, default=12, help="word-length truncation")
    p.add_argument("-T", type=float, default=2.0, help="horizon")
    p.add_argument("--check", choices=["stationarity", "none"], default="stationarity")
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--max-len", dest="max_len", type=int, default=3, help="longest word whose marginal is tested")
    p.add_argument("--times", type=_floats, default=None, help="observation times (default 0,T)")
    p.add_argument("--emit", choices=["none", "paths"], default="none")
    p.add_argument("--path-replicas", dest="path_replicas", type=int, default=5)
    p.add_argument("--dt", type=float, default=0.05, help="grid step of emitted paths")

    p = sub.add_parser("compare", parents=[common], help="graph moments at time s+t against the limit")
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-K", type=int, default=3)
    p.add_argument("-s", type=_floats, default=(8.0,), help="burn-in times")
    p.add_argument("-t", type=_floats, default=(0.0, 0.5), help="offsets after s")
    p.add_argument("--replicas", type=int, default=20_000)
    p.add_argument("--limit-replicas", dest="limit_replicas", type=int, default=0)

    p = sub.add_parser("tvscan", parents=[common], help="total variation to the Poisson reference along n")
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-r", type=int, default=2)
    p.add_argument("--n", type=_ints, default=(50, 100, 200, 400))
    p.add_argument("--samples", type=int, default=200_000, help="samples at the smallest n")
    p.add_argument("--scale", choices=["quadratic", "constant"], default="quadratic", help="sample growth along n")

    p = sub.add_parser("oulimit", parents=[common], help="Chebyshev trace covariances against their exact values")
    p.add_argument("--d", dest="d_list", type=_ints, default=(2, 5, 10))
    p.add_argument("-k", dest="k_list", type=_ints, default=(1, 2, 3))
    p.add_argument("-s", type=float, default=0.0)
    p.add_argument("-t", type=float, default=0.5)
    p.add_argument("--replicas", type=int, default=20_000)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def load_config(path: str, command: str) -> tuple[dict, dict]:
    """(top-level keys, keys of the table named ``command``), dashes folded to underscores."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    table = doc.get(command, {})
    if not isinstance(table, dict):
        raise UsageError(f"config entry {command!r} must be a table")

    def fold(d):
        return {k.replace("-", "_"): v for k, v in d.items() if not isinstance(v, dict)}

    return fold(doc), fold(table)


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    file_cfg: dict = {}
    if args.config:
        shared, table = load_config(args.config, args.command)
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(table) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        # top-level keys are shared defaults; those another command uses are skipped here
        file_cfg = {k: v for k, v in shared.items() if k in known} | table
        sub.set_defaults(**{k: v for k, v in file_cfg.items() if k not in ("out", "threads")})
        args = parser.parse_args(argv)
    for key, conv in _LIST_ARGS.get(args.command, {}).items():
        if getattr(args, key, None) is not None:
            setattr(args, key, conv(getattr(args, key)))
    if args.out is None:
        args.out = os.environ.get(ENV_OUTPUT) or file_cfg.get("out") or "."
    if args.threads is None:
        env = os.environ.get(ENV_THREADS)
        try:
            args.threads = int(env) if env else int(file_cfg.get("threads", 1))
        except ValueError:
            raise UsageError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    if args.threads < 1:
        raise UsageError("threads must be >= 1")
    return args


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _write_report(out: Path, stem: str, report: st.Report) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(report.to_json() + "\n")
    (out / f"{stem}.txt").write_text(report.to_text())
    sys.stdout.write(report.to_text())


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\r\n")


# -- words ---------------------------------------------------------------------------


def cmd_words(args) -> int:
    _require(args.d >= 1 and args.k >= 1, "need d >= 1 and k >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    classes = enumerate_classes(args.d, args.k, args.budget)
    rows = [(str(c), len(c), c.h, c.c, str(mu_weight(c)), c.orbit_size) for c in classes]
    header = ("word", "k", "h", "c", "mu", "orbit")
    with open(out / "words.csv", "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(header)
        w.writerows(rows)
    widths = [max(len(h), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    for r in [header, *rows]:
        print("  ".join(str(v).ljust(wd) for v, wd in zip(r, widths)).rstrip())
    print(f"# {len(rows)} classes, sum mu = {sum(mu_weight(c) for c in classes)}")
    if not args.identities:
        return EXIT_OK
    config = dict(d=args.d, k=args.k)
    report = st.Report("word_identities", config=config, seed=None)
    for chk in identity_checks(args.d, args.k, args.budget):
        report.gates.append(st.Gate(f"{chk.name} (d={chk.d}, k={chk.k})", chk.passed))
    _write_report(out, "words_identities", report)
    return EXIT_OK if report.passed() else EXIT_EXACT_FAIL


# -- grow ----------------------------------------------------------------------------


def _grow_one(index: int, args, resume: dict | None) -> tuple[list[tuple], dict, np.ndarray]:
    """One replica: (path rows, snapshot record, terminal counts)."""
    streams = RandomStreams(st.replica_seed(args.seed, index))
    if resume is None:
        state, clock = GraphState.empty(args.d), Clock()
    else:
        state = GraphState.from_dict(resume["graph"])
        clock = Clock(**resume["clock"])
        streams.skip(resume["streams"]["exp_used"], resume["streams"]["unif_used"])
    _require(args.t_end >= clock.t, f"t_end {args.t_end} is before the snapshot time {clock.t}")
    K = args.K
    rows: list[tuple] = []

    def emit(counts):
        rows.extend((index, clock.t, clock.n, k, int(counts[k])) for k in range(1, K + 1))

    counts = cycle_lengths(state, K)
    if args.emit in ("paths", "both"):
        emit(counts)
        advance(clock, state, clock.t, streams)
        while clock.next_time <= args.t_end:
            advance(clock, state, clock.next_time, streams)
            new = cycle_lengths(state, K)
            if not np.array_equal(new, counts):
                counts = new
                emit(counts)
    advance(clock, state, args.t_end, streams)
    counts = cycle_lengths(state, K)
    if args.emit in ("paths", "both"):
        emit(counts)
    snap = {
        "replica": index,
        "clock": clock.to_dict(),
        "streams": {"exp_used": streams.exp_used, "unif_used": streams.unif_used},
        "graph": state.to_dict(),
    }
    return rows, snap, counts


def cmd_grow(args) -> int:
    _require(args.K >= 1 and args.replicas >= 1 and args.t_end >= 0, "need K >= 1, replicas >= 1 and t_end >= 0")
    resume = None
    if args.resume:
        try:
            doc = json.loads(Path(args.resume).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read snapshot {args.resume}: {exc}") from None
        args.d, args.seed = int(doc["d"]), int(doc["seed"])
        resume = {rec["replica"]: rec for rec in doc["replicas"]}
        args.replicas = len(resume)
    _require(args.d >= 1, "need d >= 1")
    results = st.map_replicas(
        lambda i: _grow_one(i, args, None if resume is None else resume[i]), args.replicas, args.threads
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.emit in ("paths", "both"):
        with open(out / "grow_paths.csv", "w", newline="") as fh:
            w = _csv_writer(fh)
            w.writerow(["replica", "t", "n", "k", "count"])
            for rows, _, _ in results:
                w.writerows(rows)
    if args.emit in ("snapshot", "both"):
        doc = {"version": __version__, "seed": args.seed, "d": args.d, "replicas": [snap for _, snap, _ in results]}
        (out / "grow_snapshot.json").write_text(json.dumps(doc) + "\n")
    config = dict(d=args.d, t_end=args.t_end, K=args.K, replicas=args.replicas, resumed=bool(args.resume))
    report = st.Report("grow", config=config, seed=args.seed)
    if args.replicas >= 2:
        final = np.stack([c for _, _, c in results])
        for k in range(1, args.K + 1):
            report.rows.append(st.mean_row(f"E C_{k}(t_end)", final[:, k], a_count(args.d, k) / (2 * k)))
        report.notes.append("informational: finite-n means differ from the limit by O(1/n)")
    _write_report(out, "grow", report)
    return EXIT_OK


# -- limit ---------------------------------------------------------------------------


def cmd_limit(args) -> int:
    _require(args.d >= 1 and args.L >= 1 and args.T >= 0, "need d >= 1, L >= 1 and T >= 0")
    _require(1 <= args.max_len <= args.L, "need 1 <= max-len <= L")
    _require(args.replicas >= 100, "need at least 100 replicas")
    times = args.times if args.times is not None else (0.0, args.T)
    _require(all(0 <= t <= args.T for t in times), "observation times must lie in [0, T]")
    times = sorted(set(times))
    out = Path(args.out)
    config = dict(d=args.d, L=args.L, T=args.T, check=args.check, replicas=args.replicas, max_len=args.max_len, times=times)
    report = st.Report("limit_stationarity", config=config, seed=args.seed)
    if args.check == "stationarity":
        sample = lp.sample_word_counts(args.d, times, args.replicas, st.replica_rng(args.seed, 0), args.max_len, L=args.L)
        for ti, t in enumerate(sample.times):
            for ci, c in enumerate(sample.classes):
                x = sample.counts[:, ti, ci]
                report.rows.append(st.mean_row(f"E N[{c}](t={t:g})", x, 1 / c.h))
                stat, p, df = st.chi_square_poisson(x, 1 / c.h)
                report.gates.append(st.Gate(f"N[{c}](t={t:g}) ~ Poisson(1/{c.h})", p > 0.01, f"chi2={stat:.2f} df={df} p={p:.4f}"))
    if args.emit == "paths":
        config.update(path_replicas=args.path_replicas, dt=args.dt)
        grid = [round(i * args.dt, 12) for i in range(int(math.floor(args.T / args.dt + 1e-9)) + 1)]
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "limit_paths.csv", "w", newline="") as fh:
            rows = []
            for i in range(args.path_replicas):
                path = lp.simulate(args.d, args.L, args.T, st.replica_rng(args.seed, 1 + i))
                rows.extend(lp.path_rows(path, grid, replica=i, by_length=True))
            lp.write_counts_csv(fh, rows, key="k")
    _write_report(out, "limit", report)
    return EXIT_OK if report.passed() else EXIT_STAT_FAIL


# -- compare, tvscan, oulimit --------------------------------------------------------


def cmd_compare(args) -> int:
    _require(args.d >= 1 and args.K >= 1, "need d >= 1 and K >= 1")
    _require(args.replicas >= 2 and args.limit_replicas >= 0, "need replicas >= 2")
    _require(all(s >= 0 for s in args.s) and all(t >= 0 for t in args.t), "times must be nonnegative")
    report = st.graph_vs_limit(args.d, args.K, args.s, args.t, args.replicas, args.seed, args.limit_replicas, args.threads)
    _write_report(Path(args.out), "compare", report)
    return EXIT_OK if report.passed() else EXIT_STAT_FAIL


def cmd_tvscan(args) -> int:
    n_list = list(args.n)
    _require(len(n_list) >= 1 and all(n >= 1 for n in n_list), "need at least one positive n")
    _require(n_list == sorted(set(n_list)), "n values must be increasing")
    _require(args.samples >= st.MIN_TV_SAMPLES, f"need at least {st.MIN_TV_SAMPLES:g} samples")
    if args.scale == "quadratic":
        sizes = [int(round(args.samples * (n / n_list[0]) ** 2)) for n in n_list]
    else:
        sizes = [args.samples] * len(n_list)
    config = dict(d=args.d, r=args.r, n=n_list, samples=sizes)
    reports = st.tv_scan(args.d, args.r, n_list, sizes, args.seed, args.threads)
    report = st.Report("tvscan", config=config, seed=args.seed)
    for rep in reports:
        report.notes.append(
            f"n={rep.n} samples={rep.samples} tv={rep.estimate:.6f} se={rep.stderr:.6f} raw={rep.raw:.6f} floor={rep.floor:.6f}"
        )
    for a, b in zip(reports, reports[1:]):
        report.gates.append(st.Gate(f"TV(n={b.n}) < TV(n={a.n})", b.estimate < a.estimate, f"{b.estimate:.6f} vs {a.estimate:.6f}"))
    if len(reports) >= 2 and reports[0].estimate > 0:
        ratio = reports[-1].estimate / reports[0].estimate
        bound = 2 * n_list[0] / n_list[-1]
        report.gates.append(st.Gate(f"TV ratio last/first < {bound:.4g}", ratio < bound, f"ratio={ratio:.4f}"))
    _write_report(Path(args.out), "tvscan", report)
    return EXIT_OK if report.passed() else EXIT_STAT_FAIL


def cmd_oulimit(args) -> int:
    _require(all(d >= 1 for d in args.d_list) and all(k >= 1 for k in args.k_list), "need positive d and k values")
    _require(args.replicas >= 2 and 0 <= args.s <= args.t, "need replicas >= 2 and 0 <= s <= t")
    report = st.ou_limit_scan(args.d_list, args.k_list, args.s, args.t, args.replicas, args.seed)
    for d in args.d_list:
        for k in args.k_list:
            exact = lp.chebyshev_trace_cov(d, k, k, args.t, args.t)
            report.notes.append(f"d={d} var(trT_{k}) exact={exact:.6f} limit={lp.ou_covariance(k, k, args.t, args.t):.6f}")
    _write_report(Path(args.out), "oulimit", report)
    return EXIT_OK if report.passed() else EXIT_STAT_FAIL


COMMANDS = {
    "words": cmd_words,
    "grow": cmd_grow,
    "limit": cmd_limit,
    "compare": cmd_compare,
    "tvscan": cmd_tvscan,
    "oulimit": cmd_oulimit,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

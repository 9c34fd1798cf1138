"""Command line entry point: ``rcr <subcommand> [options]``."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, GraphError
from .estimators import METHODS, SPLIT_METHODS, EstimatorConfig, estimate, pilot_split_factors
from .exact import CountVector, exact_counts, p_star, rcr_from_counts, tm_state_space, to_decimal
from .graph import all_pairs_distances, load_graph
from .harness import (
    DEFAULT_GRAPHS,
    DEFAULT_METHODS,
    DEFAULT_P_GRID,
    REFERENCE_POLICIES,
    ExperimentSpec,
    emit_svg,
    resolve_threads,
    run_and_summarize,
    stream,
    write_csv,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    """Comma list ``0.1,0.2`` or range ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (Fraction(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            out, x = [], start
            while x <= stop:
                out.append(float(x))
                x += step
            return out
        return [float(x) for x in text.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a list or start:stop:step, got {text!r}") from None


def _probability(text: str) -> Fraction:
    try:
        p = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from None
    if not 0 <= p <= 1:
        raise argparse.ArgumentTypeError(f"probability out of range: {text!r}")
    return p


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(0), help="master seed (default 0)")
    parser.add_argument("--threads", type=int, default=default(None), help="worker threads; RCR_THREADS overrides")
    parser.add_argument("--out", default=default("."), help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcr", description="Residual connectedness reliability estimation.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="run one estimator once")
    _global_flags(est, suppress=True)
    est.add_argument("--graph", required=True, help="grid:WxH or edge-list file")
    est.add_argument("--method", required=True, choices=METHODS)
    est.add_argument("--p", type=float, required=True)
    est.add_argument("--samples", type=int, default=100_000, help="samples or particles N")
    est.add_argument("--R", type=int, default=None, help="number of levels (default: diameter)")
    est.add_argument("--factors", type=_int_list, default=None, help="splitting factors k_0,..,k_{R-1}")
    est.add_argument("--pilot-samples", type=int, default=None, help="pilot size when factors are not given")

    ex = sub.add_parser("exact", help="exact counts and reliability")
    _global_flags(ex, suppress=True)
    ex.add_argument("--graph", required=False, help="grid:WxH or edge-list file")
    ex.add_argument("--method", choices=("auto", "tm", "brute"), default="auto")
    ex.add_argument("--p", type=_probability, action="append", default=[], help="repeatable")
    ex.add_argument("--states", action="store_true", help="print the interface state count")
    ex.add_argument("--counts", help="counts file; read if present, written otherwise")
    ex.add_argument("--show-counts", action="store_true")
    ex.add_argument("--digits", type=int, default=20)

    pil = sub.add_parser("pilot", help="estimate splitting factors")
    _global_flags(pil, suppress=True)
    pil.add_argument("--graph", required=True)
    pil.add_argument("--p", type=float, required=True)
    pil.add_argument("--samples", type=int, default=100_000)
    pil.add_argument("--R", type=int, default=None)

    exp = sub.add_parser("experiment", help="replicated comparison with CSV and SVG output")
    _global_flags(exp, suppress=True)
    exp.add_argument("--config", help="flat key=value file; flags given on the command line win")
    exp.add_argument("--graph", default=None, help="comma-separated graph specs")
    exp.add_argument("--methods", default=None, help="comma-separated methods")
    exp.add_argument("--p-grid", type=_float_list, default=None, help="0.1,0.2 or 0.1:0.65:0.05")
    exp.add_argument("--samples", type=int, default=None)
    exp.add_argument("--reps", type=int, default=None)
    exp.add_argument("--R", type=int, default=None)
    exp.add_argument("--reference", default=None, help=f"{', '.join(REFERENCE_POLICIES)} or a number")
    exp.add_argument("--pilot-samples", type=int, default=None)
    exp.add_argument("--name", default=None, help="output file stem (default: experiment)")
    exp.add_argument("--no-svg", action="store_true", default=None)

    ps = sub.add_parser("pstar", help="fixed point of the conditional up-fraction")
    _global_flags(ps, suppress=True)
    src = ps.add_mutually_exclusive_group(required=True)
    src.add_argument("--counts", help="counts file")
    src.add_argument("--graph", help="compute counts for this graph")
    ps.add_argument("--tol", type=float, default=1e-6)
    ps.add_argument("--grid", type=int, default=200, help="sign-scan resolution")
    return parser


def _print_diag(diag: dict, skip=()) -> None:
    for key in sorted(set(diag) - set(skip)):
        val = diag[key]
        if isinstance(val, (list, tuple, np.ndarray)):
            val = ",".join(str(x) for x in np.asarray(val).tolist())
        print(f"{key}: {val}")


def cmd_estimate(args) -> int:
    g = load_graph(args.graph)
    dm = all_pairs_distances(g)
    R = args.R if args.R is not None else max(1, int(dm.max()))
    factors = ()
    if args.method in SPLIT_METHODS:
        if args.factors is not None:
            factors = tuple(args.factors)
        else:
            pilot_rng = stream(args.seed, args.graph, "pilot", float(args.p))
            factors = tuple(pilot_split_factors(g, dm, args.p, R, args.pilot_samples or args.samples, pilot_rng))
    cfg = EstimatorConfig(args.method, args.p, args.samples, R, factors, args.seed)
    res = estimate(g, dm, cfg, np.random.default_rng(args.seed))
    print(f"graph: {g.name}")
    print(f"method: {cfg.method}")
    print(f"p: {cfg.p}")
    print(f"R: {R}")
    print(f"N: {cfg.N}")
    if factors:
        print(f"factors: {','.join(map(str, factors))}")
    print(f"estimate: {res.estimate!r}")
    _print_diag(res.method_diag, skip=("R", "factors"))
    print(f"time_s: {res.wall_time:.6f}", file=sys.stderr)
    return EXIT_OK


def _grid_width(spec: str) -> int:
    g = load_graph(spec)
    if not g.name.startswith("grid:"):
        raise ConfigError("--states needs a grid:WxH graph")
    w, h = (int(x) for x in g.name[5:].split("x"))
    return min(w, h)


def cmd_exact(args) -> int:
    if args.states:
        if not args.graph:
            raise ConfigError("--states needs --graph")
        print(f"{len(tm_state_space(_grid_width(args.graph)))} interface states")
        if not args.p and not args.show_counts and not args.counts:
            return EXIT_OK
    counts = None
    if args.counts and Path(args.counts).exists():
        counts = CountVector.load(args.counts)
    if counts is None:
        if not args.graph:
            raise ConfigError("need --graph or an existing --counts file")
        counts = exact_counts(load_graph(args.graph), args.method)
        if args.counts:
            counts.save(args.counts)
    if args.show_counts or not args.p:
        sys.stdout.write(counts.to_text())
    for p in args.p:
        val = rcr_from_counts(counts, p)
        print(f"{val} = {to_decimal(val, args.digits)}")
    return EXIT_OK


def cmd_pilot(args) -> int:
    g = load_graph(args.graph)
    dm = all_pairs_distances(g)
    R = args.R if args.R is not None else max(1, int(dm.max()))
    factors = pilot_split_factors(g, dm, args.p, R, args.samples, stream(args.seed, args.graph, "pilot", float(args.p)))
    print(f"R: {R}")
    print(f"factors: {','.join(map(str, factors))}")
    return EXIT_OK


_CONFIG_KEYS = {
    "graph", "methods", "p_grid", "samples", "reps", "R", "reference", "pilot_samples",
    "name", "no_svg", "seed", "threads", "out",
}


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys mirror the long flags."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key.lower() == "r":
                key = "R"
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _experiment_settings(args, argv_flags: set[str]) -> dict:
    conf = read_config(args.config) if args.config else {}
    cast = {
        "samples": int, "reps": int, "R": int, "pilot_samples": int, "seed": int, "threads": int,
        "p_grid": _float_list, "no_svg": lambda s: s.lower() in ("1", "true", "yes"),
    }
    settings = {
        "graph": ",".join(DEFAULT_GRAPHS), "methods": ",".join(DEFAULT_METHODS), "p_grid": list(DEFAULT_P_GRID),
        "samples": 100_000, "reps": 20, "R": None, "reference": "exact-tm", "pilot_samples": None,
        "name": "experiment", "no_svg": False, "seed": 0, "threads": None, "out": ".",
    }
    for key, value in conf.items():
        try:
            settings[key] = cast.get(key, str)(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"config value for {key}: {exc}") from None
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if key in ("seed", "threads", "out"):
            if key in argv_flags:
                settings[key] = val
        elif val is not None:
            settings[key] = val
    return settings


def cmd_experiment(args, argv_flags: set[str]) -> int:
    s = _experiment_settings(args, argv_flags)
    out_dir = Path(s["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = resolve_threads(s["threads"])
    methods = [m.strip() for m in s["methods"].split(",") if m.strip()]
    rows = []
    for graph in (x.strip() for x in s["graph"].split(",") if x.strip()):
        spec = ExperimentSpec(
            graph=graph, methods=methods, p_grid=s["p_grid"], N=s["samples"], reps=s["reps"], seed=s["seed"],
            R=s["R"], reference=s["reference"], pilot_N=s["pilot_samples"],
        )
        spec.validate()
        rows.extend(run_and_summarize(spec, threads))
    csv_path = out_dir / f"{s['name']}.csv"
    write_csv(rows, csv_path)
    print(f"wrote {csv_path}")
    if not s["no_svg"]:
        for graph in dict.fromkeys(r.graph for r in rows):
            stem = graph.replace(":", "_").replace("/", "_")
            svg_path = out_dir / f"{s['name']}_{stem}.svg"
            emit_svg([r for r in rows if r.graph == graph], svg_path)
            print(f"wrote {svg_path}")
    print(f"{'graph':<12} {'method':<10} {'p':>5} {'mean':>12} {'re':>10} {'wnrv':>10}")
    for r in rows:
        print(f"{r.graph:<12} {r.method:<10} {r.p:>5.2f} {r.mean:>12.6g} {r.re:>10.4g} {r.wnrv:>10.4g}")
    return EXIT_OK


def cmd_pstar(args) -> int:
    if args.counts:
        counts = CountVector.load(args.counts)
    else:
        counts = exact_counts(load_graph(args.graph))
    res = p_star(counts, tol=args.tol, grid=args.grid)
    print(f"p* = {res.value:.6f}")
    print(f"bracket: [{res.bracket[0]!r}, {res.bracket[1]!r}]")
    print(f"sign_changes: {res.sign_changes}")
    if res.boundary:
        print("boundary: yes")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"rcr: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    flags = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    try:
        if args.command == "experiment":
            return cmd_experiment(args, flags)
        return {"estimate": cmd_estimate, "exact": cmd_exact, "pilot": cmd_pilot, "pstar": cmd_pstar}[args.command](args)
    except (ConfigError, GraphError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"rcr: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"rcr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

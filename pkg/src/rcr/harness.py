"""Replicated estimator runs, RE/WNRV summaries, bootstrap intervals and output files."""

from __future__ import annotations

import csv
import math
import zlib
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError
from .estimators import METHODS, SPLIT_METHODS, EstimatorConfig, estimate, pilot_split_factors
from .exact import exact_counts, rcr_from_counts
from .graph import Graph, all_pairs_distances, load_graph

CSV_COLUMNS = (
    "graph", "method", "p", "R", "N", "reps", "mean", "variance", "re", "wnrv",
    "time_mean_s", "ci_low", "ci_high", "reference", "seed",
)
TIME_COLUMNS = ("wnrv", "time_mean_s")
REFERENCE_POLICIES = ("exact-tm", "exact-brute", "best-method")
BEST_METHOD_SWITCH = 0.25

DEFAULT_GRAPHS = ("grid:4x4", "grid:8x8")
DEFAULT_P_GRID = tuple(round(0.10 + 0.05 * k, 2) for k in range(12))
DEFAULT_METHODS = ("cond", "rvr", "sis", "sir")


@dataclass
class ExperimentSpec:
    graph: str
    methods: Sequence[str] = DEFAULT_METHODS
    p_grid: Sequence[float] = DEFAULT_P_GRID
    N: int = 100_000
    reps: int = 20
    seed: int = 0
    R: int | None = None
    reference: str | float = "exact-tm"
    pilot_N: int | None = None

    def validate(self) -> None:
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s): {', '.join(unknown)}")
        if not self.methods:
            raise ConfigError("no methods given")
        if self.reps < 2:
            raise ConfigError("reps must be at least 2 to estimate a variance")
        if self.N < 1:
            raise ConfigError("N must be positive")
        if not self.p_grid or any(not 0 < p < 1 for p in self.p_grid):
            raise ConfigError("p values must lie strictly between 0 and 1")
        if isinstance(self.reference, str) and self.reference not in REFERENCE_POLICIES:
            try:
                float(self.reference)
            except ValueError:
                raise ConfigError(f"unknown reference policy {self.reference!r}") from None


@dataclass(frozen=True)
class ReplicateRecord:
    graph: str
    method: str
    p: float
    R: int
    N: int
    rep: int
    estimate: float
    wall_time: float
    factors: tuple[int, ...] = ()


@dataclass
class SummaryRow:
    graph: str
    method: str
    p: float
    R: int
    N: int
    reps: int
    mean: float
    variance: float
    re: float
    wnrv: float
    time_mean_s: float
    ci_low: float
    ci_high: float
    reference: float
    seed: int


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``(seed, labels...)``; labels may be str, int or float."""
    key = []
    for lab in labels:
        if isinstance(lab, str):
            key.append(zlib.crc32(lab.encode()))
        elif isinstance(lab, float):
            key.append(int(round(lab * 1e9)))
        else:
            key.append(int(lab) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def resolve_threads(threads: int | None) -> int:
    import os

    env = os.environ.get("RCR_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(f"RCR_THREADS must be an integer, got {env!r}") from None
    threads = 1 if threads is None else threads
    if threads < 1:
        raise ConfigError("thread count must be positive")
    return threads


def run_experiment(spec: ExperimentSpec, threads: int | None = 1, graph: Graph | None = None) -> list[ReplicateRecord]:
    """All replicates for every (method, p), ordered by p, then method, then replicate.

    Splitting-family methods share one pilot run per p whose time is not recorded.
    """
    spec.validate()
    g = graph if graph is not None else load_graph(spec.graph)
    dm = all_pairs_distances(g)
    R = spec.R if spec.R is not None else max(1, int(dm.max()))
    pilot_N = spec.pilot_N or spec.N

    factors: dict[float, tuple[int, ...]] = {}
    if any(m in SPLIT_METHODS for m in spec.methods):
        for p in spec.p_grid:
            factors[p] = tuple(pilot_split_factors(g, dm, p, R, pilot_N, stream(spec.seed, spec.graph, "pilot", p)))

    jobs = [(p, m, rep) for p in spec.p_grid for m in spec.methods for rep in range(spec.reps)]

    def run(job):
        p, m, rep = job
        cfg = EstimatorConfig(m, p, spec.N, R, factors.get(p, ()) if m in SPLIT_METHODS else ())
        res = estimate(g, dm, cfg, stream(spec.seed, spec.graph, m, p, rep))
        return ReplicateRecord(spec.graph, m, p, R, spec.N, rep, res.estimate, res.wall_time, cfg.factors)

    threads = resolve_threads(threads)
    if threads == 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))


def reference_values(spec: ExperimentSpec, records: Sequence[ReplicateRecord], graph: Graph | None = None) -> dict[float, float]:
    ref = spec.reference
    if not isinstance(ref, str) or ref not in REFERENCE_POLICIES:
        value = float(ref)
        if value <= 0:
            raise ConfigError("reference value must be positive")
        return {p: value for p in spec.p_grid}
    if ref == "best-method":
        out = {}
        for p in spec.p_grid:
            method = "cond" if p <= BEST_METHOD_SWITCH else "sir"
            ests = [r.estimate for r in records if r.method == method and r.p == p]
            if not ests:
                raise ConfigError(f"best-method reference at p={p} needs the {method!r} method in the run")
            out[p] = float(np.mean(ests))
        return out
    g = graph if graph is not None else load_graph(spec.graph)
    try:
        counts = exact_counts(g, "tm" if ref == "exact-tm" else "brute")
    except ValueError as exc:
        raise ConfigError(f"reference {ref!r} unavailable: {exc}") from None
    return {p: float(rcr_from_counts(counts, p)) for p in spec.p_grid}


def bootstrap_ci(
    values: Sequence[float],
    statistic: Callable[[np.ndarray], float],
    B: int = 1000,
    alpha: float = 0.05,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Percentile bootstrap interval; endpoints are order statistics of the resampled statistic."""
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise ValueError("bootstrap needs at least two values")
    if B < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    if np.all(x == x[0]):
        s = float(statistic(x))
        return s, s
    rng = rng if rng is not None else np.random.default_rng()
    idx = rng.integers(0, len(x), size=(B, len(x)))
    stats = np.array([statistic(x[row]) for row in idx])
    lo, hi = np.quantile(stats, [alpha / 2, 1 - alpha / 2], method="inverted_cdf")
    return float(lo), float(hi)


def summarize(
    records: Sequence[ReplicateRecord],
    reference: float | Mapping[float, float],
    seed: int = 0,
    B: int = 1000,
    alpha: float = 0.05,
) -> list[SummaryRow]:
    groups: dict[tuple, list[ReplicateRecord]] = {}
    for rec in records:
        groups.setdefault((rec.graph, rec.method, rec.p), []).append(rec)
    rows = []
    for (graph, method, p), recs in groups.items():
        ref = reference[p] if isinstance(reference, Mapping) else float(reference)
        if not ref > 0:
            raise ConfigError(f"reference must be positive, got {ref} at p={p}")
        if len(recs) < 2:
            raise ConfigError("need at least two replicates per (method, p)")
        est = np.array([r.estimate for r in recs])
        var = float(np.var(est, ddof=1))
        t_mean = float(np.mean([r.wall_time for r in recs]))
        re = math.sqrt(var) / ref
        lo, hi = bootstrap_ci(
            est, lambda v: float(np.std(v, ddof=1)) / ref, B, alpha, stream(seed, graph, method, p, "bootstrap")
        )
        rows.append(
            SummaryRow(
                graph, method, p, recs[0].R, recs[0].N, len(recs), float(est.mean()), var, re,
                t_mean * var / ref**2, t_mean, lo, hi, ref, seed,
            )
        )
    return rows


def write_csv(rows: Sequence[SummaryRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            d = asdict(row)
            writer.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS])


def read_csv(path: str | Path) -> list[SummaryRow]:
    types = {f.name: f.type for f in fields(SummaryRow)}
    casts = {"str": str, "int": int, "float": float}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(SummaryRow(**{k: casts[types[k]](v) for k, v in rec.items()}))
    return out


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def emit_svg(rows: Sequence[SummaryRow], path: str | Path, width: int = 640, height: int = 420) -> None:
    """log10(RE) against p, one polyline per method."""
    if not rows:
        raise ValueError("no rows to plot")
    pts = [(r.method, r.p, math.log10(r.re)) for r in rows if r.re > 0]
    methods = list(dict.fromkeys(r.method for r in rows))
    ps = [r.p for r in rows]
    ys = [y for _, _, y in pts] or [0.0]
    x0, x1 = min(ps), max(ps)
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    if x1 == x0:
        x0, x1 = x0 - 0.05, x1 + 0.05
    if y1 == y0:
        y1 = y0 + 1
    left, right, top, bottom = 60, 120, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (y1 - y) / (y1 - y0) * ph

    title = escape(", ".join(dict.fromkeys(r.graph for r in rows)))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2}" y="18" text-anchor="middle">Relative error, {title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">p</text>',
        f'<text x="15" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 15 {top + ph / 2})">log10(RE)</text>',
    ]
    for y in range(y0, y1 + 1):
        out.append(f'<text x="{left - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{y}</text>')
    for p in sorted(set(ps)):
        out.append(f'<text x="{sx(p):.1f}" y="{top + ph + 16}" text-anchor="middle">{p:g}</text>')
    for k, method in enumerate(methods):
        colour = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for m, x, y in sorted(pts, key=lambda t: t[1]) if m == method)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{coords}"><title>{escape(method)}</title></polyline>')
        out.append(f'<text x="{left + pw + 10}" y="{top + 16 * (k + 1)}" fill="{colour}">{escape(method)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def run_and_summarize(spec: ExperimentSpec, threads: int | None = 1) -> list[SummaryRow]:
    g = load_graph(spec.graph)
    records = run_experiment(spec, threads, graph=g)
    refs = reference_values(spec, records, graph=g)
    return summarize(records, refs, seed=spec.seed)

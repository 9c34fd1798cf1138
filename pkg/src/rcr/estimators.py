"""Monte Carlo estimators of the residual connectedness reliability.

All estimators share one calling convention: a graph, its distance matrix
(where the level process needs it), an :class:`EstimatorConfig` and a numpy
``Generator``. The heavy loops are compiled; the public functions only
validate, time and package the results.
"""

from __future__ import annotations

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import _kernels as K
from .chain import ScanTables
from .errors import ConfigError, UndefinedResultError
from .graph import Graph

METHODS = ("crude", "cond", "rvr", "split", "sis_basic", "sis", "sir")
SPLIT_METHODS = ("split", "sis_basic", "sis")

_JIT = dict(cache=True, nogil=True)
_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class EstimatorConfig:
    method: str
    p: float
    N: int
    R: int | None = None
    factors: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"p must lie in (0, 1), got {self.p}")
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        if self.R is not None and self.R < 1:
            raise ConfigError("R must be a positive integer")
        object.__setattr__(self, "factors", tuple(int(k) for k in self.factors))
        if any(k < 1 for k in self.factors):
            raise ConfigError("splitting factors must be positive integers")

    def resolved_R(self, dm: np.ndarray) -> int:
        # default radius is the graph diameter (at least one level)
        return self.R if self.R is not None else max(1, int(dm.max()))


@dataclass
class EstimateResult:
    estimate: float
    n_samples: int
    wall_time: float
    method_diag: dict = field(default_factory=dict)


# ---------------------------------------------------------------- kernels


@njit(**_JIT)
def _count_up(st):
    c = 0
    for v in range(st.shape[0]):
        if st[v] == K.UP:
            c += 1
    return c


@njit(**_JIT)
def _crude_kernel(indptr, indices, n, p, N, rng):
    hits = 0
    size_sum = 0
    members = np.empty(n, np.bool_)
    for _ in range(N):
        size = 0
        for v in range(n):
            members[v] = rng.random() < p
            if members[v]:
                size += 1
        if K.is_connected(indptr, indices, members):
            hits += 1
            size_sum += size
    return hits, size_sum


@njit(**_JIT)
def _cond_kernel(indptr, indices, n, p, N, rng):
    q = 1.0 - p
    perm = np.arange(n)
    state = np.empty(n, np.int8)
    queue = np.empty(n, np.int64)
    total = 0.0
    total_sq = 0.0
    zeros = 0
    for _ in range(N):
        state[:] = K.UNKNOWN
        revealed = 0
        omega = -1
        for t in range(n):
            j = t + int(rng.random() * (n - t))
            if j >= n:
                j = n - 1
            tmp = perm[t]
            perm[t] = perm[j]
            perm[j] = tmp
            v = perm[t]
            revealed += 1
            if rng.random() < p:
                state[v] = K.UP
                omega = v
                break
            state[v] = K.DOWN
        if omega < 0:
            zeros += 1
            continue
        head = 0
        tail = 1
        queue[0] = omega
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if state[w] == K.UNKNOWN:
                    revealed += 1
                    if rng.random() < p:
                        state[w] = K.UP
                        queue[tail] = w
                        tail += 1
                    else:
                        state[w] = K.DOWN
        c = q ** (n - revealed)
        total += c
        total_sq += c * c
    return total, total_sq, zeros


@njit(**_JIT)
def _rvr_kernel(indptr, indices, n, p, N, rng):
    logp = math.log(p)
    state = np.empty(n, np.int8)
    total = 0.0
    total_sq = 0.0
    max_depth = 0
    for _ in range(N):
        state[:] = K.UNKNOWN
        acc = 0.0
        mult = 1.0
        depth = 0
        while True:
            has_up = False
            m = 0
            for v in range(n):
                if state[v] == K.UP:
                    has_up = True
                elif state[v] == K.UNKNOWN:
                    m += 1
            if has_up and not K.is_feasible(indptr, indices, state):
                break
            if m == 0:
                if K.is_connected(indptr, indices, state == K.UP):
                    acc += mult
                break
            pm = p**m
            if K.is_connected(indptr, indices, state != K.DOWN):
                acc += mult * pm
            mult *= 1.0 - pm
            # first failure among the unknowns: truncated geometric by inversion
            u = rng.random()
            pos = int(math.ceil(math.log(1.0 - u * (1.0 - pm)) / logp))
            if pos < 1:
                pos = 1
            elif pos > m:
                pos = m
            seen = 0
            for v in range(n):
                if state[v] == K.UNKNOWN:
                    seen += 1
                    if seen < pos:
                        state[v] = K.UP
                    else:
                        state[v] = K.DOWN
                        break
            depth += 1
        if depth > max_depth:
            max_depth = depth
        total += acc
        total_sq += acc * acc
    return total, total_sq, max_depth


@njit(**_JIT)
def _pow_le(base, exp, limit):
    acc = 1
    for _ in range(exp):
        acc *= base
        if acc > limit:
            return False
    return True


@njit(**_JIT)
def _iroot(k, b):
    """Largest m with m**b <= k."""
    m = int(k ** (1.0 / b))
    if m < 1:
        m = 1
    while _pow_le(m + 1, b, k):
        m += 1
    while m > 1 and not _pow_le(m, b, k):
        m -= 1
    return m


@njit(**_JIT)
def _final_sample(base, cut, fwd, fwd_dist, p, rng, lower):
    st = base.copy()
    for v in range(st.shape[0]):
        if cut[v]:
            st[v] = K.UP
    lower[:] = False
    K.scan_level(st, fwd, fwd_dist, 0, p, rng, lower)
    return st


@njit(**_JIT)
def _split_kernel(indptr, indices, fwd, fwd_dist, R, p, N, factors, mode, rng):
    """Fixed splitting (mode 0), final-level IS (mode 1), block-factorised IS (mode 2).

    Returns ``(weight_sum, size_weight_sum, survivors_per_level, entering_per_level)``.
    """
    n = fwd.shape[0]
    survivors = np.zeros(R + 1, np.int64)
    entering = np.zeros(R + 1, np.int64)
    lower = np.zeros(n, np.bool_)
    pop = np.empty((N, n), np.int8)
    m = 0
    for _ in range(N):
        st = pop[m]
        st[:] = K.UNKNOWN
        lower[:] = False
        K.scan_level(st, fwd, fwd_dist, R, p, rng, lower)
        if K.is_feasible(indptr, indices, st):
            m += 1
    entering[0] = N
    survivors[0] = m
    last = R if mode == 0 else R - 1
    for r in range(1, last + 1):
        if m == 0:
            break
        k = factors[r - 1]
        new = np.empty((m * k, n), np.int8)
        mm = 0
        for i in range(m):
            for _ in range(k):
                st = new[mm]
                st[:] = pop[i]
                lower[:] = False
                K.scan_level(st, fwd, fwd_dist, R - r, p, rng, lower)
                if K.is_feasible(indptr, indices, st):
                    mm += 1
        entering[r] = m * k
        pop = new
        m = mm
        survivors[r] = m

    weight_sum = 0.0
    size_sum = 0.0
    if mode == 0:
        for i in range(m):
            weight_sum += 1.0
            size_sum += _count_up(pop[i])
        return weight_sum, size_sum, survivors, entering

    k = factors[R - 1]
    entering[R] = m * k
    hits = 0
    for i in range(m):
        base = pop[i]
        allowed = base != K.DOWN
        marked = base == K.UP
        root = 0
        while not marked[root]:
            root += 1
        # at radius 1 every unknown vertex touches a known-up one, so a
        # feasible possible set is connected and the root blocks cover it
        cut, _, bv, bp, _ = K.lowpoint(indptr, indices, allowed, root, marked)
        forced = 0
        for v in range(n):
            if cut[v] and base[v] != K.UP:
                forced += 1
        w = p**forced
        nb = bp.shape[0] - 1
        if mode == 1 or nb <= 1:
            if nb == 0:
                # possible set is the single known-up vertex
                weight_sum += w * k
                size_sum += w * k
                hits += k
                continue
            for _ in range(k):
                st = _final_sample(base, cut, fwd, fwd_dist, p, rng, lower)
                marked_up = st == K.UP
                if K.is_connected(indptr, indices, marked_up):
                    weight_sum += w
                    size_sum += w * _count_up(st)
                    hits += 1
            continue

        owner = np.full(n, -1, np.int64)
        for j in range(nb):
            for t in range(bp[j], bp[j + 1]):
                if owner[bv[t]] < 0:
                    owner[bv[t]] = j
        mroot = _iroot(k, nb)
        counts = np.zeros(nb, np.float64)
        sizes = np.zeros(nb, np.float64)
        bm = np.zeros(n, np.bool_)
        for _ in range(mroot):
            st = _final_sample(base, cut, fwd, fwd_dist, p, rng, lower)
            for j in range(nb):
                bm[:] = False
                owned = 0
                for t in range(bp[j], bp[j + 1]):
                    v = bv[t]
                    if st[v] == K.UP:
                        bm[v] = True
                        if owner[v] == j:
                            owned += 1
                if K.is_connected(indptr, indices, bm):
                    counts[j] += 1.0
                    sizes[j] += owned
        prod = 1.0
        for j in range(nb):
            prod *= counts[j]
        size_comb = 0.0
        for j in range(nb):
            other = 1.0
            for l in range(nb):
                if l != j:
                    other *= counts[l]
            size_comb += sizes[j] * other
        full = 1
        for _ in range(nb):
            full *= mroot
        resid = 0.0
        resid_size = 0.0
        for _ in range(k - full):
            st = _final_sample(base, cut, fwd, fwd_dist, p, rng, lower)
            if K.is_connected(indptr, indices, st == K.UP):
                resid += 1.0
                resid_size += _count_up(st)
        if prod + resid > 0:
            hits += 1
        weight_sum += w * (prod + resid)
        size_sum += w * (size_comb + resid_size)
    survivors[R] = hits
    return weight_sum, size_sum, survivors, entering


@njit(**_JIT)
def _sir_kernel(indptr, indices, fwd, fwd_dist, R, p, N, rng):
    """Returns ``(estimate, size_weight_sum / N, survivors, ess)``."""
    n = fwd.shape[0]
    survivors = np.zeros(R + 1, np.int64)
    ess = np.zeros(R + 1, np.float64)
    lower = np.zeros(n, np.bool_)
    pop = np.empty((N, n), np.int8)
    weights = np.empty(N, np.float64)
    m = 0
    for _ in range(N):
        st = pop[m]
        st[:] = K.UNKNOWN
        lower[:] = False
        K.scan_level(st, fwd, fwd_dist, R, p, rng, lower)
        if K.is_feasible(indptr, indices, st):
            weights[m] = 1.0
            m += 1
    survivors[0] = m
    if m == 0:
        return 0.0, 0.0, survivors, ess
    new_pop = np.empty((N, n), np.int8)
    new_w = np.empty(N, np.float64)
    cum = np.empty(N, np.float64)
    u = np.empty(N, np.float64)
    for r in range(1, R + 1):
        total = 0.0
        total_sq = 0.0
        for i in range(m):
            total += weights[i]
            total_sq += weights[i] * weights[i]
            cum[i] = total
        ess[r - 1] = total * total / total_sq
        # killed particles count as zero weight, so the mean runs over all N
        average = total / N
        for i in range(N):
            u[i] = rng.random() * total
        u.sort()
        j = 0
        mm = 0
        for i in range(N):
            while j < m - 1 and cum[j] < u[i]:
                j += 1
            st = new_pop[mm]
            st[:] = pop[j]
            cond, _ = K.required_cuts(indptr, indices, st, True)
            forced = 0
            for v in range(n):
                if cond[v] and st[v] != K.UP:
                    st[v] = K.UP
                    forced += 1
            lower[:] = False
            K.scan_level(st, fwd, fwd_dist, R - r, p, rng, lower)
            if K.is_feasible(indptr, indices, st):
                new_w[mm] = average * p**forced
                mm += 1
        pop, new_pop = new_pop, pop
        weights, new_w = new_w, weights
        m = mm
        survivors[r] = m
        if m == 0:
            return 0.0, 0.0, survivors, ess
    est = 0.0
    size_sum = 0.0
    for i in range(m):
        est += weights[i]
        size_sum += weights[i] * _count_up(pop[i])
    return est / N, size_sum / N, survivors, ess


# ---------------------------------------------------------------- public API


def _rng(cfg: EstimatorConfig, rng: np.random.Generator | None) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(cfg.seed)


def _check_method(cfg: EstimatorConfig, *allowed: str) -> None:
    if cfg.method not in allowed:
        raise ConfigError(f"config method {cfg.method!r} does not match estimator {allowed[0]!r}")


def _split_factors(cfg: EstimatorConfig, R: int) -> np.ndarray:
    if len(cfg.factors) != R:
        raise ConfigError(f"{cfg.method} needs {R} splitting factors, got {len(cfg.factors)}")
    if cfg.N * math.prod(cfg.factors) > _INT64_MAX:
        raise ValueError("N times the product of splitting factors overflows 64 bits")
    return np.asarray(cfg.factors, dtype=np.int64)


def crude_mc(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    rng = _rng(cfg, rng)
    t0 = time.perf_counter()
    hits, size_sum = _crude_kernel(g.indptr, g.indices, g.n, cfg.p, cfg.N, rng)
    elapsed = time.perf_counter() - t0
    return EstimateResult(
        hits / cfg.N, cfg.N, elapsed, {"hits": int(hits), "up_fraction": size_sum / (g.n * hits) if hits else float("nan")}
    )


def conditional_mc(g: Graph, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    """Reveal in random order until the first up vertex, grow its component,
    and score the probability that every still-unrevealed vertex is down."""
    rng = _rng(cfg, rng)
    t0 = time.perf_counter()
    total, total_sq, zeros = _cond_kernel(g.indptr, g.indices, g.n, cfg.p, cfg.N, rng)
    elapsed = time.perf_counter() - t0
    mean = total / cfg.N
    var = max(total_sq / cfg.N - mean * mean, 0.0)
    return EstimateResult(mean, cfg.N, elapsed, {"empty_draws": int(zeros), "sample_var": var})


def rvr(g: Graph, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    """Recursive conditioning on the first failed vertex in vertex order."""
    rng = _rng(cfg, rng)
    t0 = time.perf_counter()
    total, total_sq, depth = _rvr_kernel(g.indptr, g.indices, g.n, cfg.p, cfg.N, rng)
    elapsed = time.perf_counter() - t0
    mean = total / cfg.N
    return EstimateResult(
        mean, cfg.N, elapsed, {"max_depth": int(depth), "sample_var": max(total_sq / cfg.N - mean * mean, 0.0)}
    )


def _run_split(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng, mode: int):
    rng = _rng(cfg, rng)
    R = cfg.resolved_R(dm)
    factors = _split_factors(cfg, R)
    tables = ScanTables.from_distances(dm)
    t0 = time.perf_counter()
    wsum, ssum, surv, entering = _split_kernel(
        g.indptr, g.indices, tables.fwd, tables.fwd_dist, R, cfg.p, cfg.N, factors, mode, rng
    )
    elapsed = time.perf_counter() - t0
    norm = float(cfg.N) * math.prod(cfg.factors)
    diag = {
        "R": R,
        "factors": list(cfg.factors),
        "survivors": surv.tolist(),
        "entering": entering.tolist(),
        "weight_sum": wsum,
        "size_weight_sum": ssum,
    }
    return EstimateResult(wsum / norm, cfg.N, elapsed, diag)


def splitting(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    return _run_split(g, dm, cfg, rng, 0)


def sis_basic(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    """Splitting up to the second-last level, then importance sampling with the
    cut vertices of the possible set forced up."""
    return _run_split(g, dm, cfg, rng, 1)


def sis(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    """As :func:`sis_basic`, but the final-level copies are combined across
    biconnected blocks, whose connectivity events are independent once the
    cut vertices are up."""
    return _run_split(g, dm, cfg, rng, 2)


def sir(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    rng = _rng(cfg, rng)
    R = cfg.resolved_R(dm)
    tables = ScanTables.from_distances(dm)
    t0 = time.perf_counter()
    est, size_mean, surv, ess = _sir_kernel(g.indptr, g.indices, tables.fwd, tables.fwd_dist, R, cfg.p, cfg.N, rng)
    elapsed = time.perf_counter() - t0
    diag = {"R": R, "survivors": surv.tolist(), "ess": ess[:R].tolist(), "size_weight_mean": size_mean}
    return EstimateResult(est, cfg.N, elapsed, diag)


_DISPATCH = {
    "crude": lambda g, dm, cfg, rng: crude_mc(g, dm, cfg, rng),
    "cond": lambda g, dm, cfg, rng: conditional_mc(g, cfg, rng),
    "rvr": lambda g, dm, cfg, rng: rvr(g, cfg, rng),
    "split": splitting,
    "sis_basic": sis_basic,
    "sis": sis,
    "sir": sir,
}


def estimate(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> EstimateResult:
    return _DISPATCH[cfg.method](g, dm, cfg, rng)


def factors_from_fractions(fractions: Sequence[float | None]) -> list[int]:
    """Reciprocal survival fractions rounded to the nearest integer (at least 1)."""
    out = []
    for rho in fractions:
        if rho is None or rho <= 0 or math.isnan(rho):
            out.append(1)
        else:
            out.append(max(1, round(1.0 / rho)))
    return out


def pilot_split_factors(
    g: Graph, dm: np.ndarray, p: float, R: int | None, N: int, rng: np.random.Generator
) -> list[int]:
    """Estimate per-level survival with unit factors and invert it."""
    R = R if R is not None else max(1, int(dm.max()))
    cfg = EstimatorConfig("split", p, N, R, (1,) * R)
    res = splitting(g, dm, cfg, rng)
    surv = res.method_diag["survivors"]
    fractions: list[float | None] = []
    prev = N
    for r in range(R):
        fractions.append(surv[r] / prev if prev > 0 and surv[r] > 0 else None)
        prev = surv[r]
    return factors_from_fractions(fractions)


def weighted_up_fraction(g: Graph, dm: np.ndarray, cfg: EstimatorConfig, rng=None) -> float:
    """Importance-weighted mean of |X|/n over connected final samples."""
    if cfg.method not in ("sis", "sir"):
        raise ConfigError("weighted_up_fraction supports the sis and sir methods only")
    res = estimate(g, dm, cfg, rng)
    if cfg.method == "sir":
        if res.estimate <= 0:
            raise UndefinedResultError("no weight on connected samples")
        return res.method_diag["size_weight_mean"] / (g.n * res.estimate)
    wsum = res.method_diag["weight_sum"]
    if wsum <= 0:
        raise UndefinedResultError("no weight on connected samples")
    return res.method_diag["size_weight_sum"] / (g.n * wsum)

"""The radius-indexed level process.

At level ``r`` the scan keeps the smallest up vertex and then every later up
vertex lying more than ``R - r`` hops from those already kept. The union of
these lower bounds over levels is the definitely-up set; the intersection of
their up-sets is the possibly-up set. A :class:`Particle` carries both as
``known_up`` and the complement ``known_down``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from typing import Literal

import numpy as np

from . import _kernels as K
from .errors import InvalidStateError
from .graph import Graph

SubsetValue = tuple[int, ...]


@dataclass(frozen=True)
class ScanTables:
    """Per-vertex forward neighbourhoods sorted by hop distance.

    Row ``v`` of ``fwd`` lists the vertices ``w > v`` ordered by ``dist[v, w]``;
    ``fwd_dist`` holds the matching distances. A radius-``rho`` ball restricted
    to ``[v, inf)`` is then a prefix of the row.
    """

    fwd: np.ndarray
    fwd_dist: np.ndarray

    @classmethod
    def from_distances(cls, dm: np.ndarray) -> ScanTables:
        n = dm.shape[0]
        fwd = np.zeros((n, max(n - 1, 1)), dtype=np.int64)
        fwd_dist = np.full((n, max(n - 1, 1)), np.iinfo(np.int64).max, dtype=np.int64)
        for v in range(n - 1):
            ws = np.arange(v + 1, n)
            order = np.argsort(dm[v, ws], kind="stable")
            fwd[v, : len(ws)] = ws[order]
            fwd_dist[v, : len(ws)] = dm[v, ws[order]]
        return cls(fwd, fwd_dist)


@dataclass(frozen=True)
class Particle:
    known_up: frozenset[int]
    known_down: frozenset[int]
    level: int
    R: int
    weight: float = 1.0
    alive: bool = True
    lower: SubsetValue = ()

    def state(self, n: int) -> np.ndarray:
        st = np.zeros(n, dtype=np.int8)
        if self.known_up:
            st[list(self.known_up)] = K.UP
        if self.known_down:
            st[list(self.known_down)] = K.DOWN
        return st


@lru_cache(maxsize=16)
def _cached_tables(n: int, raw: bytes, dtype: str) -> ScanTables:
    return ScanTables.from_distances(np.frombuffer(raw, dtype=dtype).reshape(n, n))


def tables_for(dm: np.ndarray) -> ScanTables:
    """Scan tables for ``dm``, memoised on its contents."""
    return _cached_tables(dm.shape[0], dm.tobytes(), dm.dtype.str)


def _check_levels(R: int, r: int) -> None:
    if R < 1 or not 0 <= r <= R:
        raise ValueError(f"need 0 <= r <= R and R >= 1, got r={r}, R={R}")


def generate_subset(g: Graph, dm: np.ndarray, x: Iterable[int], R: int, r: int) -> SubsetValue:
    _check_levels(R, r)
    t = tables_for(dm)
    lower = K.lower_bound(g.mask(x), t.fwd, t.fwd_dist, R - r)
    return tuple(np.flatnonzero(lower).tolist())


def up_set(g: Graph, dm: np.ndarray, lower: Iterable[int], R: int, r: int) -> frozenset[int]:
    """Union over kept vertices ``x`` of the closed ``R - r`` ball intersected with ``[x, inf)``."""
    _check_levels(R, r)
    t = tables_for(dm)
    out = K.up_mask(g.mask(lower), t.fwd, t.fwd_dist, R - r)
    return frozenset(np.flatnonzero(out).tolist())


def possible_set(g: Graph, dm: np.ndarray, d: Iterable[int], R: int, r: int) -> frozenset[int]:
    d = frozenset(d)
    out = frozenset(range(g.n))
    for s in range(r + 1):
        out &= up_set(g, dm, generate_subset(g, dm, d, R, s), R, s)
    return out


def subset_probability(g: Graph, dm: np.ndarray, lower: Iterable[int], R: int, r: int, p):
    """P(lower bound at level r equals ``lower``); exact when ``p`` is a Fraction."""
    lower = tuple(lower)
    k = len(lower)
    outside = g.n - len(up_set(g, dm, lower, R, r))
    if isinstance(p, Fraction):
        return p**k * (1 - p) ** outside
    p = float(p)
    if (p == 0.0 and k > 0) or (p == 1.0 and outside > 0):
        return 0.0
    log_val = (k * math.log(p) if k else 0.0) + (outside * math.log1p(-p) if outside else 0.0)
    return math.exp(log_val)


def _from_state(st: np.ndarray, level: int, R: int, weight: float, lower: np.ndarray) -> Particle:
    up = frozenset(np.flatnonzero(st == K.UP).tolist())
    down = frozenset(np.flatnonzero(st == K.DOWN).tolist())
    return Particle(up, down, level, R, weight, bool(up), tuple(np.flatnonzero(lower).tolist()))


def init_particle(g: Graph, dm: np.ndarray, R: int, p: float, rng: np.random.Generator) -> Particle:
    """Sample the level-0 state by lazily revealing vertices in scan order."""
    _check_levels(R, 0)
    t = tables_for(dm)
    st = np.zeros(g.n, dtype=np.int8)
    lower = np.zeros(g.n, dtype=np.bool_)
    K.scan_level(st, t.fwd, t.fwd_dist, R, float(p), rng, lower)
    return _from_state(st, 0, R, 1.0, lower)


def advance_particle(
    g: Graph,
    dm: np.ndarray,
    particle: Particle,
    p: float,
    forced_up: Iterable[int] = (),
    rng: np.random.Generator | None = None,
) -> Particle:
    """Sample the next level, optionally conditioning ``forced_up`` to be up.

    The weight picks up a factor ``p`` for every forced vertex not already
    known to be up.
    """
    if not particle.alive:
        raise InvalidStateError("cannot advance a dead particle")
    if particle.level >= particle.R:
        raise InvalidStateError("particle is already at the final level")
    forced = frozenset(forced_up)
    if forced & particle.known_down:
        raise ValueError("forced vertices are already known to be down")
    if rng is None:
        rng = np.random.default_rng()
    t = tables_for(dm)
    st = particle.state(g.n)
    new_forced = forced - particle.known_up
    if new_forced:
        st[list(new_forced)] = K.UP
    r = particle.level + 1
    rho = particle.R - r
    lower = np.zeros(g.n, dtype=np.bool_)
    K.scan_level(st, t.fwd, t.fwd_dist, rho, float(p), rng, lower)
    possible = K.up_mask(lower, t.fwd, t.fwd_dist, rho)
    assert not np.any((st == K.UP) & ~possible), "known-up vertex outside up-set"
    weight = particle.weight * float(p) ** len(new_forced)
    return _from_state(st, r, particle.R, weight, lower)


def is_feasible(g: Graph, particle: Particle) -> bool:
    """Whether some connected set lies between known-up and the possible set."""
    return bool(K.is_feasible(g.indptr, g.indices, particle.state(g.n)))


def required_cut_set(g: Graph, particle: Particle, mode: Literal["all", "separating"] = "all") -> frozenset[int]:
    if mode not in ("all", "separating"):
        raise ValueError(f"unknown mode {mode!r}")
    if not particle.alive:
        raise InvalidStateError("dead particle has no required vertices")
    mask, ok = K.required_cuts(g.indptr, g.indices, particle.state(g.n), mode == "separating")
    if not ok:
        raise InvalidStateError("known-up vertices are split across components of the possible set")
    return frozenset(np.flatnonzero(mask).tolist())

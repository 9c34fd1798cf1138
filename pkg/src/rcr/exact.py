"""Exact reliability: subset enumeration and a transfer-matrix counter for grids.

Both routes produce a :class:`CountVector` ``c`` where ``c[i]`` is the number
of ``i``-vertex subsets inducing a connected subgraph (``c[0] = 0``: the empty
set is not connected). The reliability is then the polynomial
``sum_i c[i] p^i (1-p)^(n-i)``, evaluated here in exact rational arithmetic.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
from numba import njit

from .errors import UndefinedResultError
from .graph import Graph

BRUTE_FORCE_LIMIT = 26
TM_WIDTH_LIMIT = 12


@dataclass(frozen=True)
class CountVector:
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.counts) - 1

    def __getitem__(self, i: int) -> int:
        return self.counts[i]

    def __len__(self) -> int:
        return len(self.counts)

    def to_text(self) -> str:
        lines = [str(self.n)]
        lines += [f"{i} {c}" for i, c in enumerate(self.counts)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> CountVector:
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 1:
            raise ValueError("counts file must start with a line holding n")
        n = int(rows[0][0])
        if len(rows) != n + 2:
            raise ValueError(f"expected {n + 1} count lines, found {len(rows) - 1}")
        counts = [0] * (n + 1)
        for k, row in enumerate(rows[1:]):
            if len(row) != 2 or int(row[0]) != k:
                raise ValueError(f"malformed counts line {k + 2}: {' '.join(row)}")
            counts[k] = int(row[1])
        return cls(tuple(counts))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> CountVector:
        return cls.from_text(Path(path).read_text())


# ---------------------------------------------------------------- brute force


@njit(cache=True)
def _brute_counts(nbr, n):
    counts = np.zeros(n + 1, np.int64)
    for mask in range(1, 1 << n):
        comp = mask & -mask
        frontier = comp
        while frontier:
            grow = 0
            f = frontier
            while f:
                b = f & -f
                grow |= nbr[int(math.log2(b))]
                f ^= b
            frontier = grow & mask & ~comp
            comp |= frontier
        if comp == mask:
            size = 0
            m = mask
            while m:
                m &= m - 1
                size += 1
            counts[size] += 1
    return counts


def brute_force_counts(g: Graph, limit: int = BRUTE_FORCE_LIMIT) -> CountVector:
    """Enumerate all ``2^n`` vertex subsets."""
    if g.n > limit:
        raise ValueError(f"brute force limited to {limit} vertices, graph has {g.n}")
    if g.n > 62:
        raise ValueError("brute force supports at most 62 vertices")
    nbr = np.zeros(g.n, dtype=np.int64)
    for v, ws in enumerate(g.adjacency):
        for w in ws:
            nbr[v] |= 1 << w
    counts = _brute_counts(nbr, g.n)
    return CountVector(tuple(int(c) for c in counts))


# ---------------------------------------------------------------- transfer matrix

PRE = "pre"
ACTIVE = "active"
FINISHED = "finished"


@dataclass(frozen=True)
class TMState:
    """Interface state between two slices of the grid.

    ``labels[i]`` is 0 for an empty cell, otherwise the class of the cell,
    where cells share a class when joined by a path to the left. Labels are
    numbered by first appearance.
    """

    labels: tuple[int, ...]
    phase: str = ACTIVE

    @property
    def occupancy(self) -> int:
        return sum(1 << i for i, lab in enumerate(self.labels) if lab)

    @property
    def classes(self) -> int:
        return len({lab for lab in self.labels if lab})


def _normalize(labels: Sequence[int]) -> tuple[int, ...]:
    remap: dict[int, int] = {}
    out = []
    for lab in labels:
        if lab == 0:
            out.append(0)
        else:
            if lab not in remap:
                remap[lab] = len(remap) + 1
            out.append(remap[lab])
    return tuple(out)


def _runs(occupancy: Sequence[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for i, bit in enumerate(occupancy):
        if bit:
            if i > 0 and occupancy[i - 1]:
                runs[-1].append(i)
            else:
                runs.append([i])
    return runs


def _set_partitions(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]


def _non_crossing(blocks: list[list[int]]) -> bool:
    owner = {x: b for b, blk in enumerate(blocks) for x in blk}
    for a, b, c, d in combinations(sorted(owner), 4):
        if owner[a] == owner[c] and owner[b] == owner[d] and owner[a] != owner[b]:
            return False
    return True


def tm_state_space(width: int) -> list[TMState]:
    """All interface states for slices of ``width`` cells, including the two empty phases."""
    if not 1 <= width <= TM_WIDTH_LIMIT:
        raise ValueError(f"width must be in [1, {TM_WIDTH_LIMIT}]")
    empty = (0,) * width
    states = [TMState(empty, PRE), TMState(empty, FINISHED)]
    for occ in range(1, 1 << width):
        bits = [(occ >> i) & 1 for i in range(width)]
        runs = _runs(bits)
        for blocks in _set_partitions(list(range(len(runs)))):
            if not _non_crossing(blocks):
                continue
            labels = [0] * width
            for b, blk in enumerate(blocks, start=1):
                for run_idx in blk:
                    for cell in runs[run_idx]:
                        labels[cell] = b
            states.append(TMState(_normalize(labels), ACTIVE))
    return states


_PRE_KEY = ("pre",)
_FIN_KEY = ("fin",)


@lru_cache(maxsize=None)
def _cell_step(key: tuple, i: int) -> tuple[tuple | None, tuple | None]:
    """Successor keys after deciding cell ``i`` of the current slice (empty, occupied)."""
    if key == _FIN_KEY:
        return _FIN_KEY, None
    labels = list(key)
    left = labels[i]
    up = labels[i - 1] if i > 0 else 0

    empty = labels.copy()
    empty[i] = 0
    if left and left not in empty:
        # the class of the departing cell has no frontier cell left: sealed
        nxt_empty = _FIN_KEY if not any(empty) else None
    else:
        nxt_empty = _normalize(empty)

    occ = labels.copy()
    if left and up and left != up:
        occ = [left if lab == up else lab for lab in occ]
        occ[i] = left
    elif left or up:
        occ[i] = left or up
    else:
        occ[i] = max(occ) + 1
    return nxt_empty, _normalize(occ)


def _first_cell(width: int, i: int) -> tuple:
    labels = [0] * width
    labels[i] = 1
    return tuple(labels)


def _tm_run(width: int, height: int, boundaries: list | None = None) -> CountVector:
    n = width * height
    shift = n + 1
    mask = (1 << shift) - 1
    cur: dict[tuple, int] = {_PRE_KEY: 1}
    for _ in range(height):
        for i in range(width):
            nxt: dict[tuple, int] = {}
            for key, val in cur.items():
                if key == _PRE_KEY:
                    e, o = _PRE_KEY, _first_cell(width, i)
                else:
                    e, o = _cell_step(key, i)
                if e is not None:
                    nxt[e] = nxt.get(e, 0) + val
                if o is not None:
                    nxt[o] = nxt.get(o, 0) + (val << shift)
            cur = nxt
        if boundaries is not None:
            boundaries.append(set(cur))
    total = 0
    for key, val in cur.items():
        if key == _FIN_KEY or (key != _PRE_KEY and len(set(key) - {0}) == 1):
            total += val
    counts = tuple((total >> (shift * k)) & mask for k in range(n + 1))
    return CountVector(counts)


def key_to_state(key: tuple, width: int) -> TMState:
    if key == _PRE_KEY:
        return TMState((0,) * width, PRE)
    if key == _FIN_KEY:
        return TMState((0,) * width, FINISHED)
    return TMState(tuple(key), ACTIVE)


def tm_counts(width: int, height: int) -> CountVector:
    """Connected induced subgraph counts of the ``width x height`` grid.

    Slices hold ``width`` cells and are swept ``height`` times. Each slice is
    added one cell at a time, which factors the slice-to-slice transfer matrix
    into ``width`` sparse single-cell steps. Size-tracking polynomials are
    packed into one Python integer per state (coefficient ``i`` in bits
    ``[i*(n+1), (i+1)*(n+1))``) so that adding and shifting polynomials are
    single big-integer operations.
    """
    if not 1 <= width <= TM_WIDTH_LIMIT:
        raise ValueError(f"width must be in [1, {TM_WIDTH_LIMIT}]")
    if height < 1:
        raise ValueError("height must be positive")
    return _tm_run(width, height)


# ---------------------------------------------------------------- exact evaluation


def as_fraction(p) -> Fraction:
    """Exact rational from a Fraction, int, decimal string or float (via its repr)."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(repr(p))
    return Fraction(p)


def _poly_sums(counts: Sequence[int], p: Fraction) -> tuple[int, int, int]:
    """Integer numerators of sum c_i p^i q^(n-i) and sum i c_i p^i q^(n-i) over b^n."""
    a, b = p.numerator, p.denominator
    n = len(counts) - 1
    q = b - a
    s0 = s1 = 0
    for i, c in enumerate(counts):
        if c:
            term = c * a**i * q ** (n - i)
            s0 += term
            s1 += i * term
    return s0, s1, b**n


def rcr_from_counts(c: CountVector | Sequence[int], p) -> Fraction:
    counts = c.counts if isinstance(c, CountVector) else tuple(c)
    p = as_fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    s0, _, den = _poly_sums(counts, p)
    return Fraction(s0, den)


def conditional_mean_size(c: CountVector | Sequence[int], p) -> Fraction:
    """E[|X| given X connected], exactly."""
    counts = c.counts if isinstance(c, CountVector) else tuple(c)
    p = as_fraction(p)
    s0, s1, _ = _poly_sums(counts, p)
    if s0 == 0:
        raise UndefinedResultError("reliability is zero at this p")
    return Fraction(s1, s0)


def to_decimal(x: Fraction, digits: int = 20) -> str:
    """Decimal rendering, exact when the expansion terminates within ``digits`` places."""
    sign = "-" if x < 0 else ""
    x = abs(x)
    scaled = x * 10**digits
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    whole, frac = divmod(q, 10**digits)
    frac_str = str(frac).rjust(digits, "0").rstrip("0")
    return f"{sign}{whole}.{frac_str}" if frac_str else f"{sign}{whole}"


@dataclass(frozen=True)
class PStarResult:
    value: float
    sign_changes: int
    boundary: bool = False
    bracket: tuple[float, float] = (0.0, 1.0)


def _g_sign(counts: Sequence[int], n: int, p: Fraction) -> int:
    s0, s1, _ = _poly_sums(counts, p)
    # sign of s1 / (n s0) - a / b, with s0 > 0 for 0 < p
    val = s1 * p.denominator - p.numerator * n * s0
    return (val > 0) - (val < 0)


def p_star(c: CountVector | Sequence[int], n: int | None = None, tol: float = 1e-6, grid: int = 200) -> PStarResult:
    """Fixed point of p = E[|X|/n given connected] by exact-arithmetic bisection."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    counts = c.counts if isinstance(c, CountVector) else tuple(c)
    n = len(counts) - 1 if n is None else n
    points = [Fraction(j, grid) for j in range(1, grid)]
    signs = [_g_sign(counts, n, pt) for pt in points]
    brackets = []
    for j in range(len(points) - 1):
        if signs[j] == 0:
            brackets.append((points[j], points[j]))
        elif signs[j] * signs[j + 1] < 0:
            brackets.append((points[j], points[j + 1]))
    if not brackets:
        last = counts[n] if len(counts) > n else 0
        if last > 0 and _g_sign(counts, n, Fraction(1)) == 0:
            return PStarResult(1.0, 0, True, (float(points[-1]), 1.0))
        raise UndefinedResultError(f"no sign change of the fixed-point equation on a {grid}-point grid")
    lo, hi = min(brackets, key=lambda b: abs((b[0] + b[1]) / 2 - Fraction(1, 2)))
    if lo != hi:
        s_lo = _g_sign(counts, n, lo)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            s_mid = _g_sign(counts, n, mid)
            if s_mid == 0:
                lo = hi = mid
                break
            if s_mid == s_lo:
                lo = mid
            else:
                hi = mid
    return PStarResult(float((lo + hi) / 2), len(brackets), False, (float(lo), float(hi)))


def exact_counts(g: Graph, method: str = "auto") -> CountVector:
    """Counts via the transfer matrix for grids, else by enumeration."""
    grid_dims = _grid_dims(g)
    if method == "tm" or (method == "auto" and grid_dims is not None):
        if grid_dims is None:
            raise ValueError("transfer-matrix counting needs a grid graph")
        w, h = grid_dims
        return tm_counts(min(w, h), max(w, h))
    if method in ("brute", "auto"):
        return brute_force_counts(g)
    raise ValueError(f"unknown exact method {method!r}")


def _grid_dims(g: Graph) -> tuple[int, int] | None:
    name = g.name
    if name.startswith("grid:"):
        w, h = name[5:].split("x")
        return int(w), int(h)
    return None

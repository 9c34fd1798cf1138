"""Compiled primitives shared by the chain and the estimators.

Vertex sets are boolean masks of length ``n``; particle states are int8 arrays
holding ``UNKNOWN``, ``UP`` or ``DOWN`` per vertex. Graphs are passed as CSR
arrays ``(indptr, indices)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

UNKNOWN = np.int8(0)
UP = np.int8(1)
DOWN = np.int8(2)

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def reach(indptr, indices, allowed, start):
    n = allowed.shape[0]
    seen = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    seen[start] = True
    stack[0] = start
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            if allowed[w] and not seen[w]:
                seen[w] = True
                stack[top] = w
                top += 1
    return seen


@njit(**_JIT)
def is_connected(indptr, indices, members):
    """Connectivity of the induced subgraph; the empty set is not connected."""
    n = members.shape[0]
    first = -1
    count = 0
    for v in range(n):
        if members[v]:
            count += 1
            if first < 0:
                first = v
    if count == 0:
        return False
    seen = reach(indptr, indices, members, first)
    for v in range(n):
        if members[v] and not seen[v]:
            return False
    return True


@njit(**_JIT)
def is_feasible(indptr, indices, state):
    n = state.shape[0]
    root = -1
    for v in range(n):
        if state[v] == UP:
            root = v
            break
    if root < 0:
        return False
    allowed = state != DOWN
    seen = reach(indptr, indices, allowed, root)
    for v in range(n):
        if state[v] == UP and not seen[v]:
            return False
    return True


@njit(**_JIT)
def lowpoint(indptr, indices, allowed, root, marked):
    """Iterative Hopcroft-Tarjan search over the component of ``root``.

    Returns ``(cut, sep, block_vertices, block_ptr, component)`` where ``cut``
    flags articulation points, ``sep`` flags articulation points whose removal
    leaves marked vertices in at least two components, and blocks are stored
    flat with block ``j`` at ``block_vertices[block_ptr[j]:block_ptr[j+1]]``.
    """
    n = allowed.shape[0]
    disc = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    parent = np.full(n, -1, np.int64)
    nxt = np.zeros(n, np.int64)
    sub = np.zeros(n, np.int64)
    nchild = np.zeros(n, np.int64)
    sep_children = np.zeros(n, np.int64)
    sep_marked = np.zeros(n, np.int64)
    cut = np.zeros(n, np.bool_)
    sep = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    vstack = np.empty(n, np.int64)
    block_vertices = np.empty(2 * n + 1, np.int64)
    block_ptr = np.zeros(n + 1, np.int64)
    nblocks = 0
    nbv = 0

    disc[root] = 0
    nxt[root] = indptr[root]
    sub[root] = 1 if marked[root] else 0
    t = 1
    stack[0] = root
    top = 1
    vstack[0] = root
    vtop = 1
    while top > 0:
        v = stack[top - 1]
        if nxt[v] < indptr[v + 1]:
            w = indices[nxt[v]]
            nxt[v] += 1
            if not allowed[w]:
                continue
            if disc[w] < 0:
                parent[w] = v
                disc[w] = t
                low[w] = t
                t += 1
                nxt[w] = indptr[w]
                sub[w] = 1 if marked[w] else 0
                stack[top] = w
                top += 1
                vstack[vtop] = w
                vtop += 1
            elif w != parent[v] and disc[w] < low[v]:
                low[v] = disc[w]
        else:
            top -= 1
            pv = parent[v]
            if pv < 0:
                continue
            if low[v] < low[pv]:
                low[pv] = low[v]
            sub[pv] += sub[v]
            nchild[pv] += 1
            if low[v] >= disc[pv]:
                if pv != root:
                    cut[pv] = True
                if sub[v] > 0:
                    sep_children[pv] += 1
                    sep_marked[pv] += sub[v]
                while True:
                    vtop -= 1
                    u = vstack[vtop]
                    block_vertices[nbv] = u
                    nbv += 1
                    if u == v:
                        break
                block_vertices[nbv] = pv
                nbv += 1
                nblocks += 1
                block_ptr[nblocks] = nbv

    cut[root] = nchild[root] >= 2
    total = sub[root]
    for v in range(n):
        if disc[v] < 0 or not cut[v]:
            continue
        parts = sep_children[v]
        if v != root:
            own = 1 if marked[v] else 0
            if total - own - sep_marked[v] > 0:
                parts += 1
        sep[v] = parts >= 2
    component = disc >= 0
    return cut, sep, block_vertices[:nbv], block_ptr[: nblocks + 1], component


@njit(**_JIT)
def lower_bound(members, fwd, fwd_dist, rho):
    """GenerateSubset as a single forward scan over ``members``."""
    n = members.shape[0]
    covered = np.zeros(n, np.bool_)
    lower = np.zeros(n, np.bool_)
    for v in range(n):
        if covered[v] or not members[v]:
            continue
        lower[v] = True
        k = 0
        while k < n - v - 1 and fwd_dist[v, k] <= rho:
            covered[fwd[v, k]] = True
            k += 1
    return lower


@njit(**_JIT)
def up_mask(lower, fwd, fwd_dist, rho):
    n = lower.shape[0]
    out = np.zeros(n, np.bool_)
    for v in range(n):
        if not lower[v]:
            continue
        out[v] = True
        k = 0
        while k < n - v - 1 and fwd_dist[v, k] <= rho:
            out[fwd[v, k]] = True
            k += 1
    return out


@njit(**_JIT)
def scan_level(state, fwd, fwd_dist, rho, p, rng, lower):
    """Reveal vertex states lazily while building the radius-``rho`` lower bound.

    Unknown vertices examined by the scan receive a Bernoulli(p) draw. Every
    vertex examined and found down ends up outside the up-set of the result,
    so ``state`` afterwards encodes exactly the definitely-up / not-possible
    split of the next level. ``lower`` is filled with the selected vertices.
    """
    n = state.shape[0]
    covered = np.zeros(n, np.bool_)
    nl = 0
    for v in range(n):
        if covered[v]:
            continue
        s = state[v]
        if s == UNKNOWN:
            s = UP if rng.random() < p else DOWN
            state[v] = s
        if s == UP:
            lower[v] = True
            nl += 1
            k = 0
            while k < n - v - 1 and fwd_dist[v, k] <= rho:
                covered[fwd[v, k]] = True
                k += 1
    return nl


@njit(**_JIT)
def required_cuts(indptr, indices, state, separating):
    """Cut vertices of the possible set that every connected completion needs.

    With ``separating`` false all articulation points of the possible set's
    component containing the known-up vertices are returned; otherwise only
    those splitting the known-up vertices apart. Returns ``(mask, ok)`` where
    ``ok`` is false if the known-up vertices are not in one component.
    """
    n = state.shape[0]
    root = -1
    for v in range(n):
        if state[v] == UP:
            root = v
            break
    if root < 0:
        return np.zeros(n, np.bool_), False
    allowed = state != DOWN
    marked = state == UP
    cut, sep, _, _, component = lowpoint(indptr, indices, allowed, root, marked)
    for v in range(n):
        if marked[v] and not component[v]:
            return cut, False
    if separating:
        return sep, True
    return cut, True

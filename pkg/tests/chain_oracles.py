"""Brute-force reference implementations shared by the chain tests."""

from collections import Counter
from itertools import combinations

from rcr.graph import connected_components


def literal_generate(dm, x, R, r):
    """Direct transcription of the scan: keep appending the smallest far-enough vertex."""
    x = sorted(x)
    if not x:
        return ()
    out = [x[0]]
    while True:
        cands = [s for s in x if s > out[-1] and min(int(dm[s, o]) for o in out) > R - r]
        if not cands:
            return tuple(out)
        out.append(cands[0])


def literal_up(dm, lower, R, r):
    n = dm.shape[0]
    return frozenset(w for x in lower for w in range(x, n) if dm[x, w] <= R - r)


def all_subsets(n):
    for k in range(n + 1):
        for c in combinations(range(n), k):
            yield frozenset(c)


def particle_value(dm, x, R, r):
    """(D_r, P_r) induced by a full configuration ``x``."""
    n = dm.shape[0]
    d, p = frozenset(), frozenset(range(n))
    for s in range(r + 1):
        lower = literal_generate(dm, x, R, s)
        d |= frozenset(lower)
        p &= literal_up(dm, lower, R, s)
    return d, p


def weight(x, n, p):
    return p ** len(x) * (1 - p) ** (n - len(x))


def transition_law(dm, R, r, p):
    """Exact law of (value at r) -> (value at r+1) under i.i.d. Bernoulli(p) vertices."""
    n = dm.shape[0]
    joint: dict = {}
    for x in all_subsets(n):
        a = particle_value(dm, x, R, r)
        b = particle_value(dm, x, R, r + 1)
        joint.setdefault(a, Counter())[b] += weight(x, n, p)
    law = {}
    for a, nxt in joint.items():
        tot = sum(nxt.values())
        law[a] = {b: w / tot for b, w in nxt.items()}
        law[a]["_mass"] = tot
    return law


def root_component(g, d, possible):
    comps = [c for c in connected_components(g, possible) if c & d]
    assert len(comps) == 1
    return comps[0]


def feasible(g, d, possible):
    if not d:
        return False
    return any(d <= c for c in connected_components(g, possible))


# ---------------------------------------------------------------- checks reused by the acceptance suite

import math  # noqa: E402
from fractions import Fraction  # noqa: E402

import numpy as np  # noqa: E402

from rcr.chain import (  # noqa: E402
    Particle,
    advance_particle,
    generate_subset,
    init_particle,
    possible_set,
    required_cut_set,
    subset_probability,
    up_set,
)
from rcr.graph import all_pairs_distances, biconnected_components, build_grid, is_connected_induced  # noqa: E402


def chain_property_violations(samples, R, seed, width=5):
    """Count violations of sandwich, minimum, recovery, idempotence and subsequence closure."""
    g = build_grid(width, width)
    dm = all_pairs_distances(g)
    rng = np.random.default_rng(seed)
    bad = Counter()
    for _ in range(samples):
        q = rng.uniform(0.05, 0.95)
        x = frozenset(np.flatnonzero(rng.random(g.n) < q).tolist())
        if not x:
            continue
        lowers = [generate_subset(g, dm, x, R, r) for r in range(R + 1)]
        d = frozenset()
        for r, low in enumerate(lowers):
            d |= frozenset(low)
            ls = frozenset(low)
            if not (ls <= x <= up_set(g, dm, low, R, r)):
                bad["sandwich"] += 1
            if low[0] != min(x):
                bad["minimum"] += 1
            if generate_subset(g, dm, low, R, r) != low:
                bad["idempotence"] += 1
            keep = [v for v in low if rng.random() < 0.5]
            if keep and generate_subset(g, dm, keep, R, r) != tuple(keep):
                bad["subsequence"] += 1
            for s in range(r + 1):
                if generate_subset(g, dm, d, R, s) != lowers[s]:
                    bad["recovery"] += 1
    return bad


def trajectory_violations(trajectories, R, p, seed, width=5):
    """Lazy particles must agree with the recomputed definite/possible sets at every level."""
    g = build_grid(width, width)
    dm = all_pairs_distances(g)
    rng = np.random.default_rng(seed)
    bad = Counter()
    everything = frozenset(range(g.n))
    for _ in range(trajectories):
        part = init_particle(g, dm, R, p, rng)
        recorded = [part.lower]
        while part.alive:
            if possible_set(g, dm, part.known_up, R, part.level) != everything - part.known_down:
                bad["possible"] += 1
            for s, low in enumerate(recorded):
                if generate_subset(g, dm, part.known_up, R, s) != low:
                    bad["recovery"] += 1
            if part.level == R:
                break
            part = advance_particle(g, dm, part, p, rng=rng)
            recorded.append(part.lower)
    return bad


def subset_probability_mismatches(p=Fraction(1, 3), R=2):
    g = build_grid(3, 3)
    dm = all_pairs_distances(g)
    mismatches = checked = 0
    for r in range(R + 1):
        mass = Counter()
        for x in all_subsets(g.n):
            mass[literal_generate(dm, x, R, r)] += p ** len(x) * (1 - p) ** (g.n - len(x))
        for low, expected in mass.items():
            checked += 1
            if subset_probability(g, dm, low, R, r, p) != expected:
                mismatches += 1
    return checked, mismatches


def transition_law_failures(samples, p=0.5, R=2, r=0, seed=0, states=None, z=4.0):
    """Compare empirical next-value frequencies with the enumerated law; returns (checked, failures)."""
    g = build_grid(3, 3)
    dm = all_pairs_distances(g)
    law = transition_law(dm, R, r, p)
    everything = frozenset(range(g.n))
    starts = sorted((a for a in law if a[0] and feasible(g, *a)), key=lambda a: -law[a]["_mass"])
    if states is not None:
        starts = starts[:states]
    rng = np.random.default_rng(seed)
    checked = failures = 0
    for d, poss in starts:
        part = Particle(d, everything - poss, r, R)
        seen = Counter()
        for _ in range(samples):
            nxt = advance_particle(g, dm, part, p, rng=rng)
            seen[(nxt.known_up, everything - nxt.known_down)] += 1
        expected = {b: q for b, q in law[(d, poss)].items() if b != "_mass"}
        for b in set(seen) | set(expected):
            q = expected.get(b, 0.0)
            checked += 1
            sd = math.sqrt(samples * q * (1 - q))
            if q == 0.0 or abs(seen[b] - samples * q) > z * sd + 1e-9:
                failures += 1
    return checked, failures


def conditioning_violations(R=2):
    """Exhaustive check at level R-1: required cuts lie in every connected completion,
    and connectivity decomposes over the blocks of the possible set."""
    g = build_grid(3, 3)
    dm = all_pairs_distances(g)
    everything = frozenset(range(g.n))
    values = {particle_value(dm, x, R, R - 1) for x in all_subsets(g.n)}
    bad = Counter()
    checked = 0
    for d, poss in values:
        if not feasible(g, d, poss):
            continue
        checked += 1
        part = Particle(d, everything - poss, R - 1, R)
        cuts = required_cut_set(g, part, "all")
        comp = root_component(g, d, poss)
        blocks = biconnected_components(g, comp) if len(comp) > 1 else [comp]
        free = sorted(comp - d)
        for k in range(1 << len(free)):
            x = d | {free[i] for i in range(len(free)) if k >> i & 1}
            conn = is_connected_induced(g, x)
            if conn and not cuts <= x:
                bad["prop5"] += 1
            decomposed = cuts <= x and all(is_connected_induced(g, x & b) for b in blocks)
            if conn != decomposed:
                bad["prop6"] += 1
    return checked, bad

from fractions import Fraction
from itertools import combinations
from math import comb

import pytest

from rcr.errors import UndefinedResultError
from rcr.exact import (
    CountVector,
    _tm_run,
    as_fraction,
    brute_force_counts,
    conditional_mean_size,
    exact_counts,
    key_to_state,
    p_star,
    rcr_from_counts,
    tm_counts,
    tm_state_space,
    to_decimal,
)
from rcr.graph import Graph, build_grid, cut_vertices, is_connected_induced

SMALL_GRIDS = [(1, k) for k in range(1, 7)] + [(2, 2), (2, 3), (2, 4), (2, 5), (3, 3), (3, 4), (4, 4)]


def catalan(r):
    return comb(2 * r, r) // (r + 1)


def count_states_directly(width):
    """Occupancy patterns times non-crossing run partitions, counted without the library."""
    total = 2
    for occ in range(1, 1 << width):
        bits = [(occ >> i) & 1 for i in range(width)]
        runs = sum(1 for i in range(width) if bits[i] and (i == 0 or not bits[i - 1]))
        total += sum(1 for part in partitions(list(range(runs))) if non_crossing(part))
    return total


def partitions(items):
    if not items:
        yield []
        return
    for part in partitions(items[1:]):
        yield [[items[0]]] + part
        for k in range(len(part)):
            yield part[:k] + [[items[0]] + part[k]] + part[k + 1 :]


def non_crossing(part):
    where = {x: j for j, blk in enumerate(part) for x in blk}
    for a, b, c, d in combinations(sorted(where), 4):
        if where[a] == where[c] != where[b] == where[d]:
            return False
    return True


def test_brute_force_examples():
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert brute_force_counts(p3).counts == (0, 3, 2, 1)
    assert brute_force_counts(build_grid(2, 2)).counts == (0, 4, 4, 4, 1)
    assert brute_force_counts(build_grid(1, 1)).counts == (0, 1)


def test_brute_force_guard():
    with pytest.raises(ValueError, match="26"):
        brute_force_counts(build_grid(3, 9))


def test_state_space_sizes():
    assert len(tm_state_space(5)) == 52
    assert len(tm_state_space(4)) == 22
    assert len(tm_state_space(1)) == 3
    with pytest.raises(ValueError):
        tm_state_space(13)


@pytest.mark.parametrize("width", range(1, 7))
def test_state_space_formula(width):
    formula = 2 + sum(comb(width + 1, 2 * r) * catalan(r) for r in range(1, width + 1))
    assert len(tm_state_space(width)) == formula == count_states_directly(width)


def test_state_space_members_are_valid():
    for st in tm_state_space(6):
        if st.phase != "active":
            assert st.occupancy == 0
            continue
        for i in range(5):
            if st.labels[i] and st.labels[i + 1]:
                assert st.labels[i] == st.labels[i + 1]


@pytest.mark.parametrize("width,height", [(3, 4), (4, 3), (5, 3)])
def test_reachable_boundaries_within_state_space(width, height):
    space = set(tm_state_space(width))
    seen = []
    _tm_run(width, height, boundaries=seen)
    for keys in seen:
        for key in keys:
            assert key_to_state(key, width) in space


@pytest.mark.parametrize("w,h", SMALL_GRIDS)
def test_transfer_matrix_matches_enumeration(w, h):
    assert tm_counts(w, h) == brute_force_counts(build_grid(w, h))


def test_path_counts():
    for k in range(1, 7):
        c = tm_counts(1, k).counts
        assert c[1:] == tuple(k - i + 1 for i in range(1, k + 1))


@pytest.mark.parametrize("w,h", [(2, 3), (3, 5), (4, 6), (2, 7)])
def test_symmetry(w, h):
    assert tm_counts(w, h) == tm_counts(h, w)


@pytest.mark.parametrize("w,h", [(3, 3), (3, 4), (4, 4), (5, 5)])
def test_count_bounds(w, h):
    g = build_grid(w, h)
    c = tm_counts(w, h).counts
    n = g.n
    assert c[0] == 0 and c[1] == n and c[n] == 1
    assert all(c[i] <= comb(n, i) for i in range(n + 1))
    assert sum(c) <= 2**n
    assert c[n - 1] == n - len(cut_vertices(g, range(n)))
    assert rcr_from_counts(c, Fraction(1, 2)) == Fraction(sum(c), 2**n)


def test_exact_values():
    assert rcr_from_counts([0, 4, 4, 4, 1], Fraction(1, 2)) == Fraction(13, 16)
    assert rcr_from_counts(tm_counts(1, 3), "1/2") == Fraction(3, 4)
    assert rcr_from_counts([0, 4, 4, 4, 1], 1) == 1
    assert rcr_from_counts([0, 4, 4, 4, 1], 0) == 0
    assert as_fraction("0.3") == Fraction(3, 10)
    assert as_fraction(0.3) == Fraction(3, 10)


def test_rcr_polynomial_matches_direct_sum():
    g = build_grid(3, 3)
    c = brute_force_counts(g)
    p = Fraction(2, 7)
    direct = sum(
        p ** len(s) * (1 - p) ** (9 - len(s))
        for k in range(1, 10)
        for s in combinations(range(9), k)
        if is_connected_induced(g, s)
    )
    assert rcr_from_counts(c, p) == direct


def test_conditional_mean_size():
    assert conditional_mean_size([0, 2, 1], Fraction(1, 2)) == Fraction(4, 3)
    assert conditional_mean_size(tm_counts(3, 3), Fraction(999999, 1000000)) == pytest.approx(9, abs=1e-3)
    with pytest.raises(UndefinedResultError):
        conditional_mean_size([0, 2, 1], 0)
    c = tm_counts(4, 4)
    for k in range(1, 100):
        assert 0 <= conditional_mean_size(c, Fraction(k, 100)) / 16 <= 1


def test_to_decimal():
    assert to_decimal(Fraction(13, 16)) == "0.8125"
    assert to_decimal(Fraction(1, 3), 5) == "0.33333"
    assert to_decimal(Fraction(2, 3), 3) == "0.667"
    assert to_decimal(Fraction(1)) == "1"


def test_p_star_k2_boundary_root():
    res = p_star([0, 2, 1])
    assert res.value == 1.0 and res.boundary


def test_p_star_errors():
    with pytest.raises(ValueError):
        p_star([0, 2, 1], tol=0)
    assert p_star([0, 1]).boundary
    # root at 1/3 is invisible to a scan that only probes p = 1/2
    with pytest.raises(UndefinedResultError):
        p_star([0, 3, 0, 0], grid=2)


def test_p_star_is_a_root():
    c = tm_counts(5, 5)
    res = p_star(c, tol=1e-9)
    lo, hi = (Fraction(x) for x in res.bracket)
    g_lo = conditional_mean_size(c, lo) / 25 - lo
    g_hi = conditional_mean_size(c, hi) / 25 - hi
    assert g_lo * g_hi <= 0 and hi - lo <= 1e-9


def test_counts_file_roundtrip(tmp_path):
    c = tm_counts(6, 6)
    path = tmp_path / "g.counts"
    c.save(path)
    text = path.read_text().splitlines()
    assert text[0] == "36" and text[1] == "0 0" and len(text) == 38
    assert CountVector.load(path) == c
    with pytest.raises(ValueError):
        CountVector.from_text("2\n0 0\n1 2\n")


def test_exact_counts_dispatch():
    assert exact_counts(build_grid(3, 2)) == exact_counts(build_grid(3, 2), "brute")
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        exact_counts(p3, "tm")
    assert exact_counts(p3).counts == (0, 3, 2, 1)

import numpy as np
import pytest

from escape_lab import dynsys as ds
from escape_lab import holes as hl
from escape_lab import survivor as sv
from escape_lab import symbolic as sy


BAKER = ds.BakerMap(2)
CAT = ds.cat_map()


def test_empty_hole_everything_retained():
    ap = sv.compute(CAT, hl.EMPTY_HOLE, k=16, n=10)
    assert ap.n_retained == 16 * 16
    assert sv.boundary_gap(ap, hl.EMPTY_HOLE) == float("inf")


def test_full_hole_empty_at_zero():
    h = hl.box_hole(-0.1, 1.1, -0.1, 1.1)
    ap = sv.compute(CAT, h, k=8, n=5)
    assert ap.n_retained == 0
    assert sv.boundary_gap(ap, h) == float("inf")


def test_monotone_outer_approximation():
    h = hl.box_hole(0.1, 0.45, 0.2, 0.5)
    ap = sv.compute(CAT, h, k=32, n=20)
    assert all(a >= b for a, b in zip(ap.counts_history[:-1], ap.counts_history[1:]))


def test_boundary_gap_nonincreasing_in_n():
    h = hl.box_hole(0.1, 0.45, 0.2, 0.5)
    gaps = []
    for n in (0, 2, 6, 12):
        ap = sv.compute(CAT, h, k=48, n=n)
        gaps.append(sv.boundary_gap(ap, h))
    assert all(g1 >= g2 - 1e-12 for g1, g2 in zip(gaps[:-1], gaps[1:]))


def test_baker_half_strip_survivors_concentrate():
    h = hl.box_hole(0.0, 0.5, 0.0, 1.0)
    ap = sv.compute(BAKER, h, k=8, n=6)
    # all retained x-prefixes consist of 1-bits only, i.e. x -> 1-
    boxes = ap.retained_boxes()
    assert (boxes[:, 0] >= 1 - 1 / 8 - 1e-12).all()
    density = ap.n_retained / 64
    assert density <= 4 / 64


def forced_exclusion_words(hole_states, depth, n):
    """Independent oracle: a (past, future) word of length 2*depth is
    excluded by time |m| <= n iff every completion of the determined
    window bits puts the time-m state in the hole."""
    holes = set(hole_states)
    words = []
    for w in range(4 ** depth):
        bits = [(w >> (2 * depth - 1 - i)) & 1 for i in range(2 * depth)]
        excluded = False
        for mshift in range(-n, n + 1):
            lo = depth + mshift
            hi = lo + depth
            known = {i: bits[i] for i in range(max(lo, 0), min(hi, 2 * depth))}
            free = [i for i in range(lo, hi) if i not in known]
            all_in = True
            for comp in range(2 ** len(free)):
                word = 0
                for pos in range(lo, hi):
                    if pos in known:
                        bit = known[pos]
                    else:
                        bit = (comp >> free.index(pos)) & 1
                    word = (word << 1) | bit
                if word not in holes:
                    all_in = False
                    break
            if all_in:
                excluded = True
                break
        if not excluded:
            words.append(w)
    return set(words)


def test_cross_module_exact_match_with_symbolic():
    """Retained cells equal the forced-exclusion words of the subshift."""
    depth = 2
    k = 2 ** depth
    part = sy.seed_partition(BAKER)
    part = sy.refine(part, depth - 1)
    order = np.argsort([part.cell_box(i)[0] for i in range(k)])
    hole_states = [0]  # strip [0, 1/4)
    h = hl.markov_hole([int(order[s]) for s in hole_states], part)
    n = depth
    ap = sv.compute(BAKER, h, k=k, n=n)
    got = set()
    for idx in np.flatnonzero(ap.retained):
        ix, iy = divmod(int(idx), k)
        # y bits LSB-first give s_{-d}..s_{-1}; x bits MSB-first give s_0..s_{d-1}
        past = [(iy >> b) & 1 for b in range(depth)]
        fut = [(ix >> (depth - 1 - b)) & 1 for b in range(depth)]
        bits = past + fut
        w = 0
        for bit in bits:
            w = (w << 1) | bit
        got.add(w)
    expect = forced_exclusion_words(hole_states, depth, n)
    assert got == expect


def test_gap_positive_for_separated_hole():
    # hole [1/4, 3/4): the only surviving orbit is the fixed point at the
    # origin, distance 1/4 from the hole boundary
    part = sy.seed_partition(BAKER)
    part = sy.refine(part, 1)
    order = np.argsort([part.cell_box(i)[0] for i in range(4)])
    h = hl.markov_hole([int(order[1]), int(order[2])], part)
    ap = sv.compute(BAKER, h, k=16, n=10)
    g = sv.boundary_gap(ap, h)
    assert g >= 1 / 16 - 1e-12


def test_touch_for_fixed_point_boundary_hole():
    h = hl.regular_hole_through_fixed_point(CAT, "left", 0.25, 0.2, offset=0.0)
    ap = sv.compute(CAT, h, k=64, n=30)
    origin_cell = 0  # cell (0,0) contains the fixed point
    assert ap.retained[origin_cell]
    g = sv.boundary_gap(ap, h)
    assert g < 1 / 64


def test_classify_family_flags():
    def fn(t):
        return hl.eigen_box_hole(CAT, (0.55, 0.3), t / 2, 0.1)

    fam = hl.HoleFamily(fn, 0.05, 0.12, monotone="increasing", map=CAT)
    flags, gaps, frac = sv.classify_family(fam, fam.samples(6), k=48, n=20)
    assert len(flags) == 6
    assert all(f in ("GAP", "TOUCH", "UNDECIDED") for f in flags)


def test_open_set_stability_of_gap():
    """Perturbing a GAP hole by less than gap/4 keeps it GAP."""
    h = hl.box_hole(0.25, 0.75, 0.0, 1.0)
    ap = sv.compute(BAKER, h, k=16, n=8)
    gap = sv.boundary_gap(ap, h)
    assert gap > 1 / 16
    rng = np.random.default_rng(17)
    for _ in range(20):
        delta = (rng.random() - 0.5) * gap / 4
        h2 = hl.box_hole(0.25 + delta, 0.75 + delta, 0.0, 1.0)
        ap2 = sv.compute(BAKER, h2, k=16, n=8)
        assert sv.boundary_gap(ap2, h2) > gap / 2


def test_resolution_and_horizon_caps():
    with pytest.raises(ValueError):
        sv.compute(CAT, hl.EMPTY_HOLE, k=4096, n=5)
    with pytest.raises(ValueError):
        sv.compute(CAT, hl.EMPTY_HOLE, k=16, n=100)

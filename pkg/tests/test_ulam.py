import numpy as np
import pytest

from escape_lab import dynsys as ds
from escape_lab import holes as hl
from escape_lab import ulam


BAKER = ds.BakerMap(2)
CAT = ds.cat_map()
PHI = (1 + np.sqrt(5)) / 2


def test_row_sums_exact_cat():
    op = ulam.build(CAT, 32)
    err = np.abs(op.row_sums() - 1.0).max()
    assert err < 1e-10


def test_row_sums_exact_baker():
    op = ulam.build(BAKER, 16)
    err = np.abs(op.row_sums() - 1.0).max()
    assert err < 1e-10


def test_baker_aligned_two_targets():
    op = ulam.build(BAKER, 8)
    mat = op.entries.tocsr()
    for row in range(op.n_cells):
        cols = mat.indices[mat.indptr[row]:mat.indptr[row + 1]]
        vals = mat.data[mat.indptr[row]:mat.indptr[row + 1]]
        assert len(cols) == 2
        assert np.allclose(vals, 0.5)


def test_sampled_mode_close_to_exact():
    exact = ulam.build(CAT, 16)
    sampled = ulam.build(CAT, 16, mode="sampled", samples_per_box=32)
    diff = np.abs((exact.entries - sampled.entries).toarray()).max()
    assert diff < 2 / 32  # 2/sqrt(s) with s = 32*32 samples per box
    assert np.allclose(np.asarray(sampled.entries.sum(axis=1)).ravel(), 1.0)


def test_unmasked_leading_is_one():
    for op in (ulam.build(CAT, 24), ulam.build(BAKER, 8)):
        sr = ulam.leading(op)
        assert sr.r_lead == pytest.approx(1.0, abs=1e-10)
        # doubly stochastic: uniform qsd
        n_live = op.n_cells
        assert np.abs(sr.qsd - 1 / n_live).max() < 1e-8
        assert sr.residual <= 1e-10


def test_mask_rules():
    op = ulam.build(BAKER, 4)
    h = hl.box_hole(0.0, 0.5, 0.0, 1.0)
    masked = ulam.mask(op, h, cell_rule="interior")
    assert len(masked.hole_mask) == 8
    empty = ulam.mask(op, hl.EMPTY_HOLE)
    assert empty.hole_mask == frozenset()
    assert (empty.entries != op.entries).nnz == 0


def test_mask_monotone():
    op = ulam.build(CAT, 16)
    small = hl.box_hole(0.2, 0.4, 0.2, 0.4)
    big = hl.box_hole(0.15, 0.45, 0.15, 0.45)
    m_small = ulam.mask(op, small)
    m_big = ulam.mask(op, big)
    assert m_small.hole_mask <= m_big.hole_mask


def test_fully_masked_error():
    op = ulam.build(CAT, 8)
    h = hl.box_hole(-0.2, 1.2, -0.2, 1.2)
    with pytest.raises(ulam.FullyMaskedError):
        ulam.mask(op, h)


def test_golden_oracle_aligned_resolutions():
    """Masked baker operator reproduces the survivor-subshift eigenvalue."""
    h = hl.box_hole(0.0, 0.25, 0.0, 1.0)
    for k in (4, 8, 16):
        op = ulam.mask(ulam.build(BAKER, k), h, cell_rule="interior")
        sr = ulam.leading(op)
        assert sr.r_lead == pytest.approx(PHI / 2, abs=1e-10)
        rho = ulam.escape_rate(sr)
        assert rho == pytest.approx(np.log(PHI / 2), abs=1e-9)


def test_masking_monotone_spectral():
    op = ulam.build(CAT, 32)
    rs = []
    for w in (0.1, 0.2, 0.3):
        h = hl.box_hole(0.3, 0.3 + w, 0.3, 0.3 + w)
        sr = ulam.leading(ulam.mask(op, h))
        rs.append(sr.r_lead)
    assert rs[0] >= rs[1] >= rs[2]


def test_resolution_consistency_cat():
    h = hl.box_hole(0.21, 0.52, 0.33, 0.61)
    vals = []
    for k in (64, 128, 256):
        op = ulam.mask(ulam.build(CAT, k), h)
        vals.append(ulam.leading(op).r_lead)
    assert abs(vals[2] - vals[1]) <= abs(vals[1] - vals[0]) + 1e-4


def test_quasi_stationarity_residual():
    h = hl.box_hole(0.1, 0.35, 0.2, 0.55)
    op = ulam.mask(ulam.build(CAT, 48), h)
    sr = ulam.leading(op)
    lhs = sr.qsd @ op.entries
    assert np.abs(lhs - sr.r_lead * sr.qsd).sum() <= 1e-10
    assert sr.qsd.min() >= 0
    assert sr.qsd.sum() == pytest.approx(1.0, abs=1e-12)
    mask_idx = np.array(sorted(op.hole_mask))
    assert np.abs(sr.qsd[mask_idx]).max() == 0.0


def test_escape_rate_values():
    assert ulam.escape_rate(1.0) == 0.0
    # log(phi) - log(2) = -0.2119353...
    assert ulam.escape_rate(PHI / 2) == pytest.approx(np.log(PHI) - np.log(2), abs=1e-12)
    assert ulam.escape_rate(PHI / 2) == pytest.approx(-0.2119354, abs=1e-6)
    assert ulam.escape_rate(0.0) == float("-inf")


def test_resolution_gate():
    with pytest.raises(ulam.ResolutionCapError):
        ulam.build(CAT, 1)
    with pytest.raises(ulam.ResolutionCapError):
        ulam.build(CAT, 5000)


def test_cross_validation_mc_vs_ulam():
    from escape_lab import mc
    h = hl.box_hole(0.1, 0.4, 0.5, 0.8)
    op = ulam.mask(ulam.build(CAT, 96), h)
    rho_u = ulam.escape_rate(ulam.leading(op))
    _, est = mc.run_and_estimate(CAT, h, N=150_000, n_max=80, seed=21)
    assert abs(rho_u - est.rho_hat) <= max(0.02, 3 * est.stderr)

import numpy as np
import pytest

from escape_lab import dynsys as ds


CAT = ds.cat_map()
NEG = ds.negated_cat_map()
BAKER = ds.BakerMap(2)


def test_cat_fixed_point_at_origin():
    assert ds.apply(CAT, (0.0, 0.0)) == (0.0, 0.0)


def test_cat_half_half():
    # (2*0.5 + 0.5, 0.5 + 0.5) mod 1
    p = ds.apply(CAT, (0.5, 0.5))
    assert p == pytest.approx((0.5, 0.0), abs=1e-15)


def test_baker_example():
    # (1.5 mod 1, (0.5 + 1)/2)
    p = ds.apply(BAKER, (0.75, 0.5))
    assert p == pytest.approx((0.5, 0.75), abs=1e-15)


def test_inverse_examples():
    assert ds.apply_inverse(CAT, (0.0, 0.0)) == (0.0, 0.0)
    p = ds.apply_inverse(CAT, (0.5, 0.0))
    assert p == pytest.approx((0.5, 0.5), abs=1e-15)


def test_round_trip_random_points():
    rng = np.random.default_rng(3)
    pts = rng.random((10_000, 2))
    for m in (CAT, NEG):
        fwd = ds.apply_many(m, pts)
        back = np.array([ds.apply_inverse(m, p) for p in fwd[:200]])
        diff = np.abs(back - pts[:200])
        diff = np.minimum(diff, 1 - diff)
        assert diff.max() < 1e-12


def test_baker_round_trip():
    rng = np.random.default_rng(4)
    for p in rng.random((500, 2)):
        q = ds.apply(BAKER, p)
        r = ds.apply_inverse(BAKER, q)
        assert abs(r[0] - p[0]) < 1e-14 and abs(r[1] - p[1]) < 1e-14


def test_log_expansion_values():
    val = np.log((3 + np.sqrt(5)) / 2)
    assert ds.log_expansion(CAT) == pytest.approx(0.9624236501, abs=1e-9)
    assert ds.log_expansion(CAT) == pytest.approx(val, abs=1e-14)
    assert ds.log_expansion(NEG) == pytest.approx(val, abs=1e-14)
    assert ds.log_expansion(BAKER) == pytest.approx(np.log(2), abs=1e-15)


def test_eigen_consistency():
    for m in (CAT, NEG, ds.TorusMap(np.array([[1, 1], [1, 2]])),
              ds.TorusMap(np.array([[3, 2], [1, 1]]))):
        assert abs(m.lambda_u) > 1 > abs(m.lambda_s) > 0
        det = float(np.linalg.det(m.matrix.astype(float)))
        assert m.lambda_u * m.lambda_s == pytest.approx(det, abs=1e-12)
        assert np.allclose(m.matrix @ m.e_u, m.lambda_u * m.e_u, atol=1e-12)
        assert np.allclose(m.matrix @ m.e_s, m.lambda_s * m.e_s, atol=1e-12)
        # reconstruct the matrix from eigen-data
        v = np.column_stack([m.e_u, m.e_s])
        rec = v @ np.diag([m.lambda_u, m.lambda_s]) @ np.linalg.inv(v)
        assert np.allclose(rec, m.matrix, atol=1e-10)


def test_orientation_field():
    assert CAT.orientation == "preserving"
    assert NEG.orientation == "reversing"


def test_hyperbolicity_gate():
    with pytest.raises(ds.NotHyperbolicError):
        ds.TorusMap(np.array([[1, 0], [0, 1]]))
    with pytest.raises(ds.NotHyperbolicError):
        ds.TorusMap(np.array([[2, 1], [1, 2]]))  # det 3
    with pytest.raises(ds.NotHyperbolicError):
        ds.TorusMap(np.array([[0, 1], [-1, 0]]))  # trace 0


def test_periodic_points_counts():
    p1 = ds.periodic_points(CAT, 1)
    assert p1 == [(0.0, 0.0)]
    p2 = ds.periodic_points(CAT, 2)
    assert len(p2) == 5
    assert (0.0, 0.0) in p2
    # every period-2 point maps back to itself after two steps
    for p in p2:
        q = ds.apply(CAT, ds.apply(CAT, p))
        dx = min(abs(q.x - p.x), 1 - abs(q.x - p.x))
        dy = min(abs(q.y - p.y), 1 - abs(q.y - p.y))
        assert max(dx, dy) < 1e-9


def test_periodic_points_origin_always_there():
    for period in (1, 2, 3, 4, 5):
        assert (0.0, 0.0) in ds.periodic_points(CAT, period)


def test_periodic_points_range_gate():
    with pytest.raises(ValueError):
        ds.periodic_points(CAT, 0)
    with pytest.raises(ValueError):
        ds.periodic_points(CAT, 13)


def test_area_preservation_monte_carlo():
    rng = np.random.default_rng(11)
    n = 200_000
    pts = rng.random((n, 2))
    box_lo, box_hi = np.array([0.2, 0.3]), np.array([0.45, 0.7])
    area = np.prod(box_hi - box_lo)
    for m in (CAT, BAKER):
        img = ds.apply_many(m, pts)
        frac = np.mean(np.all((img >= box_lo) & (img < box_hi), axis=1))
        sigma = np.sqrt(area * (1 - area) / n)
        assert abs(frac - area) < 3 * sigma + 1e-12


def test_exact_baker_path():
    from fractions import Fraction
    p = (Fraction(3, 4), Fraction(1, 2))
    q = ds.apply_exact(BAKER, p)
    assert q == (Fraction(1, 2), Fraction(3, 4))


def test_map_from_config():
    m = ds.map_from_config({"kind": "toral", "matrix": [[2, 1], [1, 1]]})
    assert isinstance(m, ds.TorusMap)
    b = ds.map_from_config({"kind": "baker", "k": 3})
    assert b.k == 3
    with pytest.raises(ValueError):
        ds.map_from_config({"kind": "circle"})

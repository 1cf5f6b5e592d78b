import math

import numpy as np
import pytest

from gghl import synthetic
from gghl.errors import DegenerateBox
from gghl.gaussian import gaussian_value, mahalanobis_sq, region_from_obb, shrunk_radii


def test_shrunk_radii_example():
    assert shrunk_radii(10.0, 4.0, 0.3) == (pytest.approx(3.5), pytest.approx(1.4))


def test_shrunk_radii_vanish_as_t_iou_approaches_one():
    r1, r2 = shrunk_radii(10.0, 4.0, 1.0 - 1e-9)
    assert r1 < 1e-8 and r2 < 1e-8


def test_region_axis_aligned_40x20_example():
    obb = synthetic.rotated_rect(100, 60, 40, 20, 0.0)
    region = region_from_obb(obb, stride=8, t_iou=0.3)
    assert np.allclose(region.mu, [12.5, 7.5])
    assert region.alpha == pytest.approx(0.0, abs=1e-12)
    assert region.lambda1 == pytest.approx(6.25)
    assert region.lambda2 == pytest.approx(1.5625)
    assert region.shrink == pytest.approx(0.35)
    assert region.thr == pytest.approx(math.exp(-0.06125), abs=1e-12)


def test_region_square_tie_uses_first_side():
    obb = synthetic.rotated_rect(50, 50, 30, 30, 0.0)
    region = region_from_obb(obb, stride=8, t_iou=0.3)
    assert region.lambda1 == region.lambda2
    # first canonical side of an axis-aligned square points along +x
    assert region.alpha == pytest.approx(0.0, abs=1e-12)


def test_region_rotation_shifts_alpha(rng):
    for _ in range(10):
        base = float(rng.uniform(0.1, 1.3))
        extra = float(rng.uniform(0.1, 1.5))
        a = region_from_obb(synthetic.rotated_rect(200, 200, 60, 24, base), 8, 0.3)
        b = region_from_obb(synthetic.rotated_rect(200, 200, 60, 24, base + extra), 8, 0.3)
        assert b.lambda1 == pytest.approx(a.lambda1)
        assert b.lambda2 == pytest.approx(a.lambda2)
        assert (b.alpha - a.alpha) % math.pi == pytest.approx(extra % math.pi, abs=1e-9)


def test_degenerate_semi_axis():
    with pytest.raises(DegenerateBox):
        region_from_obb(synthetic.rotated_rect(50, 50, 40, 1e-5, 0.2), stride=8, t_iou=0.3)


def test_value_at_mean_is_one(rng):
    obb = synthetic.random_obb(rng)
    region = region_from_obb(obb, 16, 0.3)
    assert gaussian_value(region, region.mu) == 1.0


def test_value_at_semi_major_endpoint():
    obb = synthetic.rotated_rect(100, 60, 40, 20, 0.0)
    region = region_from_obb(obb, 8, 0.3)
    p = region.mu + [math.sqrt(region.lambda1), 0.0]
    assert mahalanobis_sq(region, p) == pytest.approx(1.0, abs=1e-12)
    assert gaussian_value(region, p) == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_rotated_region_matches_unrotated_in_its_frame(rng):
    angle = 0.7
    plain = region_from_obb(synthetic.rotated_rect(100, 100, 50, 24, 0.0), 8, 0.3)
    turned = region_from_obb(synthetic.rotated_rect(100, 100, 50, 24, angle), 8, 0.3)
    c, s = math.cos(turned.alpha), math.sin(turned.alpha)
    q = np.array([[c, -s], [s, c]])
    for _ in range(50):
        v = rng.normal(scale=2.0, size=2)
        lhs = gaussian_value(turned, q @ v + turned.mu)
        rhs = gaussian_value(plain, v + plain.mu)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_covariance_reconstruction(rng):
    obb = synthetic.random_obb(rng)
    region = region_from_obb(obb, 16, 0.3)
    cov = region.covariance()
    # Mahalanobis from the explicit inverse must match the rotated-frame form
    inv = np.linalg.inv(cov)
    for _ in range(20):
        p = region.mu + rng.normal(scale=3.0, size=2)
        d = p - region.mu
        assert mahalanobis_sq(region, p) == pytest.approx(float(d @ inv @ d), rel=1e-9)


def test_density_broadcasts_over_grids():
    obb = synthetic.rotated_rect(100, 60, 40, 20, 0.4)
    region = region_from_obb(obb, 8, 0.3)
    pts = np.stack(np.meshgrid(np.arange(25), np.arange(25)), axis=-1) + 0.5
    vals = gaussian_value(region, pts)
    assert vals.shape == (25, 25)
    assert np.all((vals > 0) & (vals <= 1.0))

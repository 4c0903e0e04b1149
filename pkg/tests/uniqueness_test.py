"""Tests for the uniqueness module."""

import math

import pytest

from specgeo import uniqueness
from specgeo.carleman import WeightParams
from specgeo.errors import DegenerateFieldError, DomainError, RegionError, UnsupportedFamilyError
from specgeo.manifolds import Point
from specgeo.spectra import sphere_zonal_eigenpair, torus_eigenpair

PARAMS = WeightParams(epsilon=0.5, t0=math.log(0.5))


class TestWeightAlpha:
    """Test cases for alpha_from_weight and weight_alpha_bounds."""

    def test_closed_form(self) -> None:
        """Test A_R and B_R against phi(r) = -ln r + sqrt(r)."""
        report = uniqueness.alpha_from_weight(PARAMS, 0.2)
        a_r = math.log(4.0) + math.sqrt(0.05) - math.sqrt(0.2)
        b_r = math.log(1.5) + math.sqrt(0.2) - math.sqrt(0.3)
        assert report.a_r == pytest.approx(a_r)
        assert report.b_r == pytest.approx(b_r)
        assert report.alpha == pytest.approx(a_r / (a_r + b_r))

    @pytest.mark.parametrize("radius", [0.0, -0.1, 0.5, 0.7])
    def test_radius_range(self, radius: float) -> None:
        """Test radii outside (0, exp(t0)) are rejected."""
        with pytest.raises(DomainError):
            uniqueness.alpha_from_weight(PARAMS, radius)

    def test_bounds_positive(self) -> None:
        """Test A_R and B_R stay positive with alpha inside (0, 1)."""
        bounds = uniqueness.weight_alpha_bounds(PARAMS, [0.05, 0.1, 0.2, 0.3])
        assert bounds.positive
        assert 0.0 < bounds.alpha_min <= bounds.alpha_max < 1.0
        assert bounds.a_min <= bounds.a_max

    def test_bounds_empty(self) -> None:
        """Test an empty radius grid is rejected."""
        with pytest.raises(DomainError):
            uniqueness.weight_alpha_bounds(PARAMS, [])


class TestThreeSphere:
    """Test cases for the three-sphere log-combination."""

    def test_exponent_balanced(self) -> None:
        """Test geometric norms give a zero combination at alpha = 1/2."""
        statement, swapped = uniqueness.three_sphere_exponent(
            (math.e, math.e**2, math.e**3), 0.5
        )
        assert statement == pytest.approx(0.0)
        assert swapped == pytest.approx(0.0)

    def test_exponent_orientation(self) -> None:
        """Test the two orientations differ when alpha != 1/2."""
        statement, swapped = uniqueness.three_sphere_exponent(
            (math.e, math.e**2, math.e**3), 0.25
        )
        assert statement == pytest.approx(-0.5)
        assert swapped == pytest.approx(0.5)

    def test_check_report(self) -> None:
        """Test the report carries ordered norms and the scaled combination."""
        pair = torus_eigenpair((3, 1))
        center = Point(coords=(1.0, 2.0))
        report = uniqueness.three_sphere_check(pair, center, 0.2, PARAMS, order=16)
        assert report.norms[0] < report.norms[1] < report.norms[2]
        statement, _ = uniqueness.three_sphere_exponent(report.norms, report.alpha)
        assert report.required_c == pytest.approx(statement / math.sqrt(10.0))
        assert report.lam == pytest.approx(10.0)

    def test_check_degenerate(self) -> None:
        """Test a zero eigenfunction has no three-sphere constant."""
        pair = torus_eigenpair((1, 0)).scaled(0.0)
        with pytest.raises(DegenerateFieldError):
            uniqueness.three_sphere_check(pair, Point(coords=(1.0, 1.0)), 0.2, PARAMS, order=8)


class TestDoubling:
    """Test cases for the doubling index and sweeps."""

    def test_constant_gradient_l2(self) -> None:
        """Test a nearly constant gradient doubles its L2 norm."""
        pair = torus_eigenpair((1, 0))
        report = uniqueness.doubling_index(pair, Point(coords=(0.0, 1.0)), 0.01, "l2", 8)
        assert report.index == pytest.approx(math.log(2.0), abs=1e-3)

    def test_constant_gradient_sup(self) -> None:
        """Test a nearly constant gradient keeps its sup norm."""
        pair = torus_eigenpair((1, 0))
        report = uniqueness.doubling_index(pair, Point(coords=(0.0, 1.0)), 0.01, "sup", 8)
        assert report.index == pytest.approx(0.0, abs=1e-3)

    def test_scale_invariant(self) -> None:
        """Test the index does not depend on the amplitude."""
        pair = torus_eigenpair((2, 1))
        center = Point(coords=(0.3, 0.8))
        base = uniqueness.doubling_index(pair, center, 0.1, order=8)
        scaled = uniqueness.doubling_index(pair.scaled(1e6), center, 0.1, order=8)
        assert scaled.index == pytest.approx(base.index)

    def test_radius_beyond_bound(self) -> None:
        """Test 2r beyond the injectivity bound is rejected."""
        pair = torus_eigenpair((1, 0))
        with pytest.raises(RegionError):
            uniqueness.doubling_index(pair, Point(coords=(1.0, 1.0)), 2.0, order=8)

    def test_zero_pair(self) -> None:
        """Test a zero gradient is degenerate."""
        pair = torus_eigenpair((1, 0)).scaled(0.0)
        with pytest.raises(DegenerateFieldError):
            uniqueness.doubling_index(pair, Point(coords=(1.0, 1.0)), 0.1, order=8)

    def test_sweep_max(self) -> None:
        """Test the sweep reports the largest index over its grid."""
        pair = torus_eigenpair((2, 0))
        centers = [Point(coords=(0.1, 0.0)), Point(coords=(0.8, 0.0))]
        radii = [0.05, 0.2]
        sweep = uniqueness.doubling_sweep(pair, centers, radii, order=8)
        indices = [
            uniqueness.doubling_index(pair, c, r, order=8).index for c in centers for r in radii
        ]
        assert sweep.max_index == pytest.approx(max(indices))
        assert sweep.evaluated == 4

    def test_sweep_order_independent(self) -> None:
        """Test reversing the centre order does not change the argmax."""
        pair = torus_eigenpair((1, 1))
        centers = [Point(coords=(0.5, 0.5)), Point(coords=(2.0, 1.0)), Point(coords=(4.0, 3.0))]
        forward = uniqueness.doubling_sweep(pair, centers, [0.1], order=8)
        backward = uniqueness.doubling_sweep(pair, centers[::-1], [0.1], order=8)
        assert forward.center == backward.center
        assert forward.max_index == backward.max_index

    def test_sweep_empty(self) -> None:
        """Test an empty sweep is rejected."""
        with pytest.raises(DomainError):
            uniqueness.doubling_sweep(torus_eigenpair((1, 0)), [], [0.1])


class TestSweepCenters:
    """Test cases for sweep_centers."""

    def test_torus_adds_critical_centers(self) -> None:
        """Test sampled centres are followed by the critical centres."""
        pair = torus_eigenpair((2, 0))
        centers = uniqueness.sweep_centers(pair, 10, seed=0)
        assert len(centers) == 10 + len(pair.critical_centers())

    def test_pole_margin(self) -> None:
        """Test centres stay away from the sphere's poles."""
        pair = sphere_zonal_eigenpair(1.0, 4)
        centers = uniqueness.sweep_centers(pair, 20, seed=1, margin=0.05)
        assert all(0.05 <= c.x1 <= math.pi - 0.05 for c in centers)

    def test_deterministic(self) -> None:
        """Test the same seed gives the same centres."""
        pair = torus_eigenpair((1, 2))
        assert uniqueness.sweep_centers(pair, 8, 3) == uniqueness.sweep_centers(pair, 8, 3)


class TestLowerBounds:
    """Test cases for the lower-bound and elliptic checks."""

    def test_global_lower_bound(self) -> None:
        """Test the local-to-global ratio lies in (0, 1)."""
        pair = torus_eigenpair((2, 0))
        centers = [Point(coords=(0.1 * i, 1.0)) for i in range(5)]
        report = uniqueness.global_lower_bound_check(pair, 0.5, centers, order=8)
        assert 0.0 < report.min_ratio < 1.0
        assert report.center in centers
        assert report.exponent == pytest.approx(-math.log(report.min_ratio) / 2.0)

    def test_global_lower_bound_empty(self) -> None:
        """Test an empty centre grid is rejected."""
        with pytest.raises(DomainError):
            uniqueness.global_lower_bound_check(torus_eigenpair((1, 0)), 0.5, [])

    def test_annulus_below_ball(self) -> None:
        """Test the annulus ratio is below the ratio of the enclosing ball."""
        pair = sphere_zonal_eigenpair(1.0, 3)
        center = Point(coords=(1.0, 0.5))
        ring = uniqueness.annulus_lower_bound_check(pair, 1.0, center, order=8)
        ball = uniqueness.global_lower_bound_check(pair, 0.25, [center], order=8)
        assert 0.0 < ring < ball.min_ratio

    def test_elliptic_constant(self) -> None:
        """Test the interior estimate constant is positive and moderate."""
        pair = torus_eigenpair((4, 0))
        value = uniqueness.elliptic_gradient_check(pair, Point(coords=(0.3, 0.3)), 0.5, 0.5, order=16)
        assert 0.0 < value < 2.0

    @pytest.mark.parametrize("shrink", [0.0, 1.0, 1.5])
    def test_elliptic_shrink_range(self, shrink: float) -> None:
        """Test shrink factors outside (0, 1) are rejected."""
        with pytest.raises(DomainError):
            uniqueness.elliptic_gradient_check(
                torus_eigenpair((1, 0)), Point(coords=(1.0, 1.0)), 0.5, shrink
            )

    def test_system_residual_torus(self) -> None:
        """Test grad u solves the eigen-system on the flat torus."""
        pair = torus_eigenpair((3, 2))
        assert uniqueness.eigen_system_residual(pair) < 1e-5 * pair.lambda_**1.5

    def test_system_residual_sphere(self) -> None:
        """Test curved charts are unsupported."""
        with pytest.raises(UnsupportedFamilyError):
            uniqueness.eigen_system_residual(sphere_zonal_eigenpair(1.0, 2))

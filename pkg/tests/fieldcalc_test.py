"""Tests for the fieldcalc module."""

import math

import numpy as np
import pytest

from specgeo import fieldcalc
from specgeo.errors import DomainError, RegionError
from specgeo.fieldcalc import (
    gradient_consistency_check,
    hessian_consistency_check,
    l2_norm,
    magnitude,
    norm_over_region,
    sup_over_chart_disc,
)
from specgeo.manifolds import (
    Annulus,
    Ball,
    FlatTorus,
    Point,
    Revolution,
    Sphere,
    WholeSurface,
    surface_quadrature,
)
from specgeo.spectra import (
    EigenPair,
    SturmLiouvilleSpec,
    revolution_eigenpair,
    sphere_zonal_eigenpair,
    torus_eigenpair,
    torus_product_eigenpair,
)


def _sin_x1(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return np.sin(x1) + 0.0 * x2


class TestMagnitude:
    """Test cases for magnitude."""

    def test_scalar(self) -> None:
        """Test scalar samples give absolute values."""
        np.testing.assert_array_equal(magnitude(np.array([-2.0, 3.0])), [2.0, 3.0])

    def test_vector(self) -> None:
        """Test vector samples give Euclidean lengths."""
        np.testing.assert_allclose(magnitude(np.array([[3.0, 4.0], [0.0, 1.0]])), [5.0, 1.0])

    def test_matrix(self) -> None:
        """Test matrix samples give Frobenius norms."""
        values = np.array([[[1.0, 1.0], [1.0, 1.0]]])
        np.testing.assert_allclose(magnitude(values), [2.0])


class TestNorms:
    """Test cases for L2 and sup norms over regions."""

    def test_l2_whole_torus(self) -> None:
        """Test ||sin x1|| over the 2 pi torus is pi sqrt(2)."""
        rule = surface_quadrature(FlatTorus(), 8)
        assert l2_norm(_sin_x1, rule) == pytest.approx(math.pi * math.sqrt(2))

    def test_l2_constant_on_ball(self) -> None:
        """Test the L2 norm of 1 is the square root of the area."""
        ball = Ball(center=Point(coords=(1.0, 1.0)), radius=0.5)
        norm = norm_over_region(lambda a, b: np.ones_like(a), Sphere(), ball, "l2", 16)
        assert norm == pytest.approx(math.sqrt(2 * math.pi * (1 - math.cos(0.5))))

    def test_sup_on_ball(self) -> None:
        """Test the sup of sin x1 on a ball containing its maximum."""
        ball = Ball(center=Point(coords=(math.pi / 2 + 0.1, 1.0)), radius=0.5)
        assert norm_over_region(_sin_x1, FlatTorus(), ball, "sup", 8) == pytest.approx(
            1.0, abs=1e-8
        )

    def test_sup_of_vector_field(self) -> None:
        """Test the sup of |grad u| for u = sin(x1)."""
        pair = torus_eigenpair((1, 0))
        ball = Ball(center=Point(coords=(0.05, 1.0)), radius=0.3)
        assert norm_over_region(pair.grad_at, pair.surface, ball, "sup", 8) == pytest.approx(
            1.0, abs=1e-8
        )

    def test_sup_on_annulus_excludes_center(self) -> None:
        """Test the sup over an annulus misses the excluded inner disc."""
        ring = Annulus(center=Point(coords=(1.0, 1.0)), inner=0.2, outer=0.4)

        def bump(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
            return np.exp(-((x1 - 1.0) ** 2 + (x2 - 1.0) ** 2))

        assert norm_over_region(bump, FlatTorus(), ring, "sup", 8) == pytest.approx(
            math.exp(-0.04), rel=1e-6
        )

    def test_sup_whole_surface(self) -> None:
        """Test the whole-surface sup of a zonal harmonic is 1 at the poles."""
        pair = sphere_zonal_eigenpair(1.0, 3)
        assert norm_over_region(pair.value_at, pair.surface, WholeSurface(), "sup", 16) == (
            pytest.approx(1.0, abs=1e-4)
        )

    def test_region_beyond_bound(self) -> None:
        """Test an oversize ball is rejected."""
        ball = Ball(center=Point(coords=(1.0, 1.0)), radius=4.0)
        with pytest.raises(RegionError):
            norm_over_region(_sin_x1, FlatTorus(), ball)

    def test_l2_ball_splits_into_annulus(self) -> None:
        """Test ||u||^2 over B_R is ||u||^2 over B_delta plus the annulus delta..R."""
        pair = torus_eigenpair((3, 0))
        center = Point(coords=(1.0, 1.0))
        whole = norm_over_region(
            pair.value_at, pair.surface, Ball(center=center, radius=1.0), "l2", 32
        )
        inner = norm_over_region(
            pair.value_at, pair.surface, Ball(center=center, radius=0.3), "l2", 32
        )
        ring = norm_over_region(
            pair.value_at,
            pair.surface,
            Annulus(center=center, inner=0.3, outer=1.0),
            "l2",
            32,
        )
        assert whole**2 == pytest.approx(inner**2 + ring**2, rel=1e-8)

    def test_sup_refinement_needs_polar_rule(self) -> None:
        """Test the sup refinement rejects a rule without polar nodes."""
        ball = Ball(center=Point(coords=(1.0, 1.0)), radius=0.5)
        rule = surface_quadrature(FlatTorus(), 8)
        with pytest.raises(DomainError):
            fieldcalc._refine_polar(_sin_x1, FlatTorus(), ball, rule, 0)


class TestSupOverChartDisc:
    """Test cases for sup_over_chart_disc."""

    def test_linear_field(self) -> None:
        """Test the sup of |x1| over a disc of radius 2 at the origin."""
        value = sup_over_chart_disc(
            lambda a, b: a, Point(coords=(0.0, 0.0)), 2.0, grid_n=16
        )
        assert value == pytest.approx(2.0)

    def test_never_below_nodes(self) -> None:
        """Test refinement never lowers the sampled maximum."""
        pair = torus_eigenpair((3, 0))
        value = sup_over_chart_disc(pair.value_at, Point(coords=(0.0, 0.0)), 1.0, grid_n=32)
        assert value == pytest.approx(1.0, abs=1e-8)


class TestConsistencyChecks:
    """Test cases for the gradient and Hessian consistency checks."""

    @pytest.mark.parametrize(
        "pair",
        [
            torus_eigenpair((2, 3), phase=0.5),
            torus_product_eigenpair((2, 1)),
            sphere_zonal_eigenpair(1.0, 6),
        ],
    )
    def test_closed_form_pairs(self, pair: EigenPair) -> None:
        """Test closed-form derivatives match central differences."""
        assert gradient_consistency_check(pair, 200, seed=1) < 1e-6
        assert hessian_consistency_check(pair, 200, seed=1) < 1e-4

    def test_revolution_pair(self) -> None:
        """Test spline derivatives are consistent to interpolation accuracy."""
        spec = SturmLiouvilleSpec(surface=Revolution(bulge=0.2), m=1, grid_size=1024)
        pair = revolution_eigenpair(spec, 2)
        assert gradient_consistency_check(pair, 200) < 1e-3

    def test_deterministic_seed(self) -> None:
        """Test the same seed reproduces the same error."""
        pair = torus_eigenpair((4, 1))
        assert gradient_consistency_check(pair, 50, seed=3) == gradient_consistency_check(
            pair, 50, seed=3
        )

"""Tests for the geomeasure module."""

import math
from pathlib import Path

import numpy as np
import pytest

from specgeo import geomeasure
from specgeo.errors import DomainError, ReportError
from specgeo.manifolds import FlatTorus, Point
from specgeo.spectra import sphere_zonal_eigenpair, torus_eigenpair, torus_product_eigenpair


def _sin_x1(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return np.sin(x1) + 0.0 * x2


class TestLevelLength:
    """Test cases for level_length and extract_level_set."""

    def test_two_circles(self) -> None:
        """Test {sin x1 = 1/2} is two circles of length 2 pi."""
        length = geomeasure.level_length(_sin_x1, FlatTorus(), 0.5, 128)
        assert length == pytest.approx(4 * math.pi, rel=1e-9)

    def test_block_size_irrelevant(self) -> None:
        """Test processing rows in blocks does not change the total."""
        whole = geomeasure.level_length(_sin_x1, FlatTorus(), 0.3, 128, block_rows=129)
        blocked = geomeasure.level_length(_sin_x1, FlatTorus(), 0.3, 128, block_rows=7)
        assert blocked == pytest.approx(whole)

    def test_clip(self) -> None:
        """Test clipping keeps only the chord inside the disc."""
        clip = (Point(coords=(math.pi / 6, math.pi)), 1.0)
        length = geomeasure.level_length(_sin_x1, FlatTorus(), 0.5, 256, clip=clip)
        assert length == pytest.approx(2.0, abs=0.05)

    def test_empty_level(self) -> None:
        """Test a level outside the range has zero length."""
        assert geomeasure.level_length(_sin_x1, FlatTorus(), 2.0, 64) == 0.0

    def test_grid_floor(self) -> None:
        """Test grids below 64 cells are rejected."""
        with pytest.raises(DomainError):
            geomeasure.level_length(_sin_x1, FlatTorus(), 0.5, 32)

    def test_extract_closed_curves(self) -> None:
        """Test the level set assembles into two closed polylines."""
        curves = geomeasure.extract_level_set(_sin_x1, FlatTorus(), 0.5, 64)
        assert len(curves) == 2
        assert all(curve.closed for curve in curves)
        assert [c.length for c in curves] == pytest.approx([2 * math.pi, 2 * math.pi])
        xs = sorted(float(np.mean(c.vertices[:, 0])) for c in curves)
        assert xs == pytest.approx([math.pi / 6, 5 * math.pi / 6], abs=1e-6)

    @pytest.mark.parametrize("scale", [3.0, 0.25])
    def test_extract_scale_invariant(self, scale: float) -> None:
        """Test {c f = c level} has the same curves as {f = level}."""
        pair = torus_product_eigenpair((2, 1), phases=(0.3, 0.1))

        def scaled(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
            return scale * pair.value_at(x1, x2)

        plain = geomeasure.extract_level_set(pair.value_at, pair.surface, 0.4, 128)
        stretched = geomeasure.extract_level_set(scaled, pair.surface, 0.4 * scale, 128)
        assert len(stretched) == len(plain)
        assert sum(c.length for c in stretched) == pytest.approx(
            sum(c.length for c in plain), rel=1e-9
        )

    def test_write_polylines(self, tmp_path: Path) -> None:
        """Test the polyline CSV layout."""
        curves = geomeasure.extract_level_set(_sin_x1, FlatTorus(), 0.5, 64)
        path = geomeasure.write_polylines_csv(curves, tmp_path / "level.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "curve_id,vertex_index,coord1,coord2"
        assert len(lines) == 1 + sum(len(c.vertices) for c in curves)
        assert lines[1].startswith("0,0,")

    def test_write_polylines_unwritable(self, tmp_path: Path) -> None:
        """Test a missing directory raises ReportError."""
        with pytest.raises(ReportError):
            geomeasure.write_polylines_csv([], tmp_path / "missing" / "level.csv")


class TestNodalMeasure:
    """Test cases for nodal_measure."""

    @pytest.mark.parametrize("k", [2, 5])
    def test_torus(self, k: int) -> None:
        """Test the nodal length of sin(k x1 + phase) is 4 k pi."""
        pair = torus_eigenpair((k, 0), phase=0.1)
        assert geomeasure.nodal_measure(pair, 256) == pytest.approx(4 * k * math.pi, rel=1e-6)

    def test_oblique_torus(self) -> None:
        """Test an oblique plane wave matches its closed-form nodal length."""
        pair = torus_eigenpair((2, 1), phase=0.2)
        assert geomeasure.nodal_measure(pair, 512) == pytest.approx(
            pair.reference_nodal_length(), rel=1e-3
        )

    @pytest.mark.parametrize("degree", [3, 6])
    def test_zonal(self, degree: int) -> None:
        """Test zonal nodal lengths match the latitude circles."""
        pair = sphere_zonal_eigenpair(1.0, degree)
        assert geomeasure.nodal_measure(pair, 512) == pytest.approx(
            pair.reference_nodal_length(), rel=1e-3
        )


class TestCriticalMeasure:
    """Test cases for critical_measure and critical_points."""

    def test_torus_curve(self) -> None:
        """Test sin(2 x1) has a critical set of 4 circles."""
        pair = torus_eigenpair((2, 0), phase=0.1)
        estimate = geomeasure.critical_measure(pair, grid_n=256)
        assert estimate.verdict == "curve"
        assert estimate.extrapolated == pytest.approx(8 * math.pi, rel=0.02)
        assert estimate.levels == sorted(estimate.levels, reverse=True)

    def test_zonal_curve(self) -> None:
        """Test a zonal harmonic's critical latitudes are measured."""
        pair = sphere_zonal_eigenpair(1.0, 4)
        estimate = geomeasure.critical_measure(pair, grid_n=256)
        assert estimate.verdict == "curve"
        assert estimate.extrapolated == pytest.approx(
            pair.reference_critical_length(), rel=0.03
        )

    def test_product_points(self) -> None:
        """Test a product mode has isolated critical points and zero length."""
        pair = torus_product_eigenpair((2, 2), phases=(0.1, 0.2))
        estimate = geomeasure.critical_measure(pair, grid_n=128)
        assert estimate.verdict == "points"
        assert estimate.point_count == 32

    def test_levels_validation(self) -> None:
        """Test levels must be at least five halvings."""
        pair = torus_eigenpair((1, 0))
        with pytest.raises(DomainError):
            geomeasure.critical_measure(pair, levels=[1.0, 0.5, 0.25])
        with pytest.raises(DomainError):
            geomeasure.critical_measure(pair, levels=[1.0, 0.4, 0.2, 0.1, 0.05])

    def test_geometric_levels(self) -> None:
        """Test the default level ladder halves."""
        assert geomeasure.geometric_levels(1.0, 3) == [1.0, 0.5, 0.25]

    def test_critical_points_classified(self) -> None:
        """Test the product mode has 8 maxima, 8 minima and 16 saddles."""
        pair = torus_product_eigenpair((2, 2), phases=(0.1, 0.2))
        found = geomeasure.critical_points(pair, grid_n=128)
        kinds = [p.kind for p in found.points]
        assert kinds.count("maximum") == 8
        assert kinds.count("minimum") == 8
        assert kinds.count("saddle") == 16
        assert found.unresolved == 0

    def test_zonal_poles(self) -> None:
        """Test the poles of a zonal harmonic are nondegenerate extrema."""
        pair = sphere_zonal_eigenpair(1.0, 2)
        found = geomeasure.critical_points(pair, grid_n=128)
        poles = [p for p in found.points if p.point.x1 in (0.0, math.pi)]
        assert len(poles) == 2
        assert all(p.kind == "maximum" for p in poles)

    def test_critical_points_grid_floor(self) -> None:
        """Test the search needs grid_n >= 128."""
        with pytest.raises(DomainError):
            geomeasure.critical_points(torus_eigenpair((1, 0)), grid_n=64)

    @pytest.mark.parametrize("degree", [2, 4, 5])
    def test_distinct_colatitudes(self, degree: int) -> None:
        """Test the measured critical latitudes match the zeros of P_l'."""
        pair = sphere_zonal_eigenpair(1.0, degree)
        found = geomeasure.critical_points(pair, grid_n=128)
        measured = geomeasure.distinct_colatitudes(found, pair.surface)
        expected = sorted(float(t) for t in pair.critical_latitudes())
        assert len(measured) == degree - 1
        assert measured == pytest.approx(expected, abs=1e-6)

    def test_distinct_colatitudes_needs_poles(self) -> None:
        """Test the torus has no colatitudes."""
        pair = torus_eigenpair((1, 0))
        found = geomeasure.critical_points(pair, grid_n=128)
        with pytest.raises(DomainError):
            geomeasure.distinct_colatitudes(found, pair.surface)


class TestScalingFit:
    """Test cases for scaling_fit."""

    def test_exact_power_law(self) -> None:
        """Test samples on 2 sqrt(lam) give slope 1/2 and prefactor 2."""
        samples = [(lam, 2.0 * math.sqrt(lam)) for lam in (4.0, 9.0, 25.0, 100.0)]
        fit = geomeasure.scaling_fit(samples)
        assert fit.slope == pytest.approx(0.5)
        assert fit.prefactor == pytest.approx(2.0)
        assert fit.r_squared == pytest.approx(1.0)

    def test_too_few_samples(self) -> None:
        """Test fewer than three samples are rejected."""
        with pytest.raises(DomainError):
            geomeasure.scaling_fit([(1.0, 1.0), (2.0, 2.0)])

    def test_nonpositive_measure(self) -> None:
        """Test zero measures cannot be fitted on log axes."""
        with pytest.raises(DomainError):
            geomeasure.scaling_fit([(1.0, 1.0), (2.0, 0.0), (3.0, 3.0)])

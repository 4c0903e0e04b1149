"""Comprehensive tests for the toolkit module."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from specgeo import toolkit


class TestLabModel:
    """Test cases for the LabModel base class."""

    class Sample(toolkit.LabModel):
        value: float

    def test_frozen(self) -> None:
        """Test instances cannot be mutated."""
        sample = self.Sample(value=1.0)
        with pytest.raises(ValidationError):
            sample.value = 2.0  # type: ignore[misc]

    def test_extra_forbidden(self) -> None:
        """Test unknown keys are rejected."""
        with pytest.raises(ValidationError):
            self.Sample(value=1.0, other=2.0)  # type: ignore[call-arg]

    def test_arbitrary_types(self) -> None:
        """Test numpy arrays are accepted as fields."""

        class Holder(toolkit.LabModel):
            values: toolkit.FloatArray

        holder = Holder(values=np.zeros(3))
        assert holder.values.shape == (3,)


class TestWrapping:
    """Test cases for wrap_periodic and wrap_centered."""

    @pytest.mark.parametrize(
        "x,expected",
        [
            (0.5, 0.5),
            (-0.5, 2 * math.pi - 0.5),
            (2 * math.pi + 0.25, 0.25),
        ],
    )
    def test_wrap_periodic(self, x: float, expected: float) -> None:
        """Test reduction to [0, period)."""
        result = toolkit.wrap_periodic(np.array([x]), 2 * math.pi)
        assert result[0] == pytest.approx(expected)

    @pytest.mark.parametrize(
        "x,expected",
        [
            (0.2, 0.2),
            (2 * math.pi - 0.2, -0.2),
            (-2 * math.pi + 0.1, 0.1),
        ],
    )
    def test_wrap_centered(self, x: float, expected: float) -> None:
        """Test reduction to [-period/2, period/2)."""
        result = toolkit.wrap_centered(np.array([x]), 2 * math.pi)
        assert result[0] == pytest.approx(expected)


class TestFiniteDifferences:
    """Test cases for the finite-difference helpers."""

    @staticmethod
    def field(x1: toolkit.FloatArray, x2: toolkit.FloatArray) -> toolkit.FloatArray:
        return np.sin(x1) * np.cos(2 * x2)

    def test_first_derivative(self) -> None:
        """Test the fourth-order first derivative along both axes."""
        x1 = np.array([0.3, 1.1])
        x2 = np.array([0.7, -0.4])
        d1 = toolkit.first_derivative(self.field, x1, x2, 0)
        d2 = toolkit.first_derivative(self.field, x1, x2, 1)
        np.testing.assert_allclose(d1, np.cos(x1) * np.cos(2 * x2), atol=1e-10)
        np.testing.assert_allclose(d2, -2 * np.sin(x1) * np.sin(2 * x2), atol=1e-10)

    def test_second_derivative(self) -> None:
        """Test the fourth-order second derivative."""
        x1 = np.array([0.3])
        x2 = np.array([0.7])
        d22 = toolkit.second_derivative(self.field, x1, x2, 1)
        np.testing.assert_allclose(d22, -4 * self.field(x1, x2), atol=1e-8)

    def test_central_difference(self) -> None:
        """Test the second-order oracle difference."""
        x1 = np.array([0.3])
        x2 = np.array([0.7])
        d1 = toolkit.central_difference(self.field, x1, x2, 0)
        np.testing.assert_allclose(d1, np.cos(x1) * np.cos(2 * x2), atol=1e-8)


class TestLogWeightedNorm:
    """Test cases for log_weighted_norm."""

    def test_pythagorean(self) -> None:
        """Test ln sqrt(3^2 + 4^2) = ln 5."""
        result = toolkit.log_weighted_norm(
            np.log(np.array([3.0, 4.0])), np.array([1.0, 1.0])
        )
        assert result == pytest.approx(math.log(5.0))

    def test_weights(self) -> None:
        """Test the weights multiply the squared magnitudes."""
        result = toolkit.log_weighted_norm(np.zeros(2), np.array([2.0, 2.0]))
        assert result == pytest.approx(math.log(2.0))

    def test_exact_zero(self) -> None:
        """Test an all-zero field gives -inf."""
        result = toolkit.log_weighted_norm(
            np.full(3, -np.inf), np.ones(3)
        )
        assert result == float("-inf")

    def test_huge_exponents(self) -> None:
        """Test values far beyond float range stay finite in log space."""
        result = toolkit.log_weighted_norm(np.array([2000.0, 2000.0]), np.ones(2))
        assert result == pytest.approx(2000.0 + 0.5 * math.log(2.0))


class TestHaltonPoints:
    """Test cases for halton_points."""

    def test_deterministic(self) -> None:
        """Test the same seed gives the same points."""
        a = toolkit.halton_points(16, [0.0, 0.0], [1.0, 2.0], seed=7)
        b = toolkit.halton_points(16, [0.0, 0.0], [1.0, 2.0], seed=7)
        np.testing.assert_array_equal(a, b)

    def test_inside_box(self) -> None:
        """Test the points fill the requested box."""
        points = toolkit.halton_points(64, [1.0, -1.0], [2.0, 1.0], seed=0)
        assert points.shape == (64, 2)
        assert np.all((points[:, 0] >= 1.0) & (points[:, 0] <= 2.0))
        assert np.all((points[:, 1] >= -1.0) & (points[:, 1] <= 1.0))


class TestFitUniformBound:
    """Test cases for fit_uniform_bound."""

    def test_exact_line(self) -> None:
        """Test samples on a line give its slope and intercept."""
        bound = toolkit.fit_uniform_bound([1.0, 2.0, 3.0], [3.0, 5.0, 7.0])
        assert bound.slope == pytest.approx(2.0)
        assert bound.intercept == pytest.approx(1.0)
        assert bound.violations == 0

    def test_margin_widens_intercept(self) -> None:
        """Test the relative margin lifts the intercept."""
        bound = toolkit.fit_uniform_bound([1.0, 2.0, 3.0], [3.0, 5.0, 7.0], margin=0.5)
        assert bound.intercept == pytest.approx(1.5)
        assert bound.margin == 0.5

    def test_envelope_covers_samples(self) -> None:
        """Test the intercept is lifted to the upper envelope."""
        x = [1.0, 2.0, 3.0, 4.0]
        y = [1.0, 3.0, 2.0, 4.5]
        bound = toolkit.fit_uniform_bound(x, y)
        assert bound.violations == 0
        for xi, yi in zip(x, y, strict=True):
            assert yi <= bound.slope * xi + bound.intercept + 1e-12

    def test_holdout_detects_outlier(self) -> None:
        """Test a bound calibrated on the lower half flags a runaway sample."""
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        y = [1.0, 2.0, 3.0, 4.0, 1e6]
        bound = toolkit.fit_uniform_bound(x, y, calibration=[0, 1, 2])
        assert bound.slope == pytest.approx(1.0)
        assert bound.intercept == pytest.approx(0.0, abs=1e-12)
        assert bound.violations == 1

    def test_holdout_margin_covers_noise(self) -> None:
        """Test the margin absorbs small excursions of the held-out samples."""
        x = [1.0, 2.0, 3.0, 4.0]
        y = [3.0, 4.0, 5.05, 6.05]
        bound = toolkit.fit_uniform_bound(x, y, margin=0.1, calibration=[0, 1])
        assert bound.intercept == pytest.approx(2.2)
        assert bound.violations == 0

    def test_min_slope(self) -> None:
        """Test the slope clamp keeps a decreasing calibration set nonnegative."""
        bound = toolkit.fit_uniform_bound([1.0, 2.0, 3.0], [3.0, 2.0, 1.0], min_slope=0.0)
        assert bound.slope == 0.0
        assert bound.intercept == pytest.approx(3.0)
        assert bound.violations == 0

    def test_single_sample(self) -> None:
        """Test a single sample gives a zero slope."""
        bound = toolkit.fit_uniform_bound([2.0], [5.0])
        assert bound.slope == 0.0
        assert bound.intercept == pytest.approx(5.0)

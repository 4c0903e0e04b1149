"""Utilities shared by the specgeo modules."""

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats
from scipy.special import logsumexp
from scipy.stats import qmc

from ._typing import Field, FloatArray


class LabModel(BaseModel):
    """Base pydantic model for every specgeo domain type.

    Instances are frozen after construction and may hold numpy arrays and
    callables, which makes them safe to share across threads:
    - frozen=True: no mutation after validation
    - arbitrary_types_allowed=True: numpy arrays and evaluators as fields
    - extra="forbid": unknown keys are rejected when parsing configs

    Example:
        ```python
        class Sample(LabModel):
            values: FloatArray

        Sample(values=np.zeros(3))
        ```
    """

    model_config = ConfigDict(
        frozen=True,
        from_attributes=True,
        arbitrary_types_allowed=True,
        extra="forbid",
    )


def wrap_periodic(x: FloatArray, period: float) -> FloatArray:
    """Reduce coordinates to [0, period)."""
    return np.mod(x, period)


def wrap_centered(x: FloatArray, period: float) -> FloatArray:
    """Reduce coordinate differences to [-period/2, period/2)."""
    return np.mod(x + 0.5 * period, period) - 0.5 * period


def first_derivative(
    field: Field, x1: FloatArray, x2: FloatArray, axis: int, h: float = 1e-3
) -> FloatArray:
    """Fourth-order central difference of ``field`` along one chart axis.

    Args:
        field: Vectorized field on the chart.
        x1: First chart coordinates.
        x2: Second chart coordinates.
        axis: 0 for x1, 1 for x2.
        h: Step size.

    Returns:
        Difference quotient with the shape of ``field(x1, x2)``.
    """
    d1, d2 = (h, 0.0) if axis == 0 else (0.0, h)
    return (
        -field(x1 + 2 * d1, x2 + 2 * d2)
        + 8 * field(x1 + d1, x2 + d2)
        - 8 * field(x1 - d1, x2 - d2)
        + field(x1 - 2 * d1, x2 - 2 * d2)
    ) / (12 * h)


def second_derivative(
    field: Field, x1: FloatArray, x2: FloatArray, axis: int, h: float = 1e-3
) -> FloatArray:
    """Fourth-order central second difference along one chart axis."""
    d1, d2 = (h, 0.0) if axis == 0 else (0.0, h)
    return (
        -field(x1 + 2 * d1, x2 + 2 * d2)
        + 16 * field(x1 + d1, x2 + d2)
        - 30 * field(x1, x2)
        + 16 * field(x1 - d1, x2 - d2)
        - field(x1 - 2 * d1, x2 - 2 * d2)
    ) / (12 * h * h)


def central_difference(
    field: Field, x1: FloatArray, x2: FloatArray, axis: int, h: float = 1e-5
) -> FloatArray:
    """Plain second-order central difference, the consistency-check oracle."""
    d1, d2 = (h, 0.0) if axis == 0 else (0.0, h)
    return (field(x1 + d1, x2 + d2) - field(x1 - d1, x2 - d2)) / (2 * h)


def log_weighted_norm(log_abs: FloatArray, weights: FloatArray) -> float:
    """Return ``ln (sum_i w_i |f_i|^2)^(1/2)`` from ``ln |f_i|``.

    Entries with ``log_abs == -inf`` (exact zeros) are handled by
    ``scipy.special.logsumexp``; an all-zero field gives ``-inf``.
    """
    terms = 2.0 * np.asarray(log_abs, dtype=float)
    if not np.any(np.isfinite(terms)):
        return float("-inf")
    return 0.5 * float(logsumexp(terms, b=weights))


def halton_points(
    count: int, lower: Sequence[float], upper: Sequence[float], seed: int
) -> FloatArray:
    """Scrambled Halton points in a box, deterministic in ``seed``.

    Returns:
        Array of shape (count, 2).
    """
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    return np.asarray(qmc.scale(sampler.random(count), lower, upper), dtype=float)


class UniformBound(LabModel):
    """Calibrated bound ``y <= slope * x + intercept`` over a family.

    Attributes:
        slope: Least-squares slope of y against x (c1).
        intercept: Smallest intercept covering every calibration sample (c2),
            widened by the margin.
        violations: Samples (all of them, not only the calibration ones)
            above the bound.
        margin: Relative margin applied to the intercept.
    """

    slope: float
    intercept: float
    violations: int
    margin: float


def fit_uniform_bound(
    x: Sequence[float],
    y: Sequence[float],
    margin: float = 0.0,
    calibration: Sequence[int] | None = None,
    min_slope: float | None = None,
) -> UniformBound:
    """Fit a single (c1, c2) upper bound ``y <= c1 x + c2`` over samples.

    The slope is the least-squares slope of the calibration samples; the
    intercept is lifted to their upper envelope and then widened by
    ``margin`` (relative, applied to its magnitude). Violations are counted
    over every sample, so a bound calibrated on a subset can fail on the
    rest.

    Args:
        x: Abscissae, typically sqrt(lambda).
        y: Observed quantities, e.g. the max doubling index per eigenpair.
        margin: Relative widening of the intercept.
        calibration: Indices of the samples that calibrate; all by default.
        min_slope: Lower clamp of the fitted slope.

    Returns:
        The calibrated bound with its violation count.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    chosen = np.arange(xs.size) if calibration is None else np.asarray(calibration, dtype=int)
    cx, cy = xs[chosen], ys[chosen]
    slope = (
        float(stats.linregress(cx, cy).slope)
        if cx.size >= 2 and np.ptp(cx) > 0
        else 0.0
    )
    if min_slope is not None:
        slope = max(slope, min_slope)
    envelope = float(np.max(cy - slope * cx))
    intercept = envelope + margin * abs(envelope)
    violations = int(np.count_nonzero(ys > slope * xs + intercept + 1e-12))
    return UniformBound(
        slope=slope, intercept=intercept, violations=violations, margin=margin
    )

"""Holomorphic growth of ``F = sum_i (du/dx_i)^2`` for closed-form eigenfunctions.

Charts are complexified coordinatewise and the complex ball is the polydisc
``{|z_i - c_i| <= rho}``. By the maximum principle the sup of ``|F|`` over the
polydisc is attained on its distinguished boundary
``z_i = c_i + rho exp(i theta_i)``, which is what :func:`complex_sup` samples.
The chart scale ``rho`` defaults to 1; pass a smaller scale when the real
ball of radius ``2 rho`` would leave the chart.
"""

import math
from collections.abc import Sequence
from itertools import product

import numpy as np
from loguru import logger
from scipy.optimize import minimize
from scipy.special import factorial

from ._typing import ComplexArray, ComplexField, Field, FloatArray
from .errors import ConvergenceError, DegenerateFieldError, DomainError
from .fieldcalc import sup_over_chart_disc
from .geomeasure import critical_measure
from .manifolds import Point
from .spectra import EigenPair
from .toolkit import LabModel

MAX_TAYLOR_ORDER = 12
NORM_FLOOR = 1e-14


def F_field(pair: EigenPair) -> Field:
    """``F = sum_i |du/dx_i|^2`` from the raw chart partials."""
    return lambda x1, x2: np.sum(pair.partials_at(x1, x2) ** 2, axis=-1)


def complex_F_field(pair: EigenPair) -> ComplexField:
    """Holomorphic extension ``F(z) = sum_i (du/dz_i)^2``.

    Raises:
        UnsupportedFamilyError: The family has no closed-form continuation
            (raised on first evaluation).
    """

    def evaluate(z1: ComplexArray, z2: ComplexArray) -> ComplexArray:
        u1, u2 = pair.complex_partials(np.asarray(z1, complex), np.asarray(z2, complex))
        return np.asarray(u1 * u1 + u2 * u2, dtype=complex)

    return evaluate


def complex_sup(
    pair: EigenPair, chart_center: Point, complex_radius: float = 1.0, grid_n: int = 64
) -> float:
    """Sup of ``|F|`` over the complex polydisc of radius ``complex_radius``.

    The distinguished boundary is sampled on ``4 grid_n`` angles per
    coordinate; the best node is then polished with Nelder–Mead.

    Raises:
        UnsupportedFamilyError: Pairs without a closed-form continuation.
        DomainError: Nonpositive radius.
    """
    if complex_radius <= 0.0:
        raise DomainError(f"complex radius must be positive, got {complex_radius}")
    field = complex_F_field(pair)
    c1, c2 = chart_center.coords

    def modulus(t1: FloatArray, t2: FloatArray) -> FloatArray:
        z1 = c1 + complex_radius * np.exp(1j * t1)
        z2 = c2 + complex_radius * np.exp(1j * t2)
        return np.abs(field(z1, z2))

    count = 4 * grid_n
    angles = 2.0 * math.pi * np.arange(count) / count
    tt1, tt2 = np.meshgrid(angles, angles, indexing="ij")
    values = modulus(tt1.ravel(), tt2.ravel())
    best = int(np.argmax(values))
    start = np.array([tt1.ravel()[best], tt2.ravel()[best]])
    fit = minimize(
        lambda t: -float(modulus(np.array([t[0]]), np.array([t[1]]))[0]),
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14 * float(values[best]) + 1e-300},
    )
    return max(float(values[best]), -float(fit.fun))


class GrowthReport(LabModel):
    """Growth of ``F`` between a real half ball and the complex polydisc.

    Attributes:
        lam: Eigenvalue.
        center: Chart centre.
        chart_scale: Polydisc radius ``rho``.
        sup_complex: Sup of ``|F|`` over the polydisc of radius ``rho``.
        sup_real: Sup of ``F`` over the real disc of radius ``rho``.
        sup_real_half: Sup of ``F`` over the real disc of radius ``rho / 2``.
        alpha_growth: ``ln(sup_complex / sup_real_half)``.
        measured_measure: Critical-set length inside the disc of radius
            ``rho / 4`` when measured.
    """

    lam: float
    center: Point
    chart_scale: float
    sup_complex: float
    sup_real: float
    sup_real_half: float
    alpha_growth: float
    measured_measure: float | None = None


def growth_exponent(
    pair: EigenPair, chart_center: Point, chart_scale: float = 1.0, grid_n: int = 64
) -> GrowthReport:
    """Growth exponent of ``F`` around ``chart_center``.

    Raises:
        UnsupportedFamilyError: Pairs without a closed-form continuation.
        DegenerateFieldError: ``F`` numerically vanishes on the real half disc.
    """
    sup_complex = complex_sup(pair, chart_center, chart_scale, grid_n)
    real = F_field(pair)
    sup_real = sup_over_chart_disc(real, chart_center, chart_scale, grid_n)
    sup_half = sup_over_chart_disc(real, chart_center, 0.5 * chart_scale, grid_n)
    if sup_half < NORM_FLOOR:
        raise DegenerateFieldError(f"F vanishes on the real half disc ({sup_half:.3e})")
    alpha = math.log(sup_complex / sup_half)
    logger.debug(f"growth lam={pair.lambda_:.6g}: alpha={alpha:.6g}")
    return GrowthReport(
        lam=pair.lambda_,
        center=chart_center,
        chart_scale=chart_scale,
        sup_complex=sup_complex,
        sup_real=sup_real,
        sup_real_half=sup_half,
        alpha_growth=alpha,
    )


class DfRelation(LabModel):
    """Critical-set length against growth across a family.

    Attributes:
        reports: One growth report per member, with the measured length.
        ratios: ``measured_measure / alpha_growth`` per member.
        max_ratio: Largest ratio, the empirical constant.
    """

    reports: list[GrowthReport]
    ratios: list[float]
    max_ratio: float


def df_relation_check(
    family: Sequence[EigenPair],
    chart_center: Point,
    chart_scale: float = 1.0,
    grid_n: int = 256,
) -> DfRelation:
    """Measure the critical set in the quarter disc and compare with growth.

    Raises:
        DomainError: Empty family.
        UnsupportedFamilyError: A member without a closed-form continuation.
    """
    if not family:
        raise DomainError("empty family")
    reports = []
    ratios = []
    for pair in family:
        report = growth_exponent(pair, chart_center, chart_scale)
        estimate = critical_measure(
            pair, grid_n=grid_n, clip=(chart_center, 0.25 * chart_scale)
        )
        measure = estimate.extrapolated if estimate.verdict != "points" else 0.0
        reports.append(report.model_copy(update={"measured_measure": measure}))
        ratios.append(measure / report.alpha_growth if report.alpha_growth > 0 else 0.0)
    return DfRelation(reports=reports, ratios=ratios, max_ratio=max(ratios))


def multi_indices(order: int) -> list[tuple[int, int]]:
    """All ``beta`` with ``|beta| = order``."""
    return [(order - j, j) for j in range(order + 1)]


class TaylorReport(LabModel):
    """Smallest constant in the Taylor derivative bound.

    Attributes:
        minimal_constant: Smallest C with
            ``|D^beta u(c)| <= beta! C^|beta| sqrt(lam)^|beta| G`` for all
            ``1 <= |beta| <= max_order``.
        worst_beta: Multi-index that forces it.
        gradient_sup: ``G``, the sup of the chart gradient on the disc of
            radius ``c1 / sqrt(lam)``.
        max_order: Highest order checked.
    """

    minimal_constant: float
    worst_beta: tuple[int, int]
    gradient_sup: float
    max_order: int


def taylor_derivative_check(
    pair: EigenPair,
    max_order: int = 10,
    center: Point | None = None,
    c1: float = 1.0,
) -> TaylorReport:
    """Smallest constant making the Taylor derivative bound hold at ``center``.

    Raises:
        DomainError: ``max_order`` outside ``1..12``.
        UnsupportedFamilyError: Pairs without closed-form derivatives.
        DegenerateFieldError: The gradient vanishes on the shrunk disc.
    """
    if not 1 <= max_order <= MAX_TAYLOR_ORDER:
        raise DomainError(f"max_order must lie in 1..{MAX_TAYLOR_ORDER}, got {max_order}")
    center = center or Point(coords=(0.0, 0.0))
    root = math.sqrt(pair.lambda_)
    gradient = sup_over_chart_disc(
        lambda x1, x2: pair.partials_at(x1, x2), center, c1 / root
    )
    if gradient < NORM_FLOOR:
        raise DegenerateFieldError("gradient vanishes on the shrunk disc")
    best, worst = 0.0, (1, 0)
    for order in range(1, max_order + 1):
        for beta in multi_indices(order):
            derivative = abs(pair.taylor_coefficient(center, beta))
            scale = float(factorial(beta[0]) * factorial(beta[1])) * root**order * gradient
            needed = (derivative / scale) ** (1.0 / order)
            if needed > best:
                best, worst = needed, beta
    return TaylorReport(
        minimal_constant=best,
        worst_beta=worst,
        gradient_sup=gradient,
        max_order=max_order,
    )


def local_extension_ratio(
    pair: EigenPair, center: Point, c: float = 1.0, grid_n: int = 64
) -> float:
    """``ln`` of the complex-to-real sup ratio of F on balls of radius ``c / sqrt(lam)``.

    The polydisc has radius ``rho = c / sqrt(lam)`` and the real disc radius
    ``rho / 2``; the ratio stays bounded as lam grows.

    Raises:
        DegenerateFieldError: F vanishes on the real disc.
    """
    rho = c / math.sqrt(pair.lambda_)
    outer = complex_sup(pair, center, rho, grid_n)
    inner = sup_over_chart_disc(F_field(pair), center, 0.5 * rho, grid_n)
    if inner < NORM_FLOOR:
        raise DegenerateFieldError("F vanishes on the real disc")
    return math.log(outer / inner)


def vanishing_order(
    pair: EigenPair, center: Point, max_order: int = MAX_TAYLOR_ORDER, tol: float = 1e-9
) -> int:
    """Order of the first nonvanishing Taylor term of ``grad u`` at ``center``.

    A derivative ``D^beta u`` counts as nonzero when it exceeds
    ``tol * amplitude * sqrt(lam)^|beta|``; the closed-form modes have unit
    sup norm before scaling.

    Raises:
        ConvergenceError: Every term up to ``max_order`` vanishes.
    """
    root = math.sqrt(pair.lambda_)
    scale = max(abs(pair.amplitude), 1e-300)
    for order in range(1, max_order + 1):
        for beta in multi_indices(order):
            value = abs(pair.taylor_coefficient(center, beta))
            if value > tol * scale * root**order:
                return order - 1
    raise ConvergenceError(f"no nonvanishing Taylor term up to order {max_order}")


def growth_family(
    family: Sequence[EigenPair], centers: Sequence[Point], chart_scale: float = 1.0
) -> list[GrowthReport]:
    """Growth reports for every member and centre, in order."""
    return [
        growth_exponent(pair, center, chart_scale)
        for pair, center in product(family, centers)
    ]

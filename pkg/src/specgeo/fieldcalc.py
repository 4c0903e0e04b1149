"""Norms of scalar and vector fields over regions.

Fields are vectorized chart callables ``(x1, x2) -> values`` returning shape
(N,) for scalars or (N, k) for vectors; the pointwise magnitude of a vector
field is its Euclidean norm.
"""

import math

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar

from ._typing import Field, FloatArray, NormKind
from .errors import DomainError
from .manifolds import (
    Annulus,
    Ball,
    ModelSurface,
    Point,
    QuadratureRule,
    WholeSurface,
    exp_map,
    region_quadrature,
)
from .spectra import EigenPair
from .toolkit import central_difference

DEFAULT_ORDER = 32
_POLE_MARGIN = 0.05


def magnitude(values: FloatArray) -> FloatArray:
    """Pointwise magnitude of scalar (N,) or vector (N, k) samples."""
    values = np.asarray(values, dtype=float)
    if values.ndim >= 2:
        return np.sqrt(np.sum(values * values, axis=tuple(range(1, values.ndim))))
    return np.abs(values)


def l2_norm(field: Field, rule: QuadratureRule) -> float:
    """``(sum w |field|^2)^(1/2)`` on a prepared rule."""
    mag = magnitude(field(rule.x1, rule.x2))
    return math.sqrt(max(rule.integrate(mag * mag), 0.0))


def _refine_polar(
    field: Field,
    surface: ModelSurface,
    region: Ball | Annulus,
    rule: QuadratureRule,
    best: int,
) -> float:
    if rule.radii is None or rule.angles is None:
        raise DomainError("sup refinement needs a polar rule")
    lower, upper = region.radial_range
    r0, a0 = float(rule.radii[best]), float(rule.angles[best])
    dr = (upper - lower) / math.sqrt(rule.size)
    da = 2.0 * math.pi / math.sqrt(rule.size)

    def negative(r: float, a: float) -> float:
        x1, x2, _ = exp_map(surface, region.center, np.array([r]), np.array([a]))
        return -float(magnitude(field(x1, x2))[0])

    value = negative(r0, a0)
    for _ in range(2):
        fit_r = minimize_scalar(
            lambda r: negative(r, a0),
            bounds=(max(lower, r0 - dr), min(upper, r0 + dr)),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if fit_r.fun < value:
            r0, value = float(fit_r.x), float(fit_r.fun)
        fit_a = minimize_scalar(
            lambda a: negative(r0, a),
            bounds=(a0 - da, a0 + da),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if fit_a.fun < value:
            a0, value = float(fit_a.x), float(fit_a.fun)
    return -value


def _refine_chart(
    field: Field, rule: QuadratureRule, best: int, step: tuple[float, float]
) -> float:
    c1, c2 = float(rule.x1[best]), float(rule.x2[best])

    def negative(x1: float, x2: float) -> float:
        return -float(magnitude(field(np.array([x1]), np.array([x2])))[0])

    value = negative(c1, c2)
    for _ in range(2):
        fit = minimize_scalar(
            lambda t: negative(t, c2),
            bounds=(c1 - step[0], c1 + step[0]),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if fit.fun < value:
            c1, value = float(fit.x), float(fit.fun)
        fit = minimize_scalar(
            lambda t: negative(c1, t),
            bounds=(c2 - step[1], c2 + step[1]),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if fit.fun < value:
            c2, value = float(fit.x), float(fit.fun)
    return -value


def sup_norm(
    field: Field,
    surface: ModelSurface,
    region: Ball | Annulus | WholeSurface,
    rule: QuadratureRule,
) -> float:
    """Two-stage sup: max over the rule's nodes, then local refinement.

    The refinement runs bounded scalar searches around the best node, in
    ``(r, alpha)`` for polar rules and in chart coordinates otherwise. It
    never lowers the node maximum.
    """
    mag = magnitude(field(rule.x1, rule.x2))
    best = int(np.argmax(mag))
    coarse = float(mag[best])
    if isinstance(region, WholeSurface):
        length, period = surface.extent
        n = math.sqrt(rule.size)
        refined = _refine_chart(field, rule, best, (length / n, period / n))
    else:
        refined = _refine_polar(field, surface, region, rule, best)
    return max(coarse, refined)


def norm_over_region(
    field: Field,
    surface: ModelSurface,
    region: Ball | Annulus | WholeSurface,
    kind: NormKind = "l2",
    order: int = DEFAULT_ORDER,
) -> float:
    """Norm of a scalar or vector field over a region.

    Args:
        field: Vectorized chart field, scalar or vector valued.
        surface: Model surface carrying the region.
        region: Ball, annulus or the whole surface.
        kind: ``"l2"`` for the Riemannian L2 norm, ``"sup"`` for the sup norm.
        order: Quadrature order of the underlying rule.

    Returns:
        The requested norm.

    Raises:
        RegionError: Degenerate region or radius beyond the injectivity bound.
        DomainError: ``order < 1``.
    """
    rule = region_quadrature(surface, region, order)
    if kind == "l2":
        return l2_norm(field, rule)
    return sup_norm(field, surface, region, rule)


def sup_over_chart_disc(
    field: Field, center: Point, radius: float, grid_n: int = 64
) -> float:
    """Sup of ``|field|`` over the Euclidean chart disc ``|x - center| <= radius``.

    Used for statements that live in a coordinate chart rather than on
    geodesic balls. The disc is sampled on a polar grid of ``grid_n`` radii by
    ``4 grid_n`` angles and the best node is refined locally.
    """
    radii = radius * np.linspace(0.0, 1.0, grid_n + 1)
    angles = 2.0 * math.pi * np.arange(4 * grid_n) / (4 * grid_n)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")

    def at(r: FloatArray, a: FloatArray) -> FloatArray:
        return magnitude(field(center.x1 + r * np.cos(a), center.x2 + r * np.sin(a)))

    values = at(rr.ravel(), aa.ravel())
    best = int(np.argmax(values))
    r0, a0 = float(rr.ravel()[best]), float(aa.ravel()[best])
    dr, da = radius / grid_n, 2.0 * math.pi / (4 * grid_n)
    value = float(values[best])
    fit = minimize_scalar(
        lambda r: -float(at(np.array([r]), np.array([a0]))[0]),
        bounds=(max(0.0, r0 - dr), min(radius, r0 + dr)),
        method="bounded",
    )
    if -fit.fun > value:
        r0, value = float(fit.x), -float(fit.fun)
    fit = minimize_scalar(
        lambda a: -float(at(np.array([r0]), np.array([a]))[0]),
        bounds=(a0 - da, a0 + da),
        method="bounded",
    )
    return max(value, -float(fit.fun))


def _sample_points(
    pair: EigenPair, sample_count: int, seed: int
) -> tuple[FloatArray, FloatArray]:
    rng = np.random.default_rng(seed)
    length, period = pair.surface.extent
    margin = _POLE_MARGIN * length if pair.surface.has_poles else 0.0
    x1 = rng.uniform(margin, length - margin, sample_count)
    x2 = rng.uniform(0.0, period, sample_count)
    return x1, x2


def gradient_consistency_check(
    pair: EigenPair, sample_count: int = 1000, seed: int = 0
) -> float:
    """Max componentwise error of ``grad_at`` against central differences.

    Points are drawn uniformly in the chart, away from coordinate poles, and
    the difference quotients of ``value_at`` (step 1e-5) are converted to the
    orthonormal frame.
    """
    x1, x2 = _sample_points(pair, sample_count, seed)
    b, _ = pair.surface.warp(x1)
    fd = np.stack(
        [
            central_difference(pair.value_at, x1, x2, 0) / pair.surface.scale,
            central_difference(pair.value_at, x1, x2, 1) / b,
        ],
        axis=-1,
    )
    error = float(np.max(np.abs(pair.grad_at(x1, x2) - fd)))
    logger.debug(f"gradient consistency over {sample_count} points: {error:.3e}")
    return error


def hessian_consistency_check(
    pair: EigenPair, sample_count: int = 1000, seed: int = 0
) -> float:
    """Max entry error of ``hess_at`` against central differences of ``grad_at``.

    In the orthonormal frame of a warped product the covariant Hessian is
    ``h11 = d1 g1 / a``, ``h12 = d1 g2 / a`` and
    ``h22 = d2 g2 / b + b' g1 / (a b)``.
    """
    x1, x2 = _sample_points(pair, sample_count, seed)
    a = pair.surface.scale
    b, db = pair.surface.warp(x1)

    def component(index: int) -> Field:
        return lambda y1, y2: pair.grad_at(y1, y2)[..., index]

    g1 = pair.grad_at(x1, x2)[..., 0]
    h11 = central_difference(component(0), x1, x2, 0) / a
    h12 = central_difference(component(1), x1, x2, 0) / a
    h22 = central_difference(component(1), x1, x2, 1) / b + db * g1 / (a * b)
    hess = pair.hess_at(x1, x2)
    error = max(
        float(np.max(np.abs(hess[..., 0, 0] - h11))),
        float(np.max(np.abs(hess[..., 0, 1] - h12))),
        float(np.max(np.abs(hess[..., 1, 0] - h12))),
        float(np.max(np.abs(hess[..., 1, 1] - h22))),
    )
    logger.debug(f"hessian consistency over {sample_count} points: {error:.3e}")
    return error

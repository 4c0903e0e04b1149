"""Unique-continuation experiments on eigenfunction gradients.

Three-sphere inequality, gradient doubling, global and annular lower bounds,
the interior elliptic estimate for ``V = grad u`` and the residual of the
eigenvector system on flat charts. Every reported quantity is a ratio of
norms or a log-combination with exponents summing to one, so it is invariant
under ``u -> c u``.
"""

import math
from collections.abc import Sequence

import numpy as np
from loguru import logger

from ._typing import Field, FloatArray, NormKind
from .carleman import WeightParams, phi
from .errors import DegenerateFieldError, DomainError, UnsupportedFamilyError
from .fieldcalc import DEFAULT_ORDER, norm_over_region
from .manifolds import Annulus, Ball, FlatTorus, ModelSurface, Point, WholeSurface
from .spectra import EigenPair
from .toolkit import LabModel, halton_points, second_derivative

NORM_FLOOR = 1e-14


class AlphaReport(LabModel):
    """``A_R = phi(R/4) - phi(R)``, ``B_R = phi(R) - phi(3R/2)`` and ``alpha``."""

    radius: float
    a_r: float
    b_r: float
    alpha: float


def alpha_from_weight(params: WeightParams, radius: float) -> AlphaReport:
    """Three-sphere exponent ``alpha = A_R / (A_R + B_R)`` from the weight.

    Raises:
        DomainError: ``radius`` outside ``(0, exp(t0))``.
    """
    if not 0.0 < radius < params.max_radius:
        raise DomainError(
            f"radius {radius:.6g} outside (0, exp(t0) = {params.max_radius:.6g})"
        )
    values = phi(params, np.array([0.25 * radius, radius, 1.5 * radius]))
    a_r = float(values[0] - values[1])
    b_r = float(values[1] - values[2])
    return AlphaReport(radius=radius, a_r=a_r, b_r=b_r, alpha=a_r / (a_r + b_r))


class WeightBounds(LabModel):
    """Observed range of ``A_R`` and ``B_R`` over a radius grid."""

    a_min: float
    a_max: float
    b_min: float
    b_max: float
    alpha_min: float
    alpha_max: float

    @property
    def positive(self) -> bool:
        """``A_R > 0`` and ``B_R > 0`` on the whole grid."""
        return self.a_min > 0.0 and self.b_min > 0.0


def weight_alpha_bounds(params: WeightParams, radii: Sequence[float]) -> WeightBounds:
    """Bounds of ``A_R``, ``B_R`` and ``alpha`` observed over ``radii``."""
    if not radii:
        raise DomainError("empty radius grid")
    reports = [alpha_from_weight(params, r) for r in radii]
    a = [rep.a_r for rep in reports]
    b = [rep.b_r for rep in reports]
    alphas = [rep.alpha for rep in reports]
    return WeightBounds(
        a_min=min(a),
        a_max=max(a),
        b_min=min(b),
        b_max=max(b),
        alpha_min=min(alphas),
        alpha_max=max(alphas),
    )


def gradient_field(pair: EigenPair) -> Field:
    """``V = grad u`` in the orthonormal frame."""
    return pair.grad_at


def hessian_field(pair: EigenPair) -> Field:
    """``grad V``, the covariant Hessian flattened to 4 components."""
    return lambda x1, x2: pair.hess_at(x1, x2).reshape(*np.shape(x1), 4)


def _gradient_norm(
    pair: EigenPair,
    region: Ball | Annulus | WholeSurface,
    kind: NormKind = "l2",
    order: int = DEFAULT_ORDER,
) -> float:
    value = norm_over_region(gradient_field(pair), pair.surface, region, kind, order)
    if value < NORM_FLOOR:
        raise DegenerateFieldError(
            f"gradient norm {value:.3e} below {NORM_FLOOR:g} on {region.kind}"
        )
    return value


def three_sphere_exponent(
    norms: tuple[float, float, float], alpha: float
) -> tuple[float, float]:
    """Log-combinations of the norms at ``R/2``, ``R`` and ``2R``.

    Returns:
        ``ln N_R - alpha ln N_{R/2} - (1 - alpha) ln N_{2R}`` and the swapped
        orientation with ``alpha`` on ``N_{2R}``.
    """
    half, mid, double = (math.log(n) for n in norms)
    statement = mid - alpha * half - (1.0 - alpha) * double
    swapped = mid - (1.0 - alpha) * half - alpha * double
    return statement, swapped


class ThreeSphereReport(LabModel):
    """Three-sphere check at one centre and radius.

    Attributes:
        center: Ball centre.
        radius: Middle radius R.
        alpha: Exponent ``A_R / (A_R + B_R)``.
        a_r: ``phi(R/4) - phi(R)``.
        b_r: ``phi(R) - phi(3R/2)``.
        norms: Gradient L2 norms on ``B_{R/2}``, ``B_R`` and ``B_{2R}``.
        lam: Eigenvalue.
        required_c: Log-combination over ``sqrt(lam)``, alpha on ``B_{R/2}``.
        required_c_swapped: Same with alpha on ``B_{2R}``.
    """

    center: Point
    radius: float
    alpha: float
    a_r: float
    b_r: float
    norms: tuple[float, float, float]
    lam: float
    required_c: float
    required_c_swapped: float


def three_sphere_check(
    pair: EigenPair,
    center: Point,
    radius: float,
    params: WeightParams,
    order: int = DEFAULT_ORDER,
) -> ThreeSphereReport:
    """Evaluate the three-sphere inequality for ``grad u``.

    Raises:
        RegionError: ``2 radius`` beyond the injectivity bound.
        DomainError: ``radius`` outside ``(0, exp(t0))``.
        DegenerateFieldError: A gradient norm below 1e-14.
    """
    weights = alpha_from_weight(params, radius)
    norms = (
        _gradient_norm(pair, Ball(center=center, radius=0.5 * radius), order=order),
        _gradient_norm(pair, Ball(center=center, radius=radius), order=order),
        _gradient_norm(pair, Ball(center=center, radius=2.0 * radius), order=order),
    )
    statement, swapped = three_sphere_exponent(norms, weights.alpha)
    root = math.sqrt(pair.lambda_)
    return ThreeSphereReport(
        center=center,
        radius=radius,
        alpha=weights.alpha,
        a_r=weights.a_r,
        b_r=weights.b_r,
        norms=norms,
        lam=pair.lambda_,
        required_c=statement / root,
        required_c_swapped=swapped / root,
    )


class DoublingReport(LabModel):
    """``ln(||grad u||_{B_2r} / ||grad u||_{B_r})`` at one centre and radius."""

    center: Point
    radius: float
    norm_kind: NormKind
    index: float
    lam: float


def doubling_index(
    pair: EigenPair,
    center: Point,
    radius: float,
    kind: NormKind = "l2",
    order: int = DEFAULT_ORDER,
) -> DoublingReport:
    """Doubling index of the gradient.

    Raises:
        RegionError: ``2 radius`` beyond the injectivity bound.
        DegenerateFieldError: Inner norm below 1e-14.
    """
    inner = _gradient_norm(pair, Ball(center=center, radius=radius), kind, order)
    outer = norm_over_region(
        gradient_field(pair), pair.surface, Ball(center=center, radius=2.0 * radius), kind, order
    )
    return DoublingReport(
        center=center,
        radius=radius,
        norm_kind=kind,
        index=math.log(outer / inner),
        lam=pair.lambda_,
    )


class DoublingSweep(LabModel):
    """Maximum doubling index over a sweep and where it is attained."""

    max_index: float
    center: Point
    radius: float
    norm_kind: NormKind
    lam: float
    evaluated: int


def doubling_sweep(
    pair: EigenPair,
    centers: Sequence[Point],
    radii: Sequence[float],
    kind: NormKind = "l2",
    order: int = DEFAULT_ORDER,
) -> DoublingSweep:
    """Max doubling index over ``centers x radii``.

    Ties resolve to the lexicographically smallest ``(center, radius)``, so
    the result does not depend on the sweep order.

    Raises:
        DomainError: Empty sweep.
    """
    if not centers or not radii:
        raise DomainError("doubling sweep needs centers and radii")
    best: DoublingReport | None = None
    for center in centers:
        for radius in radii:
            report = doubling_index(pair, center, radius, kind, order)
            if best is None or (report.index, _neg_key(report)) > (
                best.index,
                _neg_key(best),
            ):
                best = report
    if best is None:
        raise DomainError("doubling sweep needs centers and radii")
    logger.debug(
        f"doubling sweep lam={pair.lambda_:.6g} ({kind}): max index {best.index:.6g} "
        f"at {best.center.coords} r={best.radius:g}"
    )
    return DoublingSweep(
        max_index=best.index,
        center=best.center,
        radius=best.radius,
        norm_kind=kind,
        lam=pair.lambda_,
        evaluated=len(centers) * len(radii),
    )


def _neg_key(report: DoublingReport) -> tuple[float, float, float]:
    return (-report.center.x1, -report.center.x2, -report.radius)


def sweep_centers(
    pair: EigenPair, count: int, seed: int, margin: float = 0.0
) -> list[Point]:
    """Low-discrepancy centres plus the pair's closed-form critical centres.

    ``margin`` keeps the sampled centres that far (in x1) from coordinate
    poles. Critical centres closer than ``margin`` to a pole are dropped.
    """
    length, period = pair.surface.extent
    lo = margin if pair.surface.has_poles else 0.0
    hi = length - lo
    raw = halton_points(count, (lo, 0.0), (hi, period), seed)
    centers = [Point(coords=(float(a), float(b))) for a, b in raw]
    for point in pair.critical_centers():
        if lo <= point.x1 <= hi:
            centers.append(point)
    return centers


class LowerBoundReport(LabModel):
    """Smallest ``||grad u||_{B_R} / ||grad u||_{L2(M)}`` over a centre grid.

    Attributes:
        radius: Ball radius R.
        min_ratio: Minimum ratio.
        center: Centre attaining it.
        lam: Eigenvalue.
        exponent: ``-ln(min_ratio) / sqrt(lam)``.
    """

    radius: float
    min_ratio: float
    center: Point
    lam: float
    exponent: float


def global_lower_bound_check(
    pair: EigenPair,
    radius: float,
    centers: Sequence[Point],
    order: int = DEFAULT_ORDER,
) -> LowerBoundReport:
    """Minimum local-to-global gradient norm ratio over ``centers``.

    Raises:
        DomainError: Empty centre grid.
        RegionError: Radius beyond the injectivity bound.
    """
    if not centers:
        raise DomainError("empty centre grid")
    total = _gradient_norm(pair, WholeSurface(), order=order)
    ratios = [
        norm_over_region(
            gradient_field(pair), pair.surface, Ball(center=c, radius=radius), "l2", order
        )
        / total
        for c in centers
    ]
    index = int(np.argmin(ratios))
    best = ratios[index]
    return LowerBoundReport(
        radius=radius,
        min_ratio=best,
        center=centers[index],
        lam=pair.lambda_,
        exponent=-math.log(best) / math.sqrt(pair.lambda_),
    )


def annulus_lower_bound_check(
    pair: EigenPair, radius: float, center: Point, order: int = DEFAULT_ORDER
) -> float:
    """``||grad u||`` on the annulus ``R/8 <= r <= R/4`` over ``||grad u||_{L2(M)}``."""
    total = _gradient_norm(pair, WholeSurface(), order=order)
    region = Annulus(center=center, inner=radius / 8.0, outer=radius / 4.0)
    return norm_over_region(gradient_field(pair), pair.surface, region, "l2", order) / total


def elliptic_gradient_check(
    pair: EigenPair,
    center: Point,
    radius: float,
    a: float,
    order: int = DEFAULT_ORDER,
) -> float:
    """Constant required by the interior estimate for ``V = grad u``.

    Returns ``||grad V||_{B_{(1-a)R}} / [(1/((1-a)R) + sqrt(lam)) ||V||_{B_R}]``.

    Raises:
        DomainError: ``a`` outside (0, 1).
        DegenerateFieldError: ``||V||_{B_R}`` below 1e-14.
    """
    if not 0.0 < a < 1.0:
        raise DomainError(f"shrink factor must lie in (0, 1), got {a}")
    inner_radius = (1.0 - a) * radius
    v_norm = _gradient_norm(pair, Ball(center=center, radius=radius), order=order)
    dv_norm = norm_over_region(
        hessian_field(pair), pair.surface, Ball(center=center, radius=inner_radius), "l2", order
    )
    scale = 1.0 / inner_radius + math.sqrt(pair.lambda_)
    return dv_norm / (scale * v_norm)


def eigen_system_residual(
    pair: EigenPair,
    surface: ModelSurface | None = None,
    sample_count: int = 200,
    seed: int = 0,
) -> float:
    """Max of ``|Delta V + lam V|`` over random chart points, flat charts only.

    On the flat torus the commutator terms of the system for ``V = grad u``
    vanish, so ``V`` itself solves the eigenvalue equation componentwise.

    Raises:
        UnsupportedFamilyError: Any surface other than the flat torus.
    """
    surface = surface or pair.surface
    if not isinstance(surface, FlatTorus):
        raise UnsupportedFamilyError(
            f"eigenvector system residual needs a flat chart, got {surface.kind}"
        )
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(0.0, surface.periods[0], sample_count)
    x2 = rng.uniform(0.0, surface.periods[1], sample_count)
    worst = 0.0
    for index in range(2):

        def component(y1: FloatArray, y2: FloatArray, i: int = index) -> FloatArray:
            return pair.grad_at(y1, y2)[..., i]

        lap = second_derivative(component, x1, x2, 0) + second_derivative(
            component, x1, x2, 1
        )
        residual = np.abs(lap + pair.lambda_ * component(x1, x2))
        worst = max(worst, float(np.max(residual)))
    return worst

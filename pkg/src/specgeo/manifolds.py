"""Model analytic surfaces, geodesic balls and their quadrature rules.

Every surface is a warped product in its chart: the metric reads
``a^2 dx1^2 + b(x1)^2 dx2^2`` with ``a`` constant, which covers the flat torus
``(a, b) = (1, 1)``, the round sphere ``(R, R sin x1)`` and surfaces of
revolution ``(1, rho(x1))``. Regions are geodesic balls and annuli described
in geodesic polar coordinates around their centre; quadrature weights include
the polar volume factor, so ``sum(w * f(nodes))`` approximates the Riemannian
integral of ``f``.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import Annotated, Literal

import numpy as np
from loguru import logger
from pydantic import Field as PydanticField
from pydantic import PositiveFloat, model_validator
from scipy import optimize
from scipy.integrate import solve_ivp

from ._typing import FloatArray
from .errors import DomainError, RegionError, UnsupportedFamilyError
from .toolkit import LabModel, wrap_centered, wrap_periodic

TWO_PI = 2.0 * math.pi
_POLE_TOL = 1e-12


class Point(LabModel):
    """A chart point, coordinates in radians (or arclength for revolutions)."""

    coords: tuple[float, float]

    @property
    def x1(self) -> float:
        """First chart coordinate."""
        return self.coords[0]

    @property
    def x2(self) -> float:
        """Second chart coordinate."""
        return self.coords[1]


class _Surface(LabModel, ABC):
    """Shared behaviour of the model surfaces."""

    @property
    @abstractmethod
    def has_poles(self) -> bool:
        """Whether ``b(x1)`` vanishes at the ends of the x1 range."""

    @property
    @abstractmethod
    def extent(self) -> tuple[float, float]:
        """Chart ranges: x1 in [0, extent[0]], x2 in [0, extent[1])."""

    @property
    @abstractmethod
    def scale(self) -> float:
        """Constant metric factor ``a`` of the first coordinate."""

    @abstractmethod
    def warp(self, x1: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Return ``b(x1)`` and ``b'(x1)``."""

    @abstractmethod
    def injectivity_bound(self) -> float:
        """Radius below which geodesic balls are embedded."""

    @abstractmethod
    def total_area(self) -> float:
        """Riemannian area of the whole surface."""

    @abstractmethod
    def polar_jacobian(self, r: FloatArray) -> FloatArray:
        """Closed-form polar volume factor J(r), when rotationally uniform."""

    def normalize(self, x1: FloatArray, x2: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Reduce chart coordinates to the fundamental domain."""
        length, period = self.extent
        if not self.has_poles:
            return wrap_periodic(x1, length), wrap_periodic(x2, period)
        # reflect through the poles: (x1, x2) ~ (-x1, x2 + pi) ~ (2L - x1, x2 + pi)
        y1 = np.mod(x1, 2.0 * length)
        flip = y1 > length
        y1 = np.where(flip, 2.0 * length - y1, y1)
        y2 = np.where(flip, x2 + 0.5 * period, x2)
        return y1, wrap_periodic(y2, period)

    def volume_element(self, x1: FloatArray) -> FloatArray:
        """Chart volume element ``a * b(x1)``."""
        return self.scale * self.warp(x1)[0]

    def check_point(self, point: Point) -> None:
        """Reject a colatitude outside ``[0, extent[0]]`` on surfaces with poles.

        Raises:
            DomainError: The point leaves the chart.
        """
        if self.has_poles and not 0.0 <= point.x1 <= self.extent[0]:
            raise DomainError(
                f"colatitude {point.x1:.6g} outside [0, {self.extent[0]:.6g}] on {type(self).__name__}"
            )

    def is_pole(self, x1: float) -> bool:
        """Whether ``x1`` is a coordinate pole."""
        return self.has_poles and (
            abs(x1) < _POLE_TOL or abs(x1 - self.extent[0]) < _POLE_TOL
        )


class FlatTorus(_Surface):
    """Flat torus with the given periods."""

    kind: Literal["torus"] = "torus"
    periods: tuple[PositiveFloat, PositiveFloat] = (TWO_PI, TWO_PI)

    @property
    def has_poles(self) -> bool:
        return False

    @property
    def extent(self) -> tuple[float, float]:
        return self.periods

    @property
    def scale(self) -> float:
        return 1.0

    def warp(self, x1: FloatArray) -> tuple[FloatArray, FloatArray]:
        ones = np.ones_like(np.asarray(x1, dtype=float))
        return ones, 0.0 * ones

    def injectivity_bound(self) -> float:
        return 0.5 * min(self.periods)

    def total_area(self) -> float:
        return self.periods[0] * self.periods[1]

    def polar_jacobian(self, r: FloatArray) -> FloatArray:
        return np.asarray(r, dtype=float)


class Sphere(_Surface):
    """Round sphere in (colatitude, longitude) coordinates."""

    kind: Literal["sphere"] = "sphere"
    radius: PositiveFloat = 1.0

    @property
    def has_poles(self) -> bool:
        return True

    @property
    def extent(self) -> tuple[float, float]:
        return (math.pi, TWO_PI)

    @property
    def scale(self) -> float:
        return self.radius

    def warp(self, x1: FloatArray) -> tuple[FloatArray, FloatArray]:
        x1 = np.asarray(x1, dtype=float)
        return self.radius * np.sin(x1), self.radius * np.cos(x1)

    def injectivity_bound(self) -> float:
        return math.pi * self.radius

    def total_area(self) -> float:
        return 4.0 * math.pi * self.radius**2

    def polar_jacobian(self, r: FloatArray) -> FloatArray:
        return self.radius * np.sin(np.asarray(r, dtype=float) / self.radius)


class Revolution(_Surface):
    """Surface of revolution with profile ``rho(s) = sin s (1 + b sin^2 s)``.

    The arclength ``s`` runs over [0, pi]; the profile is odd about both ends
    with unit slope there, so both poles are smooth. ``bulge = 0`` is the unit
    round sphere.
    """

    kind: Literal["revolution"] = "revolution"
    bulge: float = PydanticField(default=0.0, gt=-1.0)

    @property
    def has_poles(self) -> bool:
        return True

    @property
    def extent(self) -> tuple[float, float]:
        return (math.pi, TWO_PI)

    @property
    def scale(self) -> float:
        return 1.0

    def profile(self, s: FloatArray) -> FloatArray:
        """Profile rho(s)."""
        sn = np.sin(s)
        return sn * (1.0 + self.bulge * sn**2)

    def profile_derivative(self, s: FloatArray) -> FloatArray:
        """First derivative rho'(s)."""
        return np.cos(s) * (1.0 + 3.0 * self.bulge * np.sin(s) ** 2)

    def curvature(self, s: FloatArray) -> FloatArray:
        """Gaussian curvature ``-rho''/rho``, written without the 0/0 at poles."""
        sn2, cs2 = np.sin(s) ** 2, np.cos(s) ** 2
        b = self.bulge
        return (1.0 - 6.0 * b * cs2 + 3.0 * b * sn2) / (1.0 + b * sn2)

    def warp(self, x1: FloatArray) -> tuple[FloatArray, FloatArray]:
        x1 = np.asarray(x1, dtype=float)
        return self.profile(x1), self.profile_derivative(x1)

    def injectivity_bound(self) -> float:
        s = np.linspace(0.0, math.pi, 2001)
        k_max = float(np.max(self.curvature(s)))
        conjugate = math.pi / math.sqrt(k_max) if k_max > 0 else math.inf
        return 0.5 * min(conjugate, math.pi)

    def total_area(self) -> float:
        return TWO_PI * (2.0 + 4.0 * self.bulge / 3.0)

    def polar_jacobian(self, r: FloatArray) -> FloatArray:
        raise DomainError("revolution surfaces have no closed-form polar jacobian")


ModelSurface = Annotated[
    FlatTorus | Sphere | Revolution, PydanticField(discriminator="kind")
]
"""Any of the model surfaces."""


class Ball(LabModel):
    """Geodesic ball."""

    kind: Literal["ball"] = "ball"
    center: Point
    radius: float

    @property
    def radial_range(self) -> tuple[float, float]:
        """Geodesic radii covered by the region."""
        return (0.0, self.radius)


class Annulus(LabModel):
    """Geodesic annulus ``inner <= r <= outer``."""

    kind: Literal["annulus"] = "annulus"
    center: Point
    inner: float
    outer: float

    @model_validator(mode="after")
    def _check_order(self) -> "Annulus":
        if not 0.0 < self.inner < self.outer:
            raise RegionError(
                f"annulus needs 0 < inner < outer, got {self.inner}, {self.outer}"
            )
        return self

    @property
    def radial_range(self) -> tuple[float, float]:
        """Geodesic radii covered by the region."""
        return (self.inner, self.outer)


class WholeSurface(LabModel):
    """The whole surface."""

    kind: Literal["whole"] = "whole"


Region = Annotated[Ball | Annulus | WholeSurface, PydanticField(discriminator="kind")]
"""Integration domain."""


class QuadratureRule(LabModel):
    """Positive quadrature rule over a region.

    Attributes:
        x1: First chart coordinate of each node.
        x2: Second chart coordinate of each node.
        weights: Positive weights, volume element included.
        radii: Geodesic radius of each node (polar rules only).
        angles: Polar angle of each node (polar rules only).
    """

    x1: FloatArray
    x2: FloatArray
    weights: FloatArray
    radii: FloatArray | None = None
    angles: FloatArray | None = None

    @property
    def size(self) -> int:
        """Number of nodes."""
        return int(self.weights.size)

    def points(self) -> list[Point]:
        """Nodes as chart points."""
        return [Point(coords=(float(a), float(b))) for a, b in zip(self.x1, self.x2, strict=True)]

    def integrate(self, values: FloatArray) -> float:
        """Apply the rule to sampled integrand values."""
        return float(np.dot(self.weights, values))


def validate_region(surface: ModelSurface, region: Ball | Annulus | WholeSurface) -> None:
    """Check a region against the surface's injectivity bound.

    Raises:
        RegionError: Nonpositive radius or radius beyond the injectivity bound.
        DomainError: Centre outside the chart.
    """
    if isinstance(region, WholeSurface):
        return
    surface.check_point(region.center)
    outer = region.radial_range[1]
    if outer <= 0.0:
        raise RegionError(f"degenerate region radius {outer}")
    bound = surface.injectivity_bound()
    if outer >= bound:
        raise RegionError(
            f"region radius {outer:.6g} exceeds injectivity bound {bound:.6g}"
        )


def _sphere_exp(
    surface: Sphere, center: Point, r: FloatArray, alpha: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    # rotated chart: the polar frame sits at the centre, so no node sits on a pole
    th, ph = center.coords
    c = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
    e1 = np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), -math.sin(th)])
    e2 = np.array([-math.sin(ph), math.cos(ph), 0.0])
    ang = np.asarray(r, dtype=float) / surface.radius
    ca, sa = np.cos(ang), np.sin(ang)
    direction = np.cos(alpha)[..., None] * e1 + np.sin(alpha)[..., None] * e2
    xyz = ca[..., None] * c + sa[..., None] * direction
    theta = np.arctan2(np.hypot(xyz[..., 0], xyz[..., 1]), xyz[..., 2])
    phi = wrap_periodic(np.arctan2(xyz[..., 1], xyz[..., 0]), TWO_PI)
    return theta, phi, surface.polar_jacobian(r)


def _geodesic_rhs(
    surface: Revolution, count: int
) -> Callable[[float, FloatArray], FloatArray]:
    def rhs(_t: float, y: FloatArray) -> FloatArray:
        s, _phi, ds, dphi, jac, djac = y.reshape(6, count)
        rho = surface.profile(s)
        drho = surface.profile_derivative(s)
        return np.concatenate(
            [
                ds,
                dphi,
                rho * drho * dphi**2,
                -2.0 * drho / rho * ds * dphi,
                djac,
                -surface.curvature(s) * jac,
            ]
        )

    return rhs


def _revolution_shoot(
    surface: Revolution, center: Point, alphas: FloatArray, radii: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Integrate geodesics and Jacobi fields from ``center`` along ``alphas``.

    Returns arrays of shape (len(radii), len(alphas)).
    """
    s0, phi0 = center.coords
    count = alphas.size
    rho0 = float(surface.profile(np.asarray(s0)))
    y0 = np.concatenate(
        [
            np.full(count, s0),
            np.full(count, phi0),
            np.cos(alphas),
            np.sin(alphas) / rho0,
            np.zeros(count),
            np.ones(count),
        ]
    )
    order = np.argsort(radii)
    t_eval = radii[order]
    sol = solve_ivp(
        _geodesic_rhs(surface, count),
        (0.0, float(t_eval[-1])),
        y0,
        t_eval=t_eval,
        rtol=1e-11,
        atol=1e-12,
        method="DOP853",
    )
    if not sol.success:
        raise RegionError(f"geodesic integration failed: {sol.message}")
    states = np.empty((6, radii.size, count))
    states[:, order, :] = sol.y.reshape(6, count, -1).transpose(0, 2, 1)
    return states[0], states[1], states[4]


def _revolution_exp(
    surface: Revolution, center: Point, r: FloatArray, alpha: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    s0, phi0 = center.coords
    r = np.asarray(r, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if surface.is_pole(s0):
        # geodesic polar coordinates around a pole are the chart itself
        north = abs(s0) < _POLE_TOL
        s = r if north else math.pi - r
        phi = phi0 + alpha if north else phi0 - alpha
        return s, wrap_periodic(phi, TWO_PI), surface.profile(s)
    r_max = float(np.max(r))
    if s0 - r_max <= 0.0 or s0 + r_max >= math.pi:
        raise RegionError(
            "revolution regions must avoid the poles unless centred on one"
        )
    r_b, a_b = np.broadcast_arrays(r, alpha)
    uniq_a, inv_a = np.unique(a_b.ravel(), return_inverse=True)
    uniq_r, inv_r = np.unique(r_b.ravel(), return_inverse=True)
    radii = np.where(uniq_r > 0.0, uniq_r, 1e-300)
    s, phi, jac = _revolution_shoot(surface, center, uniq_a, radii)
    pick = (inv_r, inv_a)
    return (
        s[pick].reshape(r_b.shape),
        wrap_periodic(phi[pick], TWO_PI).reshape(r_b.shape),
        jac[pick].reshape(r_b.shape),
    )


def exp_map(
    surface: ModelSurface, center: Point, r: FloatArray, alpha: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Geodesic polar coordinates ``(r, alpha)`` around ``center`` to the chart.

    The polar angle is measured from the first chart direction.

    Args:
        surface: Model surface.
        center: Pole of the polar coordinates.
        r: Geodesic radii (broadcast against ``alpha``).
        alpha: Polar angles.

    Returns:
        Chart coordinates x1, x2 and the polar volume factor J(r, alpha), so
        that the area element is ``J dr dalpha``.

    Raises:
        DomainError: Centre outside the chart.
    """
    surface.check_point(center)
    r = np.asarray(r, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if isinstance(surface, FlatTorus):
        x1 = wrap_periodic(center.x1 + r * np.cos(alpha), surface.periods[0])
        x2 = wrap_periodic(center.x2 + r * np.sin(alpha), surface.periods[1])
        x1, x2 = np.broadcast_arrays(x1, x2)
        return x1, x2, np.broadcast_to(r, x1.shape).astype(float)
    if isinstance(surface, Sphere):
        return _sphere_exp(surface, center, r, alpha)
    return _revolution_exp(surface, center, r, alpha)


def log_map(
    surface: ModelSurface, center: Point, x1: FloatArray, x2: FloatArray
) -> tuple[FloatArray, FloatArray]:
    """Inverse of :func:`exp_map`: chart points to ``(r, alpha)`` around ``center``.

    Raises:
        UnsupportedFamilyError: Surfaces of revolution (no closed-form inverse).
        DomainError: Centre outside the chart.
    """
    surface.check_point(center)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if isinstance(surface, FlatTorus):
        d1 = wrap_centered(x1 - center.x1, surface.periods[0])
        d2 = wrap_centered(x2 - center.x2, surface.periods[1])
        return np.hypot(d1, d2), wrap_periodic(np.arctan2(d2, d1), TWO_PI)
    if isinstance(surface, Sphere):
        th, ph = center.coords
        c = _unit_vector(center)
        e1 = np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), -math.sin(th)])
        e2 = np.array([-math.sin(ph), math.cos(ph), 0.0])
        p = np.stack(
            [np.sin(x1) * np.cos(x2), np.sin(x1) * np.sin(x2), np.cos(x1)], axis=-1
        )
        along = p @ c
        t1, t2 = p @ e1, p @ e2
        r = surface.radius * np.arctan2(np.hypot(t1, t2), along)
        return r, wrap_periodic(np.arctan2(t2, t1), TWO_PI)
    raise UnsupportedFamilyError("revolution surfaces have no closed-form log map")


def _revolution_distance(surface: Revolution, p: Point, q: Point) -> float:
    (s1, f1), (s2, f2) = p.coords, q.coords
    if surface.is_pole(s1) or surface.is_pole(s2):
        # meridians through a pole are minimizing
        return abs(s2 - s1)
    dphi = float(wrap_centered(np.asarray(f2 - f1), TWO_PI))
    if abs(dphi) < 1e-15:
        return abs(s2 - s1)
    rho_mid = float(surface.profile(np.asarray(0.5 * (s1 + s2))))
    guess_len = math.hypot(s2 - s1, rho_mid * dphi)
    guess_dir = math.atan2(rho_mid * dphi, s2 - s1)
    rho_q = float(surface.profile(np.asarray(s2)))

    def residual(v: FloatArray) -> FloatArray:
        s, phi, _ = _revolution_shoot(
            surface, p, np.array([v[0]]), np.array([max(v[1], 1e-12)])
        )
        return np.array(
            [s[0, 0] - s2, rho_q * float(wrap_centered(phi[0, 0] - f2, TWO_PI))]
        )

    fit = optimize.least_squares(
        residual, x0=np.array([guess_dir, guess_len]), xtol=1e-14, ftol=1e-14
    )
    if np.max(np.abs(fit.fun)) > 1e-8:
        logger.warning(f"geodesic shooting residual {np.max(np.abs(fit.fun)):.2e}")
    return float(fit.x[1])


def geodesic_distance(surface: ModelSurface, p: Point, q: Point) -> float:
    """Riemannian distance between two chart points.

    Closed form on the torus (wrapped Euclidean) and the sphere (great
    circle); on surfaces of revolution the geodesic is found by shooting
    along the geodesic equations.
    """
    surface.check_point(p)
    surface.check_point(q)
    if p.coords == q.coords:
        return 0.0
    if isinstance(surface, FlatTorus):
        d1 = wrap_centered(np.asarray(q.x1 - p.x1), surface.periods[0])
        d2 = wrap_centered(np.asarray(q.x2 - p.x2), surface.periods[1])
        return float(np.hypot(d1, d2))
    if isinstance(surface, Sphere):
        u = _unit_vector(p)
        v = _unit_vector(q)
        return surface.radius * math.atan2(
            float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v))
        )
    # keep d(p, q) == d(q, p) exactly by shooting from a canonical endpoint
    first, second = sorted((p, q), key=lambda pt: pt.coords)
    return _revolution_distance(surface, first, second)


def _unit_vector(p: Point) -> FloatArray:
    th, ph = p.coords
    return np.array(
        [math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)]
    )


def _gauss(nodes: int, lower: float, upper: float) -> tuple[FloatArray, FloatArray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (upper - lower)
    return lower + half * (x + 1.0), half * w


def region_quadrature(
    surface: ModelSurface, region: Ball | Annulus | WholeSurface, order: int
) -> QuadratureRule:
    """Polar tensor-product rule over a geodesic ball or annulus.

    Radial Gauss–Legendre with ``2 * order`` nodes times an angular trapezoid
    rule with ``4 * order`` nodes, centred at the region's centre. The whole
    surface is delegated to :func:`surface_quadrature`.

    Raises:
        DomainError: ``order < 1``.
        RegionError: Degenerate region or radius beyond the injectivity bound.
    """
    if order < 1:
        raise DomainError(f"quadrature order must be >= 1, got {order}")
    if isinstance(region, WholeSurface):
        return surface_quadrature(surface, order)
    validate_region(surface, region)
    lower, upper = region.radial_range
    r_nodes, r_weights = _gauss(2 * order, lower, upper)
    n_alpha = 4 * order
    alphas = TWO_PI * np.arange(n_alpha) / n_alpha
    rr, aa = np.meshgrid(r_nodes, alphas, indexing="ij")
    x1, x2, jac = exp_map(surface, region.center, rr, aa)
    weights = (r_weights[:, None] * jac * (TWO_PI / n_alpha)).ravel()
    if np.any(weights <= 0.0):
        raise RegionError("nonpositive quadrature weight; region too large")
    logger.debug(f"region quadrature: {weights.size} nodes, order {order}")
    return QuadratureRule(
        x1=x1.ravel(),
        x2=x2.ravel(),
        weights=weights,
        radii=rr.ravel(),
        angles=aa.ravel(),
    )


def surface_quadrature(surface: ModelSurface, order: int) -> QuadratureRule:
    """Tensor rule over the whole surface.

    Periodic directions use the trapezoid rule; the polar coordinate of
    spheres and revolutions uses Gauss–Legendre (in cos x1 for the sphere).
    """
    if order < 1:
        raise DomainError(f"quadrature order must be >= 1, got {order}")
    n2 = 4 * order
    x2 = TWO_PI * np.arange(n2) / n2
    if isinstance(surface, FlatTorus):
        p1, p2 = surface.periods
        n1 = 4 * order
        g1 = p1 * (np.arange(n1) + 0.5) / n1
        g2 = p2 * (np.arange(n2) + 0.5) / n2
        a, b = np.meshgrid(g1, g2, indexing="ij")
        w = np.full(a.size, p1 * p2 / (n1 * n2))
        return QuadratureRule(x1=a.ravel(), x2=b.ravel(), weights=w)
    if isinstance(surface, Sphere):
        c, wc = _gauss(2 * order, -1.0, 1.0)
        theta = np.arccos(c)
        a, b = np.meshgrid(theta, x2, indexing="ij")
        w = np.outer(wc * surface.radius**2, np.full(n2, TWO_PI / n2))
        return QuadratureRule(x1=a.ravel(), x2=b.ravel(), weights=w.ravel())
    s, ws = _gauss(2 * order, 0.0, math.pi)
    a, b = np.meshgrid(s, x2, indexing="ij")
    w = np.outer(ws * surface.profile(s), np.full(n2, TWO_PI / n2))
    return QuadratureRule(x1=a.ravel(), x2=b.ravel(), weights=w.ravel())


def area(surface: ModelSurface, region: Ball | Annulus | WholeSurface) -> float:
    """Riemannian area of a region.

    Closed forms on the torus and sphere; surfaces of revolution sum the
    weights of a high-order polar rule, the same volume element the
    quadrature uses.

    Raises:
        RegionError: Degenerate region or radius beyond the injectivity bound.
    """
    if isinstance(region, WholeSurface):
        return surface.total_area()
    validate_region(surface, region)
    lower, upper = region.radial_range
    if isinstance(surface, FlatTorus):
        return math.pi * (upper**2 - lower**2)
    if isinstance(surface, Sphere):
        rad = surface.radius
        return TWO_PI * rad**2 * (math.cos(lower / rad) - math.cos(upper / rad))
    return float(np.sum(region_quadrature(surface, region, 32).weights))

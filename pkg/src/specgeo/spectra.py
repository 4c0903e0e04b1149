"""Eigenpairs of the Laplace–Beltrami operator on the model surfaces.

Closed-form families live on the torus (plane waves and product modes) and the
sphere (zonal harmonics, evaluated by the three-term Legendre recurrence).
Surfaces of revolution separate into ``cos(m phi) g(s)`` with ``g`` from a
symmetric finite-volume discretization of the radial Sturm–Liouville problem.

All evaluators are vectorized over chart coordinate arrays. ``partials_at``
returns raw chart derivatives; ``grad_at`` and ``hess_at`` return the
gradient and covariant Hessian in the orthonormal frame ``(e1/a, e2/b)``.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import Annotated, Any, Literal

import numpy as np
from loguru import logger
from pydantic import Field as PydanticField
from pydantic import NonNegativeFloat
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from ._typing import ComplexArray, FloatArray
from .errors import ConvergenceError, DomainError, UnsupportedFamilyError
from .manifolds import (
    TWO_PI,
    FlatTorus,
    ModelSurface,
    Point,
    Revolution,
    Sphere,
    surface_quadrature,
)
from .toolkit import LabModel, first_derivative, second_derivative

_POLE_SHIFT = 1e-7


class ClosedFormTorus(LabModel):
    """Plane wave ``sin(k . x + phase)`` (periods rescaled to 2 pi)."""

    kind: Literal["torus"] = "torus"
    k: tuple[int, int]
    phase: float = 0.0


class TorusProduct(LabModel):
    """Product mode ``sin(k1 x1 + p1) sin(k2 x2 + p2)``."""

    kind: Literal["torus_product"] = "torus_product"
    k: tuple[int, int]
    phases: tuple[float, float] = (0.0, 0.0)


class ClosedFormZonal(LabModel):
    """Zonal harmonic ``P_l(cos theta)``."""

    kind: Literal["zonal"] = "zonal"
    l: int  # noqa: E741


class RevolutionMode(LabModel):
    """Separated mode ``cos(m phi) g_j(s)`` on a surface of revolution."""

    kind: Literal["revolution"] = "revolution"
    m: int
    j: int


Provenance = Annotated[
    ClosedFormTorus | TorusProduct | ClosedFormZonal | RevolutionMode,
    PydanticField(discriminator="kind"),
]


def legendre_with_derivatives(
    degree: int, x: Any
) -> tuple[Any, Any, Any]:
    """Evaluate ``P_l``, ``P_l'`` and ``P_l''`` by upward recurrences.

    ``(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}`` for the values and
    ``P'_{n+1} = P'_{n-1} + (2n+1) P_n`` (likewise one order up) for the
    derivatives. Works for real and complex arrays alike and has no
    singularity at ``x = +-1``.
    """
    x = np.asarray(x)
    one = np.ones_like(x)
    p_prev, p = one, x.copy()
    d_prev, d = 0.0 * one, one
    s_prev, s = 0.0 * one, 0.0 * one
    if degree == 0:
        return one, 0.0 * one, 0.0 * one
    for n in range(1, degree):
        p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        d_next = d_prev + (2 * n + 1) * p
        s_next = s_prev + (2 * n + 1) * d
        p_prev, p = p, p_next
        d_prev, d = d, d_next
        s_prev, s = s, s_next
    return p, d, s


class EigenPair(LabModel, ABC):
    """Eigenvalue with vectorized evaluators of u and its derivatives.

    Attributes:
        lambda_: Eigenvalue (serialized as ``lambda``).
        surface: Surface the eigenfunction lives on.
        amplitude: Scalar multiple applied to the normalized mode.
    """

    lambda_: NonNegativeFloat = PydanticField(alias="lambda")
    surface: ModelSurface
    amplitude: float = 1.0

    model_config = LabModel.model_config | {"populate_by_name": True}

    @property
    @abstractmethod
    def provenance(self) -> Provenance:
        """Family and indices that produced the pair."""

    @abstractmethod
    def _value(self, x1: FloatArray, x2: FloatArray) -> FloatArray: ...

    @abstractmethod
    def _partials(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray]: ...

    @abstractmethod
    def _second(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]: ...

    def value_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Evaluate u."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return self.amplitude * self._value(x1, x2)

    def partials_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Raw chart partials, shape (N, 2)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        u1, u2 = self._partials(x1, x2)
        return self.amplitude * np.stack([u1, u2], axis=-1)

    def chart_hessian_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Raw chart second partials, shape (N, 2, 2)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        u11, u12, u22 = self._second(x1, x2)
        rows = [np.stack([u11, u12], -1), np.stack([u12, u22], -1)]
        return self.amplitude * np.stack(rows, -2)

    def _off_pole(self, x1: FloatArray) -> FloatArray:
        if not self.surface.has_poles:
            return x1
        return np.clip(x1, _POLE_SHIFT, self.surface.extent[0] - _POLE_SHIFT)

    def grad_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Gradient in the orthonormal frame, shape (N, 2)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        x1 = self._off_pole(x1)
        u1, u2 = self._partials(x1, x2)
        b, _ = self.surface.warp(x1)
        return self.amplitude * np.stack([u1 / self.surface.scale, u2 / b], axis=-1)

    def hess_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Covariant Hessian in the orthonormal frame, shape (N, 2, 2)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        x1 = self._off_pole(x1)
        u1, u2 = self._partials(x1, x2)
        u11, u12, u22 = self._second(x1, x2)
        a = self.surface.scale
        b, db = self.surface.warp(x1)
        h11 = u11 / a**2
        h12 = (u12 - db / b * u2) / (a * b)
        h22 = (u22 + b * db / a**2 * u1) / b**2
        hess = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
        return self.amplitude * hess

    def laplacian_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Closed-form Laplacian (trace of the Hessian)."""
        return np.trace(self.hess_at(x1, x2), axis1=-2, axis2=-1)

    def complex_partials(
        self, z1: ComplexArray, z2: ComplexArray
    ) -> tuple[ComplexArray, ComplexArray]:
        """Holomorphic extension of the chart partials.

        Raises:
            UnsupportedFamilyError: The family has no closed-form continuation.
        """
        raise UnsupportedFamilyError(
            f"{self.provenance.kind} pairs have no closed-form continuation"
        )

    def taylor_coefficient(self, center: Point, beta: tuple[int, int]) -> float:
        """Chart derivative ``D^beta u`` at ``center``.

        Raises:
            UnsupportedFamilyError: The family has no closed-form derivatives.
        """
        raise UnsupportedFamilyError(
            f"{self.provenance.kind} pairs have no closed-form derivatives"
        )

    def critical_centers(self, count: int = 4) -> list[Point]:
        """Representative points of the closed-form critical set."""
        return []

    def reference_critical_length(self) -> float | None:
        """Closed-form length of the critical set, when known."""
        return None

    def reference_nodal_length(self) -> float | None:
        """Closed-form length of the nodal set, when known."""
        return None

    def scaled(self, factor: float) -> "EigenPair":
        """Return the pair for ``factor * u``."""
        return self.model_copy(update={"amplitude": self.amplitude * factor})

    def with_eigenvalue(self, value: float) -> "EigenPair":
        """Return a copy carrying a different eigenvalue (evaluators unchanged)."""
        return self.model_copy(update={"lambda_": value})


class TorusEigenPair(EigenPair):
    """``sin(kappa . x + phase)`` with ``kappa_i = 2 pi k_i / P_i``."""

    k: tuple[int, int]
    phase: float = 0.0

    @property
    def provenance(self) -> ClosedFormTorus:
        return ClosedFormTorus(k=self.k, phase=self.phase)

    @property
    def wavevector(self) -> tuple[float, float]:
        """Angular wavevector in chart units."""
        p1, p2 = self.surface.extent
        return (TWO_PI * self.k[0] / p1, TWO_PI * self.k[1] / p2)

    def _arg(self, x1: Any, x2: Any) -> Any:
        k1, k2 = self.wavevector
        return k1 * x1 + k2 * x2 + self.phase

    def _value(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        return np.sin(self._arg(x1, x2))

    def _partials(self, x1: FloatArray, x2: FloatArray) -> tuple[FloatArray, FloatArray]:
        k1, k2 = self.wavevector
        c = np.cos(self._arg(x1, x2))
        return k1 * c, k2 * c

    def _second(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        k1, k2 = self.wavevector
        s = np.sin(self._arg(x1, x2))
        return -k1 * k1 * s, -k1 * k2 * s, -k2 * k2 * s

    def complex_partials(
        self, z1: ComplexArray, z2: ComplexArray
    ) -> tuple[ComplexArray, ComplexArray]:
        k1, k2 = self.wavevector
        c = self.amplitude * np.cos(self._arg(z1, z2))
        return k1 * c, k2 * c

    def taylor_coefficient(self, center: Point, beta: tuple[int, int]) -> float:
        k1, k2 = self.wavevector
        order = beta[0] + beta[1]
        arg = self._arg(center.x1, center.x2) + 0.5 * math.pi * order
        return self.amplitude * k1 ** beta[0] * k2 ** beta[1] * math.sin(arg)

    def critical_centers(self, count: int = 4) -> list[Point]:
        k1, k2 = self.wavevector
        kk = k1 * k1 + k2 * k2
        points = []
        for n in range(count):
            # foot of the perpendicular from the origin to kappa.x + phase = pi/2 + n pi
            t = (0.5 * math.pi + n * math.pi - self.phase) / kk
            x1, x2 = self.surface.normalize(np.asarray(t * k1), np.asarray(t * k2))
            points.append(Point(coords=(float(x1), float(x2))))
        return points

    def reference_critical_length(self) -> float:
        # parallel lines spaced pi / |kappa| fill the torus
        return self.surface.total_area() * math.sqrt(self.lambda_) / math.pi

    def reference_nodal_length(self) -> float:
        return self.reference_critical_length()


class TorusProductEigenPair(EigenPair):
    """``sin(kappa1 x1 + p1) sin(kappa2 x2 + p2)``: isolated critical points."""

    k: tuple[int, int]
    phases: tuple[float, float] = (0.0, 0.0)

    @property
    def provenance(self) -> TorusProduct:
        return TorusProduct(k=self.k, phases=self.phases)

    @property
    def wavevector(self) -> tuple[float, float]:
        """Angular wavevector in chart units."""
        p1, p2 = self.surface.extent
        return (TWO_PI * self.k[0] / p1, TWO_PI * self.k[1] / p2)

    def _factors(self, x1: Any, x2: Any) -> tuple[Any, Any, Any, Any]:
        k1, k2 = self.wavevector
        a1 = k1 * x1 + self.phases[0]
        a2 = k2 * x2 + self.phases[1]
        return np.sin(a1), np.cos(a1), np.sin(a2), np.cos(a2)

    def _value(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        s1, _, s2, _ = self._factors(x1, x2)
        return s1 * s2

    def _partials(self, x1: FloatArray, x2: FloatArray) -> tuple[FloatArray, FloatArray]:
        k1, k2 = self.wavevector
        s1, c1, s2, c2 = self._factors(x1, x2)
        return k1 * c1 * s2, k2 * s1 * c2

    def _second(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        k1, k2 = self.wavevector
        s1, c1, s2, c2 = self._factors(x1, x2)
        return -k1 * k1 * s1 * s2, k1 * k2 * c1 * c2, -k2 * k2 * s1 * s2

    def complex_partials(
        self, z1: ComplexArray, z2: ComplexArray
    ) -> tuple[ComplexArray, ComplexArray]:
        k1, k2 = self.wavevector
        s1, c1, s2, c2 = self._factors(z1, z2)
        return self.amplitude * k1 * c1 * s2, self.amplitude * k2 * s1 * c2

    def taylor_coefficient(self, center: Point, beta: tuple[int, int]) -> float:
        k1, k2 = self.wavevector
        f1 = k1 ** beta[0] * math.sin(k1 * center.x1 + self.phases[0] + 0.5 * math.pi * beta[0])
        f2 = k2 ** beta[1] * math.sin(k2 * center.x2 + self.phases[1] + 0.5 * math.pi * beta[1])
        return self.amplitude * f1 * f2

    def critical_centers(self, count: int = 4) -> list[Point]:
        k1, k2 = self.wavevector
        centers = []
        for n in range(count):
            # extrema where both sines are +-1
            x1 = (0.5 * math.pi + n * math.pi - self.phases[0]) / k1
            x2 = (0.5 * math.pi - self.phases[1]) / k2
            a, b = self.surface.normalize(np.asarray(x1), np.asarray(x2))
            centers.append(Point(coords=(float(a), float(b))))
        return centers

    def reference_critical_length(self) -> float:
        return 0.0

    def reference_nodal_length(self) -> float:
        p1, p2 = self.surface.extent
        return 2.0 * abs(self.k[0]) * p2 + 2.0 * abs(self.k[1]) * p1


class ZonalEigenPair(EigenPair):
    """Zonal harmonic ``P_l(cos theta)`` on a round sphere."""

    degree: int

    @property
    def provenance(self) -> ClosedFormZonal:
        return ClosedFormZonal(l=self.degree)

    def _value(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        p, _, _ = legendre_with_derivatives(self.degree, np.cos(x1))
        return p

    def _partials(self, x1: Any, x2: Any) -> tuple[Any, Any]:
        _, d, _ = legendre_with_derivatives(self.degree, np.cos(x1))
        return -np.sin(x1) * d, 0.0 * d

    def _second(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        c, s = np.cos(x1), np.sin(x1)
        _, d, dd = legendre_with_derivatives(self.degree, c)
        zero = 0.0 * c
        return s * s * dd - c * d, zero, zero

    def complex_partials(
        self, z1: ComplexArray, z2: ComplexArray
    ) -> tuple[ComplexArray, ComplexArray]:
        u1, u2 = self._partials(np.asarray(z1, complex), z2)
        return self.amplitude * u1, self.amplitude * u2

    def cosine_coefficients(self) -> FloatArray:
        """Coefficients ``a_n`` with ``P_l(cos t) = sum_n a_n cos(n t)``.

        ``P_l(cos t)`` is a trigonometric polynomial of degree l, so sampling
        at ``2 l + 2`` points recovers it exactly.
        """
        count = 2 * self.degree + 2
        t = TWO_PI * np.arange(count) / count
        p, _, _ = legendre_with_derivatives(self.degree, np.cos(t))
        c = np.fft.rfft(p).real / count
        c[1:] *= 2.0
        return np.asarray(c[: self.degree + 1])

    def taylor_coefficient(self, center: Point, beta: tuple[int, int]) -> float:
        if beta[1] > 0:
            return 0.0
        a = self.cosine_coefficients()
        n = np.arange(a.size)
        p = beta[0]
        terms = a * n.astype(float) ** p * np.cos(n * center.x1 + 0.5 * math.pi * p)
        return self.amplitude * float(np.sum(terms))

    def critical_latitudes(self) -> FloatArray:
        """Interior colatitudes where ``d/dtheta P_l(cos theta)`` vanishes."""
        roots = np.polynomial.legendre.Legendre.basis(self.degree).deriv().roots()
        roots = np.real(roots[np.abs(np.imag(roots)) < 1e-12])
        return np.sort(np.arccos(np.clip(roots, -1.0, 1.0)))

    def nodal_latitudes(self) -> FloatArray:
        """Colatitudes of the zeros of ``P_l(cos theta)``."""
        roots = np.polynomial.legendre.Legendre.basis(self.degree).roots()
        return np.sort(np.arccos(np.clip(np.real(roots), -1.0, 1.0)))

    def critical_centers(self, count: int = 4) -> list[Point]:
        points = [Point(coords=(0.0, 0.0)), Point(coords=(math.pi, 0.0))]
        points += [Point(coords=(float(t), 0.0)) for t in self.critical_latitudes()]
        return points[: max(count, 2)]

    def reference_critical_length(self) -> float:
        b, _ = self.surface.warp(self.critical_latitudes())
        return float(TWO_PI * np.sum(b))

    def reference_nodal_length(self) -> float:
        b, _ = self.surface.warp(self.nodal_latitudes())
        return float(TWO_PI * np.sum(b))


class SturmLiouvilleSpec(LabModel):
    """Radial problem ``-(rho g')'/rho + m^2 g / rho^2 = lambda g`` on [0, pi].

    Attributes:
        surface: Surface of revolution supplying the profile.
        m: Angular mode.
        grid_size: Number of finite-volume cells.
    """

    surface: Revolution
    m: int = PydanticField(ge=0)
    grid_size: int = PydanticField(ge=64)


class RevolutionEigenPair(EigenPair):
    """``cos(m phi) g(s)`` with ``g`` interpolated from the discrete eigenvector."""

    m: int
    j: int
    spline: Any

    @property
    def provenance(self) -> RevolutionMode:
        return RevolutionMode(m=self.m, j=self.j)

    def _value(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        return np.cos(self.m * x2) * self.spline(x1)

    def _partials(self, x1: FloatArray, x2: FloatArray) -> tuple[FloatArray, FloatArray]:
        c, s = np.cos(self.m * x2), np.sin(self.m * x2)
        return c * self.spline(x1, 1), -self.m * s * self.spline(x1)

    def _second(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        c, s = np.cos(self.m * x2), np.sin(self.m * x2)
        g, dg, ddg = self.spline(x1), self.spline(x1, 1), self.spline(x1, 2)
        return c * ddg, -self.m * s * dg, -self.m * self.m * c * g

    def _profile_roots(self, order: int) -> FloatArray:
        roots = np.asarray(self.spline.derivative(order).roots(extrapolate=False))
        return roots[(roots > 1e-9) & (roots < math.pi - 1e-9)]

    def reference_critical_length(self) -> float | None:
        if self.m != 0:
            return None
        b, _ = self.surface.warp(self._profile_roots(1))
        return float(TWO_PI * np.sum(b))

    def reference_nodal_length(self) -> float:
        b, _ = self.surface.warp(self._profile_roots(0))
        # cos(m phi) = 0 contributes 2m half-meridians of length pi
        return float(TWO_PI * np.sum(b)) + 2.0 * self.m * math.pi


def torus_eigenpair(
    k: tuple[int, int],
    phase: float = 0.0,
    periods: tuple[float, float] = (TWO_PI, TWO_PI),
) -> TorusEigenPair:
    """Plane-wave eigenpair on a flat torus.

    With periods (2 pi, 2 pi): ``u = sin(k1 x1 + k2 x2 + phase)`` and
    ``lambda = k1^2 + k2^2``.

    Raises:
        DomainError: ``k == (0, 0)``.
    """
    if k == (0, 0):
        raise DomainError("frequency vector must be nonzero")
    surface = FlatTorus(periods=periods)
    k1 = TWO_PI * k[0] / periods[0]
    k2 = TWO_PI * k[1] / periods[1]
    return TorusEigenPair(lambda_=k1 * k1 + k2 * k2, surface=surface, k=k, phase=phase)


def torus_product_eigenpair(
    k: tuple[int, int],
    phases: tuple[float, float] = (0.0, 0.0),
    periods: tuple[float, float] = (TWO_PI, TWO_PI),
) -> TorusProductEigenPair:
    """Product eigenpair ``sin(k1 x1 + p1) sin(k2 x2 + p2)`` (Morse examples).

    Raises:
        DomainError: A zero frequency component.
    """
    if 0 in k:
        raise DomainError("product modes need two nonzero frequencies")
    surface = FlatTorus(periods=periods)
    k1 = TWO_PI * k[0] / periods[0]
    k2 = TWO_PI * k[1] / periods[1]
    return TorusProductEigenPair(
        lambda_=k1 * k1 + k2 * k2, surface=surface, k=k, phases=phases
    )


def sphere_zonal_eigenpair(radius: float, l: int) -> ZonalEigenPair:  # noqa: E741
    """Zonal harmonic of degree ``l`` with ``lambda = l (l + 1) / radius^2``.

    Raises:
        DomainError: ``l < 1`` (constants are not admissible eigenfunctions).
    """
    if l < 1:
        raise DomainError(f"zonal degree must be >= 1, got {l}")
    surface = Sphere(radius=radius)
    return ZonalEigenPair(lambda_=l * (l + 1) / radius**2, surface=surface, degree=l)


def _radial_operator(spec: SturmLiouvilleSpec) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    n = spec.grid_size
    h = math.pi / n
    s = (np.arange(n) + 0.5) * h
    rho = spec.surface.profile(s)
    if np.any(rho <= 0.0):
        raise DomainError("profile must be positive on the interior grid")
    faces = spec.surface.profile(np.arange(1, n) * h)
    flux = np.concatenate([[0.0], faces, [0.0]])  # rho vanishes at both poles
    diag = (flux[:-1] + flux[1:]) / (h * h * rho) + spec.m**2 / rho**2
    off = -faces / (h * h * np.sqrt(rho[:-1] * rho[1:]))
    return s, rho, diag, off


def _solve(
    spec: SturmLiouvilleSpec, j: int
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    s, rho, diag, off = _radial_operator(spec)
    index = j if spec.m == 0 else j - 1
    values, vectors = eigh_tridiagonal(diag, off, select="i", select_range=(index, index))
    return s, rho, values, vectors


def _ghosted_spline(s: FloatArray, g: FloatArray, m: int) -> CubicSpline:
    parity = -1.0 if m % 2 else 1.0
    ghosts = 4
    left_s = -s[:ghosts][::-1]
    left_g = parity * g[:ghosts][::-1]
    right_s = TWO_PI - s[-ghosts:][::-1]
    right_g = parity * g[-ghosts:][::-1]
    return CubicSpline(
        np.concatenate([left_s, s, right_s]), np.concatenate([left_g, g, right_g])
    )


def revolution_eigenpair(spec: SturmLiouvilleSpec, j: int) -> RevolutionEigenPair:
    """The ``j``-th separated eigenpair of angular mode ``m``.

    The radial equation is discretized by symmetric second-order finite
    volumes on cell centres; the vanishing profile at the poles makes the
    boundary fluxes zero, which realizes the Neumann-like condition for
    ``m = 0`` while the ``m^2 / rho^2`` term enforces decay for ``m >= 1``.
    For ``m = 0`` the constant mode is skipped, so ``j = 1`` is the first
    nonconstant mode.

    Raises:
        DomainError: ``j < 1`` or ``j > grid_size / 8``.
    """
    if j < 1 or j > spec.grid_size // 8:
        raise DomainError(
            f"mode index {j} outside 1..{spec.grid_size // 8} for grid {spec.grid_size}"
        )
    s, rho, values, vectors = _solve(spec, j)
    g = vectors[:, 0] / np.sqrt(rho)
    g = g / g[np.argmax(np.abs(g))]
    logger.debug(
        f"revolution mode m={spec.m} j={j}: lambda={values[0]:.10g} on {spec.grid_size} cells"
    )
    return RevolutionEigenPair(
        lambda_=float(values[0]),
        surface=spec.surface,
        m=spec.m,
        j=j,
        spline=_ghosted_spline(s, g, spec.m),
    )


def sphere_reference_eigenvalue(m: int, j: int) -> float:
    """Round-sphere eigenvalue ``l (l + 1)`` of the ``j``-th mode of angular mode ``m``.

    ``l = j`` for ``m = 0`` (the constant mode is skipped) and ``l = m + j - 1``
    otherwise.
    """
    degree = j if m == 0 else m + j - 1
    return float(degree * (degree + 1))


class ConvergenceOrder(LabModel):
    """Observed order of the radial eigenvalue under grid refinement.

    Attributes:
        grid_sizes: Cell counts, increasing.
        eigenvalues: Discrete eigenvalue per grid.
        reference: Exact eigenvalue when the profile is the unit sphere's.
        orders: One order per refinement step against the reference, or one
            per consecutive triple of grids without it.
    """

    grid_sizes: list[int]
    eigenvalues: list[float]
    reference: float | None
    orders: list[float]


def observed_order(
    spec: SturmLiouvilleSpec, j: int, grid_sizes: Sequence[int]
) -> ConvergenceOrder:
    """Observed convergence order of the ``j``-th eigenvalue of ``spec.m``.

    On the round profile the errors against ``l (l + 1)`` give
    ``p = ln(e_i / e_(i+1)) / ln(n_(i+1) / n_i)``. Otherwise consecutive
    triples on a geometric ladder give ``p = ln((l1 - l2) / (l2 - l3)) / ln r``.

    Raises:
        DomainError: Fewer than three grids, grids not increasing, a mode
            index beyond the coarsest grid, or a non-geometric ladder
            without a reference.
        ConvergenceError: An error or a difference that vanishes.
    """
    sizes = list(grid_sizes)
    if len(sizes) < 3 or any(b <= a for a, b in zip(sizes, sizes[1:], strict=False)):
        raise DomainError(f"need at least three increasing grid sizes, got {sizes}")
    if j < 1 or j > sizes[0] // 8:
        raise DomainError(f"mode index {j} outside 1..{sizes[0] // 8} for grid {sizes[0]}")
    values = np.array(
        [
            float(_solve(spec.model_copy(update={"grid_size": n}), j)[2][0])
            for n in sizes
        ]
    )
    n = np.asarray(sizes, dtype=float)
    reference = (
        sphere_reference_eigenvalue(spec.m, j) if spec.surface.bulge == 0.0 else None
    )
    if reference is not None:
        errors = np.abs(values - reference)
        if np.any(errors == 0.0):
            raise ConvergenceError("eigenvalue error vanished, order undefined")
        orders = np.log(errors[:-1] / errors[1:]) / np.log(n[1:] / n[:-1])
    else:
        ratios = n[1:] / n[:-1]
        if not np.allclose(ratios, ratios[0]):
            raise DomainError("three-grid orders need a geometric ladder of grid sizes")
        gaps = np.diff(values)
        if np.any(gaps == 0.0):
            raise ConvergenceError("eigenvalue stopped changing, order undefined")
        orders = np.log(np.abs(gaps[:-1] / gaps[1:])) / math.log(ratios[0])
    logger.debug(f"revolution mode m={spec.m} j={j}: observed orders {orders}")
    return ConvergenceOrder(
        grid_sizes=sizes,
        eigenvalues=[float(v) for v in values],
        reference=reference,
        orders=[float(p) for p in orders],
    )


def eigen_residual(pair: EigenPair, order: int = 32) -> float:
    """Relative residual ``||Delta u + lambda u|| / ||u||`` over the surface.

    The Laplacian is a fourth-order finite-difference Laplacian of
    ``value_at`` in the chart with the metric terms of the warped product,
    integrated with the whole-surface quadrature.
    """
    rule = surface_quadrature(pair.surface, order)
    x1, x2 = rule.x1, rule.x2
    a = pair.surface.scale
    b, db = pair.surface.warp(x1)
    u = pair.value_at(x1, x2)
    u11 = second_derivative(pair.value_at, x1, x2, 0)
    u22 = second_derivative(pair.value_at, x1, x2, 1)
    u1 = first_derivative(pair.value_at, x1, x2, 0)
    lap = u11 / a**2 + db / (a**2 * b) * u1 + u22 / b**2
    numerator = math.sqrt(rule.integrate((lap + pair.lambda_ * u) ** 2))
    denominator = math.sqrt(rule.integrate(u**2))
    return numerator / denominator

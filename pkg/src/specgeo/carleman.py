"""Carleman weight family and weighted inequality checks on test functions.

The weight is ``phi(r) = -f(ln r)`` with ``f(t) = t - exp(eps t)``, so
``phi(r) = -ln r + r**eps`` and ``exp(tau phi) = r**-tau exp(tau r**eps)``.
Because ``exp(tau phi)`` leaves the float range for small ``r`` and large
``tau``, every weighted norm is assembled in log space from ``ln |u|``.

Test functions live in geodesic polar coordinates ``(r, alpha)`` around a
centre::

    u = A chi(r) q(r) cos(m alpha + psi)

with ``chi = exp(-w/(r - r_in) - w/(r_out - r))`` on ``(r_in, r_out)`` and
zero elsewhere, ``q`` a seeded polynomial. ``Delta u`` is exact in the polar
form ``u_rr + (J'/J) u_r + u_aa / J^2``.
"""

import math
from collections.abc import Sequence
from typing import Annotated, Literal, NamedTuple

import numpy as np
from loguru import logger
from pydantic import Field as PydanticField
from pydantic import model_validator
from scipy.special import logsumexp

from ._typing import FloatArray
from .errors import DegenerateFieldError, DomainError, UnsupportedFamilyError
from .manifolds import (
    TWO_PI,
    Annulus,
    Ball,
    FlatTorus,
    ModelSurface,
    Point,
    Sphere,
    exp_map,
    log_map,
    validate_region,
)
from .toolkit import LabModel, fit_uniform_bound, log_weighted_norm

DEFAULT_EPSILON = 0.5
DIVERGENCE_THRESHOLD = 1e3
MIN_ADMISSIBILITY_POINTS = 100
MIN_SAMPLES = 20


class WeightParams(LabModel):
    """Carleman weight data.

    Attributes:
        epsilon: Convexity parameter in (0, 1).
        t0: Upper end of the admissible ``t = ln r`` range, negative.
    """

    epsilon: float = PydanticField(gt=0.0, lt=1.0)
    t0: float = PydanticField(lt=0.0)

    @property
    def max_radius(self) -> float:
        """``exp(t0)``, the largest admissible radius."""
        return math.exp(self.t0)


def default_weight(surface: ModelSurface, epsilon: float = DEFAULT_EPSILON) -> WeightParams:
    """Weight with ``t0 = ln(min(R0, 1/2))``, ``R0`` the injectivity bound."""
    return WeightParams(
        epsilon=epsilon, t0=math.log(min(surface.injectivity_bound(), 0.5))
    )


class WeightValues(NamedTuple):
    """``f``, ``f'``, ``f''`` at ``t`` and ``phi`` at ``r = exp(t)``."""

    f: FloatArray
    df: FloatArray
    ddf: FloatArray
    phi: FloatArray


def weight_eval(
    params: WeightParams,
    *,
    t: float | FloatArray | None = None,
    r: float | FloatArray | None = None,
) -> WeightValues:
    """Evaluate the weight at ``t`` or at ``r = exp(t)``.

    Exactly one of ``t`` and ``r`` must be given. Scalars in, scalars out.

    Raises:
        DomainError: ``r <= 0`` or neither/both of ``t`` and ``r`` given.
    """
    if (t is None) == (r is None):
        raise DomainError("pass exactly one of t and r")
    if r is not None:
        rr = np.asarray(r, dtype=float)
        if np.any(rr <= 0.0):
            raise DomainError("weight radius must be positive")
        tt = np.log(rr)
    else:
        tt = np.asarray(t, dtype=float)
    eps = params.epsilon
    e = np.exp(eps * tt)
    f = tt - e
    values = WeightValues(f=f, df=1.0 - eps * e, ddf=-eps * eps * e, phi=-f)
    if np.ndim(tt) == 0:
        return WeightValues(*(float(v) for v in values))  # type: ignore[arg-type]
    return values


def phi(params: WeightParams, r: FloatArray) -> FloatArray:
    """``phi(r) = -ln r + r**eps``."""
    return -np.log(r) + np.power(r, params.epsilon)


class AdmissibilityReport(LabModel):
    """Outcome of the weight admissibility checks on a grid.

    Attributes:
        derivative_bounds: ``1 - eps exp(eps t0) <= f'(t) <= 1`` on the grid.
        divergence: ``-exp(-t) f''(t)`` increases toward the left end and
            exceeds the threshold there when the grid reaches far enough.
        lower_bound: ``1 - eps exp(eps t0)``.
        left_value: ``-exp(-t) f''(t)`` at the grid's left end.
    """

    derivative_bounds: bool
    divergence: bool
    lower_bound: float
    left_value: float

    @property
    def ok(self) -> bool:
        """Both conditions hold."""
        return self.derivative_bounds and self.divergence


def check_weight_admissibility(
    params: WeightParams, t_grid: Sequence[float] | FloatArray
) -> AdmissibilityReport:
    """Check the weight conditions on a grid inside ``(-inf, t0]``.

    Raises:
        DomainError: Fewer than 100 points or any point beyond ``t0``.
    """
    t = np.sort(np.asarray(t_grid, dtype=float))
    if t.size < MIN_ADMISSIBILITY_POINTS:
        raise DomainError(f"admissibility grid needs >= 100 points, got {t.size}")
    if t[-1] > params.t0 + 1e-12:
        raise DomainError(f"grid point {t[-1]:.6g} beyond t0 = {params.t0:.6g}")
    eps = params.epsilon
    values = weight_eval(params, t=t)
    lower = 1.0 - eps * math.exp(eps * params.t0)
    bounds = bool(np.all(values.df >= lower - 1e-15) and np.all(values.df <= 1.0))
    # -exp(-t) f''(t) = eps^2 exp((eps - 1) t)
    growth = -np.exp(-t) * values.ddf
    monotone = bool(np.all(np.diff(growth) < 0.0))
    reach = math.log(DIVERGENCE_THRESHOLD / eps**2) / (eps - 1.0)
    far_enough = t[0] <= reach
    divergence = monotone and (not far_enough or growth[0] > DIVERGENCE_THRESHOLD)
    logger.debug(
        f"weight eps={eps} t0={params.t0:.4g}: f' >= {lower:.6g} {bounds}, "
        f"divergence {divergence} (left value {growth[0]:.3e})"
    )
    return AdmissibilityReport(
        derivative_bounds=bounds,
        divergence=divergence,
        lower_bound=lower,
        left_value=float(growth[0]),
    )


def _polar_metric(surface: ModelSurface, r: FloatArray) -> tuple[FloatArray, FloatArray]:
    if isinstance(surface, FlatTorus):
        return r, np.ones_like(r)
    if isinstance(surface, Sphere):
        return surface.polar_jacobian(r), np.cos(r / surface.radius)
    raise UnsupportedFamilyError("test functions need a rotationally uniform metric")


class TestFunction(LabModel):
    """Compactly supported smooth test function in polar form.

    Attributes:
        surface: Surface carrying the function (torus or sphere).
        support: Region handed to :func:`make_test_function`.
        seed: Construction seed.
        m: Angular mode.
        coefficients: Coefficients of ``q`` in the normalized radius.
        phase: Angular phase ``psi``.
        inner: Inner edge ``r_in`` of the support.
        outer: Outer edge ``r_out`` of the support.
        amplitude: Scalar multiple ``A``.
    """

    __test__ = False

    surface: ModelSurface
    support: Ball | Annulus
    seed: int
    m: int
    coefficients: tuple[float, ...]
    phase: float
    inner: float
    outer: float
    amplitude: float = 1.0

    @model_validator(mode="after")
    def _check_support(self) -> "TestFunction":
        if not 0.0 < self.inner < self.outer:
            raise DomainError("test function support must avoid r = 0")
        return self

    @property
    def center(self) -> Point:
        """Centre of the polar coordinates."""
        return self.support.center

    @property
    def steepness(self) -> float:
        """Bump steepness ``w``."""
        return 0.25 * (self.outer - self.inner)

    def scaled(self, factor: float) -> "TestFunction":
        """Return ``factor * u``."""
        return self.model_copy(update={"amplitude": self.amplitude * factor})

    def radial_parts(
        self, r: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        """``ln chi`` and ``(chi q)^(k) / chi`` for k = 0, 1, 2.

        Outside the open support ``ln chi = -inf`` and the quotients are 0.
        """
        r = np.asarray(r, dtype=float)
        inside = (r > self.inner) & (r < self.outer)
        a = np.where(inside, r - self.inner, 1.0)
        b = np.where(inside, self.outer - r, 1.0)
        w = self.steepness
        log_chi = np.where(inside, -w / a - w / b, -np.inf)
        dl = w / a**2 - w / b**2
        ddl = -2.0 * w / a**3 - 2.0 * w / b**3
        half = 0.5 * (self.outer - self.inner)
        x = (r - 0.5 * (self.inner + self.outer)) / half
        poly = np.polynomial.Polynomial(self.coefficients)
        q = poly(x)
        dq = poly.deriv(1)(x) / half
        ddq = poly.deriv(2)(x) / half**2
        g0 = q
        g1 = dl * q + dq
        g2 = (ddl + dl * dl) * q + 2.0 * dl * dq + ddq
        zero = np.zeros_like(r)
        return (
            log_chi,
            np.where(inside, g0, zero),
            np.where(inside, g1, zero),
            np.where(inside, g2, zero),
        )

    def polar_parts(
        self, r: FloatArray, alpha: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        """``ln chi`` and ``u / chi``, ``|grad u| / chi``, ``Delta u / chi``."""
        r, alpha = np.broadcast_arrays(np.asarray(r, float), np.asarray(alpha, float))
        log_chi, g0, g1, g2 = self.radial_parts(r)
        jac, djac = _polar_metric(self.surface, np.where(r > 0.0, r, 1.0))
        c = np.cos(self.m * alpha + self.phase)
        s = np.sin(self.m * alpha + self.phase)
        amp = self.amplitude
        value = amp * g0 * c
        grad = abs(amp) * np.hypot(g1 * c, self.m * g0 * s / jac)
        lap = amp * (g2 * c + djac / jac * g1 * c - self.m**2 * g0 * c / jac**2)
        return log_chi, value, grad, lap

    def _chart_parts(
        self, x1: FloatArray, x2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        r, alpha = log_map(self.surface, self.center, x1, x2)
        return self.polar_parts(r, alpha)

    def value_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Evaluate u at chart points."""
        log_chi, value, _, _ = self._chart_parts(x1, x2)
        return np.exp(log_chi) * value

    def gradient_norm_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Evaluate ``|grad u|`` at chart points."""
        log_chi, _, grad, _ = self._chart_parts(x1, x2)
        return np.exp(log_chi) * grad

    def laplacian_at(self, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Evaluate ``Delta u`` at chart points."""
        log_chi, _, _, lap = self._chart_parts(x1, x2)
        return np.exp(log_chi) * lap


def make_test_function(
    seed: int,
    support: Ball | Annulus,
    m: int,
    d: int,
    surface: ModelSurface | None = None,
    amplitude: float = 1.0,
) -> TestFunction:
    """Seeded test function ``bump x polynomial x cos(m alpha + psi)``.

    An annulus support is used as is. A ball support gets an inner cutoff
    drawn from the seed in ``[0.1, 0.3]`` times its radius, so the function
    vanishes near the centre as the estimate requires.

    Args:
        seed: Seed fixing the polynomial, phase and inner cutoff.
        support: Ball or annulus (geodesic, around the polar centre).
        m: Angular mode, ``>= 0``.
        d: Radial polynomial degree, ``>= 0``.
        surface: Flat torus (default) or round sphere.
        amplitude: Scalar multiple.

    Raises:
        DomainError: Negative ``m`` or ``d``, or support touching ``r = 0``.
        RegionError: Support beyond the injectivity bound.
        UnsupportedFamilyError: Surfaces of revolution.
    """
    surface = surface or FlatTorus()
    if m < 0 or d < 0:
        raise DomainError(f"angular mode and degree must be >= 0, got {m}, {d}")
    if not isinstance(surface, FlatTorus | Sphere):
        raise UnsupportedFamilyError("test functions need a rotationally uniform metric")
    validate_region(surface, support)
    rng = np.random.default_rng(seed)
    coefficients = rng.normal(size=d + 1)
    coefficients[0] += math.copysign(1.0, coefficients[0])
    phase = float(rng.uniform(0.0, TWO_PI))
    if isinstance(support, Annulus):
        inner, outer = support.inner, support.outer
    else:
        inner, outer = support.radius * float(rng.uniform(0.1, 0.3)), support.radius
    return TestFunction(
        surface=surface,
        support=support,
        seed=seed,
        m=m,
        coefficients=tuple(float(c) for c in coefficients),
        phase=phase,
        inner=inner,
        outer=outer,
        amplitude=amplitude,
    )


class ConstantPotential(LabModel):
    """``W = value`` (the eigenvalue case)."""

    kind: Literal["constant"] = "constant"
    value: float

    def evaluate(self, surface: ModelSurface, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Sample W at chart points."""
        return np.full(np.shape(x1), self.value)

    def c1_norm(self, surface: ModelSurface) -> float:
        """``sup |W| + sup |grad W|``."""
        return abs(self.value)

    @property
    def label(self) -> str:
        """Short description for reports."""
        return f"W={self.value:g}"


class PerturbedPotential(LabModel):
    """``W = lam (1 + 0.1 sin x1)``, a non-constant smooth potential."""

    kind: Literal["perturbed"] = "perturbed"
    lam: float

    def evaluate(self, surface: ModelSurface, x1: FloatArray, x2: FloatArray) -> FloatArray:
        """Sample W at chart points."""
        return self.lam * (1.0 + 0.1 * np.sin(x1))

    def c1_norm(self, surface: ModelSurface) -> float:
        """``1.1 |lam| + 0.1 |lam| / a``."""
        return 1.1 * abs(self.lam) + 0.1 * abs(self.lam) / surface.scale

    @property
    def label(self) -> str:
        """Short description for reports."""
        return f"W={self.lam:g}(1+0.1sin)"


Potential = Annotated[
    ConstantPotential | PerturbedPotential, PydanticField(discriminator="kind")
]


def tau_min(c1_norm: float) -> float:
    """Smallest tested ``tau``: ``2 sqrt(||W||_C1) + 10``."""
    return 2.0 * math.sqrt(c1_norm) + 10.0


def tau_sweep(c1_norm: float, steps: int = 20) -> FloatArray:
    """``steps`` log-spaced values from ``tau_min`` to ``10 tau_min``."""
    start = tau_min(c1_norm)
    return np.geomspace(start, 10.0 * start, steps)


class CarlemanSides(LabModel):
    """Both sides of the Carleman inequality, kept as logarithms.

    Attributes:
        tau: Large parameter.
        log_lhs: ``ln ||r^2 e^{tau phi} (Delta u + W u)||``.
        log_rhs_terms: Logs of ``tau^{3/2} ||r^{eps/2} e^{tau phi} u||``,
            ``tau^{1/2} ||r^{1+eps/2} e^{tau phi} grad u||`` and, for annulus
            supports, ``tau delta ||r^{-1} e^{tau phi} u||``.
        potential: Label of W.
        potential_norm: ``||W||_C1``.
        below_threshold: ``tau < tau_min(||W||_C1)``.
    """

    tau: float = PydanticField(ge=1.0)
    log_lhs: float
    log_rhs_terms: tuple[float, ...]
    potential: str
    potential_norm: float
    below_threshold: bool

    @property
    def lhs(self) -> float:
        """Left side norm (may overflow to inf)."""
        return math.exp(self.log_lhs) if self.log_lhs < 709.0 else math.inf

    @property
    def rhs_terms(self) -> tuple[float, ...]:
        """Right side norms (may overflow to inf)."""
        return tuple(math.exp(t) if t < 709.0 else math.inf for t in self.log_rhs_terms)

    @property
    def log_rhs_total(self) -> float:
        """Log of the sum of the right side terms."""
        return float(logsumexp(self.log_rhs_terms))

    @property
    def log_ratio(self) -> float:
        """``ln(rhs_total / lhs)``."""
        return self.log_rhs_total - self.log_lhs

    @property
    def ratio(self) -> float:
        """``rhs_total / lhs``, the constant this sample requires."""
        return math.exp(self.log_ratio)


class _LogNorms(NamedTuple):
    lhs: float
    terms: tuple[float, ...]


def _carleman_rule(
    u: TestFunction, order: int
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray, FloatArray]:
    # Gauss in ln r resolves the r**-tau concentration at the inner edge
    nodes, gw = np.polynomial.legendre.leggauss(2 * order)
    lo, hi = math.log(u.inner), math.log(u.outer)
    half = 0.5 * (hi - lo)
    s = lo + half * (nodes + 1.0)
    r = np.exp(s)
    n_alpha = 4 * order
    alpha = TWO_PI * np.arange(n_alpha) / n_alpha
    rr, aa = np.meshgrid(r, alpha, indexing="ij")
    jac, _ = _polar_metric(u.surface, rr)
    weights = (half * gw * r)[:, None] * jac * (TWO_PI / n_alpha)
    x1, x2, _ = exp_map(u.surface, u.center, rr, aa)
    return rr.ravel(), aa.ravel(), weights.ravel(), x1.ravel(), x2.ravel()


def _log_abs(values: FloatArray) -> FloatArray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


def _log_norms(
    u: TestFunction,
    potential: ConstantPotential | PerturbedPotential,
    tau: float,
    params: WeightParams,
    order: int,
) -> _LogNorms:
    if u.outer > params.max_radius * (1.0 + 1e-12):
        raise DomainError(
            f"support radius {u.outer:.4g} beyond exp(t0) = {params.max_radius:.4g}"
        )
    r, alpha, weights, x1, x2 = _carleman_rule(u, order)
    log_chi, value, grad, lap = u.polar_parts(r, alpha)
    w = potential.evaluate(u.surface, x1, x2)
    log_r = np.log(r)
    base = log_chi + tau * phi(params, r)
    eps = params.epsilon
    lhs = log_weighted_norm(2.0 * log_r + base + _log_abs(lap + w * value), weights)
    log_u = base + _log_abs(value)
    terms = [
        1.5 * math.log(tau) + log_weighted_norm(0.5 * eps * log_r + log_u, weights),
        0.5 * math.log(tau)
        + log_weighted_norm((1.0 + 0.5 * eps) * log_r + base + _log_abs(grad), weights),
    ]
    if isinstance(u.support, Annulus):
        terms.append(
            math.log(tau) + math.log(u.inner) + log_weighted_norm(log_u - log_r, weights)
        )
    return _LogNorms(lhs=lhs, terms=tuple(terms))


def _sides(
    norms: _LogNorms,
    tau: float,
    potential: ConstantPotential | PerturbedPotential,
    surface: ModelSurface,
) -> CarlemanSides:
    c1 = potential.c1_norm(surface)
    return CarlemanSides(
        tau=tau,
        log_lhs=norms.lhs,
        log_rhs_terms=norms.terms,
        potential=potential.label,
        potential_norm=c1,
        below_threshold=tau < tau_min(c1),
    )


def _as_potential(
    w: float | ConstantPotential | PerturbedPotential,
) -> ConstantPotential | PerturbedPotential:
    if isinstance(w, ConstantPotential | PerturbedPotential):
        return w
    return ConstantPotential(value=float(w))


def carleman_sides(
    u: TestFunction,
    w: float | ConstantPotential | PerturbedPotential,
    tau: float,
    params: WeightParams,
    order: int = 32,
) -> CarlemanSides:
    """Evaluate both sides of the Carleman inequality for one test function.

    Norms are integrated over the support with a polar rule that is Gauss in
    ``ln r`` (``2 order`` nodes) times a trapezoid in the angle
    (``4 order`` nodes).

    Args:
        u: Test function.
        w: Potential, a constant or a potential model.
        tau: Large parameter, ``>= 1``.
        params: Weight parameters; the support must lie within ``exp(t0)``.
        order: Quadrature order.

    Raises:
        DomainError: ``tau < 1`` or support beyond ``exp(t0)``.
        DegenerateFieldError: u vanishes identically.
    """
    if tau < 1.0:
        raise DomainError(f"tau must be >= 1, got {tau}")
    potential = _as_potential(w)
    norms = _log_norms(u, potential, tau, params, order)
    if not all(math.isfinite(t) for t in norms.terms) or not math.isfinite(norms.lhs):
        raise DegenerateFieldError("degenerate test function")
    return _sides(norms, tau, potential, u.surface)


def vector_carleman_sides(
    pair: tuple[TestFunction, TestFunction],
    lam: float,
    tau: float,
    params: WeightParams,
    order: int = 32,
) -> CarlemanSides:
    """Carleman sides of a vector function with squared norms summed over components.

    W is the constant ``lam``. A zero component contributes nothing.

    Raises:
        DomainError: ``tau < 1`` or support beyond ``exp(t0)``.
        DegenerateFieldError: Every component vanishes identically.
    """
    if tau < 1.0:
        raise DomainError(f"tau must be >= 1, got {tau}")
    potential = ConstantPotential(value=lam)
    parts = [_log_norms(u, potential, tau, params, order) for u in pair]

    def combine(values: Sequence[float]) -> float:
        arr = 2.0 * np.asarray(values)
        if not np.any(np.isfinite(arr)):
            return float("-inf")
        return 0.5 * float(logsumexp(arr))

    lhs = combine([p.lhs for p in parts])
    count = max(len(p.terms) for p in parts)
    terms = tuple(
        combine([p.terms[i] for p in parts if i < len(p.terms)]) for i in range(count)
    )
    if not math.isfinite(lhs) or not all(math.isfinite(t) for t in terms):
        raise DegenerateFieldError("degenerate test function")
    return _sides(_LogNorms(lhs=lhs, terms=terms), tau, potential, pair[0].surface)


class CarlemanCell(LabModel):
    """One (sample, potential, tau) evaluation of a calibration sweep."""

    sample: int
    potential: str
    tau: float
    ratio: float
    below_threshold: bool


class CarlemanCalibration(LabModel):
    """Sweep-wide empirical Carleman constant.

    Attributes:
        constant: ``C* = max rhs_total / lhs`` over the sweep.
        argmax: Cell attaining the maximum.
        cells: Every evaluated cell, in sweep order.
        failures: Cells that failed numerically or exceed the reference
            constant when one is given.
        skipped: Indices of degenerate samples.
    """

    constant: float
    argmax: CarlemanCell
    cells: list[CarlemanCell]
    failures: list[CarlemanCell]
    skipped: list[int]


def calibrate_carleman_constant(
    samples: Sequence[TestFunction],
    potentials: Sequence[float | ConstantPotential | PerturbedPotential],
    params: WeightParams,
    tau_grid: Sequence[float] | None = None,
    order: int = 32,
    reference_constant: float | None = None,
) -> CarlemanCalibration:
    """Calibrate the sweep-wide constant ``C*``.

    For each potential the ``tau`` grid defaults to :func:`tau_sweep` of its
    C1 norm. Ties in the maximum keep the first cell in sweep order.

    Raises:
        DomainError: No potentials, or fewer than ``MIN_SAMPLES`` samples.
        DegenerateFieldError: Every sample is degenerate.
    """
    if not samples or not potentials:
        raise DomainError("calibration needs samples and potentials")
    if len(samples) < MIN_SAMPLES:
        raise DomainError(
            f"calibration needs >= {MIN_SAMPLES} samples, got {len(samples)}"
        )
    cells: list[CarlemanCell] = []
    failures: list[CarlemanCell] = []
    skipped: list[int] = []
    for index, u in enumerate(samples):
        try:
            for w in potentials:
                potential = _as_potential(w)
                taus = (
                    tau_grid
                    if tau_grid is not None
                    else tau_sweep(potential.c1_norm(u.surface))
                )
                for tau in taus:
                    sides = carleman_sides(u, potential, float(tau), params, order)
                    cell = CarlemanCell(
                        sample=index,
                        potential=potential.label,
                        tau=float(tau),
                        ratio=sides.ratio,
                        below_threshold=sides.below_threshold,
                    )
                    cells.append(cell)
                    if not math.isfinite(cell.ratio):
                        failures.append(cell)
        except DegenerateFieldError:
            logger.warning(f"sample {index} is degenerate, skipped")
            skipped.append(index)
    finite = [c for c in cells if math.isfinite(c.ratio)]
    if not finite:
        raise DegenerateFieldError("all samples degenerate")
    best = finite[0]
    for cell in finite[1:]:
        if cell.ratio > best.ratio:
            best = cell
    if reference_constant is not None:
        failures += [c for c in finite if c.ratio > reference_constant]
    logger.debug(
        f"carleman calibration: C*={best.ratio:.6g} over {len(cells)} cells "
        f"({len(skipped)} degenerate samples)"
    )
    return CarlemanCalibration(
        constant=best.ratio,
        argmax=best,
        cells=cells,
        failures=failures,
        skipped=skipped,
    )


class ExponentProbe(LabModel):
    """Upper-envelope fit of the tau-exponent gap against ``ln tau``.

    Attributes:
        taus: Probed values of tau.
        gaps: ``ln(tau^{3/2} ||r^{eps/2} e^{tau phi} u||) - ln(lhs)``.
        slope: Least-squares slope of gaps against ``ln tau``.
        intercept: Envelope intercept.
    """

    taus: list[float]
    gaps: list[float]
    slope: float
    intercept: float


def tau_exponent_probe(
    u: TestFunction,
    lam: float,
    taus: Sequence[float],
    params: WeightParams,
    order: int = 32,
) -> ExponentProbe:
    """Fit how the leading right term outgrows the left side as tau grows."""
    gaps = []
    for tau in taus:
        sides = carleman_sides(u, lam, float(tau), params, order)
        gaps.append(sides.log_rhs_terms[0] - sides.log_lhs)
    bound = fit_uniform_bound(np.log(np.asarray(taus, dtype=float)), gaps)
    return ExponentProbe(
        taus=[float(t) for t in taus],
        gaps=gaps,
        slope=bound.slope,
        intercept=bound.intercept,
    )

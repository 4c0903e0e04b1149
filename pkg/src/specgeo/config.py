"""Experiment configuration schema.

Configs are JSON documents. The ``experiment`` key selects one of the
per-experiment models below; every model rejects unknown keys. Physics and
numerics parameters have no defaults, acceptance thresholds are optional
(a missing threshold skips its criterion) and only output cosmetics default.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Annotated, Literal, Self

from pydantic import (
    Field,
    NegativeFloat,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    TypeAdapter,
    ValidationError,
    model_validator,
)

from ._typing import ExperimentKind, NormKind
from .carleman import default_weight
from .errors import ConfigError
from .manifolds import FlatTorus, ModelSurface, Revolution, Sphere
from .toolkit import LabModel

SEED_ENV = "SPECGEO_SEED"

FamilyKind = Literal["torus", "torus-product", "zonal", "revolution"]
FitAxis = Literal["lambda", "sqrt_lambda"]
CriticalFitAxis = Literal["lambda", "sqrt_lambda", "reference"]
Coords = tuple[float, float]

_FAMILY_SURFACE: dict[str, type] = {
    "torus": FlatTorus,
    "torus-product": FlatTorus,
    "zonal": Sphere,
    "revolution": Revolution,
}


class FamilySpec(LabModel):
    """An eigen-family on one surface.

    Attributes:
        surface: Surface the family lives on.
        kind: ``torus`` is ``sin(k x1)``, ``torus-product`` is
            ``sin(k x1) sin(k x2)``, ``zonal`` is ``P_l(cos theta)``,
            ``revolution`` is the ``j``-th Sturm–Liouville mode.
        indices: k, l or j per member.
        m: Angular mode, revolution families only.
        grid_size: Finite-volume cells of the Sturm–Liouville solve.
    """

    surface: ModelSurface
    kind: FamilyKind
    indices: list[PositiveInt] = Field(min_length=1)
    m: NonNegativeInt | None = None
    grid_size: int | None = Field(default=None, ge=64)

    @model_validator(mode="after")
    def _check_surface(self) -> Self:
        if not isinstance(self.surface, _FAMILY_SURFACE[self.kind]):
            raise ValueError(f"{self.kind} family needs a {_FAMILY_SURFACE[self.kind].__name__}")
        if self.kind == "revolution" and (self.m is None or self.grid_size is None):
            raise ValueError("revolution families need m and grid_size")
        return self

    @property
    def label(self) -> str:
        """Family name used in result tables."""
        if self.kind == "revolution":
            return f"revolution-m{self.m}"
        return self.kind


class Tolerance(LabModel):
    """Target value with an absolute tolerance."""

    target: float
    tol: PositiveFloat


class _Experiment(LabModel):
    seed: int
    plots: bool = True


class _FamilyExperiment(_Experiment):
    families: list[FamilySpec] = Field(min_length=1)


class _SweepExperiment(_FamilyExperiment):
    centers: PositiveInt
    radii: list[PositiveFloat] = Field(min_length=1)
    order: PositiveInt
    pole_margin: NonNegativeFloat


class ConvergenceSpec(LabModel):
    """Grid ladder and admissible range of the observed eigenvalue order."""

    grid_sizes: list[int] = Field(min_length=3)
    order_min: float = 1.8
    order_max: float = 2.2

    @model_validator(mode="after")
    def _check_ladder(self) -> Self:
        if any(n < 64 for n in self.grid_sizes):
            raise ValueError("grid sizes must be >= 64")
        if any(b <= a for a, b in zip(self.grid_sizes, self.grid_sizes[1:], strict=False)):
            raise ValueError("grid sizes must increase")
        if self.order_min > self.order_max:
            raise ValueError("order_min must not exceed order_max")
        return self


class SpectrumConfig(_FamilyExperiment):
    """Eigen-residuals, derivative consistency and revolution-vs-sphere spectra.

    Attributes:
        convergence: Refinement ladder for the observed order of every
            revolution member; omitted to skip it.
    """

    experiment: Literal["spectrum"]
    order: PositiveInt
    samples: PositiveInt
    residual_tol: PositiveFloat | None = None
    gradient_tol: PositiveFloat | None = None
    hessian_tol: PositiveFloat | None = None
    spectrum_tol: PositiveFloat | None = None
    spectrum_lambda_max: PositiveFloat | None = None
    convergence: ConvergenceSpec | None = None


class DoublingConfig(_SweepExperiment):
    """Doubling index sweep over centres and radii.

    Attributes:
        margin: Relative widening of the bound calibrated on the lower half
            of each family.
        slope_tol: Allowed relative change of the fitted slope when the
            quadrature order doubles; omitted to skip the rerun.
        slope_families: Family labels whose slope stability is checked.
    """

    experiment: Literal["doubling"]
    norms: list[NormKind] = Field(min_length=1)
    margin: NonNegativeFloat
    slope_tol: PositiveFloat | None = None
    slope_families: list[str] = Field(default_factory=lambda: ["torus"])


class ThreeSphereConfig(_SweepExperiment):
    """Three-sphere log-combination sweep."""

    experiment: Literal["three-sphere"]
    epsilon: float = Field(gt=0.0, lt=1.0)
    margin: NonNegativeFloat
    max_constant: PositiveFloat | None = None


class CarlemanConfig(_Experiment):
    """Carleman calibration over seeded test functions.

    Attributes:
        support_center: Chart centre of every support.
        support_radius: Outer support radius.
        annulus_inner: Inner radius of the annulus variant; omitted to skip it.
        angular_modes: Sample ``i`` uses ``angular_modes[i % len]``.
        radial_degree: Polynomial degree of the radial factor.
        potentials: Constant potentials ``W = lambda``.
        perturbed: Eigenvalues of the perturbed potential family.
        tau_steps: Log-spaced steps from ``tau_min`` to ``10 tau_min``.
        stability_tol: Allowed relative change of ``C*`` when the order doubles.
        margin: Relative widening of the ``C*`` calibrated on the first half of
            the samples; every sample must stay below the widened constant.
        reference_constants: Recorded ``C*`` per support (``ball``,
            ``annulus``); when given, it replaces the calibration.
    """

    experiment: Literal["carleman"]
    surface: ModelSurface
    samples: int = Field(ge=20)
    support_center: Coords
    support_radius: PositiveFloat
    annulus_inner: PositiveFloat | None = None
    angular_modes: list[NonNegativeInt] = Field(min_length=1)
    radial_degree: NonNegativeInt
    potentials: list[float]
    perturbed: list[float]
    epsilon: float = Field(gt=0.0, lt=1.0)
    tau_steps: int = Field(ge=2)
    order: PositiveInt
    stability_tol: PositiveFloat | None = None
    margin: NonNegativeFloat
    reference_constants: dict[Literal["ball", "annulus"], PositiveFloat] | None = None

    @model_validator(mode="after")
    def _check_support(self) -> Self:
        if isinstance(self.surface, Revolution):
            raise ValueError("carleman test functions need a torus or sphere")
        limit = default_weight(self.surface, self.epsilon).max_radius
        if self.support_radius >= limit:
            raise ValueError(f"support_radius must stay below {limit:.6g}")
        if self.annulus_inner is not None and self.annulus_inner >= self.support_radius:
            raise ValueError("annulus_inner must stay below support_radius")
        if not self.potentials and not self.perturbed:
            raise ValueError("potentials and perturbed are both empty")
        return self


class CriticalMeasureConfig(_FamilyExperiment):
    """Critical-set length per member, with an optional scaling fit.

    Attributes:
        fit_axis: Abscissa of the log-log fit. ``reference`` fits the
            measured length against the closed-form length, so agreement
            means slope 1.
    """

    experiment: Literal["critical-measure"]
    grid_n: int = Field(ge=64)
    max_grid: int = Field(ge=64)
    rel_tol: PositiveFloat | None = None
    fit_axis: CriticalFitAxis
    slope: Tolerance | None = None
    r_squared_min: float | None = None


class NodalMeasureConfig(_FamilyExperiment):
    """Nodal-set length per member, with an optional scaling fit."""

    experiment: Literal["nodal-measure"]
    grid_n: int = Field(ge=64)
    rel_tol: PositiveFloat | None = None
    slope: Tolerance | None = None
    r_squared_min: float | None = None


class FitConfig(_FamilyExperiment):
    """One power-law fit pooled across every family."""

    experiment: Literal["fit"]
    quantity: Literal["critical", "nodal"]
    grid_n: int = Field(ge=64)
    fit_axis: FitAxis
    slope: Tolerance | None = None
    r_squared_min: float | None = None


class GrowthConfig(_FamilyExperiment):
    """Growth exponent, Taylor bound and local extension ratio per member."""

    experiment: Literal["growth"]
    center: Coords
    chart_scale: PositiveFloat
    grid_n: int = Field(ge=16)
    max_order: int = Field(ge=1, le=12)
    c1: PositiveFloat
    alpha_ratio_max: PositiveFloat | None = None
    alpha_limit: Tolerance | None = None
    taylor_max: PositiveFloat | None = None


class DfCheckConfig(_FamilyExperiment):
    """Critical length in the quarter disc against the growth exponent."""

    experiment: Literal["df-check"]
    center: Coords
    chart_scale: PositiveFloat
    grid_n: int = Field(ge=64)
    ratio_max: PositiveFloat | None = None


class EllipticConfig(_SweepExperiment):
    """Interior estimate constant for ``V = grad u``."""

    experiment: Literal["elliptic"]
    shrink: list[float] = Field(min_length=1)
    bound: PositiveFloat | None = None

    @model_validator(mode="after")
    def _check_shrink(self) -> Self:
        if any(not 0.0 < a < 1.0 for a in self.shrink):
            raise ValueError("shrink factors must lie in (0, 1)")
        return self


class LowerBoundConfig(_SweepExperiment):
    """Global and annulus lower bounds of the gradient.

    Attributes:
        bounds: Largest admissible exponent per radius, aligned with
            ``radii``; omitted to only require finite exponents.
    """

    experiment: Literal["lower-bound"]
    bounds: list[PositiveFloat] | None = None

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        if self.bounds is not None and len(self.bounds) != len(self.radii):
            raise ValueError("bounds must have one entry per radius")
        return self


class WeightSpec(LabModel):
    """One ``(epsilon, t0)`` pair."""

    epsilon: float = Field(gt=0.0, lt=1.0)
    t0: NegativeFloat


class WeightConfig(_Experiment):
    """Admissibility and exact-formula spot checks of Carleman weights.

    Attributes:
        weights: Parameter sets to check.
        grid_points: Points of the admissibility grid.
        grid_span: The grid covers ``[t0 - grid_span, t0]``.
        radii: Radii of the ``A_R``/``B_R`` bounds (those beyond
            ``exp(t0)`` are dropped per weight).
        spot_tol: Allowed deviation from the closed-form weight.
    """

    experiment: Literal["weight"]
    weights: list[WeightSpec] = Field(min_length=1)
    grid_points: int = Field(ge=100)
    grid_span: PositiveFloat
    radii: list[PositiveFloat] = Field(min_length=1)
    spot_tol: PositiveFloat


ExperimentConfig = Annotated[
    SpectrumConfig
    | DoublingConfig
    | ThreeSphereConfig
    | CarlemanConfig
    | CriticalMeasureConfig
    | NodalMeasureConfig
    | FitConfig
    | GrowthConfig
    | DfCheckConfig
    | EllipticConfig
    | LowerBoundConfig
    | WeightConfig,
    Field(discriminator="experiment"),
]
"""Any experiment configuration, selected by its ``experiment`` key."""

_ADAPTER: TypeAdapter[ExperimentConfig] = TypeAdapter(ExperimentConfig)


def _error_key(error: ValidationError, tag: object) -> str:
    loc = list(error.errors()[0]["loc"])
    if loc and loc[0] == tag:
        loc = loc[1:]
    return ".".join(str(part) for part in loc) or "experiment"


def parse_config(data: object) -> ExperimentConfig:
    """Validate a decoded JSON document.

    The ``SPECGEO_SEED`` environment variable, when set, replaces ``seed``.

    Raises:
        ConfigError: The first offending key, e.g. ``epsilonn`` or
            ``families.0.indices``.
    """
    if not isinstance(data, dict):
        raise ConfigError("experiment", "config must be a JSON object")
    override = os.environ.get(SEED_ENV)
    if override is not None:
        try:
            data = {**data, "seed": int(override)}
        except ValueError as e:
            raise ConfigError(SEED_ENV, f"{SEED_ENV} must be an integer") from e
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as e:
        key = _error_key(e, data.get("experiment"))
        raise ConfigError(key, f"invalid config key {key!r}: {e.errors()[0]['msg']}") from e


def load_config(path: Path, experiment: ExperimentKind | None = None) -> ExperimentConfig:
    """Read and validate a JSON config file.

    Raises:
        ConfigError: Unreadable file, malformed JSON, invalid content, or an
            ``experiment`` key different from the requested one.
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError("config", f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"malformed JSON in {path}: {e}") from e
    config = parse_config(data)
    if experiment is not None and config.experiment != experiment:
        raise ConfigError(
            "experiment",
            f"config is for {config.experiment!r}, not {experiment!r}",
        )
    return config


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of a validated config."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


"""Experiment dispatch and report emission.

``run_experiment`` turns a validated config into a :class:`ResultTable`.
Rows are computed by independent jobs (optionally on a thread pool) and
assembled in job order, so the table only depends on the config and seed.
A job that raises a :class:`SpecGeoError` becomes a single row with its
``error`` cell set and the run continues.
"""

import csv
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Literal, NamedTuple

import matplotlib
import numpy as np
from loguru import logger
from matplotlib.figure import Figure

from ._models import (
    Cell,
    CriterionResult,
    PlotRequest,
    ResultTable,
    Summary,
    TableMetadata,
)
from ._typing import NormKind
from .carleman import (
    ConstantPotential,
    PerturbedPotential,
    WeightParams,
    calibrate_carleman_constant,
    check_weight_admissibility,
    default_weight,
    make_test_function,
    phi,
    tau_sweep,
    weight_eval,
)
from .config import (
    CarlemanConfig,
    ConvergenceSpec,
    CriticalMeasureConfig,
    DfCheckConfig,
    DoublingConfig,
    EllipticConfig,
    ExperimentConfig,
    FamilySpec,
    FitConfig,
    GrowthConfig,
    LowerBoundConfig,
    NodalMeasureConfig,
    SpectrumConfig,
    ThreeSphereConfig,
    Tolerance,
    WeightConfig,
    config_hash,
)
from .errors import (
    ConvergenceError,
    DomainError,
    ReportError,
    SpecGeoError,
    UnsupportedFamilyError,
)
from .fieldcalc import gradient_consistency_check, hessian_consistency_check
from .geomeasure import (
    critical_measure,
    critical_points,
    distinct_colatitudes,
    nodal_measure,
    scaling_fit,
)
from .growth import (
    df_relation_check,
    growth_exponent,
    local_extension_ratio,
    taylor_derivative_check,
    vanishing_order,
)
from .manifolds import Annulus, Ball, FlatTorus, Point, Revolution, Sphere
from .spectra import (
    EigenPair,
    RevolutionEigenPair,
    SturmLiouvilleSpec,
    ZonalEigenPair,
    eigen_residual,
    observed_order,
    revolution_eigenpair,
    sphere_reference_eigenvalue,
    sphere_zonal_eigenpair,
    torus_eigenpair,
    torus_product_eigenpair,
)
from .toolkit import fit_uniform_bound
from .uniqueness import (
    annulus_lower_bound_check,
    doubling_sweep,
    eigen_system_residual,
    elliptic_gradient_check,
    global_lower_bound_check,
    sweep_centers,
    three_sphere_check,
    weight_alpha_bounds,
)

Row = list[Cell]
RowJob = tuple[Row, Callable[[], list[Row]]]
"""Key cells of the row (used for failure rows) and the computation."""

matplotlib.rcParams["svg.hashsalt"] = "specgeo"


def package_version() -> str:
    """Installed specgeo version, ``0.0.0`` from a source checkout."""
    try:
        return version("specgeo")
    except PackageNotFoundError:
        return "0.0.0"


def build_member(spec: FamilySpec, index: int) -> EigenPair:
    """Eigenpair ``index`` of a family.

    Raises:
        DomainError: Index outside the family's range.
    """
    surface = spec.surface
    if isinstance(surface, FlatTorus):
        if spec.kind == "torus-product":
            return torus_product_eigenpair((index, index), periods=surface.periods)
        return torus_eigenpair((index, 0), periods=surface.periods)
    if isinstance(surface, Sphere):
        return sphere_zonal_eigenpair(surface.radius, index)
    sl = SturmLiouvilleSpec(surface=surface, m=spec.m or 0, grid_size=spec.grid_size or 2048)
    return revolution_eigenpair(sl, index)


def reference_eigenvalue(pair: EigenPair) -> float | None:
    """Round-sphere eigenvalue a revolution mode should reproduce.

    Closed-form pairs are their own reference; revolution modes are compared
    with ``l (l + 1)``, ``l = m + j - 1`` (``l = j`` for ``m = 0``), when the
    profile is the unit sphere's.
    """
    if not isinstance(pair, RevolutionEigenPair):
        return pair.lambda_
    surface = pair.surface
    if not isinstance(surface, Revolution) or surface.bulge != 0.0:
        return None
    return sphere_reference_eigenvalue(pair.m, pair.j)


class _Member(NamedTuple):
    family: str
    index: int
    pair: EigenPair | None
    error: SpecGeoError | None

    def require(self) -> EigenPair:
        if self.pair is None:
            raise self.error or SpecGeoError("member unavailable")
        return self.pair

    @property
    def key(self) -> Row:
        return [self.family, self.index]


def _members(families: Sequence[FamilySpec]) -> list[_Member]:
    members = []
    for spec in families:
        for index in spec.indices:
            try:
                pair = build_member(spec, index)
            except SpecGeoError as e:
                logger.error(f"{spec.label} {index}: {e}")
                members.append(_Member(spec.label, index, None, e))
            else:
                members.append(_Member(spec.label, index, pair, None))
    return members


def _run_rows(jobs: Sequence[RowJob], width: int, workers: int) -> tuple[list[Row], int]:
    def execute(job: RowJob) -> tuple[list[Row], bool]:
        key, compute = job
        try:
            rows = [[*row, None] for row in compute()]
            ok = True
        except SpecGeoError as e:
            rows = [[*key, *([None] * (width - len(key) - 1)), str(e)]]
            ok = False
        log = logger.debug if ok else logger.error
        log(f"row {key}: {'ok' if ok else rows[0][-1]}")
        return rows, ok

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(execute, jobs))
    rows = [row for chunk, _ in results for row in chunk]
    return rows, sum(not ok for _, ok in results)


def _numbers(table: ResultTable, name: str) -> list[float]:
    return [float(v) for v in table.column(name) if isinstance(v, int | float)]


def _finite(value: float) -> float | None:
    return value if math.isfinite(value) else None


def _at_most(name: str, values: Sequence[float], threshold: float | None) -> CriterionResult:
    if not values:
        return CriterionResult(
            name=name, value=None, threshold=threshold, passed=False, detail="no rows"
        )
    worst = max(values)
    passed = math.isfinite(worst) and (threshold is None or worst <= threshold)
    return CriterionResult(name=name, value=_finite(worst), threshold=threshold, passed=passed)


def _fit_criteria(
    name: str,
    samples: Sequence[tuple[float, float]],
    slope: Tolerance | None,
    r_squared_min: float | None,
) -> list[CriterionResult]:
    if slope is None and r_squared_min is None:
        return []
    try:
        fit = scaling_fit(samples)
    except SpecGeoError as e:
        return [CriterionResult(name=f"{name}-fit", value=None, passed=False, detail=str(e))]
    results = []
    if slope is not None:
        results.append(
            CriterionResult(
                name=f"{name}-slope",
                value=fit.slope,
                threshold=slope.target,
                passed=abs(fit.slope - slope.target) <= slope.tol,
                detail=f"tol {slope.tol:g}, prefactor {fit.prefactor:.6g}",
            )
        )
    if r_squared_min is not None:
        results.append(
            CriterionResult(
                name=f"{name}-r2",
                value=fit.r_squared,
                threshold=r_squared_min,
                passed=fit.r_squared >= r_squared_min,
            )
        )
    return results


def _pairs(
    table: ResultTable, x: str, y: str, family: str | None = None
) -> list[tuple[float, float]]:
    out = []
    for fam, xv, yv in zip(
        table.column("family"), table.column(x), table.column(y), strict=True
    ):
        if family is not None and fam != family:
            continue
        if isinstance(xv, int | float) and isinstance(yv, int | float) and yv > 0:
            out.append((float(xv), float(yv)))
    return out


class _Plan(NamedTuple):
    columns: list[str]
    jobs: list[RowJob]
    criteria: Callable[[ResultTable], list[CriterionResult]]


def _order_range(table: ResultTable, convergence: ConvergenceSpec) -> CriterionResult:
    low, high = convergence.order_min, convergence.order_max
    lows = _numbers(table, "observed_order_min")
    highs = _numbers(table, "observed_order_max")
    if not lows or not highs:
        return CriterionResult(
            name="convergence-order",
            value=None,
            threshold=low,
            passed=False,
            detail="no revolution rows",
        )
    worst_low, worst_high = min(lows), max(highs)
    return CriterionResult(
        name="convergence-order",
        value=_finite(worst_low),
        threshold=low,
        passed=low <= worst_low and worst_high <= high,
        detail=f"orders in [{worst_low:.4g}, {worst_high:.4g}], allowed [{low:g}, {high:g}]",
    )


def _plan_spectrum(config: SpectrumConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "reference_lambda", "residual",
        "gradient_error", "hessian_error", "system_residual",
        "observed_order_min", "observed_order_max", "error",
    ]  # fmt: skip

    def orders(pair: EigenPair) -> list[float]:
        ladder = config.convergence.grid_sizes if config.convergence else None
        if (
            ladder is None
            or not isinstance(pair, RevolutionEigenPair)
            or not isinstance(pair.surface, Revolution)
        ):
            return []
        spec = SturmLiouvilleSpec(surface=pair.surface, m=pair.m, grid_size=ladder[0])
        return observed_order(spec, pair.j, ladder).orders

    def job(member: _Member) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            try:
                system: float | None = eigen_system_residual(pair, seed=config.seed)
            except UnsupportedFamilyError:
                system = None
            observed = orders(pair)
            return [
                [
                    *member.key,
                    pair.lambda_,
                    reference_eigenvalue(pair),
                    eigen_residual(pair, config.order),
                    gradient_consistency_check(pair, config.samples, config.seed),
                    hessian_consistency_check(pair, config.samples, config.seed),
                    system,
                    min(observed) if observed else None,
                    max(observed) if observed else None,
                ]
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = [
            _at_most("residual", _numbers(table, "residual"), config.residual_tol),
            _at_most("gradient", _numbers(table, "gradient_error"), config.gradient_tol),
            _at_most("hessian", _numbers(table, "hessian_error"), config.hessian_tol),
        ]
        if config.spectrum_tol is not None:
            limit = config.spectrum_lambda_max or math.inf
            errors = [
                abs(lam - ref) / ref
                for fam, lam, ref in zip(
                    table.column("family"),
                    table.column("lambda"),
                    table.column("reference_lambda"),
                    strict=True,
                )
                if str(fam).startswith("revolution")
                and isinstance(lam, float)
                and isinstance(ref, float)
                and ref <= limit
            ]
            results.append(_at_most("spectrum", errors, config.spectrum_tol))
        if config.convergence is not None:
            results.append(_order_range(table, config.convergence))
        return results

    jobs = [(m.key, job(m)) for m in _members(config.families)]
    return _Plan(columns, jobs, criteria)


def _lower_half(members: Sequence[_Member]) -> set[tuple[str, int]]:
    """Keys of the lower half (at least one) of every family, in index order."""
    by_family: dict[str, list[int]] = {}
    for m in members:
        by_family.setdefault(m.family, []).append(m.index)
    return {
        (family, k)
        for family, indices in by_family.items()
        for k in sorted(indices)[: max(1, len(indices) // 2)]
    }


def _plan_doubling(config: DoublingConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "sqrt_lambda", "norm", "max_index",
        "max_index_refined", "radius", "center_x1", "center_x2", "error",
    ]  # fmt: skip

    def job(member: _Member, kind: NormKind) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            centers = sweep_centers(pair, config.centers, config.seed, config.pole_margin)
            sweep = doubling_sweep(pair, centers, config.radii, kind, config.order)
            refined = (
                doubling_sweep(pair, centers, config.radii, kind, 2 * config.order).max_index
                if config.slope_tol is not None
                else None
            )
            return [
                [
                    *member.key,
                    pair.lambda_,
                    math.sqrt(pair.lambda_),
                    kind,
                    sweep.max_index,
                    refined,
                    sweep.radius,
                    sweep.center.x1,
                    sweep.center.x2,
                ]
            ]

        return compute

    members = _members(config.families)
    calibrating = _lower_half(members)

    def slope_stability(
        kind: NormKind,
        label: str,
        xs: list[float],
        ys: list[float],
        fine: list[float],
        tol: float,
    ) -> CriterionResult:
        name = f"doubling-{kind}-{label}-order"
        if len(xs) < 2 or len(fine) != len(xs):
            return CriterionResult(name=name, value=None, passed=False, detail="no rows")
        slope = fit_uniform_bound(xs, ys).slope
        refined = fit_uniform_bound(xs, fine).slope
        gap = abs(refined - slope)
        drift = gap / abs(slope) if slope else (0.0 if gap == 0.0 else math.inf)
        return CriterionResult(
            name=name,
            value=_finite(drift),
            threshold=tol,
            passed=drift <= tol,
            detail=f"slope {slope:.6g}, at order {2 * config.order} {refined:.6g}",
        )

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = []
        for kind in config.norms:
            xs, ys, holdout = [], [], []
            per_family: dict[str, tuple[list[float], list[float], list[float]]] = {}
            for fam, k, norm, x, y, fine in zip(
                table.column("family"),
                table.column("k"),
                table.column("norm"),
                table.column("sqrt_lambda"),
                table.column("max_index"),
                table.column("max_index_refined"),
                strict=True,
            ):
                if norm != kind or not isinstance(x, float) or not isinstance(y, float):
                    continue
                if (fam, k) in calibrating:
                    holdout.append(len(xs))
                xs.append(x)
                ys.append(y)
                fx, fy, ff = per_family.setdefault(str(fam), ([], [], []))
                fx.append(x)
                fy.append(y)
                if isinstance(fine, float):
                    ff.append(fine)
            if len(xs) < 2 or not holdout:
                results.append(
                    CriterionResult(name=f"doubling-{kind}", value=None, passed=False)
                )
                continue
            bound = fit_uniform_bound(xs, ys, config.margin, holdout, min_slope=0.0)
            results.append(
                CriterionResult(
                    name=f"doubling-{kind}",
                    value=bound.violations,
                    threshold=0.0,
                    passed=bound.violations == 0,
                    detail=(
                        f"c1={bound.slope:.6g} c2={bound.intercept:.6g} "
                        f"from {len(holdout)} of {len(xs)} rows"
                    ),
                )
            )
            if config.slope_tol is not None:
                for label, (fx, fy, ff) in per_family.items():
                    if label not in config.slope_families:
                        continue
                    results.append(slope_stability(kind, label, fx, fy, ff, config.slope_tol))
        return results

    jobs = [([*m.key, None, None, kind], job(m, kind)) for m in members for kind in config.norms]
    return _Plan(columns, jobs, criteria)


def _calibrated(
    name: str,
    values: Sequence[float],
    calibration: Sequence[float],
    margin: float,
    cap: float | None,
) -> CriterionResult:
    if not calibration or not values:
        return CriterionResult(name=name, value=None, passed=False, detail="no rows")
    constant = max(calibration)
    limit = constant + margin * abs(constant)
    violations = sum(v > limit for v in values)
    passed = violations == 0 and (cap is None or max(values) <= cap)
    return CriterionResult(
        name=name,
        value=_finite(max(values)),
        threshold=cap,
        passed=passed,
        detail=f"calibrated {constant:.6g}, {violations} violations at +{margin:g}",
    )


def _plan_three_sphere(config: ThreeSphereConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "radius", "center_x1", "center_x2",
        "alpha", "required_c", "required_c_swapped", "error",
    ]  # fmt: skip

    def job(member: _Member, radius: float) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            params = default_weight(pair.surface, config.epsilon)
            centers = sweep_centers(pair, config.centers, config.seed, config.pole_margin)
            rows: list[Row] = []
            for center in centers:
                report = three_sphere_check(pair, center, radius, params, config.order)
                rows.append(
                    [
                        *member.key,
                        pair.lambda_,
                        radius,
                        center.x1,
                        center.x2,
                        report.alpha,
                        report.required_c,
                        report.required_c_swapped,
                    ]
                )
            return rows

        return compute

    members = _members(config.families)
    calibrating = _lower_half(members)

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = []
        for column in ("required_c", "required_c_swapped"):
            values, calibration = [], []
            for fam, k, v in zip(
                table.column("family"), table.column("k"), table.column(column), strict=True
            ):
                if isinstance(v, float):
                    values.append(v)
                    if (fam, k) in calibrating:
                        calibration.append(v)
            results.append(
                _calibrated(column, values, calibration, config.margin, config.max_constant)
            )
        return results

    jobs = [([*m.key, None, radius], job(m, radius)) for m in members for radius in config.radii]
    return _Plan(columns, jobs, criteria)


def _plan_carleman(config: CarlemanConfig) -> _Plan:
    columns = [
        "support", "potential", "sample", "tau", "ratio", "ratio_refined",
        "over_reference", "error",
    ]  # fmt: skip
    center = Point(coords=config.support_center)
    params = default_weight(config.surface, config.epsilon)
    supports: list[tuple[str, Ball | Annulus]] = [
        ("ball", Ball(center=center, radius=config.support_radius))
    ]
    if config.annulus_inner is not None:
        supports.append(
            (
                "annulus",
                Annulus(center=center, inner=config.annulus_inner, outer=config.support_radius),
            )
        )
    potentials: list[ConstantPotential | PerturbedPotential] = [
        ConstantPotential(value=w) for w in config.potentials
    ] + [PerturbedPotential(lam=lam) for lam in config.perturbed]
    recorded: dict[str, float] = dict(config.reference_constants or {})

    def job(
        support: Ball | Annulus, label: str, potential: ConstantPotential | PerturbedPotential
    ) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            samples = [
                make_test_function(
                    config.seed + i,
                    support,
                    config.angular_modes[i % len(config.angular_modes)],
                    config.radial_degree,
                    config.surface,
                )
                for i in range(config.samples)
            ]
            taus = list(tau_sweep(potential.c1_norm(config.surface), config.tau_steps))
            reference = recorded.get(label)
            base = calibrate_carleman_constant(
                samples, [potential], params, taus, config.order, reference
            )
            refined = calibrate_carleman_constant(
                samples, [potential], params, taus, 2 * config.order
            )
            lookup = {(c.sample, c.tau): c.ratio for c in refined.cells}
            failed = {(c.sample, c.tau) for c in base.failures}
            return [
                [
                    label,
                    c.potential,
                    c.sample,
                    c.tau,
                    c.ratio,
                    lookup.get((c.sample, c.tau)),
                    (c.sample, c.tau) in failed if reference is not None else None,
                ]
                for c in base.cells
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = []
        calibrating = max(1, config.samples // 2)
        for label, _ in supports:
            base, calibration, refined, over = [], [], [], 0
            for sup, sample, ratio, fine, flagged in zip(
                table.column("support"),
                table.column("sample"),
                table.column("ratio"),
                table.column("ratio_refined"),
                table.column("over_reference"),
                strict=True,
            ):
                if sup != label or not isinstance(ratio, float):
                    continue
                base.append(ratio)
                over += flagged is True
                if isinstance(sample, int) and sample < calibrating:
                    calibration.append(ratio)
                if isinstance(fine, float):
                    refined.append(fine)
            name = f"carleman-{label}"
            if label in recorded:
                reference = recorded[label]
                worst = max(base) if base else None
                results.append(
                    CriterionResult(
                        name=name,
                        value=_finite(worst) if worst is not None else None,
                        threshold=reference,
                        passed=bool(base) and over == 0 and all(map(math.isfinite, base)),
                        detail=f"{over} cells above the recorded C*",
                    )
                )
            else:
                results.append(_calibrated(name, base, calibration, config.margin, None))
            if config.stability_tol is not None and base and refined:
                c_star, c_fine = max(base), max(refined)
                drift = abs(c_fine - c_star) / c_star
                results.append(
                    CriterionResult(
                        name=f"stability-{label}",
                        value=_finite(drift),
                        threshold=config.stability_tol,
                        passed=drift <= config.stability_tol,
                        detail=f"C*={c_star:.6g} refined {c_fine:.6g}",
                    )
                )
        return results

    jobs = [
        ([label, potential.label], job(support, label, potential))
        for label, support in supports
        for potential in potentials
    ]
    return _Plan(columns, jobs, criteria)


def _plan_critical(config: CriticalMeasureConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "sqrt_lambda", "H1_estimate", "reference",
        "rel_error", "verdict", "grid_n", "critical_count", "error",
    ]  # fmt: skip

    def job(member: _Member) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            estimate = critical_measure(pair, config.grid_n, max_grid=config.max_grid)
            reference = pair.reference_critical_length()
            rel = (
                abs(estimate.extrapolated - reference) / reference
                if reference
                else None
            )
            count = (
                len(
                    distinct_colatitudes(
                        critical_points(pair, max(128, config.grid_n)), pair.surface
                    )
                )
                if isinstance(pair, ZonalEigenPair)
                else None
            )
            return [
                [
                    *member.key,
                    pair.lambda_,
                    math.sqrt(pair.lambda_),
                    estimate.extrapolated,
                    reference,
                    rel,
                    estimate.verdict,
                    estimate.grid_n,
                    count,
                ]
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = [_at_most("rel-error", _numbers(table, "rel_error"), config.rel_tol)]
        mismatches = [
            int(k)
            for fam, k, count in zip(
                table.column("family"),
                table.column("k"),
                table.column("critical_count"),
                strict=True,
            )
            if fam == "zonal" and isinstance(k, int) and count != k - 1
        ]
        if "zonal" in table.column("family"):
            results.append(
                CriterionResult(
                    name="zonal-latitude-count",
                    value=len(mismatches),
                    threshold=0.0,
                    passed=not mismatches,
                    detail=f"degrees {mismatches}" if mismatches else "",
                )
            )
        curves = table.model_copy(
            update={"rows": [r for r in table.rows if r[table.columns.index("verdict")] == "curve"]}
        )
        for spec in config.families:
            samples = _pairs(curves, config.fit_axis, "H1_estimate", spec.label)
            results += _fit_criteria(spec.label, samples, config.slope, config.r_squared_min)
        return results

    jobs = [(m.key, job(m)) for m in _members(config.families)]
    return _Plan(columns, jobs, criteria)


def _plan_nodal(config: NodalMeasureConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "sqrt_lambda", "nodal_length", "reference",
        "rel_error", "error",
    ]  # fmt: skip

    def job(member: _Member) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            length = nodal_measure(pair, config.grid_n)
            reference = pair.reference_nodal_length()
            rel = abs(length - reference) / reference if reference else None
            return [[*member.key, pair.lambda_, math.sqrt(pair.lambda_), length, reference, rel]]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = [_at_most("rel-error", _numbers(table, "rel_error"), config.rel_tol)]
        for spec in config.families:
            samples = _pairs(table, "lambda", "nodal_length", spec.label)
            results += _fit_criteria(spec.label, samples, config.slope, config.r_squared_min)
        return results

    jobs = [(m.key, job(m)) for m in _members(config.families)]
    return _Plan(columns, jobs, criteria)


def _plan_fit(config: FitConfig) -> _Plan:
    columns = ["family", "k", "lambda", "sqrt_lambda", "value", "error"]

    def job(member: _Member) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            if config.quantity == "nodal":
                value = nodal_measure(pair, config.grid_n)
            else:
                estimate = critical_measure(pair, config.grid_n)
                if estimate.verdict != "curve":
                    raise ConvergenceError(
                        f"critical set verdict {estimate.verdict!r}, no length to fit"
                    )
                value = estimate.extrapolated
            return [[*member.key, pair.lambda_, math.sqrt(pair.lambda_), value]]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        samples = _pairs(table, config.fit_axis, "value")
        return _fit_criteria(config.quantity, samples, config.slope, config.r_squared_min)

    jobs = [(m.key, job(m)) for m in _members(config.families)]
    return _Plan(columns, jobs, criteria)


def _plan_growth(config: GrowthConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "sqrt_lambda", "alpha_growth", "alpha_ratio",
        "sup_complex", "sup_real_half", "taylor_constant", "local_extension",
        "vanishing_order", "error",
    ]  # fmt: skip
    center = Point(coords=config.center)

    def job(member: _Member) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            report = growth_exponent(pair, center, config.chart_scale, config.grid_n)
            taylor = taylor_derivative_check(pair, config.max_order, center, config.c1)
            extension = local_extension_ratio(pair, center, 1.0, config.grid_n)
            try:
                order: int | None = vanishing_order(pair, center)
            except ConvergenceError:
                order = None
            root = math.sqrt(pair.lambda_)
            return [
                [
                    *member.key,
                    pair.lambda_,
                    root,
                    report.alpha_growth,
                    report.alpha_growth / root,
                    report.sup_complex,
                    report.sup_real_half,
                    taylor.minimal_constant,
                    extension,
                    order,
                ]
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = [
            _at_most("alpha-ratio", _numbers(table, "alpha_ratio"), config.alpha_ratio_max),
            _at_most("taylor", _numbers(table, "taylor_constant"), config.taylor_max),
        ]
        if config.alpha_limit is not None:
            rows = [
                (lam, ratio)
                for lam, ratio in zip(
                    table.column("lambda"), table.column("alpha_ratio"), strict=True
                )
                if isinstance(lam, float) and isinstance(ratio, float)
            ]
            if rows:
                _, last = max(rows)
                results.append(
                    CriterionResult(
                        name="alpha-limit",
                        value=last,
                        threshold=config.alpha_limit.target,
                        passed=abs(last - config.alpha_limit.target) <= config.alpha_limit.tol,
                        detail="largest eigenvalue of the family",
                    )
                )
        return results

    jobs = [(m.key, job(m)) for m in _members(config.families)]
    return _Plan(columns, jobs, criteria)


def _plan_df(config: DfCheckConfig) -> _Plan:
    columns = ["family", "k", "lambda", "alpha_growth", "measure", "ratio", "error"]
    center = Point(coords=config.center)

    def job(member: _Member) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            relation = df_relation_check([pair], center, config.chart_scale, config.grid_n)
            report = relation.reports[0]
            return [
                [
                    *member.key,
                    pair.lambda_,
                    report.alpha_growth,
                    report.measured_measure,
                    relation.max_ratio,
                ]
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        return [_at_most("df-ratio", _numbers(table, "ratio"), config.ratio_max)]

    jobs = [(m.key, job(m)) for m in _members(config.families)]
    return _Plan(columns, jobs, criteria)


def _plan_elliptic(config: EllipticConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "center_x1", "center_x2", "shrink", "radius",
        "ratio", "error",
    ]  # fmt: skip

    def job(member: _Member, radius: float) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            centers = sweep_centers(pair, config.centers, config.seed, config.pole_margin)
            return [
                [
                    *member.key,
                    pair.lambda_,
                    c.x1,
                    c.x2,
                    a,
                    radius,
                    elliptic_gradient_check(pair, c, radius, a, config.order),
                ]
                for c in centers
                for a in config.shrink
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        return [_at_most("elliptic", _numbers(table, "ratio"), config.bound)]

    members = _members(config.families)
    jobs = [
        ([*m.key, None, None, None, None, radius], job(m, radius))
        for m in members
        for radius in config.radii
    ]
    return _Plan(columns, jobs, criteria)


def _plan_lower_bound(config: LowerBoundConfig) -> _Plan:
    columns = [
        "family", "k", "lambda", "sqrt_lambda", "radius", "min_ratio",
        "exponent", "annulus_ratio", "error",
    ]  # fmt: skip

    def job(member: _Member, radius: float) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            pair = member.require()
            centers = sweep_centers(pair, config.centers, config.seed, config.pole_margin)
            report = global_lower_bound_check(pair, radius, centers, config.order)
            annulus = annulus_lower_bound_check(pair, radius, report.center, config.order)
            return [
                [
                    *member.key,
                    pair.lambda_,
                    math.sqrt(pair.lambda_),
                    radius,
                    report.min_ratio,
                    report.exponent,
                    annulus,
                ]
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        results = []
        limits = config.bounds or [None] * len(config.radii)
        for radius, limit in zip(config.radii, limits, strict=True):
            exponents = [
                float(e)
                for r, e in zip(table.column("radius"), table.column("exponent"), strict=True)
                if r == radius and isinstance(e, float)
            ]
            results.append(_at_most(f"lower-bound-R{radius:g}", exponents, limit))
        return results

    members = _members(config.families)
    jobs = [
        ([*m.key, None, None, radius], job(m, radius)) for m in members for radius in config.radii
    ]
    return _Plan(columns, jobs, criteria)


def _plan_weight(config: WeightConfig) -> _Plan:
    columns = [
        "epsilon", "t0", "derivative_bounds", "divergence", "lower_bound",
        "left_value", "a_min", "b_min", "spot_error", "error",
    ]  # fmt: skip

    def job(epsilon: float, t0: float) -> Callable[[], list[Row]]:
        def compute() -> list[Row]:
            params = WeightParams(epsilon=epsilon, t0=t0)
            grid = np.linspace(t0 - config.grid_span, t0, config.grid_points)
            report = check_weight_admissibility(params, grid)
            radii = [r for r in config.radii if r < params.max_radius]
            if not radii:
                raise DomainError(f"no radius below exp(t0) = {params.max_radius:.6g}")
            bounds = weight_alpha_bounds(params, radii)
            values = weight_eval(params, t=grid)
            exact = grid - np.exp(epsilon * grid)
            spot = max(
                float(np.max(np.abs(values.f - exact))),
                float(np.max(np.abs(phi(params, np.exp(grid)) + exact))),
            )
            return [
                [
                    epsilon,
                    t0,
                    report.derivative_bounds,
                    report.divergence,
                    report.lower_bound,
                    report.left_value,
                    bounds.a_min,
                    bounds.b_min,
                    spot,
                ]
            ]

        return compute

    def criteria(table: ResultTable) -> list[CriterionResult]:
        inadmissible = sum(
            not (d is True and v is True)
            for d, v in zip(
                table.column("derivative_bounds"), table.column("divergence"), strict=True
            )
        )
        nonpositive = sum(
            not (isinstance(a, float) and isinstance(b, float) and a > 0 and b > 0)
            for a, b in zip(table.column("a_min"), table.column("b_min"), strict=True)
        )
        return [
            CriterionResult(
                name="admissibility", value=inadmissible, threshold=0.0, passed=inadmissible == 0
            ),
            CriterionResult(
                name="weight-bounds", value=nonpositive, threshold=0.0, passed=nonpositive == 0
            ),
            _at_most("spot-check", _numbers(table, "spot_error"), config.spot_tol),
        ]

    jobs = [([w.epsilon, w.t0], job(w.epsilon, w.t0)) for w in config.weights]
    return _Plan(columns, jobs, criteria)


def _plan(config: ExperimentConfig) -> _Plan:
    match config:
        case SpectrumConfig():
            return _plan_spectrum(config)
        case DoublingConfig():
            return _plan_doubling(config)
        case ThreeSphereConfig():
            return _plan_three_sphere(config)
        case CarlemanConfig():
            return _plan_carleman(config)
        case CriticalMeasureConfig():
            return _plan_critical(config)
        case NodalMeasureConfig():
            return _plan_nodal(config)
        case FitConfig():
            return _plan_fit(config)
        case GrowthConfig():
            return _plan_growth(config)
        case DfCheckConfig():
            return _plan_df(config)
        case EllipticConfig():
            return _plan_elliptic(config)
        case LowerBoundConfig():
            return _plan_lower_bound(config)
        case WeightConfig():
            return _plan_weight(config)
    raise DomainError(f"unknown experiment {config.experiment!r}")


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Run one experiment and evaluate its acceptance criteria.

    Args:
        config: Validated experiment configuration.
        jobs: Worker threads for independent rows.

    Returns:
        The result table; rows are in job order regardless of ``jobs``.
    """
    start = time.perf_counter()
    plan = _plan(config)
    logger.info(f"{config.experiment}: {len(plan.jobs)} jobs on {jobs} worker(s)")
    rows, failures = _run_rows(plan.jobs, len(plan.columns), jobs)
    table = ResultTable(
        experiment=config.experiment,
        columns=plan.columns,
        rows=rows,
        metadata=TableMetadata(
            config_hash=config_hash(config), version=package_version(), seed=config.seed
        ),
        failures=failures,
    )
    criteria = plan.criteria(table)
    wall = time.perf_counter() - start
    table = table.model_copy(
        update={
            "criteria": criteria,
            "metadata": table.metadata.model_copy(update={"wall_time": wall}),
        }
    )
    log = logger.info if table.passed else logger.warning
    log(
        f"{config.experiment}: {len(rows)} rows, {failures} failed, "
        f"{'pass' if table.passed else 'FAIL'} in {wall:.1f}s"
    )
    return table


_PLOTS: dict[str, tuple[Literal["loglog-fit", "scatter"], str, str]] = {
    "critical-measure": ("loglog-fit", "lambda", "H1_estimate"),
    "fit": ("loglog-fit", "lambda", "value"),
    "nodal-measure": ("loglog-fit", "lambda", "nodal_length"),
    "doubling": ("scatter", "sqrt_lambda", "max_index"),
    "growth": ("scatter", "sqrt_lambda", "alpha_growth"),
    "lower-bound": ("scatter", "sqrt_lambda", "exponent"),
    "three-sphere": ("scatter", "lambda", "required_c"),
    "carleman": ("scatter", "tau", "ratio"),
    "df-check": ("scatter", "alpha_growth", "measure"),
}


def plot_requests(config: ExperimentConfig) -> list[PlotRequest]:
    """Default plots of an experiment, none when ``plots`` is off."""
    if not config.plots or config.experiment not in _PLOTS:
        return []
    kind, x, y = _PLOTS[config.experiment]
    if isinstance(config, CriticalMeasureConfig | FitConfig):
        x = config.fit_axis
    return [
        PlotRequest(
            name=config.experiment, experiment=config.experiment, kind=kind, x=x, y=y
        )
    ]


def format_cell(value: Cell) -> str:
    """CSV text of a cell: 17 significant digits, lowercase booleans."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_table_csv(table: ResultTable, path: Path) -> Path:
    """Write one table as CSV with ``\\n`` line endings.

    Raises:
        ReportError: The file cannot be written.
    """
    try:
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(table.columns)
            writer.writerows([format_cell(c) for c in row] for row in table.rows)
    except OSError as e:
        raise ReportError(str(path), f"cannot write {path}: {e}") from e
    return path


def render_plot(table: ResultTable, request: PlotRequest, path: Path) -> Path:
    """Render one SVG: points, plus the fitted power law for ``loglog-fit``.

    Raises:
        ReportError: The file cannot be written.
    """
    samples = [
        (float(x), float(y))
        for x, y in zip(table.column(request.x), table.column(request.y), strict=True)
        if isinstance(x, int | float) and isinstance(y, int | float)
        and math.isfinite(x) and math.isfinite(y)
    ]
    if request.kind == "loglog-fit":
        samples = [(x, y) for x, y in samples if x > 0 and y > 0]
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.subplots()
    try:
        if samples:
            xs, ys = np.array(samples).T
            ax.scatter(xs, ys, s=14, color="tab:blue", label="measured")
            if request.kind == "loglog-fit":
                ax.set_xscale("log")
                ax.set_yscale("log")
                try:
                    fit = scaling_fit(samples)
                except SpecGeoError as e:
                    logger.warning(f"{request.name}: no fitted line ({e})")
                else:
                    grid = np.geomspace(xs.min(), xs.max(), 64)
                    ax.plot(
                        grid,
                        fit.prefactor * grid**fit.slope,
                        color="tab:red",
                        label=f"slope {fit.slope:.4f}, r2 {fit.r_squared:.5f}",
                    )
            ax.legend()
        ax.set_xlabel(request.x)
        ax.set_ylabel(request.y)
        ax.set_title(request.title or request.name)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ReportError(str(path), f"cannot write {path}: {e}") from e
    return path


def emit_report(
    tables: Sequence[ResultTable], plots: Sequence[PlotRequest], out_dir: Path
) -> Summary:
    """Write ``<experiment>.csv`` per table, one SVG per plot and ``summary.json``.

    Raises:
        DomainError: No tables.
        ReportError: A file or the output directory cannot be written, or a
            plot names an experiment without a table.
    """
    if not tables:
        raise DomainError("no result tables to report")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(str(out_dir), f"cannot create {out_dir}: {e}") from e
    by_name = {t.experiment: t for t in tables}
    files = [write_table_csv(t, out_dir / f"{t.experiment}.csv").name for t in tables]
    for request in plots:
        path = out_dir / f"{request.name}.svg"
        if request.experiment not in by_name:
            raise ReportError(str(path), f"no table for plot {request.name!r}")
        files.append(render_plot(by_name[request.experiment], request, path).name)
    summary = Summary(
        passed=all(t.passed for t in tables),
        experiments={t.experiment: t.criteria for t in tables},
        metadata={t.experiment: t.metadata for t in tables},
        failures={t.experiment: t.failures for t in tables},
        files=[*files, "summary.json"],
    )
    path = out_dir / "summary.json"
    try:
        path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ReportError(str(path), f"cannot write {path}: {e}") from e
    logger.info(f"report written to {out_dir} ({len(summary.files)} files)")
    return summary

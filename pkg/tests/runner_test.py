"""Tests for the runner module."""

import json
import math
from pathlib import Path
from typing import Any

import pytest

from specgeo import runner
from specgeo._models import PlotRequest, ResultTable, TableMetadata
from specgeo.config import ConvergenceSpec, parse_config
from specgeo.errors import DomainError, ReportError
from specgeo.manifolds import Revolution
from specgeo.spectra import (
    SturmLiouvilleSpec,
    revolution_eigenpair,
    sphere_zonal_eigenpair,
    torus_eigenpair,
)

TORUS = {"kind": "torus", "periods": [2 * math.pi, 2 * math.pi]}


def _weight(**overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "experiment": "weight",
        "seed": 0,
        "weights": [{"epsilon": 0.5, "t0": -2.0}, {"epsilon": 0.99, "t0": -1.0}],
        "grid_points": 500,
        "grid_span": 40.0,
        "radii": [0.05, 0.1],
        "spot_tol": 1e-12,
    }
    return {**data, **overrides}


def _spectrum(**overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "experiment": "spectrum",
        "seed": 0,
        "families": [{"surface": TORUS, "kind": "torus", "indices": [1, 2, 3]}],
        "order": 8,
        "samples": 20,
        "residual_tol": 1e-6,
        "gradient_tol": 1e-6,
        "hessian_tol": 1e-4,
    }
    return {**data, **overrides}


def _nodal(**overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "experiment": "nodal-measure",
        "seed": 0,
        "families": [{"surface": TORUS, "kind": "torus", "indices": [2, 3, 4, 5]}],
        "grid_n": 128,
        "rel_tol": 1e-3,
        "slope": {"target": 0.5, "tol": 0.02},
        "r_squared_min": 0.999,
    }
    return {**data, **overrides}


def _carleman(**overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "experiment": "carleman",
        "seed": 0,
        "surface": TORUS,
        "samples": 20,
        "support_center": [math.pi, math.pi],
        "support_radius": 0.4,
        "angular_modes": [0, 1],
        "radial_degree": 2,
        "potentials": [1.0],
        "perturbed": [],
        "epsilon": 0.5,
        "tau_steps": 2,
        "order": 8,
        "margin": 0.1,
    }
    return {**data, **overrides}


def _table(rows: list[list[Any]]) -> ResultTable:
    return ResultTable(
        experiment="nodal-measure",
        columns=["family", "lambda", "nodal_length", "error"],
        rows=rows,
        metadata=TableMetadata(config_hash="0" * 64, version="0.0.0", seed=0),
    )


class TestMembers:
    """Test cases for family construction."""

    def test_build_torus_member(self) -> None:
        """Test torus members are sin(k x1)."""
        config = parse_config(_spectrum())
        pair = runner.build_member(config.families[0], 4)  # type: ignore[union-attr]
        assert pair.lambda_ == pytest.approx(16.0)

    def test_reference_eigenvalue(self) -> None:
        """Test revolution modes on the round profile get l (l + 1)."""
        spec = SturmLiouvilleSpec(surface=Revolution(bulge=0.0), m=1, grid_size=256)
        assert runner.reference_eigenvalue(revolution_eigenpair(spec, 2)) == 6.0
        bulged = SturmLiouvilleSpec(surface=Revolution(bulge=0.3), m=0, grid_size=256)
        assert runner.reference_eigenvalue(revolution_eigenpair(bulged, 1)) is None
        assert runner.reference_eigenvalue(torus_eigenpair((1, 2))) == pytest.approx(5.0)


class TestRunExperiment:
    """Test cases for run_experiment."""

    def test_weight(self) -> None:
        """Test the weight experiment passes on admissible parameters."""
        table = runner.run_experiment(parse_config(_weight()))
        assert table.experiment == "weight"
        assert len(table.rows) == 2
        assert table.failures == 0
        assert table.passed
        assert [c.name for c in table.criteria] == ["admissibility", "weight-bounds", "spot-check"]

    def test_failure_row(self) -> None:
        """Test a failing row is recorded and the run continues."""
        data = _weight(
            weights=[{"epsilon": 0.5, "t0": -4.0}, {"epsilon": 0.5, "t0": -1.0}],
            radii=[0.1],
        )
        table = runner.run_experiment(parse_config(data))
        assert table.failures == 1
        assert table.rows[0][:2] == [0.5, -4.0]
        assert "exp(t0)" in str(table.rows[0][-1])
        assert table.rows[1][-1] is None
        assert not table.passed

    def test_spectrum(self) -> None:
        """Test closed-form torus pairs pass the spectrum checks."""
        table = runner.run_experiment(parse_config(_spectrum()))
        assert table.passed
        assert table.column("k") == [1, 2, 3]
        assert all(isinstance(v, float) for v in table.column("system_residual"))

    def test_bad_member_becomes_row(self) -> None:
        """Test a revolution index beyond the grid becomes a failure row."""
        family = {
            "surface": {"kind": "revolution", "bulge": 0.0},
            "kind": "revolution",
            "indices": [1, 40],
            "m": 0,
            "grid_size": 128,
        }
        table = runner.run_experiment(
            parse_config(_spectrum(families=[family], residual_tol=None, gradient_tol=None))
        )
        assert table.failures == 1
        assert table.rows[1][:2] == ["revolution-m0", 40]
        assert table.rows[1][-1] is not None

    def test_nodal_fit(self) -> None:
        """Test the nodal experiment fits slope 1/2 against lambda."""
        table = runner.run_experiment(parse_config(_nodal()))
        names = {c.name: c for c in table.criteria}
        assert names["torus-slope"].value == pytest.approx(0.5, abs=1e-3)
        assert names["torus-slope"].passed
        assert names["torus-r2"].passed
        assert table.passed

    def test_deterministic_across_workers(self) -> None:
        """Test the rows do not depend on the worker count."""
        config = parse_config(_nodal())
        assert runner.run_experiment(config, jobs=1).rows == runner.run_experiment(
            config, jobs=3
        ).rows

    def test_missing_thresholds_skip_fit(self) -> None:
        """Test a config without fit thresholds evaluates no fit criteria."""
        table = runner.run_experiment(
            parse_config(_nodal(slope=None, r_squared_min=None, rel_tol=None))
        )
        assert [c.name for c in table.criteria] == ["rel-error"]
        assert table.passed


def _doubling(**overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "experiment": "doubling",
        "seed": 0,
        "families": [{"surface": TORUS, "kind": "torus", "indices": [1, 2, 3, 4]}],
        "centers": 4,
        "radii": [0.1, 0.2],
        "order": 8,
        "pole_margin": 0.05,
        "norms": ["l2"],
        "margin": 0.1,
        "slope_tol": 0.1,
    }
    return {**data, **overrides}


def _critical(**overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "experiment": "critical-measure",
        "seed": 0,
        "families": [
            {"surface": {"kind": "sphere", "radius": 1.0}, "kind": "zonal", "indices": [2, 3]}
        ],
        "grid_n": 128,
        "max_grid": 1024,
        "fit_axis": "reference",
    }
    return {**data, **overrides}


def _doubling_rows(ys: list[float], fine: list[float]) -> ResultTable:
    rows: list[list[Any]] = [
        ["torus", k, float(k * k), float(k), "l2", y, f, 0.1, 0.0, 0.0, None]
        for k, y, f in zip([1, 2, 3, 4], ys, fine, strict=True)
    ]
    plan = runner._plan_doubling(parse_config(_doubling()))  # type: ignore[arg-type]
    return ResultTable(
        experiment="doubling",
        columns=plan.columns,
        rows=rows,
        metadata=TableMetadata(config_hash="0" * 64, version="0.0.0", seed=0),
    )


class TestCriteria:
    """Test cases for the calibrated acceptance criteria."""

    @staticmethod
    def evaluate(table: ResultTable) -> dict[str, Any]:
        plan = runner._plan_doubling(parse_config(_doubling()))  # type: ignore[arg-type]
        return {c.name: c for c in plan.criteria(table)}

    def test_calibrated_flags_excess(self) -> None:
        """Test values beyond the widened holdout constant fail."""
        result = runner._calibrated("c", [1.0, 1.05, 3.0], [1.0, 1.05], 0.1, None)
        assert not result.passed
        assert result.value == pytest.approx(3.0)
        assert "1 violations" in result.detail

    def test_calibrated_within_margin(self) -> None:
        """Test values inside the margin pass."""
        result = runner._calibrated("c", [1.0, 1.05, 1.1], [1.0, 1.05], 0.1, None)
        assert result.passed

    def test_calibrated_non_finite(self) -> None:
        """Test an overflowing value fails the calibrated criterion."""
        result = runner._calibrated("c", [1.0, 1e250 * 1e250], [1.0], 0.1, None)
        assert not result.passed
        assert result.value is None

    def test_lower_half(self) -> None:
        """Test the calibrating keys cover the lower half of each family."""
        config = parse_config(_doubling())
        members = runner._members(config.families)  # type: ignore[union-attr]
        assert runner._lower_half(members) == {("torus", 1), ("torus", 2)}

    def test_doubling_bound_holds(self) -> None:
        """Test rows on the calibrated line pass both doubling criteria."""
        names = self.evaluate(_doubling_rows([2.0, 3.0, 4.0, 5.0], [2.0, 3.0, 4.0, 5.0]))
        assert names["doubling-l2"].passed
        assert names["doubling-l2"].value == 0
        assert names["doubling-l2-torus-order"].passed
        assert names["doubling-l2-torus-order"].value == pytest.approx(0.0, abs=1e-12)

    def test_doubling_runaway_member(self) -> None:
        """Test a runaway index above the lower-half bound fails."""
        names = self.evaluate(_doubling_rows([1.0, 1.0, 1.0, 50.0], [1.0, 1.0, 1.0, 50.0]))
        assert not names["doubling-l2"].passed
        assert names["doubling-l2"].value == 1

    def test_doubling_slope_drift(self) -> None:
        """Test a slope that doubles with the quadrature order fails."""
        names = self.evaluate(_doubling_rows([2.0, 3.0, 4.0, 5.0], [2.0, 4.0, 6.0, 8.0]))
        assert names["doubling-l2"].passed
        assert not names["doubling-l2-torus-order"].passed
        assert names["doubling-l2-torus-order"].value == pytest.approx(1.0)

    def test_lower_bound_per_radius(self) -> None:
        """Test each radius is held to its own exponent limit."""
        data = {
            **{k: v for k, v in _doubling().items() if k not in ("norms", "margin", "slope_tol")},
            "experiment": "lower-bound",
            "bounds": [4.0, 0.5],
        }
        plan = runner._plan_lower_bound(parse_config(data))  # type: ignore[arg-type]
        rows: list[list[Any]] = [
            ["torus", 1, 1.0, 1.0, radius, 0.1, 1.0, 0.1, None] for radius in (0.1, 0.2)
        ]
        table = ResultTable(
            experiment="lower-bound",
            columns=plan.columns,
            rows=rows,
            metadata=TableMetadata(config_hash="0" * 64, version="0.0.0", seed=0),
        )
        names = {c.name: c for c in plan.criteria(table)}
        assert names["lower-bound-R0.1"].passed
        assert not names["lower-bound-R0.2"].passed
        assert names["lower-bound-R0.2"].threshold == 0.5

    @staticmethod
    def zonal_critical_table(degrees: list[int]) -> ResultTable:
        rows: list[list[Any]] = []
        for degree in degrees:
            pair = sphere_zonal_eigenpair(1.0, degree)
            reference = pair.reference_critical_length()
            lam = pair.lambda_
            rows.append(
                [
                    "zonal", degree, lam, math.sqrt(lam), reference, reference,
                    0.0, "curve", 256, degree - 1, None,
                ]
            )  # fmt: skip
        return ResultTable(
            experiment="critical-measure",
            columns=[
                "family", "k", "lambda", "sqrt_lambda", "H1_estimate", "reference",
                "rel_error", "verdict", "grid_n", "critical_count", "error",
            ],  # fmt: skip
            rows=rows,
            metadata=TableMetadata(config_hash="0" * 64, version="0.0.0", seed=0),
        )

    @pytest.mark.parametrize("axis,passed", [("reference", True), ("sqrt_lambda", False)])
    def test_zonal_reference_axis(self, axis: str, passed: bool) -> None:
        """Test exact zonal lengths fit slope 1 against the closed form only."""
        config = parse_config(
            _critical(fit_axis=axis, slope={"target": 1.0, "tol": 0.05})
        )
        plan = runner._plan_critical(config)  # type: ignore[arg-type]
        names = {c.name: c for c in plan.criteria(self.zonal_critical_table(list(range(2, 16))))}
        assert names["zonal-slope"].passed is passed
        assert names["zonal-latitude-count"].passed
        if passed:
            assert names["zonal-slope"].value == pytest.approx(1.0, abs=1e-9)

    def test_zonal_latitudes_measured(self) -> None:
        """Test the latitude count comes from the critical points that were found."""
        table = runner.run_experiment(parse_config(_critical()))
        assert table.column("critical_count") == [1, 2]
        names = {c.name: c for c in table.criteria}
        assert names["zonal-latitude-count"].passed

    @pytest.mark.parametrize(
        "low,high,passed",
        [(1.99, 2.01, True), (1.5, 2.01, False), (1.99, 2.6, False), (None, None, False)],
    )
    def test_convergence_order_range(
        self, low: float | None, high: float | None, passed: bool
    ) -> None:
        """Test the observed orders must stay inside the admissible range."""
        plan = runner._plan_spectrum(parse_config(_spectrum()))  # type: ignore[arg-type]
        table = ResultTable(
            experiment="spectrum",
            columns=plan.columns,
            rows=[["revolution-m0", 1, 2.0, 2.0, 0.0, 0.0, 0.0, None, low, high, None]],
            metadata=TableMetadata(config_hash="0" * 64, version="0.0.0", seed=0),
        )
        result = runner._order_range(table, ConvergenceSpec(grid_sizes=[512, 1024, 2048]))
        assert result.name == "convergence-order"
        assert result.passed is passed

    def test_spectrum_convergence_rows(self) -> None:
        """Test revolution rows carry observed orders and torus rows do not."""
        family = {
            "surface": {"kind": "revolution", "bulge": 0.0},
            "kind": "revolution",
            "indices": [1],
            "m": 0,
            "grid_size": 512,
        }
        data = _spectrum(
            families=[{"surface": TORUS, "kind": "torus", "indices": [1]}, family],
            residual_tol=None,
            gradient_tol=None,
            hessian_tol=None,
            convergence={"grid_sizes": [512, 1024, 2048]},
        )
        table = runner.run_experiment(parse_config(data))
        low, high = table.column("observed_order_min"), table.column("observed_order_max")
        assert low[0] is None and high[0] is None
        assert 1.8 <= low[1] <= high[1] <= 2.2
        assert {c.name: c for c in table.criteria}["convergence-order"].passed

    def test_carleman_recorded_constant(self) -> None:
        """Test cells above a recorded constant fail the Carleman criterion."""
        table = runner.run_experiment(
            parse_config(_carleman(reference_constants={"ball": 1e-300}))
        )
        names = {c.name: c for c in table.criteria}
        assert not names["carleman-ball"].passed
        assert names["carleman-ball"].threshold == 1e-300
        assert table.column("over_reference") == [True] * len(table.rows)

    def test_carleman_holdout(self) -> None:
        """Test without a recorded constant the first half of the samples calibrates."""
        table = runner.run_experiment(parse_config(_carleman()))
        names = {c.name: c for c in table.criteria}
        assert len(table.rows) == 20 * 2
        assert names["carleman-ball"].detail.startswith("calibrated")
        assert set(table.column("over_reference")) == {None}


class TestCells:
    """Test cases for CSV formatting."""

    @pytest.mark.parametrize(
        "value,expected",
        [
            (None, ""),
            (True, "true"),
            (False, "false"),
            (3, "3"),
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            ("torus", "torus"),
        ],
    )
    def test_format_cell(self, value: Any, expected: str) -> None:
        """Test 17 significant digits and lowercase booleans."""
        assert runner.format_cell(value) == expected

    def test_write_table_csv(self, tmp_path: Path) -> None:
        """Test header, rows and newline endings."""
        table = _table([["torus", 4.0, 8.0, None]])
        path = runner.write_table_csv(table, tmp_path / "t.csv")
        assert path.read_bytes() == b"family,lambda,nodal_length,error\ntorus,4,8,\n"

    def test_row_arity(self) -> None:
        """Test rows must match the column count."""
        with pytest.raises(ValueError):
            _table([["torus", 4.0]])


class TestEmitReport:
    """Test cases for plots and emit_report."""

    def test_plot_requests(self) -> None:
        """Test default plots follow the fit axis and the plots flag."""
        config = parse_config(_nodal())
        requests = runner.plot_requests(config)
        assert [(r.kind, r.x, r.y) for r in requests] == [
            ("loglog-fit", "lambda", "nodal_length")
        ]
        assert runner.plot_requests(parse_config(_nodal(plots=False))) == []
        assert runner.plot_requests(parse_config(_weight())) == []

    def test_emit(self, tmp_path: Path) -> None:
        """Test CSV, SVG and summary.json are written."""
        config = parse_config(_nodal())
        table = runner.run_experiment(config)
        summary = runner.emit_report([table], runner.plot_requests(config), tmp_path / "out")
        assert summary.files == ["nodal-measure.csv", "nodal-measure.svg", "summary.json"]
        assert summary.passed
        data = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert data["passed"] is True
        assert data["metadata"]["nodal-measure"]["seed"] == 0
        assert (tmp_path / "out" / "nodal-measure.svg").read_text().lstrip().startswith("<?xml")

    def test_svg_reproducible(self, tmp_path: Path) -> None:
        """Test two renders of the same table are byte-identical."""
        table = _table([["torus", 4.0, 8.0, None], ["torus", 9.0, 12.0, None], ["torus", 16.0, 16.0, None]])
        request = PlotRequest(
            name="n", experiment="nodal-measure", kind="loglog-fit", x="lambda", y="nodal_length"
        )
        a = runner.render_plot(table, request, tmp_path / "a.svg").read_bytes()
        b = runner.render_plot(table, request, tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_no_tables(self, tmp_path: Path) -> None:
        """Test an empty report is rejected."""
        with pytest.raises(DomainError):
            runner.emit_report([], [], tmp_path)

    def test_out_dir_is_file(self, tmp_path: Path) -> None:
        """Test an unwritable output directory raises ReportError."""
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ReportError):
            runner.emit_report([_table([])], [], blocker / "out")

    def test_plot_without_table(self, tmp_path: Path) -> None:
        """Test a plot naming a missing table raises ReportError."""
        request = PlotRequest(name="d", experiment="doubling", kind="scatter", x="a", y="b")
        with pytest.raises(ReportError):
            runner.emit_report([_table([])], [request], tmp_path)

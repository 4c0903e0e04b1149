"""Data models for specgeo experiment results.

This module defines the Pydantic models that carry experiment outputs from
the runner to the report writer: result tables, acceptance criteria, plot
requests and the JSON summary.
"""

from typing import Literal, Self

from pydantic import BaseModel, Field, model_validator

from ._typing import ExperimentKind

Cell = float | int | str | bool | None
"""A single CSV cell."""


class TableMetadata(BaseModel):
    """Provenance of a result table.

    Attributes:
        config_hash: SHA-256 of the canonical configuration JSON.
        version: Installed specgeo version.
        seed: Seed actually used (after the environment override).
        wall_time: Seconds spent in the experiment.
    """

    config_hash: str
    version: str
    seed: int
    wall_time: float = 0.0


class CriterionResult(BaseModel):
    """Pass/fail outcome of one acceptance threshold.

    Attributes:
        name: Short criterion identifier, e.g. ``slope``.
        value: Measured value, None when it is not finite.
        threshold: Bound the value was compared against, when one applies.
        passed: Whether the criterion holds.
        detail: Free-form context (fitted constants, offending row).
    """

    name: str
    value: float | None
    threshold: float | None = None
    passed: bool
    detail: str = ""


class PlotRequest(BaseModel):
    """An SVG to render from a result table.

    Attributes:
        name: File stem of the SVG.
        experiment: Table the columns are read from.
        kind: ``loglog-fit`` draws points and the fitted power law;
            ``scatter`` draws points only.
        x: Column on the horizontal axis.
        y: Column on the vertical axis.
        title: Plot title.
    """

    name: str
    experiment: ExperimentKind
    kind: Literal["loglog-fit", "scatter"]
    x: str
    y: str
    title: str = ""


class ResultTable(BaseModel):
    """Rows produced by one experiment run.

    Attributes:
        experiment: Experiment kind that produced the table.
        columns: Column names.
        rows: Rows in deterministic order, one cell per column.
        metadata: Provenance of the run.
        criteria: Acceptance criteria evaluated on the rows.
        failures: Rows whose sub-operation failed (their ``error`` cell is set).
    """

    experiment: ExperimentKind
    columns: list[str]
    rows: list[list[Cell]] = Field(default_factory=list)
    metadata: TableMetadata
    criteria: list[CriterionResult] = Field(default_factory=list)
    failures: int = 0

    @model_validator(mode="after")
    def _check_arity(self) -> Self:
        width = len(self.columns)
        for index, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {index} has {len(row)} cells, expected {width}")
        return self

    @property
    def passed(self) -> bool:
        """Every criterion holds."""
        return all(c.passed for c in self.criteria)

    def column(self, name: str) -> list[Cell]:
        """Values of one column in row order.

        Raises:
            KeyError: Unknown column.
        """
        if name not in self.columns:
            raise KeyError(name)
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


class Summary(BaseModel):
    """Aggregated pass/fail over every emitted table.

    Attributes:
        passed: Every criterion of every table holds.
        experiments: Per-experiment criteria.
        metadata: Per-experiment provenance.
        failures: Failed rows per experiment.
        files: Files written, relative to the output directory.
    """

    passed: bool
    experiments: dict[str, list[CriterionResult]]
    metadata: dict[str, TableMetadata]
    failures: dict[str, int]
    files: list[str]

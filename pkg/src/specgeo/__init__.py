"""specgeo: a desk-scale lab for quantitative unique continuation.

Model surfaces, closed-form and Sturm–Liouville eigenpairs, Carleman and
doubling experiments, critical-set measurement and holomorphic growth
bounds for Laplace eigenfunctions in two dimensions.
"""

from . import (
    carleman,
    errors,
    fieldcalc,
    geomeasure,
    growth,
    manifolds,
    spectra,
    toolkit,
    uniqueness,
)
from .config import ExperimentConfig, load_config, parse_config
from .runner import emit_report, run_experiment

__all__ = (
    "ExperimentConfig",
    "carleman",
    "emit_report",
    "errors",
    "fieldcalc",
    "geomeasure",
    "growth",
    "load_config",
    "manifolds",
    "parse_config",
    "run_experiment",
    "spectra",
    "toolkit",
    "uniqueness",
)

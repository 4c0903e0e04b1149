"""Type definitions for specgeo.

This module provides type aliases for the array, field and enumeration types
used throughout the package.
"""

from collections.abc import Callable
from typing import Literal, TypeAlias

import numpy as np
import numpy.typing as npt

FloatArray: TypeAlias = npt.NDArray[np.float64]
"""Real-valued numpy array."""
ComplexArray: TypeAlias = npt.NDArray[np.complex128]
"""Complex-valued numpy array."""
Field: TypeAlias = Callable[[FloatArray, FloatArray], FloatArray]
"""Vectorized field on the chart: (x1, x2) -> values of shape (N,) or (N, k)."""
ComplexField: TypeAlias = Callable[[ComplexArray, ComplexArray], ComplexArray]
"""Vectorized holomorphic field on complexified chart coordinates."""
NormKind: TypeAlias = Literal["l2", "sup"]
"""Norm used by region norms: L2 or SupNorm."""
SurfaceKind: TypeAlias = Literal["torus", "sphere", "revolution"]
"""Model surface families."""
Verdict: TypeAlias = Literal["curve", "points", "withheld"]
"""Dimension verdict of a critical-set measurement."""
CriticalKind: TypeAlias = Literal["maximum", "minimum", "saddle", "degenerate"]
"""Hessian classification of a critical point."""
ExperimentKind: TypeAlias = Literal[
    "spectrum",
    "doubling",
    "three-sphere",
    "carleman",
    "critical-measure",
    "nodal-measure",
    "growth",
    "df-check",
    "fit",
    "elliptic",
    "lower-bound",
    "weight",
]
"""Experiment kinds dispatched by the runner."""

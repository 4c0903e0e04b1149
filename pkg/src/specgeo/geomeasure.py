"""Level sets of fields on the model surfaces and their 1D Hausdorff measure.

Level sets are traced by marching squares on a cell-centred chart grid
(vertices at half-cell offsets, so no vertex sits on a pole or a period
seam). Periodic directions wrap; on surfaces with poles the rows next to each
pole are closed by a fan of triangles around the pole vertex. Every edge
crossing is refined by a vectorized Illinois iteration along its grid edge.

The critical set is measured through shrinking level sets of
``|grad u|``: a curve of transversal first-order vanishing is flanked by two
level curves of ``|grad u| = delta`` whose total length tends to twice its
length, while isolated critical points give level lengths of order delta.
"""

import csv
import math
from collections import defaultdict
from collections.abc import Iterator, Sequence
from itertools import combinations
from pathlib import Path

import numpy as np
from loguru import logger
from scipy import stats

from ._typing import CriticalKind, Field, FloatArray, Verdict
from .errors import DomainError, ReportError
from .manifolds import ModelSurface, Point
from .spectra import EigenPair
from .toolkit import LabModel, wrap_centered

MIN_GRID = 64
MAX_GRID = 4096
MIN_LEVELS = 5
POINTS_RATIO = 0.2
OSCILLATION_LIMIT = 0.2
_ROOT_TOL = 1e-10
_BLOCK_ROWS = 64
_NEWTON_STEPS = 50

ChartDisc = tuple[Point, float]
"""Euclidean chart disc ``(center, radius)`` used to clip measurements."""


class Polyline(LabModel):
    """Piecewise linear curve on a surface.

    Attributes:
        vertices: Chart coordinates, shape (M, 2), reduced to the chart domain.
        closed: Whether the last vertex connects back to the first.
        length: Riemannian length with the metric taken at segment midpoints.
    """

    vertices: FloatArray
    closed: bool
    length: float

    @property
    def points(self) -> list[Point]:
        """Vertices as chart points."""
        return [Point(coords=(float(a), float(b))) for a, b in self.vertices]


class _Grid(LabModel):
    surface: ModelSurface
    n1: int
    n2: int

    @property
    def poled(self) -> bool:
        return self.surface.has_poles

    @property
    def cell_rows(self) -> int:
        return self.n1 - 1 if self.poled else self.n1

    def x1(self, i: FloatArray) -> FloatArray:
        return (np.asarray(i, dtype=float) + 0.5) * self.surface.extent[0] / self.n1

    def x2(self, j: FloatArray) -> FloatArray:
        return (np.asarray(j, dtype=float) + 0.5) * self.surface.extent[1] / self.n2

    def h_id(self, i: FloatArray, j: FloatArray) -> FloatArray:
        return np.mod(i, self.n1) * self.n2 + np.mod(j, self.n2)

    def v_id(self, i: FloatArray, j: FloatArray) -> FloatArray:
        return self.n1 * self.n2 + self.h_id(i, j)

    def pole_id(self, south: bool, j: FloatArray) -> FloatArray:
        return 2 * self.n1 * self.n2 + (self.n2 if south else 0) + np.mod(j, self.n2)


def _make_grid(surface: ModelSurface, grid_n: int) -> _Grid:
    if grid_n < MIN_GRID:
        raise DomainError(f"grid_n must be >= {MIN_GRID}, got {grid_n}")
    n2 = 2 * grid_n if surface.has_poles else grid_n
    return _Grid(surface=surface, n1=grid_n, n2=n2)


def _illinois(
    shifted: Field,
    start: FloatArray,
    stop: FloatArray,
    g_start: FloatArray,
    g_stop: FloatArray,
    tol: float,
    max_iter: int = 60,
) -> FloatArray:
    """Roots of ``shifted`` on the segments ``start -> stop`` (Illinois variant of regula falsi)."""
    count = start.shape[0]
    lo, hi = np.zeros(count), np.ones(count)
    g_lo, g_hi = g_start.astype(float), g_stop.astype(float)
    t = g_lo / (g_lo - g_hi)
    direction = stop - start
    active = np.ones(count, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        tt = (lo[idx] * g_hi[idx] - hi[idx] * g_lo[idx]) / (g_hi[idx] - g_lo[idx])
        p = start[idx] + tt[:, None] * direction[idx]
        g = shifted(p[:, 0], p[:, 1])
        t[idx] = tt
        same = np.sign(g) == np.sign(g_hi[idx])
        hi[idx] = np.where(same, tt, hi[idx])
        lo[idx] = np.where(same, lo[idx], tt)
        new_hi = np.where(same, g, 0.5 * g_hi[idx])
        new_lo = np.where(same, 0.5 * g_lo[idx], g)
        g_hi[idx], g_lo[idx] = new_hi, new_lo
        active[idx[np.abs(g) <= tol]] = False
    if np.any(active):
        logger.debug(f"{int(np.sum(active))} edge roots stopped at the iteration cap")
    return start + t[:, None] * direction


class _Segments(LabModel):
    start: FloatArray
    stop: FloatArray
    ids: FloatArray

    @staticmethod
    def empty() -> "_Segments":
        return _Segments(
            start=np.zeros((0, 2)), stop=np.zeros((0, 2)), ids=np.zeros((0, 2), int)
        )


def _concat(parts: Sequence[_Segments]) -> _Segments:
    if not parts:
        return _Segments.empty()
    return _Segments(
        start=np.concatenate([p.start for p in parts]),
        stop=np.concatenate([p.stop for p in parts]),
        ids=np.concatenate([p.ids for p in parts]),
    )


def _block_segments(
    shifted: Field, grid: _Grid, i0: int, i1: int, tol: float
) -> _Segments:
    """Segments of the cells between vertex rows ``i0..i1`` (inclusive)."""
    rows = np.arange(i0, i1 + 1)
    cols = np.arange(grid.n2 + 1)
    x1, x2 = grid.x1(rows), grid.x2(cols)
    xx1, xx2 = np.meshgrid(x1, x2, indexing="ij")
    g = shifted(xx1.ravel(), xx2.ravel()).reshape(xx1.shape)
    s = g > 0.0
    n_rows = rows.size - 1

    hx = s[:-1, :] != s[1:, :]
    hp = np.full((n_rows, cols.size, 2), np.nan)
    r, c = np.nonzero(hx)
    if r.size:
        start = np.stack([x1[r], x2[c]], -1)
        stop = np.stack([x1[r + 1], x2[c]], -1)
        hp[r, c] = _illinois(shifted, start, stop, g[r, c], g[r + 1, c], tol)
    vx = s[:, :-1] != s[:, 1:]
    vp = np.full((rows.size, grid.n2, 2), np.nan)
    r, c = np.nonzero(vx)
    if r.size:
        start = np.stack([x1[r], x2[c]], -1)
        stop = np.stack([x1[r], x2[c + 1]], -1)
        vp[r, c] = _illinois(shifted, start, stop, g[r, c], g[r, c + 1], tol)

    rr, jj = np.meshgrid(np.arange(n_rows) + i0, np.arange(grid.n2), indexing="ij")
    # cell edges in order: x1-edge at j, x2-edge at row+1, x1-edge at j+1, x2-edge at row
    crossing = np.stack([hx[:, :-1], vx[1:], hx[:, 1:], vx[:-1]])
    points = np.stack([hp[:, :-1], vp[1:], hp[:, 1:], vp[:-1]])
    ids = np.stack(
        [grid.h_id(rr, jj), grid.v_id(rr + 1, jj), grid.h_id(rr, jj + 1), grid.v_id(rr, jj)]
    )
    count = crossing.sum(axis=0)
    parts: list[tuple[FloatArray, FloatArray, FloatArray]] = []
    for a, b in combinations(range(4), 2):
        mask = (count == 2) & crossing[a] & crossing[b]
        if np.any(mask):
            parts.append((points[a][mask], points[b][mask], np.stack([ids[a][mask], ids[b][mask]], -1)))
    saddle = count == 4
    if np.any(saddle):
        sr, sc = np.nonzero(saddle)
        centre = shifted(0.5 * (x1[sr] + x1[sr + 1]), 0.5 * (x2[sc] + x2[sc + 1]))
        # the centre sign decides which pair of opposite corners is joined
        joined = (centre > 0.0) == s[sr, sc]
        for flag, pairs in ((True, ((0, 1), (2, 3))), (False, ((3, 0), (1, 2)))):
            pick = joined == flag
            for a, b in pairs:
                ra, ca = sr[pick], sc[pick]
                parts.append(
                    (
                        points[a][ra, ca],
                        points[b][ra, ca],
                        np.stack([ids[a][ra, ca], ids[b][ra, ca]], -1),
                    )
                )
    if not parts:
        return _Segments.empty()
    return _Segments(
        start=np.concatenate([p[0] for p in parts]),
        stop=np.concatenate([p[1] for p in parts]),
        ids=np.concatenate([p[2] for p in parts]).astype(int),
    )


def _cap_segments(shifted: Field, grid: _Grid, south: bool, tol: float) -> _Segments:
    """Segments of the triangle fan joining the outermost row to a pole."""
    row = grid.n1 - 1 if south else 0
    pole_x1 = grid.surface.extent[0] if south else 0.0
    cols = np.arange(grid.n2 + 1)
    x1 = float(grid.x1(np.asarray(row)))
    x2 = grid.x2(cols)
    g = shifted(np.full(cols.size, x1), x2)
    g_pole = float(np.mean(shifted(np.full(grid.n2, pole_x1), x2[:-1])))
    s = g > 0.0
    s_pole = g_pole > 0.0

    radial = s != s_pole
    rp = np.full((cols.size, 2), np.nan)
    c = np.flatnonzero(radial)
    if c.size:
        start = np.stack([np.full(c.size, pole_x1), x2[c]], -1)
        stop = np.stack([np.full(c.size, x1), x2[c]], -1)
        rp[c] = _illinois(shifted, start, stop, np.full(c.size, g_pole), g[c], tol)
    base = s[:-1] != s[1:]
    bp = np.full((grid.n2, 2), np.nan)
    c = np.flatnonzero(base)
    if c.size:
        start = np.stack([np.full(c.size, x1), x2[c]], -1)
        stop = np.stack([np.full(c.size, x1), x2[c + 1]], -1)
        bp[c] = _illinois(shifted, start, stop, g[c], g[c + 1], tol)

    j = np.arange(grid.n2)
    crossing = np.stack([radial[:-1], base, radial[1:]])
    points = np.stack([rp[:-1], bp, rp[1:]])
    ids = np.stack([grid.pole_id(south, j), grid.v_id(row, j), grid.pole_id(south, j + 1)])
    parts = []
    for a, b in combinations(range(3), 2):
        mask = crossing[a] & crossing[b]
        if np.any(mask):
            parts.append(
                _Segments(
                    start=points[a][mask],
                    stop=points[b][mask],
                    ids=np.stack([ids[a][mask], ids[b][mask]], -1).astype(int),
                )
            )
    return _concat(parts)


def _shifted(field: Field, level: float) -> Field:
    return lambda x1, x2: np.asarray(field(x1, x2), dtype=float) - level


def _tolerance(field: Field, grid: _Grid, level: float) -> float:
    xx1, xx2 = np.meshgrid(
        grid.x1(np.arange(0, grid.n1, max(1, grid.n1 // 64))),
        grid.x2(np.arange(0, grid.n2, max(1, grid.n2 // 64))),
        indexing="ij",
    )
    sample = np.max(np.abs(field(xx1.ravel(), xx2.ravel())))
    return _ROOT_TOL * max(abs(level), float(sample), 1e-300)


def _segment_blocks(
    field: Field, surface: ModelSurface, level: float, grid_n: int, block_rows: int
) -> Iterator[_Segments]:
    grid = _make_grid(surface, grid_n)
    shifted = _shifted(field, level)
    tol = _tolerance(field, grid, level)
    for i0 in range(0, grid.cell_rows, block_rows):
        i1 = min(i0 + block_rows, grid.cell_rows)
        yield _block_segments(shifted, grid, i0, i1, tol)
    if grid.poled:
        yield _cap_segments(shifted, grid, False, tol)
        yield _cap_segments(shifted, grid, True, tol)


def segment_lengths(surface: ModelSurface, start: FloatArray, stop: FloatArray) -> FloatArray:
    """Riemannian lengths of chart segments with the metric at their midpoints."""
    length, period = surface.extent
    d1 = stop[:, 0] - start[:, 0]
    if not surface.has_poles:
        d1 = wrap_centered(d1, length)
    d2 = wrap_centered(stop[:, 1] - start[:, 1], period)
    b, _ = surface.warp(start[:, 0] + 0.5 * d1)
    return np.hypot(surface.scale * d1, b * d2)


def _in_disc(surface: ModelSurface, clip: ChartDisc, points: FloatArray) -> FloatArray:
    center, radius = clip
    length, period = surface.extent
    d1 = points[:, 0] - center.x1
    if not surface.has_poles:
        d1 = wrap_centered(d1, length)
    d2 = wrap_centered(points[:, 1] - center.x2, period)
    return np.hypot(d1, d2) <= radius


def level_length(
    field: Field,
    surface: ModelSurface,
    level: float,
    grid_n: int,
    clip: ChartDisc | None = None,
    block_rows: int = _BLOCK_ROWS,
) -> float:
    """Total Riemannian length of ``{field = level}`` without assembling curves.

    The grid is processed in blocks of rows. With ``clip`` only segments whose
    midpoint lies in the Euclidean chart disc are counted.

    Raises:
        DomainError: ``grid_n < 64``.
    """
    total = 0.0
    for seg in _segment_blocks(field, surface, level, grid_n, block_rows):
        if seg.start.shape[0] == 0:
            continue
        lengths = segment_lengths(surface, seg.start, seg.stop)
        if clip is not None:
            mid = 0.5 * (seg.start + seg.stop)
            lengths = lengths[_in_disc(surface, clip, mid)]
        total += float(np.sum(lengths))
    return total


def _walk(
    start: int, ids: FloatArray, neighbors: dict[int, list[int]], used: FloatArray
) -> tuple[list[int], bool]:
    used[start] = True
    first, current = int(ids[start, 0]), int(ids[start, 1])
    chain = [first, current]
    while True:
        nxt = [k for k in neighbors[current] if not used[k]]
        if not nxt:
            break
        used[nxt[0]] = True
        a, b = int(ids[nxt[0], 0]), int(ids[nxt[0], 1])
        current = b if a == current else a
        if current == first:
            return chain, True
        chain.append(current)
    # open chain: extend backwards from the first crossing
    current = first
    while True:
        nxt = [k for k in neighbors[current] if not used[k]]
        if not nxt:
            return chain, False
        used[nxt[0]] = True
        a, b = int(ids[nxt[0], 0]), int(ids[nxt[0], 1])
        current = b if a == current else a
        chain.insert(0, current)


def _assemble(surface: ModelSurface, seg: _Segments) -> list[Polyline]:
    neighbors: dict[int, list[int]] = defaultdict(list)
    position: dict[int, FloatArray] = {}
    for k, (a, b) in enumerate(seg.ids):
        neighbors[int(a)].append(k)
        neighbors[int(b)].append(k)
        position[int(a)] = seg.start[k]
        position[int(b)] = seg.stop[k]
    used = np.zeros(seg.ids.shape[0], dtype=bool)
    curves = []
    for k in range(seg.ids.shape[0]):
        if used[k]:
            continue
        chain, closed = _walk(k, seg.ids, neighbors, used)
        vertices = np.array([position[e] for e in chain])
        ends = np.roll(vertices, -1, axis=0) if closed else vertices[1:]
        pieces = segment_lengths(surface, vertices[: ends.shape[0]], ends)
        keep = np.concatenate([[True], pieces[: vertices.shape[0] - 1] > 0.0])
        x1, x2 = surface.normalize(vertices[keep, 0], vertices[keep, 1])
        curves.append(
            Polyline(
                vertices=np.stack([x1, x2], -1),
                closed=closed,
                length=float(np.sum(pieces)),
            )
        )
    return curves


def extract_level_set(
    field: Field, surface: ModelSurface, level: float, grid_n: int
) -> list[Polyline]:
    """Contour polylines of ``{field = level}``.

    Args:
        field: Continuous vectorized chart field.
        surface: Surface whose chart is gridded.
        level: Contour value.
        grid_n: Cells along x1 (x2 gets twice as many on surfaces with poles).

    Returns:
        Polylines in deterministic traversal order.

    Raises:
        DomainError: ``grid_n < 64``.
    """
    segments = _concat(
        list(_segment_blocks(field, surface, level, grid_n, block_rows=grid_n + 1))
    )
    curves = _assemble(surface, segments)
    logger.debug(
        f"level {level:.6g}: {len(curves)} curves from {segments.ids.shape[0]} segments"
    )
    return curves


def write_polylines_csv(polylines: Sequence[Polyline], path: Path) -> Path:
    """Write polylines as ``curve_id, vertex_index, coord1, coord2`` rows.

    Raises:
        ReportError: The file cannot be written.
    """
    try:
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["curve_id", "vertex_index", "coord1", "coord2"])
            for curve_id, curve in enumerate(polylines):
                for index, (a, b) in enumerate(curve.vertices):
                    writer.writerow([curve_id, index, f"{a:.17g}", f"{b:.17g}"])
    except OSError as exc:
        raise ReportError(str(path), f"cannot write polylines: {exc}") from exc
    return path


def nodal_measure(
    pair: EigenPair, grid_n: int = 512, clip: ChartDisc | None = None
) -> float:
    """Length of the nodal set ``{u = 0}``."""
    return level_length(pair.value_at, pair.surface, 0.0, grid_n, clip)


class MeasureEstimate(LabModel):
    """Extrapolated length of a critical set.

    Attributes:
        levels: Decreasing levels ``delta_j`` of ``|grad u|``.
        level_lengths: Total length of ``{|grad u| = delta_j}``.
        extrapolated: Estimate of the critical set's length.
        verdict: ``curve``, ``points`` or ``withheld``.
        point_count: Critical points found, for the ``points`` verdict.
        grid_n: Grid actually used.
    """

    levels: list[float]
    level_lengths: list[float]
    extrapolated: float
    verdict: Verdict
    point_count: int | None = None
    grid_n: int


def field_scales(pair: EigenPair, grid_n: int = 256) -> tuple[float, float, float]:
    """Sampled sups of ``|grad u|``, ``|Hess u|`` and ``|u|`` on a chart grid."""
    grid = _make_grid(pair.surface, grid_n)
    xx1, xx2 = np.meshgrid(grid.x1(np.arange(grid.n1)), grid.x2(np.arange(grid.n2)), indexing="ij")
    x1, x2 = xx1.ravel(), xx2.ravel()
    grad = np.max(np.linalg.norm(pair.grad_at(x1, x2), axis=-1))
    hess = np.max(np.linalg.norm(pair.hess_at(x1, x2), axis=(-2, -1)))
    value = np.max(np.abs(pair.value_at(x1, x2)))
    return float(grad), float(hess), float(value)


def geometric_levels(delta0: float, count: int = MIN_LEVELS) -> list[float]:
    """``delta0 * 2**-j`` for ``j = 0..count-1``."""
    return [delta0 * 2.0**-j for j in range(count)]


def _check_levels(levels: Sequence[float]) -> None:
    if len(levels) < MIN_LEVELS:
        raise DomainError(f"need at least {MIN_LEVELS} levels, got {len(levels)}")
    ratios = np.asarray(levels[1:]) / np.asarray(levels[:-1])
    if levels[0] <= 0.0 or not np.allclose(ratios, 0.5, rtol=1e-9):
        raise DomainError("levels must halve geometrically from a positive start")


def critical_field(pair: EigenPair) -> Field:
    """``|grad u|^2``, smooth where ``|grad u|`` has a corner."""
    return lambda x1, x2: np.sum(pair.grad_at(x1, x2) ** 2, axis=-1)


def critical_measure(
    pair: EigenPair,
    grid_n: int = 256,
    levels: Sequence[float] | None = None,
    clip: ChartDisc | None = None,
    max_grid: int = MAX_GRID,
) -> MeasureEstimate:
    """Estimate the length of the critical set from shrinking gradient level sets.

    The levels default to ``delta_j = sup|grad u| 2**-(j+1)``, j = 0..4. The
    grid is refined beyond ``grid_n`` until a cell is smaller than the gap
    ``delta_J / sup|Hess u|`` between the two level curves flanking a
    critical curve, up to ``max_grid``. Level lengths are measured on
    ``|grad u|^2 = delta^2``.

    The verdict is ``points`` when ``L(delta_J) / L(delta_0) < 0.2``;
    otherwise ``withheld`` when the finest pair differs by more than 20%,
    else ``curve`` with the second-order Richardson limit of the finest pair,
    halved.

    Raises:
        DomainError: ``grid_n < 64`` or levels not a halving sequence of at
            least five.
    """
    grad_sup, hess_sup, _ = field_scales(pair)
    chosen = list(levels) if levels is not None else geometric_levels(0.5 * grad_sup)
    _check_levels(chosen)
    span = pair.surface.scale * pair.surface.extent[0]
    need = math.ceil(1.5 * span * hess_sup / chosen[-1])
    n = max(grid_n, need)
    if n > max_grid:
        logger.warning(f"critical-measure grid capped at {max_grid} (wanted {n})")
        n = max_grid
    field = critical_field(pair)
    lengths = [level_length(field, pair.surface, d * d, n, clip) for d in chosen]
    logger.debug(f"critical level lengths on grid {n}: {lengths}")
    coarse, fine, finest = lengths[0], lengths[-2], lengths[-1]
    if coarse <= 0.0 or finest / coarse < POINTS_RATIO:
        found = critical_points(pair, grid_n=max(128, min(n, 512)))
        count = len(found.points)
        if clip is not None:
            coords = np.array([p.point.coords for p in found.points]).reshape(-1, 2)
            count = int(np.sum(_in_disc(pair.surface, clip, coords)))
        return MeasureEstimate(
            levels=chosen,
            level_lengths=lengths,
            extrapolated=max(0.0, 2.0 * finest - fine) / 2.0,
            verdict="points",
            point_count=count,
            grid_n=n,
        )
    if abs(finest - fine) > OSCILLATION_LIMIT * finest:
        logger.warning("critical level lengths did not settle, verdict withheld")
        return MeasureEstimate(
            levels=chosen,
            level_lengths=lengths,
            extrapolated=finest / 2.0,
            verdict="withheld",
            grid_n=n,
        )
    return MeasureEstimate(
        levels=chosen,
        level_lengths=lengths,
        extrapolated=max(0.0, (4.0 * finest - fine) / 3.0) / 2.0,
        verdict="curve",
        grid_n=n,
    )


class CriticalPoint(LabModel):
    """A converged critical point with its Hessian classification."""

    point: Point
    kind: CriticalKind
    hessian_eigenvalues: tuple[float, float]


class CriticalPointSet(LabModel):
    """Critical points found from grid seeds.

    Attributes:
        points: Deduplicated converged points.
        unresolved: Seeds whose Newton iteration did not converge.
    """

    points: list[CriticalPoint]
    unresolved: int


def _classify(eigenvalues: FloatArray, threshold: float) -> CriticalKind:
    if abs(float(np.prod(eigenvalues))) < threshold:
        return "degenerate"
    if np.all(eigenvalues < 0.0):
        return "maximum"
    if np.all(eigenvalues > 0.0):
        return "minimum"
    return "saddle"


def _dedupe(surface: ModelSurface, points: FloatArray, tol: float) -> FloatArray:
    kept: list[FloatArray] = []
    for p in points:
        if kept:
            arr = np.asarray(kept)
            d1 = arr[:, 0] - p[0]
            if not surface.has_poles:
                d1 = wrap_centered(d1, surface.extent[0])
            d2 = wrap_centered(arr[:, 1] - p[1], surface.extent[1])
            if np.any(np.hypot(d1, d2) < tol):
                continue
        kept.append(p)
    return np.asarray(kept).reshape(-1, 2)


def critical_points(pair: EigenPair, grid_n: int = 256) -> CriticalPointSet:
    """Critical points from Newton iterations seeded on the chart grid.

    Seeds are cells where both chart partials change sign (a component that
    vanishes identically counts as changing sign). Newton steps use the
    pseudo-inverse of the chart Hessian, so seeds on critical curves converge
    onto the curve. Points are deduplicated within 1e-6 and classified by the
    covariant Hessian; ``|det| < 1e-8 lam^2 ||u||_sup^2`` is degenerate. Poles
    where the gradient vanishes are added explicitly.

    Raises:
        DomainError: ``grid_n < 128``.
    """
    if grid_n < 128:
        raise DomainError(f"critical point search needs grid_n >= 128, got {grid_n}")
    surface = pair.surface
    grid = _make_grid(surface, grid_n)
    rows = np.arange(grid.n1 + (0 if grid.poled else 1))
    cols = np.arange(grid.n2 + 1)
    xx1, xx2 = np.meshgrid(grid.x1(rows), grid.x2(cols), indexing="ij")
    partials = pair.partials_at(xx1.ravel(), xx2.ravel()).reshape(*xx1.shape, 2)

    def changes(c: FloatArray) -> FloatArray:
        corners = np.stack([c[:-1, :-1], c[1:, :-1], c[1:, 1:], c[:-1, 1:]])
        return (corners.min(axis=0) <= 0.0) & (corners.max(axis=0) >= 0.0)

    seed_mask = changes(partials[..., 0]) & changes(partials[..., 1])
    r, c = np.nonzero(seed_mask)
    x = np.stack(
        [0.5 * (grid.x1(r) + grid.x1(r + 1)), 0.5 * (grid.x2(c) + grid.x2(c + 1))], -1
    )
    _, _, u_sup = field_scales(pair, grid_n=128)
    tol = 1e-10 * (1.0 + math.sqrt(pair.lambda_)) * max(u_sup, 1e-300)
    converged = np.zeros(x.shape[0], dtype=bool)
    for _ in range(_NEWTON_STEPS):
        active = np.flatnonzero(~converged)
        if active.size == 0:
            break
        g = pair.partials_at(x[active, 0], x[active, 1])
        done = np.max(np.abs(g), axis=-1) <= tol
        converged[active[done]] = True
        step_idx = active[~done]
        if step_idx.size == 0:
            break
        h = pair.chart_hessian_at(x[step_idx, 0], x[step_idx, 1])
        step = np.einsum("nij,nj->ni", np.linalg.pinv(h), g[~done])
        x[step_idx] -= step
        if surface.has_poles:
            x[step_idx, 0] = np.clip(x[step_idx, 0], 1e-9, surface.extent[0] - 1e-9)
    unresolved = int(np.sum(~converged))
    if unresolved:
        logger.warning(f"{unresolved} critical-point seeds did not converge")
    roots = x[converged]
    x1, x2 = surface.normalize(roots[:, 0], roots[:, 1])
    roots = _dedupe(surface, np.stack([x1, x2], -1), 1e-6)
    if surface.has_poles:
        poles = np.array([[0.0, 0.0], [surface.extent[0], 0.0]])
        near = np.stack([np.full(2, 1e-7), np.zeros(2)], -1)
        near[1, 0] = surface.extent[0] - 1e-7
        vanish = np.linalg.norm(pair.grad_at(near[:, 0], near[:, 1]), axis=-1) <= 1e-5 * (
            1.0 + math.sqrt(pair.lambda_)
        ) * max(u_sup, 1e-300)
        off_pole = (roots[:, 0] > 1e-6) & (roots[:, 0] < surface.extent[0] - 1e-6)
        roots = np.concatenate([poles[vanish], roots[off_pole]])
    threshold = 1e-8 * pair.lambda_**2 * u_sup**2
    hess = pair.hess_at(roots[:, 0], roots[:, 1]) if roots.size else np.zeros((0, 2, 2))
    points = []
    for root, matrix in zip(roots, hess, strict=True):
        eigenvalues = np.linalg.eigvalsh(matrix)
        points.append(
            CriticalPoint(
                point=Point(coords=(float(root[0]), float(root[1]))),
                kind=_classify(eigenvalues, threshold),
                hessian_eigenvalues=(float(eigenvalues[0]), float(eigenvalues[1])),
            )
        )
    logger.debug(f"critical points: {len(points)} found, {unresolved} unresolved")
    return CriticalPointSet(points=points, unresolved=unresolved)


def distinct_colatitudes(
    found: CriticalPointSet, surface: ModelSurface, tol: float = 1e-5
) -> list[float]:
    """Distinct off-pole colatitudes among critical points on a surface with poles.

    Roots sorted by ``x1`` start a new colatitude when they are more than
    ``tol`` above the previous one; each colatitude is the mean of its run.

    Raises:
        DomainError: Surfaces without poles.
    """
    if not surface.has_poles:
        raise DomainError(f"colatitudes need a surface with poles, got {surface.kind}")
    x1 = np.sort(
        [
            p.point.x1
            for p in found.points
            if 0.0 < p.point.x1 < surface.extent[0]
        ]
    )
    if x1.size == 0:
        return []
    runs = np.split(x1, np.flatnonzero(np.diff(x1) > tol) + 1)
    return [float(np.mean(run)) for run in runs]


class PowerLawFit(LabModel):
    """Least-squares fit of ``ln measure = slope ln lam + intercept``.

    Attributes:
        samples: ``(lam, measure)`` pairs.
        slope: Fitted exponent.
        intercept: Fitted log prefactor.
        r_squared: Coefficient of determination.
    """

    samples: list[tuple[float, float]]
    slope: float
    intercept: float
    r_squared: float

    @property
    def prefactor(self) -> float:
        """``exp(intercept)``, the empirical constant C."""
        return math.exp(self.intercept)


def scaling_fit(samples: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Fit a power law to ``(lam, measure)`` samples on log-log axes.

    Raises:
        DomainError: Fewer than three samples or a nonpositive entry.
    """
    if len(samples) < 3:
        raise DomainError(f"scaling fit needs >= 3 samples, got {len(samples)}")
    lam = np.array([s[0] for s in samples], dtype=float)
    measure = np.array([s[1] for s in samples], dtype=float)
    if np.any(measure <= 0.0) or np.any(lam <= 0.0):
        raise DomainError("scaling fit needs positive eigenvalues and measures")
    fit = stats.linregress(np.log(lam), np.log(measure))
    return PowerLawFit(
        samples=[(float(a), float(b)) for a, b in samples],
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=min(1.0, float(fit.rvalue) ** 2),
    )

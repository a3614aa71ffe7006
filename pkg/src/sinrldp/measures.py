"""Binned empirical measures over (domain x mark-range) and their algebra.

The grid discretizes the domain box into S bins per axis and the mark range
(0, mark_cap] into M bins that are equal-probability under the exponential
mark law.  Point masses above the cap count in the top mark bin.  Pair
measures store both ordered entries of every edge; the single global 1/2 of
the rate functionals lives in the information module, not here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatchError
from .model import Domain, ModelParams, box_mass
from .sampler import PointSample
from .connectivity import EdgeSet


@dataclass(frozen=True)
class BinGrid:
    """Product partition of Domain x (0, mark_cap] into S^d * M cells.

    ``c`` is the exponential rate used to place the equal-probability mark
    bin edges (normally the model's mark rate).
    """

    domain: Domain
    spatial_bins: int = 8
    mark_bins: int = 8
    c: float = 1.0

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def mark_cap(self) -> float:
        return self.domain.resolved_mark_cap(self.c)

    @property
    def n_cells(self) -> int:
        return self.spatial_bins**self.dimension * self.mark_bins

    @cached_property
    def spatial_edges(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(lo, hi, self.spatial_bins + 1)
            for lo, hi in zip(self.domain.lower, self.domain.upper)
        )

    @cached_property
    def mark_edges(self) -> np.ndarray:
        cap = self.mark_cap
        total = 1.0 - math.exp(-self.c * cap)
        probs = np.linspace(0.0, total, self.mark_bins + 1)
        edges = -np.log1p(-probs[:-1]) / self.c
        return np.append(edges, cap)

    def locate(self, locations, marks) -> np.ndarray:
        """Flat cell index per point; marks above the cap go to the top bin."""
        locations = np.atleast_2d(np.asarray(locations, dtype=float))
        marks = np.atleast_1d(np.asarray(marks, dtype=float))
        spatial = []
        for axis in range(self.dimension):
            lo = self.domain.lower[axis]
            hi = self.domain.upper[axis]
            width = (hi - lo) / self.spatial_bins
            idx = np.floor((locations[:, axis] - lo) / width).astype(np.int64)
            spatial.append(np.clip(idx, 0, self.spatial_bins - 1))
        flat_spatial = np.zeros(locations.shape[0], dtype=np.int64)
        for idx in spatial:
            flat_spatial = flat_spatial * self.spatial_bins + idx
        mark_idx = np.searchsorted(self.mark_edges[1:-1], marks, side="right")
        return flat_spatial * self.mark_bins + mark_idx

    def cell_bounds(self, cell: int) -> tuple[tuple[float, float], ...]:
        """Per-axis (lo, hi) bounds of a flat cell, mark axis last."""
        mark_idx = cell % self.mark_bins
        flat_spatial = cell // self.mark_bins
        bounds = []
        idxs = []
        for _ in range(self.dimension):
            idxs.append(flat_spatial % self.spatial_bins)
            flat_spatial //= self.spatial_bins
        for axis, idx in enumerate(reversed(idxs)):
            edges = self.spatial_edges[axis]
            bounds.append((float(edges[idx]), float(edges[idx + 1])))
        me = self.mark_edges
        bounds.append((float(me[mark_idx]), float(me[mark_idx + 1])))
        return tuple(bounds)


@dataclass(frozen=True)
class BinnedMeasure:
    """Finite nonnegative measure on the grid cells."""

    grid: BinGrid
    weights: np.ndarray  # (n_cells,)
    exact_mass: float | None = field(default=None, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(self.grid.n_cells)
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        if self.exact_mass is not None:
            return self.exact_mass
        return float(self.weights.sum())

    @classmethod
    def from_counts(cls, grid: BinGrid, counts: np.ndarray, denom: float) -> "BinnedMeasure":
        counts = np.asarray(counts)
        # integer total divided once keeps mass(M1) = N / lambda exact
        return cls(grid, counts / denom, exact_mass=float(int(counts.sum()) / denom))

    def to_csv(self, path) -> None:
        _write_csv(path, self.grid, self.weights, pair=False)


@dataclass(frozen=True)
class BinnedPairMeasure:
    """Symmetric finite nonnegative measure on ordered cell pairs."""

    grid: BinGrid
    weights: np.ndarray  # (n_cells, n_cells)
    exact_mass: float | None = field(default=None, compare=False)

    def __post_init__(self):
        b = self.grid.n_cells
        w = np.asarray(self.weights, dtype=np.float64).reshape(b, b)
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        if not np.array_equal(w, w.T):
            raise ValueError("pair measure must be symmetric")
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        if self.exact_mass is not None:
            return self.exact_mass
        return float(self.weights.sum())

    @classmethod
    def from_counts(cls, grid: BinGrid, counts: np.ndarray, denom: float) -> "BinnedPairMeasure":
        counts = np.asarray(counts)
        return cls(grid, counts / denom, exact_mass=float(int(counts.sum()) / denom))

    def to_csv(self, path) -> None:
        _write_csv(path, self.grid, self.weights, pair=True)


def _write_csv(path, grid: BinGrid, weights: np.ndarray, pair: bool) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        axes = [f"axis{i}" for i in range(grid.dimension)] + ["mark"]
        if pair:
            header = ["cell_x", "cell_y"]
            for side in ("x", "y"):
                for name in axes:
                    header += [f"{name}_{side}_lo", f"{name}_{side}_hi"]
            writer.writerow(header + ["weight"])
            for x in range(grid.n_cells):
                bx = grid.cell_bounds(x)
                for y in range(grid.n_cells):
                    by = grid.cell_bounds(y)
                    row = [x, y]
                    for lo, hi in bx:
                        row += [repr(lo), repr(hi)]
                    for lo, hi in by:
                        row += [repr(lo), repr(hi)]
                    writer.writerow(row + [repr(float(weights[x, y]))])
        else:
            header = ["cell"]
            for name in axes:
                header += [f"{name}_lo", f"{name}_hi"]
            writer.writerow(header + ["weight"])
            for cell in range(grid.n_cells):
                row = [cell]
                for lo, hi in grid.cell_bounds(cell):
                    row += [repr(lo), repr(hi)]
                writer.writerow(row + [repr(float(weights[cell]))])


# --------------------------------------------------------------------------
# empirical measures


def m1(sample: PointSample, grid: BinGrid, lam: float) -> BinnedMeasure:
    """Empirical power measure: 1/lambda per point in its cell; mass N/lambda."""
    cells = grid.locate(sample.locations, sample.marks) if sample.n else np.empty(0, np.int64)
    counts = np.bincount(cells, minlength=grid.n_cells)
    return BinnedMeasure.from_counts(grid, counts, lam)


def m2(
    sample: PointSample,
    edges: EdgeSet,
    grid: BinGrid,
    lam: float,
    a_lambda: float,
) -> BinnedPairMeasure:
    """Empirical connectivity measure: each edge feeds both ordered cell pairs.

    Total mass is 2|E| / (lambda^2 a_lambda) exactly.
    """
    b = grid.n_cells
    counts = np.zeros((b, b), dtype=np.int64)
    if edges.n_edges:
        cells = grid.locate(sample.locations, sample.marks)
        cu = cells[edges.pairs[:, 0]]
        cv = cells[edges.pairs[:, 1]]
        np.add.at(counts, (cu, cv), 1)
        np.add.at(counts, (cv, cu), 1)
    return BinnedPairMeasure.from_counts(grid, counts, lam * lam * a_lambda)


def m_diag(sample: PointSample, grid: BinGrid, lam: float) -> BinnedPairMeasure:
    """Diagonal empirical measure: 1/lambda per point on (cell, cell)."""
    b = grid.n_cells
    counts = np.zeros((b, b), dtype=np.int64)
    if sample.n:
        cells = grid.locate(sample.locations, sample.marks)
        np.add.at(counts, (cells, cells), 1)
    return BinnedPairMeasure.from_counts(grid, counts, lam)


def empirical_measures(realization, grid: BinGrid) -> tuple[BinnedMeasure, BinnedPairMeasure]:
    """(M1, M2) of a realization on the grid."""
    lam = realization.params.lam
    a_lam = realization.sched.a_of(lam)
    return (
        m1(realization.sample, grid, lam),
        m2(realization.sample, realization.edges, grid, lam, a_lam),
    )


# --------------------------------------------------------------------------
# reference measure and kernel tables


def reference_measure(grid: BinGrid, params: ModelParams) -> BinnedMeasure:
    """Binned mu (x) K: spatial mu-mass times exponential mark-bin mass.

    The top mark bin absorbs the mass above the cap, matching where binned
    points land, so empirical M1 is unbiased for this reference.
    """
    s = grid.spatial_bins
    d = grid.dimension
    mu = params.density(grid.domain)
    spatial_mass = np.empty(s**d)
    for flat in range(s**d):
        idxs = []
        rem = flat
        for _ in range(d):
            idxs.append(rem % s)
            rem //= s
        idxs = list(reversed(idxs))
        lo = [grid.spatial_edges[a][i] for a, i in enumerate(idxs)]
        hi = [grid.spatial_edges[a][i + 1] for a, i in enumerate(idxs)]
        spatial_mass[flat] = box_mass(mu, lo, hi)
    cdf = 1.0 - np.exp(-params.c * grid.mark_edges)
    mark_mass = np.diff(cdf)
    mark_mass[-1] += math.exp(-params.c * grid.mark_cap)  # tail above the cap
    weights = np.kron(spatial_mass, mark_mass)
    return BinnedMeasure(grid, weights)


def kernel_table(limit_kernel, grid: BinGrid) -> np.ndarray:
    """Limit kernel evaluated at cell representatives, as a (B, B) table.

    Representatives are spatial cell centers and mark quantile midpoints;
    exact for mark-independent kernels that are constant within cells.
    """
    b = grid.n_cells
    locs = np.empty((b, grid.dimension))
    marks = np.empty(b)
    cdf = 1.0 - np.exp(-grid.c * grid.mark_edges)
    for cell in range(b):
        bounds = grid.cell_bounds(cell)
        for axis in range(grid.dimension):
            locs[cell, axis] = 0.5 * (bounds[axis][0] + bounds[axis][1])
        mark_idx = cell % grid.mark_bins
        mid = 0.5 * (cdf[mark_idx] + cdf[mark_idx + 1])
        marks[cell] = -math.log1p(-mid) / grid.c
    ix, iy = np.meshgrid(np.arange(b), np.arange(b), indexing="ij")
    ix = ix.ravel()
    iy = iy.ravel()
    values = np.asarray(limit_kernel(locs[ix], marks[ix], locs[iy], marks[iy]), dtype=float)
    table = values.reshape(b, b)
    return 0.5 * (table + table.T)  # exact symmetry despite float noise


# --------------------------------------------------------------------------
# measure algebra


def product_kernel_measure(beta: BinnedMeasure, t_table: np.ndarray) -> BinnedPairMeasure:
    """t * beta (x) beta: w(x, y) = t(x, y) * beta(x) * beta(y)."""
    t_table = np.asarray(t_table, dtype=float)
    if not np.array_equal(t_table, t_table.T):
        raise ValueError("t_table must be symmetric")
    w = t_table * np.outer(beta.weights, beta.weights)
    return BinnedPairMeasure(beta.grid, w)


def sup_distance(p, q) -> float:
    """Max absolute cell (or cell-pair) difference; the operational tau metric."""
    if type(p) is not type(q):
        raise GridMismatchError("measures must be the same kind")
    if p.grid != q.grid:
        raise GridMismatchError("measures live on different grids")
    if p.weights.size == 0:
        return 0.0
    return float(np.max(np.abs(p.weights - q.weights)))


@dataclass(frozen=True)
class KernelTable:
    """Pair-cell kernel estimate with an explicit defined-entry mask."""

    values: np.ndarray  # (B, B)
    defined: np.ndarray  # (B, B) bool


def ratio_kernel(m2bar: BinnedPairMeasure, m1bar: BinnedMeasure) -> KernelTable:
    """t_hat(x, y) = m2bar(x, y) / (m1bar(x) * m1bar(y)), masked where m1bar = 0."""
    if m2bar.grid != m1bar.grid:
        raise GridMismatchError("measures live on different grids")
    pos = m1bar.weights > 0
    defined = np.outer(pos, pos)
    denom = np.outer(m1bar.weights, m1bar.weights)
    values = np.zeros_like(m2bar.weights)
    np.divide(m2bar.weights, denom, out=values, where=defined)
    return KernelTable(values=values, defined=defined)

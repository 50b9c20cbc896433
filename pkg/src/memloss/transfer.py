"""Density evolution through nonstationary compositions, in total variation.

Densities are piecewise constant on N equal cells (N a power of two).  One
step of evolution replaces a density by the cell averages of its exact
pushforward: for each output cell [a, b] and each inverse branch g, the
transported mass is the exact integral of the density over [g(a), g(b)],
evaluated through the prefix integral (piecewise linear, so ``np.interp``
is exact).  The discrete one-step operator is therefore a composition of
two Markov operators (pushforward, then conditional expectation onto the
grid): it conserves mass to rounding and contracts total variation
exactly, for arbitrarily rough cell data.  The inverse branches are
closed-form except the LSV/Cui left branch, which is root-found at cell
edges only.

Total variation here is half the L1 distance of densities, so it lies in
[0, 1] for probability densities.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParamError, ShapeMismatch
from .maps import Branch, MapParams, inverse_branch_array, state_interval
from .partitions import TailTable, reference_set
from .sequences import ParamSequence, param_at

_MIN_CELLS = 2**10
_MAX_CELLS = 2**20


@dataclass(frozen=True)
class GridDensity:
    """Nonnegative cell averages on N equal cells over ``interval``."""

    values: np.ndarray
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        n = len(v)
        if n < _MIN_CELLS or n > _MAX_CELLS or (n & (n - 1)) != 0:
            raise ParamError(f"cell count must be a power of two in [2**10, 2**20], got {n}")
        if np.any(v < -1e-12):
            raise ParamError("density values must be nonnegative")
        if self.interval[1] <= self.interval[0]:
            raise ParamError("empty interval")

    @property
    def n_cells(self) -> int:
        return len(self.values)

    @property
    def cell_width(self) -> float:
        lo, hi = self.interval
        return (hi - lo) / self.n_cells

    @property
    def mass(self) -> float:
        return float(np.sum(self.values)) * self.cell_width

    def edges(self) -> np.ndarray:
        lo, hi = self.interval
        return np.linspace(lo, hi, self.n_cells + 1)

    def midpoints(self) -> np.ndarray:
        e = self.edges()
        return 0.5 * (e[:-1] + e[1:])


def _require_same_grid(f: GridDensity, g: GridDensity) -> None:
    if f.n_cells != g.n_cells or f.interval != g.interval:
        raise ShapeMismatch(
            f"grids differ: {f.n_cells} on {f.interval} vs {g.n_cells} on {g.interval}"
        )


# -- density construction ------------------------------------------------------


def make_density(
    kind: str,
    n_cells: int,
    interval: tuple[float, float] = (0.0, 1.0),
    *,
    exponent: float = 1.0,
    profile: int = 1,
    beta: float = 0.5,
) -> GridDensity:
    """Normalized seed densities.

    kind = "uniform";
    kind = "holder": the fixed closed form 1 + ((1 + cos(2 pi p t)) / 2)**alpha / 2
    on the unit coordinate t, with alpha = ``exponent`` and p = ``profile``
    (distinct profiles give distinct densities);
    kind = "cone": exact cell averages of c * x**(-beta) on (0, 1], the
    extremal member of the decreasing-density cone with that exponent.
    """
    lo, hi = interval
    if kind == "uniform":
        vals = np.full(n_cells, 1.0 / (hi - lo))
        return GridDensity(vals, interval)
    if kind == "holder":
        t = (np.arange(n_cells) + 0.5) / n_cells
        base = 0.5 * (1.0 + np.cos(2.0 * np.pi * profile * t))
        vals = 1.0 + 0.5 * base**exponent
        d = GridDensity(vals, interval)
        return GridDensity(vals / d.mass, interval)
    if kind == "cone":
        if interval != (0.0, 1.0):
            raise ParamError("cone densities live on (0, 1]")
        if not (0.0 < beta < 1.0):
            raise ParamError("cone exponent beta must lie in (0, 1)")
        e = np.linspace(0.0, 1.0, n_cells + 1)
        q = 1.0 - beta
        cell_ints = np.diff(e**q) / q
        vals = cell_ints / (1.0 / n_cells)
        d = GridDensity(vals, interval)
        return GridDensity(vals / d.mass, interval)
    raise ParamError(f"unknown density kind {kind!r}")


@dataclass(frozen=True)
class ConeReport:
    """Outcome of the four decreasing-cone conditions on grid data.

    Monotonicity violations up to one grid cell's share of the quantity's
    range are attributed to discretization.
    """

    nonnegative: bool
    nonincreasing: bool
    weighted_nondecreasing: bool
    pointwise_bound: bool
    worst_negative: float
    worst_increase: float
    worst_weighted_decrease: float
    worst_bound_excess: float

    @property
    def passed(self) -> bool:
        return (
            self.nonnegative
            and self.nonincreasing
            and self.weighted_nondecreasing
            and self.pointwise_bound
        )


def cone_membership(f: GridDensity, beta: float, a_beta: float) -> ConeReport:
    """Check membership in the cone of decreasing densities with pointwise
    bound f(x) <= a_beta * x**(-beta) * mass, on cell midpoints."""
    if a_beta <= 2.0**beta * (beta + 2.0):
        warnings.warn(
            f"a_beta = {a_beta} is not above 2**beta * (beta + 2); "
            "the cone may not contain the family's invariant densities",
            stacklevel=2,
        )
    v = f.values
    x = f.midpoints()
    worst_negative = float(max(0.0, -np.min(v)))
    slack = (np.max(v) - np.min(v)) / f.n_cells + 1e-12
    incr = np.diff(v)
    worst_increase = float(max(0.0, np.max(incr, initial=0.0)))
    weighted = x ** (beta + 1.0) * v
    wslack = (np.max(weighted) - np.min(weighted)) / f.n_cells + 1e-12
    decr = -np.diff(weighted)
    worst_weighted_decrease = float(max(0.0, np.max(decr, initial=0.0)))
    left = f.edges()[:-1]
    with np.errstate(divide="ignore"):
        bound = a_beta * np.where(left > 0.0, left ** (-beta), np.inf) * f.mass
    excess = v - bound
    worst_bound_excess = float(max(0.0, np.max(excess, initial=0.0)))
    return ConeReport(
        nonnegative=worst_negative <= 1e-12,
        nonincreasing=worst_increase <= slack,
        weighted_nondecreasing=worst_weighted_decrease <= wslack,
        pointwise_bound=worst_bound_excess <= 1e-9,
        worst_negative=worst_negative,
        worst_increase=worst_increase,
        worst_weighted_decrease=worst_weighted_decrease,
        worst_bound_excess=worst_bound_excess,
    )


# -- transfer steps --------------------------------------------------------------


def push_density(params: MapParams, f: GridDensity) -> GridDensity:
    """Cell averages of the pushforward density (transfer operator step).

    Exact branchwise preimage integration: output cell mass is the input
    integral between inverse-branch images of the cell edges."""
    lo, hi = state_interval(params)
    if f.interval != (lo, hi):
        raise ShapeMismatch(f"density lives on {f.interval}, map on {(lo, hi)}")
    edges = f.edges()
    prefix = np.concatenate([[0.0], np.cumsum(f.values) * f.cell_width])
    out = np.zeros(f.n_cells)
    for branch in Branch:
        u = np.clip(inverse_branch_array(params, branch, edges), lo, hi)
        r = np.interp(u, edges, prefix)
        out += np.abs(np.diff(r))
    return GridDensity(out / f.cell_width, f.interval)


def evolve(seq: ParamSequence, f: GridDensity, n: int, start: int = 1) -> GridDensity:
    """n-fold composition of transfer steps with the maps at times
    start, start+1, ..., start+n-1; n = 0 returns the input."""
    if n < 0:
        raise ParamError("n must be >= 0")
    for j in range(n):
        f = push_density(param_at(seq, start + j), f)
    return f


def tv_distance(f: GridDensity, g: GridDensity) -> float:
    """Half the L1 distance; exact for piecewise-constant densities."""
    _require_same_grid(f, g)
    return 0.5 * float(np.sum(np.abs(f.values - g.values))) * f.cell_width


def memory_loss_curve(
    seq: ParamSequence, f: GridDensity, g: GridDensity, n_max: int, start: int = 1
) -> TailTable:
    """tv_distance between the two evolved densities after n = 0..n_max steps."""
    _require_same_grid(f, g)
    vals = np.empty(n_max + 1)
    vals[0] = tv_distance(f, g)
    for n in range(1, n_max + 1):
        p = param_at(seq, start + n - 1)
        f = push_density(p, f)
        g = push_density(p, g)
        vals[n] = tv_distance(f, g)
    return TailTable(values=vals, k=start, label="memloss")


# -- reference-set mass under evolution -------------------------------------------


def _snap_intervals(
    intervals: list[tuple[float, float]], density: GridDensity
) -> tuple[list[tuple[int, int]], float]:
    lo, _ = density.interval
    w = density.cell_width
    snapped = []
    worst = 0.0
    for a, b in intervals:
        ia = int(round((a - lo) / w))
        ib = int(round((b - lo) / w))
        worst = max(worst, abs(lo + ia * w - a), abs(lo + ib * w - b))
        ia = min(max(ia, 0), density.n_cells)
        ib = min(max(ib, ia), density.n_cells)
        snapped.append((ia, ib))
    return snapped, worst


def mixing_mass(seq: ParamSequence, k: int, n_max: int, n_cells: int = 2**12) -> TailTable:
    """Mass the evolved reference measure puts back on the moving
    reference set: start from the normalized indicator density of Y_k and
    tabulate its integral over Y_{k+n} for n = 0..n_max.

    Reference-set boundaries snap to the nearest cell edge; the worst snap
    distance is reported in the table notes."""
    p0 = param_at(seq, k)
    lo, hi = state_interval(p0)
    proto = GridDensity(np.full(n_cells, 1.0 / (hi - lo)), (lo, hi))
    cells0, snap0 = _snap_intervals(reference_set(p0), proto)
    vals = np.zeros(n_cells)
    for ia, ib in cells0:
        vals[ia:ib] = 1.0
    total = float(np.sum(vals)) * proto.cell_width
    f = GridDensity(vals / total, (lo, hi))
    out = np.empty(n_max + 1)
    worst_snap = snap0
    for n in range(n_max + 1):
        pn = param_at(seq, k + n)
        cells, snap = _snap_intervals(reference_set(pn), f)
        worst_snap = max(worst_snap, snap)
        out[n] = sum(float(np.sum(f.values[ia:ib])) * f.cell_width for ia, ib in cells)
        if n < n_max:
            f = push_density(pn, f)
    out = np.clip(out, 0.0, None)
    return TailTable(
        values=np.minimum(out, 1.0 + 1e-9),
        k=k,
        label="mixing",
        notes={"worst_snap": worst_snap, "raw_max": float(np.max(out))},
    )

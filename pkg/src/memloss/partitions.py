"""Return-time partitions, tail tables, and power-law fits.

For a parameter sequence (T_k) the first-return structure to the family's
reference set Y_k is encoded by backward orbits of inverse branches:

* LSV/Cui: x_n(k) = g_k ... g_{k+n-1}(1) (left-branch pullbacks of 1) and
  y_n(k) = h_k(x_{n-1}(k+1)) with h_k the right inverse branch;
  Y = [1/2, 1].
* Pikovsky: right-branch pullbacks of 0 approach +1; tracked in shifted
  coordinates u_n = 1 - x_n^+, which obey u -> u - u**g / (2g) exactly.
  Y_k = (-1/(2 g_k), 1/(2 g_k)) minus the origin.
* GrossmannHorner (concrete instance): the left-branch pullbacks of 0 form
  a single nested chain b_n approaching -1; in shifted coordinates
  w_n = 1 + b_n they obey w -> w - w**2 / 4 exactly.  All partition cells
  are closed-form algebra on this chain.  Y_k = (-1/4, 0).

Tails are evaluated exactly from endpoint lengths (complementing resolved
mass, so truncation never biases the table); a Monte Carlo orbit sampler
exists purely as an independent cross-check oracle.

Nonstationary sequences are handled by an anti-diagonal layered fill
(value at (base j, depth n) pulls back the value at (j+1, n-1)); constant
and periodic sequences take O(depth) and O(period * depth) fast paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as _rng
from .errors import DepthError, NonPositiveValue, ParamError
from .maps import Branch, Family, MapParams, eval_map_array, inverse_branch_array
from .sequences import ParamSequence, param_at

_RETURN_LABELS = {"h_k", "lebesgue", "r", "s_tail"}


@dataclass(frozen=True)
class TailTable:
    """Tabulated nonincreasing tail, values[n] = t(n) for n = 0..n_max.

    Labels: "h_k" (reference-measure return tail), "lebesgue", "r"
    (measure tail), "s_tail" (tail of the coupled random sum), "theta"
    (deviation supremum), "mc" (Monte Carlo estimate, carries stderr),
    "memloss", "mixing".
    """

    values: np.ndarray
    k: int = 1
    label: str = "h_k"
    stderr: np.ndarray | None = None
    notes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) < 2:
            raise ParamError("tail table needs a 1-D value array with >= 2 entries")
        if self.label in _RETURN_LABELS | {"theta", "memloss", "mixing"}:
            if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-9):
                raise ParamError(f"{self.label} values must lie in [0, 1]")
        if self.label in _RETURN_LABELS | {"theta"}:
            if np.any(np.diff(v) > 1e-12):
                raise ParamError(f"{self.label} table must be nonincreasing")
        if self.label in ("h_k", "lebesgue") and not (
            abs(v[0] - 1.0) <= 1e-12 and abs(v[1] - 1.0) <= 1e-9
        ):
            raise ParamError("return-time tails must have t(0) = t(1) = 1")

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def value(self, n: int) -> float:
        if not (0 <= n <= self.n_max):
            raise DepthError(f"tail tabulated to n = {self.n_max}, asked for {n}")
        return float(self.values[n])

    def __getitem__(self, n: int) -> float:
        return self.value(n)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float  # natural log of the prefactor
    r_squared: float


def fit_power_law(table: TailTable, n_min: int, n_max: int) -> PowerLawFit:
    """Ordinary least squares of log t(n) against log n over [n_min, n_max]."""
    if not (1 <= n_min < n_max <= table.n_max):
        raise ParamError(f"need 1 <= n_min < n_max <= {table.n_max}")
    vals = table.values[n_min : n_max + 1]
    if np.any(vals <= 0.0):
        raise NonPositiveValue("fit window contains values <= 0")
    x = np.log(np.arange(n_min, n_max + 1, dtype=float))
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(intercept), r2)


def default_fit_window(n_available: int) -> tuple[int, int]:
    """Middle two decades of [1, n_available], never below n = 11."""
    if n_available < 30:
        return (max(2, n_available // 3), n_available)
    center = 0.5 * np.log10(n_available)
    lo = max(11, int(round(10 ** (center - 1.0))))
    hi = min(n_available, int(round(10 ** (center + 1.0))))
    if hi <= lo:
        lo, hi = max(11, n_available // 10), n_available
    return (lo, hi)


# -- layered backward recursions ------------------------------------------------


def _materialize(seq: ParamSequence, k: int, count: int) -> list[MapParams]:
    return [param_at(seq, j) for j in range(k, k + count)]


def _fill_rows(
    params: list[MapParams],
    x0: float,
    pull_scalar: Callable[[MapParams, float], float],
    pull_vec: Callable[[list[MapParams], np.ndarray], np.ndarray],
    depth: int,
    n_rows: int,
) -> list[np.ndarray]:
    """Backward-orbit rows: rows[r][n] = value at (base k+r, depth n).

    Row r is filled to depth - r.  Constant windows run a single chain,
    periodic ones a chain per residue class, everything else the full
    anti-diagonal triangle (vectorized per layer).
    """
    assert len(params) >= depth + 1
    window = params[: depth + 1]
    if all(p == window[0] for p in window):
        row = np.empty(depth + 1)
        row[0] = x0
        for n in range(1, depth + 1):
            row[n] = pull_scalar(window[0], row[n - 1])
        return [row[: depth + 1 - r] for r in range(n_rows)]
    period = 0
    for p_try in range(2, min(16, depth)):
        if all(window[i] == window[i % p_try] for i in range(depth + 1)):
            period = p_try
            break
    if period:
        cur = np.full(period, x0)
        rows = [np.empty(depth + 1 - r) for r in range(n_rows)]
        for r in range(n_rows):
            rows[r][0] = x0
        for n in range(1, depth + 1):
            nxt = np.array(
                [pull_scalar(window[c], float(cur[(c + 1) % period])) for c in range(period)]
            )
            cur = nxt
            for r in range(n_rows):
                if n <= depth - r:
                    rows[r][n] = cur[r % period]
        return rows
    vals = np.full(depth + 1, x0)
    rows = [np.empty(depth + 1 - r) for r in range(n_rows)]
    for r in range(n_rows):
        rows[r][0] = x0
    for n in range(1, depth + 1):
        m = depth + 1 - n
        vals = pull_vec(window[:m], vals[1 : m + 1])
        for r in range(min(n_rows, m)):
            if n <= depth - r:
                rows[r][n] = vals[r]
    return rows


def _lsv_pull_scalar(p: MapParams, t: float) -> float:
    from .maps import _lsv_left_inverse_scalar

    return _lsv_left_inverse_scalar(t, p.gamma)


def _lsv_pull_vec(ps: list[MapParams], t: np.ndarray) -> np.ndarray:
    from .maps import _lsv_left_inverse_array

    return _lsv_left_inverse_array(t, np.array([p.gamma for p in ps]))


def _pik_pull_scalar(p: MapParams, u: float) -> float:
    return u - u**p.gamma / (2.0 * p.gamma)


def _pik_pull_vec(ps: list[MapParams], u: np.ndarray) -> np.ndarray:
    g = np.array([p.gamma for p in ps])
    return u - u**g / (2.0 * g)


def _gh_pull_scalar(p: MapParams, w: float) -> float:
    return w - w * w / 4.0


def _gh_pull_vec(ps: list[MapParams], w: np.ndarray) -> np.ndarray:
    return w - w * w / 4.0


# -- endpoint containers ---------------------------------------------------------


@dataclass(frozen=True)
class PartitionEndpoints:
    """Endpoint arrays of the return-time partition at base index k.

    Field population depends on the family:

    * LSV/Cui: ``x[n]``, ``y[n]`` for n = 0..n_max.
    * Pikovsky: ``u[n] = 1 - x_plus[n]`` for n = 0..n_max+1 at base k,
      ``u_next`` the same chain at base k+1 (to depth n_max), and
      ``delta_bound[n] = |g_minus(x_plus[n-1] at k+1)|``, the outer
      boundary of the union of little cells with return time >= n.
    * GrossmannHorner: interval arrays (rows are (lo, hi)) ``big_minus``,
      ``big_plus`` (n = 0..n_max), ``small_minus``, ``small_plus``
      (n = 1..n_max, row 0 unused), ``small1_minus``, ``small1_plus``
      (n = 1..n_max, row 0 unused); ``truncated_mass`` reports cell
      lengths clipped at the floating-point floor.
    """

    family: Family
    k: int
    n_max: int
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    u: np.ndarray | None = None
    u_next: np.ndarray | None = None
    delta_bound: np.ndarray | None = None
    gamma_k: float | None = None
    big_minus: np.ndarray | None = None
    big_plus: np.ndarray | None = None
    small_minus: np.ndarray | None = None
    small_plus: np.ndarray | None = None
    small1_minus: np.ndarray | None = None
    small1_plus: np.ndarray | None = None
    truncated_mass: float = 0.0

    @property
    def x_plus(self) -> np.ndarray:
        return 1.0 - self.u


def lsv_preimage_points(seq: ParamSequence, k: int, n_max: int) -> PartitionEndpoints:
    """x_n(k) and y_n(k) for LSV/Cui sequences, n = 0..n_max."""
    if seq.family not in (Family.LSV, Family.CUI):
        raise ParamError("lsv_preimage_points needs an LSV or Cui sequence")
    params = _materialize(seq, k, n_max + 2)
    rows = _fill_rows(params, 1.0, _lsv_pull_scalar, _lsv_pull_vec, n_max, 2)
    x = rows[0]
    # y_n(k) = h_k(x_{n-1}(k+1)); y_0 = 1 by convention.
    y = np.empty(n_max + 1)
    y[0] = 1.0
    if n_max >= 1:
        y[1:] = inverse_branch_array(params[0], Branch.RIGHT, rows[1][: n_max])
    return PartitionEndpoints(seq.family, k, n_max, x=x, y=y)


def pikovsky_endpoints(seq: ParamSequence, k: int, n_max: int) -> PartitionEndpoints:
    if seq.family is not Family.PIKOVSKY:
        raise ParamError("pikovsky_endpoints needs a Pikovsky sequence")
    params = _materialize(seq, k, n_max + 3)
    rows = _fill_rows(params[1:], 1.0, _pik_pull_scalar, _pik_pull_vec, n_max + 1, 1)
    u_next = rows[0]  # chain at base k+1, depth n_max+1
    g_k = params[0].gamma
    u = np.empty(n_max + 2)
    u[0] = 1.0
    u[1:] = u_next[: n_max + 1] - u_next[: n_max + 1] ** g_k / (2.0 * g_k)
    delta_bound = np.empty(n_max + 2)
    delta_bound[0] = np.nan
    delta_bound[1:] = u_next[: n_max + 1] ** g_k / (2.0 * g_k)
    return PartitionEndpoints(
        seq.family, k, n_max, u=u, u_next=u_next, delta_bound=delta_bound, gamma_k=g_k
    )


def gh_endpoints(seq: ParamSequence, k: int, n_max: int) -> PartitionEndpoints:
    """Cell intervals for the concrete Grossmann-Horner instance.

    The single map makes every base index share one chain
    w_{n+1} = w_n - w_n**2 / 4 (w = distance of the left-branch backward
    orbit of 0 from the neutral point -1).
    """
    if seq.family is not Family.GROSSMANN_HORNER:
        raise ParamError("gh_endpoints needs a GrossmannHorner sequence")
    depth = n_max + 3
    w = np.empty(depth + 1)
    w[0] = 1.0
    for n in range(1, depth + 1):
        w[n] = w[n - 1] - w[n - 1] * w[n - 1] / 4.0
    b = w - 1.0  # right endpoints of the minus cells, b_0 = 0
    q = (2.0 - w) ** 2 / 4.0  # increasing boundaries of the plus cells, q_0 = 1/4

    def g_minus(t):
        return -((1.0 - t) ** 2) / 4.0

    def g_plus(t):
        return (1.0 - t) ** 2 / 4.0

    n = n_max
    big_minus = np.stack([b[1 : n + 2], b[: n + 1]], axis=1)
    q_prev = np.concatenate([[0.0], q[:n]])  # q_{-1} := 0
    big_plus = np.stack([q_prev, q[: n + 1]], axis=1)
    # little cells: delta_m^- = g_minus(big_plus[m-1]), delta_m^+ its mirror
    lo_s = g_minus(q_prev[: n + 1])
    hi_s = g_minus(q[: n + 1])
    small_minus = np.full((n + 1, 2), np.nan)
    small_minus[1:] = np.stack([lo_s[: n], hi_s[: n]], axis=1)
    small_plus = np.full((n + 1, 2), np.nan)
    small_plus[1:] = np.stack([g_plus(q[: n]), g_plus(q_prev[: n])], axis=1)
    # delta_{1,m}^- = g_minus(delta_m^+ one base up) -- same intervals here
    s_plus_lo = g_plus(q[: n + 1])
    s_plus_hi = g_plus(q_prev[: n + 1])
    small1_minus = np.full((n + 1, 2), np.nan)
    small1_minus[1:] = np.stack(
        [g_minus(s_plus_lo[: n]), g_minus(s_plus_hi[: n])], axis=1
    )
    small1_plus = np.full((n + 1, 2), np.nan)
    small1_plus[1:] = np.stack(
        [g_plus(s_plus_hi[: n]), g_plus(s_plus_lo[: n])], axis=1
    )
    lengths = np.concatenate(
        [arr[1:, 1] - arr[1:, 0] for arr in (small_minus, small_plus, small1_minus, small1_plus)]
    )
    truncated = float(-np.sum(np.minimum(lengths, 0.0)))
    return PartitionEndpoints(
        seq.family,
        k,
        n_max,
        big_minus=big_minus,
        big_plus=big_plus,
        small_minus=small_minus,
        small_plus=small_plus,
        small1_minus=small1_minus,
        small1_plus=small1_plus,
        truncated_mass=truncated,
    )


# -- reference sets ----------------------------------------------------------------


def reference_set(params: MapParams) -> list[tuple[float, float]]:
    """The reference set the return time targets, as a list of intervals."""
    if params.family in (Family.LSV, Family.CUI):
        return [(0.5, 1.0)]
    if params.family is Family.PIKOVSKY:
        a = 1.0 / (2.0 * params.gamma)
        return [(-a, a)]
    return [(-0.25, 0.0)]


# -- exact tails --------------------------------------------------------------------


def _cell_len(iv: np.ndarray) -> np.ndarray:
    return np.maximum(iv[:, 1] - iv[:, 0], 0.0)


def return_time_tail(seq: ParamSequence, k: int, n_max: int, base: str = "m_k") -> TailTable:
    """Exact tail of the first return/entry time to the reference sets.

    ``base="m_k"`` conditions on the reference set (normalized Lebesgue on
    Y_k), ``base="lebesgue"`` starts from normalized Lebesgue on the whole
    state interval.  Values are exact from endpoint lengths; the unresolved
    remainder beyond n_max is handled by complementing resolved mass, so
    no truncation bias enters.
    """
    if base not in ("m_k", "lebesgue"):
        raise ParamError(f"base must be 'm_k' or 'lebesgue', got {base!r}")
    label = "h_k" if base == "m_k" else "lebesgue"
    fam = seq.family
    t = np.empty(n_max + 1)
    t[0] = 1.0
    if fam in (Family.LSV, Family.CUI):
        ep = lsv_preimage_points(seq, k, n_max)
        if base == "m_k":
            t[1:] = 2.0 * (ep.y[1:] - 0.5)
        else:
            t[1:] = ep.x[1:] + ep.y[1:] - 0.5
    elif fam is Family.PIKOVSKY:
        ep = pikovsky_endpoints(seq, k, n_max)
        g = ep.gamma_k
        if base == "m_k":
            t[1:] = ep.u_next[: n_max] ** g
        else:
            t[1:] = ep.u[1 : n_max + 1] + ep.u_next[: n_max] ** g / (2.0 * g)
    else:
        ep = gh_endpoints(seq, k, n_max)
        len_sm = _cell_len(ep.small_minus[1:])  # |delta_n^-|, n = 1..n_max
        len_s1m = _cell_len(ep.small1_minus[1:])  # |delta_{1,n}^-|, n = 1..n_max
        if base == "m_k":
            # cells inside Y: delta_n^- (tau = n, n >= 2), delta_{1,n}^- (tau = n+1)
            tau_mass = np.zeros(n_max + 2)
            for i, ln in enumerate(len_sm[1:], start=2):  # delta_n^-, tau = n
                if i <= n_max:
                    tau_mass[i] += ln
            for i, ln in enumerate(len_s1m, start=1):  # delta_{1,n}^-, tau = n+1
                if i + 1 <= n_max + 1:
                    tau_mass[min(i + 1, n_max + 1)] += ln
            resolved = np.cumsum(tau_mass)[:-1]  # mass with tau <= n
            t[1:] = 1.0 - resolved[: n_max] / 0.25
        else:
            len_bm = _cell_len(ep.big_minus)
            len_bp = _cell_len(ep.big_plus)
            len_sp = _cell_len(ep.small_plus[1:])
            len_s1p = _cell_len(ep.small1_plus[1:])
            tau_mass = np.zeros(n_max + 2)
            for i in range(1, n_max + 1):  # Delta_n^{+-}, tau = n
                tau_mass[i] += len_bm[i] + len_bp[i]
            for i in range(2, n_max + 1):  # delta_n^{+-}, tau = n
                tau_mass[i] += len_sm[i - 1] + len_sp[i - 1]
            for i in range(1, n_max + 1):  # delta_{1,n}^{+-}, tau = n+1
                tau_mass[min(i + 1, n_max + 1)] += len_s1m[i - 1] + len_s1p[i - 1]
            resolved = np.cumsum(tau_mass)[:-1]
            t[1:] = 1.0 - resolved[: n_max] / 2.0
    t = np.minimum(np.maximum(t, 0.0), 1.0)
    t = np.minimum.accumulate(t)  # wash out 1-ulp wobble
    return TailTable(values=t, k=k, label=label)


# -- Monte Carlo oracle ---------------------------------------------------------------


def _sample_base(
    intervals: list[tuple[float, float]], samples: int, gen: np.random.Generator
) -> np.ndarray:
    lens = np.array([hi - lo for lo, hi in intervals])
    total = lens.sum()
    u = gen.uniform(0.0, total, size=samples)
    out = np.empty(samples)
    start = 0.0
    for (lo, hi), ln in zip(intervals, lens):
        m = (u >= start) & (u < start + ln)
        out[m] = lo + (u[m] - start)
        start += ln
    return out


def _in_sets(x: np.ndarray, intervals: list[tuple[float, float]]) -> np.ndarray:
    hit = np.zeros(x.shape, dtype=bool)
    for lo, hi in intervals:
        hit |= (x >= lo) & (x <= hi)
    return hit


def return_time_tail_mc(
    seq: ParamSequence,
    k: int,
    n_max: int,
    samples: int,
    seed: int,
    base: str = "m_k",
    reference_sets: list[list[tuple[float, float]]] | None = None,
) -> TailTable:
    """Monte Carlo tail: sample the base measure, iterate maps forward,
    record the first entry into the moving reference set.

    Returns the empirical tail with binomial standard errors.  Orbits not
    returned by n_max are censored there (the tail values for n <= n_max
    are unaffected).  ``reference_sets`` overrides the per-step targets
    (testing hook).
    """
    if samples < 1000:
        raise ParamError("samples must be >= 1000")
    if base not in ("m_k", "lebesgue"):
        raise ParamError(f"base must be 'm_k' or 'lebesgue', got {base!r}")
    params = _materialize(seq, k, n_max + 1)
    if reference_sets is None:
        sets = [reference_set(p) for p in params]
    else:
        sets = reference_sets
    gen = np.random.default_rng(_rng.child_seed(seed, f"return-mc-{k}-{base}"))
    from .maps import state_interval

    if base == "m_k":
        x = _sample_base(sets[0], samples, gen)
    else:
        lo, hi = state_interval(params[0])
        x = gen.uniform(lo, hi, size=samples)
    tau = np.full(samples, n_max + 1, dtype=np.int64)
    alive = np.arange(samples)
    for n in range(1, n_max + 1):
        if alive.size == 0:
            break
        x = eval_map_array(params[n - 1], x)
        hit = _in_sets(x, sets[n]) if n < len(sets) else _in_sets(x, sets[-1])
        tau[alive[hit]] = n
        alive = alive[~hit]
        x = x[~hit]
    counts = np.bincount(tau, minlength=n_max + 2)
    survivors = samples - np.concatenate([[0], np.cumsum(counts[:-1])])
    t = survivors[: n_max + 1] / samples
    stderr = np.sqrt(np.maximum(t * (1.0 - t), 0.0) / samples)
    return TailTable(values=t, k=k, label="mc", stderr=stderr, notes={"samples": samples})


def mc_zscores(exact: TailTable, mc: TailTable, min_tail: float | None = None) -> np.ndarray:
    """z-scores of an MC tail against an exact one, NaN where the exact
    tail is outside (min_tail, 1 - min_tail) and the comparison is
    Poisson-noisy or trivially clamped."""
    samples = mc.notes.get("samples")
    n = min(exact.n_max, mc.n_max)
    p = exact.values[: n + 1]
    q = mc.values[: n + 1]
    if min_tail is None:
        min_tail = 10.0 / samples
    se = np.sqrt(np.maximum(p * (1.0 - p), 0.0) / samples)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (q - p) / se
    z[(p < min_tail) | (p > 1.0 - min_tail)] = np.nan
    return z

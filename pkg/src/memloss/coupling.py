"""Coupling machinery: composed tails, decomposition weights, and the
law of the random sum that controls memory loss.

Given a family of per-index return tails h^j and a measure tail r, the
decomposition argument produces weights alpha_j = r_hat(j - n0) -
r_hat(j + 1 - n0) (mass coupled to the reference measure exactly at time
j) and controls the remainder through the random sum

    S = X_1 + ... + X_tau,   tau ~ geometric(theta) independent,

where P(X_1 >= l) = r_hat(l - n0) and, given the history,
P(X_{j+1} >= l) = hhat(base k + X_1 + ... + X_{j-1}, shift X_j)(l - n0).
Here hhat(j, n) is the clamped running minimum of the composed tail

    h_n^j(l) = C_h * (h^j(n + l) + h^{j+1}(n + l - 1) + ... + h^{j+n}(l)),

with h^i(l) = 0 for l <= 0 and C_h = 2 exp(K2 diam X).

The exact law of S is computed by dynamic programming over states
(t, x) = (sum before the last increment, last increment).  Summing the
independent geometric coupling time in closed form (survival-weighted
arrival masses W(t, x) carry a factor (1 - theta) per step) removes the
truncation over tau entirely: the only cap is the tabulated n_max, and
trajectories whose partial sum exceeds it are absorbed into a "beyond"
bucket that is exact for every tabulated n.  The reported remainder is
therefore 0.  A Monte Carlo sampler provides the independent cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import DepthError, HorizonError, NotNormalized, ParamError
from .partitions import TailTable


# -- constants -------------------------------------------------------------------


def derive_k_constants(K: float, lam: float) -> tuple[float, float]:
    """Regularity constants (K1, K2) from the distortion bound K and the
    expansion factor lambda: K2 = 2 K / (1 - 1/lambda) (strictly above the
    minimal admissible value when K > 0) and K1 = K + K2 / lambda."""
    if lam <= 1.0:
        raise ParamError(f"lambda must exceed 1, got {lam}")
    if K < 0.0:
        raise ParamError(f"K must be >= 0, got {K}")
    if K == 0.0:
        warnings.warn("K = 0 gives the degenerate choice K1 = K2 = 0", stacklevel=2)
        return (0.0, 0.0)
    k2 = 2.0 * K / (1.0 - 1.0 / lam)
    k1 = K + k2 / lam
    return (k1, k2)


@dataclass(frozen=True)
class CouplingConstants:
    theta: float
    n0: int
    K: float
    lam: float
    K1: float
    K2: float
    diam_x: float
    delta0: float
    c_h: float

    def __post_init__(self):
        if not (0.0 < self.theta <= 0.5):
            raise ParamError(f"theta must lie in (0, 1/2], got {self.theta}")
        if self.n0 < 0:
            raise ParamError("n0 must be >= 0")
        if not (0.0 < self.delta0 <= 1.0):
            raise ParamError("delta0 must lie in (0, 1]")
        if self.diam_x <= 0.0:
            raise ParamError("diam_x must be positive")
        if self.K > 0.0 and not self.K2 > (1.0 - 1.0 / self.lam) ** -1 * self.K - 1e-12:
            raise ParamError("K2 must exceed K / (1 - 1/lambda)")
        expected = 2.0 * np.exp(self.K2 * self.diam_x)
        if abs(self.c_h - expected) > 1e-9 * expected:
            raise ParamError("c_h must equal 2 exp(K2 diam_x)")


def make_constants(
    theta: float = 0.25,
    n0: int = 1,
    K: float = 0.5,
    lam: float = 2.0,
    diam_x: float = 1.0,
    delta0: float = 0.5,
) -> CouplingConstants:
    k1, k2 = derive_k_constants(K, lam) if K > 0.0 else (0.0, 0.0)
    return CouplingConstants(
        theta=theta,
        n0=int(n0),
        K=K,
        lam=lam,
        K1=k1,
        K2=k2,
        diam_x=diam_x,
        delta0=delta0,
        c_h=2.0 * float(np.exp(k2 * diam_x)),
    )


# -- tail envelopes ----------------------------------------------------------------


def hat_envelope(r) -> TailTable:
    """Clamped running minimum: rhat(n) = min(1, r(1), ..., r(n)), rhat(0) = 1.

    Accepts a TailTable (values from n = 0) or a plain array of r(1..L).
    """
    if isinstance(r, TailTable):
        tail = np.asarray(r.values[1:], dtype=float)
        k = r.k
    else:
        tail = np.asarray(r, dtype=float)
        k = 1
    if np.any(tail < 0.0):
        raise ParamError("tails must be nonnegative")
    env = np.minimum.accumulate(np.minimum(tail, 1.0)) if len(tail) else tail
    return TailTable(values=np.concatenate([[1.0], env]), k=k, label="r")


# -- tail families ------------------------------------------------------------------


@dataclass(frozen=True)
class TailFamily:
    """Per-index return tails h^j (rows j = k .. k + n_rows - 1), a measure
    tail r, and the declared polynomial bounds they satisfy.

    ``h_rows[i, m]`` is h^{k+i}(m) with column 0 fixed at 1.  The declared
    bounds h^j(n) <= C_beta (1 v (n - Theta_j j))**(-beta) and
    r(n) <= C'_beta (1 v (n - Theta_k k))**(-beta') are verified on the
    tabulated range at construction.
    """

    k: int
    r: TailTable
    h_rows: np.ndarray
    beta: float
    beta_prime: float
    c_beta: float
    c_beta_prime: float
    theta_seq: np.ndarray
    stationary: bool = False

    def __post_init__(self):
        h = np.asarray(self.h_rows, dtype=float)
        object.__setattr__(self, "h_rows", h)
        th = np.asarray(self.theta_seq, dtype=float)
        object.__setattr__(self, "theta_seq", th)
        if not (0.0 < self.beta_prime <= self.beta) or not self.beta > 1.0:
            raise ParamError("need 0 < beta' <= beta and beta > 1")
        if self.c_beta < 1.0 or self.c_beta_prime < 1.0:
            raise ParamError("C_beta and C'_beta must be >= 1")
        if h.ndim != 2 or len(th) != h.shape[0]:
            raise ParamError("theta_seq must give one value per tail row")
        if np.any((th < 0.0) | (th >= 1.0)):
            raise ParamError("Theta values must lie in [0, 1)")
        if float(np.max(th, initial=0.0)) > 0.2:
            warnings.warn(
                "max Theta exceeds 0.2; the polynomial bound on the random "
                "sum may degrade",
                stacklevel=2,
            )
        n = np.arange(1, h.shape[1], dtype=float)
        for i in range(h.shape[0]):
            j = self.k + i
            bound = self.c_beta * np.maximum(1.0, n - th[i] * j) ** (-self.beta)
            if np.any(h[i, 1:] > bound + 1e-12):
                raise ParamError(f"declared bound violated by tail row {j}")
        rv = self.r.values
        nr = np.arange(1, len(rv), dtype=float)
        rbound = self.c_beta_prime * np.maximum(1.0, nr - th[0] * self.k) ** (-self.beta_prime)
        if np.any(rv[1:] > rbound + 1e-12):
            raise ParamError("declared bound violated by the measure tail r")

    @property
    def n_rows(self) -> int:
        return self.h_rows.shape[0]

    @property
    def depth(self) -> int:
        return self.h_rows.shape[1] - 1


def synthetic_poly_family(
    beta: float,
    beta_prime: float | None = None,
    k: int = 1,
    n_rows: int = 64,
    depth: int = 256,
) -> TailFamily:
    """Stationary family h^j(m) = min(1, m**-beta) with r(m) = min(1, m**-beta')."""
    if beta_prime is None:
        beta_prime = beta
    m = np.arange(depth + 1, dtype=float)
    h = np.concatenate([[1.0], np.minimum(1.0, m[1:] ** (-beta))])
    rows = np.tile(h, (n_rows, 1))
    rvals = np.concatenate([[1.0], np.minimum(1.0, m[1:] ** (-beta_prime))])
    r = TailTable(values=rvals, k=k, label="r")
    return TailFamily(
        k=k,
        r=r,
        h_rows=rows,
        beta=beta,
        beta_prime=beta_prime,
        c_beta=1.0,
        c_beta_prime=1.0,
        theta_seq=np.zeros(n_rows),
        stationary=True,
    )


def degenerate_family(k: int = 1, n_rows: int = 64, depth: int = 256) -> TailFamily:
    """All tails vanish beyond 0: every increment equals n0 exactly."""
    rows = np.zeros((n_rows, depth + 1))
    rows[:, 0] = 1.0
    rvals = np.zeros(depth + 1)
    rvals[0] = 1.0
    r = TailTable(values=rvals, k=k, label="r")
    return TailFamily(
        k=k,
        r=r,
        h_rows=rows,
        beta=2.0,
        beta_prime=2.0,
        c_beta=1.0,
        c_beta_prime=1.0,
        theta_seq=np.zeros(n_rows),
        stationary=True,
    )


def family_from_tables(
    k: int,
    r: TailTable,
    h_tables,
    beta: float,
    beta_prime: float,
    c_beta: float,
    c_beta_prime: float,
    theta=0.0,
    stationary: bool | None = None,
) -> TailFamily:
    """Assemble a family from tabulated tails.

    ``h_tables`` is either a single TailTable (replicated: a stationary
    family) or a list of TailTables for consecutive base indices starting
    at k.  ``theta`` is a scalar or one value per row.
    """
    if isinstance(h_tables, TailTable):
        rows = np.tile(h_tables.values, (max(len(r.values), 2), 1))
        if stationary is None:
            stationary = True
    else:
        depth = min(len(t.values) for t in h_tables)
        rows = np.stack([t.values[:depth] for t in h_tables])
        if stationary is None:
            stationary = all(np.array_equal(t.values[:depth], h_tables[0].values[:depth]) for t in h_tables)
    th = np.broadcast_to(np.asarray(theta, dtype=float), (rows.shape[0],)).copy()
    return TailFamily(
        k=k,
        r=r,
        h_rows=rows,
        beta=beta,
        beta_prime=beta_prime,
        c_beta=c_beta,
        c_beta_prime=c_beta_prime,
        theta_seq=th,
        stationary=stationary,
    )


# -- composed tails ------------------------------------------------------------------


@dataclass(frozen=True)
class ComposedTail:
    """Raw composed tail (may exceed 1) and its clamped envelope."""

    base: int
    shift: int
    raw: np.ndarray  # raw[l] for l = 0..horizon; raw[0] uses the zero convention
    envelope: TailTable


def compose_tail(
    family: TailFamily, k: int, n: int, horizon: int, constants: CouplingConstants
) -> ComposedTail:
    """h_n^k(l) = C_h sum_i h^{k+i}(n + l - i), i = 0..n, for l = 0..horizon,
    with h^j(m) = 0 for m <= 0; plus the clamped running-minimum envelope."""
    i0 = k - family.k
    if i0 < 0 or i0 + n >= family.n_rows:
        raise DepthError(f"family rows cover {family.k}..{family.k + family.n_rows - 1}")
    if n + horizon > family.depth:
        raise DepthError(f"family depth {family.depth} < n + horizon = {n + horizon}")
    ell = np.arange(horizon + 1)
    raw = np.zeros(horizon + 1)
    for i in range(n + 1):
        args = n + ell - i
        valid = args >= 1
        raw[valid] += family.h_rows[i0 + i, args[valid]]
    raw *= constants.c_h
    env = np.concatenate([[1.0], np.minimum.accumulate(np.minimum(raw[1:], 1.0))])
    return ComposedTail(base=k, shift=n, raw=raw, envelope=TailTable(values=env, k=k, label="s_tail"))


# -- decomposition weights -------------------------------------------------------------


@dataclass(frozen=True)
class WeightTable:
    """alpha_j for j = j_first .. j_max plus the residual tail mass beyond."""

    n0: int
    j_first: int
    j_max: int
    alphas: np.ndarray
    residual: float


def alpha_weights(r_hat: TailTable, n0: int, j_max: int) -> WeightTable:
    """Decomposition weights alpha_j = rhat(j - n0) - rhat(j + 1 - n0),
    j = n0 + 1 .. j_max, with the unassigned residual rhat(j_max + 1 - n0)."""
    rv = r_hat.values
    if abs(rv[1] - 1.0) > 1e-12:
        raise NotNormalized(f"rhat(1) = {rv[1]}, expected 1")
    if j_max + 1 - n0 > len(rv) - 1:
        raise DepthError(f"rhat tabulated to {len(rv) - 1}, need {j_max + 1 - n0}")
    js = np.arange(n0 + 1, j_max + 1)
    alphas = rv[js - n0] - rv[js + 1 - n0]
    if np.any(alphas < -1e-15):
        raise ParamError("rhat is not nonincreasing")
    return WeightTable(
        n0=n0,
        j_first=n0 + 1,
        j_max=j_max,
        alphas=np.maximum(alphas, 0.0),
        residual=float(rv[j_max + 1 - n0]),
    )


def memory_loss_bound(weights: WeightTable, n: int) -> float:
    """2 * (sum of alpha_j over j > n, residual included): the total
    variation bound after n steps implied by the decomposition."""
    if n >= weights.j_max:
        return 2.0 * weights.residual
    start = max(n + 1, weights.j_first)
    tail = float(np.sum(weights.alphas[start - weights.j_first :]))
    return 2.0 * (tail + weights.residual)


# -- the coupled random sum -------------------------------------------------------------


class CouplingModel:
    """Materialized law of the random sum: r_hat plus fast access to the
    clamped composed-tail envelopes via anti-diagonal prefix sums."""

    def __init__(self, family: TailFamily, constants: CouplingConstants, horizon: int):
        if horizon < 1:
            raise ParamError("horizon must be >= 1")
        if family.n_rows - 1 < horizon:
            raise HorizonError(
                f"family has {family.n_rows} tail rows, horizon {horizon} needs {horizon + 1}"
            )
        if family.depth < horizon + 1:
            raise HorizonError(
                f"family depth {family.depth} < horizon + 1 = {horizon + 1}; "
                "rebuild the family with deeper tails"
            )
        self.family = family
        self.constants = constants
        self.horizon = int(horizon)
        self.r_hat = hat_envelope(family.r)
        if len(self.r_hat.values) - 1 < horizon + 1 - constants.n0:
            raise HorizonError("measure tail r is tabulated too shallow for the horizon")
        rows, depth = family.h_rows.shape[0], family.h_rows.shape[1] - 1
        n_levels = rows + depth + 1
        shifted = np.zeros((rows + 1, n_levels))
        for i in range(rows):
            shifted[i + 1, i + 1 : i + 1 + depth] = family.h_rows[i, 1:]
        self._prefix = np.cumsum(shifted, axis=0)  # prefix[i+1, c] = sum_{i'<=i} h^{k+i'}(c-i')
        self._env_cache: dict[int, np.ndarray] = {}

    def _compute_env(self, t: int, x: int, length: int) -> np.ndarray:
        s = t + x
        if s + length > self._prefix.shape[1] - 1:
            raise HorizonError("conditional tail requested beyond the prefix table")
        cols = np.arange(s + 1, s + length + 1)
        raw = self.constants.c_h * (self._prefix[s + 1, cols] - self._prefix[t, cols])
        env = np.empty(length + 1)
        env[0] = 1.0
        env[1:] = np.minimum.accumulate(np.minimum(raw, 1.0))
        return env

    def conditional_tail(self, t: int, x: int, length: int) -> np.ndarray:
        """env[l] = clamped composed tail hhat at base offset t, shift x,
        for l = 0..length (env[0] = 1).

        Stationary families cache the full-horizon envelope per shift x
        (the base offset is then immaterial)."""
        if self.family.stationary:
            cached = self._env_cache.get(x)
            if cached is None:
                cached = self._compute_env(0, x, max(self.horizon - x + 1, length))
                self._env_cache[x] = cached
            if length <= len(cached) - 1:
                return cached[: length + 1]
        return self._compute_env(t, x, length)


def build_model(family: TailFamily, constants: CouplingConstants, horizon: int) -> CouplingModel:
    return CouplingModel(family, constants, horizon)


def s_tail_dp(model: CouplingModel, n_max: int) -> TailTable:
    """Exact P(S >= n) for n = 0..n_max by dynamic programming over
    (partial sum, last increment), with the geometric coupling time summed
    in closed form.  notes["remainder"] is the truncation remainder (0 by
    construction); notes["beyond"] is the exact mass with S > n_max."""
    if n_max > model.horizon:
        raise HorizonError(f"model horizon {model.horizon} < n_max {n_max}")
    c = model.constants
    n0, th = c.n0, c.theta
    rv = model.r_hat.values
    W = np.zeros((n_max + 1, n_max + 1))
    beyond = 0.0
    xs = np.arange(n0, n_max + 1)
    if xs.size:
        W[0, xs] = rv[xs - n0] - rv[xs + 1 - n0]
    beyond += float(rv[n_max + 1 - n0]) if n_max + 1 - n0 >= 0 else 1.0
    coupled = np.zeros(n_max + 1)
    one_m = 1.0 - th
    for t in range(n_max + 1):
        row = W[t]
        for x in np.nonzero(row)[0]:
            w = float(row[x])
            s = t + int(x)
            env = model.conditional_tail(t, int(x), n_max - s + 1)
            if x == 0:
                # zero increments self-loop on (t, 0); resolve geometrically
                p0 = (1.0 - env[1]) if n0 == 0 else 0.0
                w = w / (1.0 - one_m * p0)
            coupled[s] += th * w
            hi = n_max - s - n0
            if hi >= 0:
                probs = env[:hi + 1] - env[1 : hi + 2]
                if n0 == 0 and x == 0:
                    probs = probs.copy()
                    probs[0] = 0.0  # the self-loop mass was resolved above
                W[s, n0 : n0 + hi + 1] += one_m * w * probs
                beyond += one_m * w * float(env[hi + 1])
            else:
                beyond += one_m * w
    tail = np.empty(n_max + 1)
    acc = beyond
    for n in range(n_max, -1, -1):
        acc += coupled[n]
        tail[n] = acc
    tail = np.minimum.accumulate(np.minimum(tail, 1.0))
    return TailTable(
        values=tail,
        k=model.family.k,
        label="s_tail",
        notes={"remainder": 0.0, "beyond": beyond},
    )


def s_tail_mc(model: CouplingModel, n_max: int, samples: int, seed: int) -> TailTable:
    """Empirical tail of S by inverse-transform sampling of each conditional
    tail and of the geometric coupling time; binomial standard errors."""
    if samples < 10**4:
        raise ParamError("samples must be >= 10**4")
    if n_max > model.horizon:
        raise HorizonError(f"model horizon {model.horizon} < n_max {n_max}")
    c = model.constants
    n0, th = c.n0, c.theta
    gen = np.random.default_rng(_rng.child_seed(seed, "s-tail-mc"))
    taus = gen.geometric(th, size=samples)
    rv = model.r_hat.values
    r_rev = rv[1:][::-1]  # ascending for binary search

    def draw_first(u: np.ndarray) -> np.ndarray:
        counts = len(r_rev) - np.searchsorted(r_rev, u, side="right")
        return n0 + counts

    u0 = gen.uniform(size=samples)
    x_first = draw_first(u0)
    env_rev_cache: dict[tuple, np.ndarray] = {}
    over = n_max + 1
    final = np.empty(samples, dtype=np.int64)
    for i in range(samples):
        tau = taus[i]
        x = int(x_first[i])
        s = x
        t = 0
        j = 1
        while j < tau and s <= n_max:
            need = n_max - s + 1
            key = (x,) if model.family.stationary else (t, x)
            rev = env_rev_cache.get(key)
            if rev is None:
                # cache the longest envelope this shift can ever need and
                # slice it per state (entries l = 1..need sit at the end
                # of the reversed array)
                length = (n_max - x + 1) if model.family.stationary else need
                env = model.conditional_tail(t, x, length)
                rev = env[1:][::-1]
                env_rev_cache[key] = rev
            rev_use = rev[len(rev) - need :] if len(rev) > need else rev
            u = gen.uniform()
            nxt = n0 + (len(rev_use) - int(np.searchsorted(rev_use, u, side="right")))
            if nxt > n_max - s:
                s = over
                break
            t, x = s, nxt
            s = t + x
            j += 1
        final[i] = min(s, over)
    counts = np.bincount(final, minlength=over + 1)
    survivors = samples - np.concatenate([[0], np.cumsum(counts[:-1])])
    t = survivors[: n_max + 1] / samples
    stderr = np.sqrt(np.maximum(t * (1.0 - t), 0.0) / samples)
    return TailTable(
        values=t,
        k=model.family.k,
        label="mc",
        stderr=stderr,
        notes={"samples": samples},
    )


# -- polynomial bound check ---------------------------------------------------------------


@dataclass(frozen=True)
class StailBoundReport:
    """sup over tabulated n of n**beta' P(S >= n) / (theta* k + 1)**beta',
    its argmax, and the full ratio sequence for plateau inspection."""

    sup_ratio: float
    argmax_n: int
    ratios: np.ndarray = field(repr=False)

    def plateau(self, n_max: int | None = None) -> bool:
        limit = len(self.ratios) if n_max is None else n_max
        return self.argmax_n <= limit // 2


def check_stail_bound(
    table: TailTable, beta_prime: float, theta_star: float, k: int
) -> StailBoundReport:
    ns = np.arange(1, table.n_max + 1, dtype=float)
    scale = (theta_star * k + 1.0) ** beta_prime
    ratios = ns**beta_prime * table.values[1:] / scale
    arg = int(np.argmax(ratios)) + 1
    return StailBoundReport(sup_ratio=float(np.max(ratios)), argmax_n=arg, ratios=ratios)

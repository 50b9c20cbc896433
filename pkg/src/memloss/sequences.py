"""Time-dependent parameter sequences and their frequency statistics.

A :class:`ParamSequence` produces the map acting at each time step k >= 1.
Four kinds are supported: explicit finite lists, periodic cycles, i.i.d.
draws from a finite support, and finite-state Markov chains.  Random kinds
are driven by SplitMix64 streams keyed by (seed, k), so ``param_at`` is
reproducible and independent of evaluation order; Markov chains cache
their sampled prefix behind a lock (append-only, so concurrent readers
are safe).

The analysis operations count "good" entries (intermittency parameter at
or below a threshold), estimate the empirical frequency window (a, kappa,
N) from prefix ratios, and tabulate the deviation profile of running
good-map frequencies from a target value b.  All reported suprema are
taken over the tabulated range only; no almost-sure claim about the
infinite sequence is made.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from typing import Sequence as SeqType

import numpy as np

from . import rng
from .errors import ConfigError, NoGoodMaps, ParamError
from .maps import Family, MapParams, cui, grossmann_horner, lsv, pikovsky, validate_params


@dataclass(frozen=True)
class ParamSequence:
    """A lazily evaluated sequence of map parameters, indexed from k = 1."""

    kind: str  # "explicit" | "periodic" | "iid" | "markov"
    family: Family
    entries: tuple[MapParams, ...]
    probs: tuple[float, ...] | None = None
    transition: tuple[tuple[float, ...], ...] | None = None
    init: tuple[float, ...] | None = None
    seed: int = 0
    offset: int = 0  # shifted view: element k reads base element k + offset
    _markov_cache: list = field(default_factory=list, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __len__(self):
        if self.kind == "explicit":
            return max(len(self.entries) - self.offset, 0)
        raise TypeError(f"{self.kind} sequences are unbounded")


def _common_family(entries: SeqType[MapParams]) -> Family:
    if not entries:
        raise ParamError("a sequence needs at least one entry")
    fam = entries[0].family
    for p in entries:
        if p.family is not fam:
            raise ParamError("all entries must share one family tag")
        validate_params(p)
    return fam


def explicit(entries: SeqType[MapParams]) -> ParamSequence:
    return ParamSequence("explicit", _common_family(entries), tuple(entries))


def periodic(cycle: SeqType[MapParams]) -> ParamSequence:
    return ParamSequence("periodic", _common_family(cycle), tuple(cycle))


def constant(params: MapParams) -> ParamSequence:
    """Stationary sequence repeating a single map."""
    return periodic([params])


def iid(support: SeqType[MapParams], probs: SeqType[float], seed: int) -> ParamSequence:
    fam = _common_family(support)
    p = np.asarray(probs, dtype=float)
    if len(p) != len(support):
        raise ParamError("probs must match the support length")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
        raise ParamError("probs must be nonnegative and sum to 1 within 1e-12")
    return ParamSequence("iid", fam, tuple(support), probs=tuple(p), seed=int(seed))


def stationary_law(transition: np.ndarray) -> np.ndarray:
    """Left eigenvector of the transition matrix for eigenvalue 1, normalized."""
    vals, vecs = np.linalg.eig(transition.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, i])
    v = np.abs(v)
    return v / v.sum()


def markov(
    support: SeqType[MapParams],
    transition: SeqType[SeqType[float]],
    seed: int,
    init: SeqType[float] | None = None,
) -> ParamSequence:
    """Markov sequence over a finite support.

    If ``init`` is omitted the chain starts from the stationary law of the
    transition matrix, so shift-invariance and ergodicity hold whenever the
    matrix is irreducible.
    """
    fam = _common_family(support)
    t = np.asarray(transition, dtype=float)
    if t.shape != (len(support), len(support)):
        raise ParamError("transition matrix shape must match the support")
    if np.any(t < 0.0) or np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-12:
        raise ParamError("transition rows must be nonnegative and sum to 1 within 1e-12")
    law = stationary_law(t) if init is None else np.asarray(init, dtype=float)
    if abs(law.sum() - 1.0) > 1e-10 or np.any(law < -1e-15):
        raise ParamError("initial law must be a probability vector")
    return ParamSequence(
        "markov",
        fam,
        tuple(support),
        transition=tuple(tuple(row) for row in t),
        init=tuple(law),
        seed=int(seed),
    )


def shifted(seq: ParamSequence, offset: int) -> ParamSequence:
    """View of seq starting at element offset + 1 (its element k is
    seq's element k + offset)."""
    if offset < 0:
        raise ParamError("offset must be >= 0")
    return replace(seq, offset=seq.offset + offset)


# -- element access -----------------------------------------------------------


def _iid_indices(seq: ParamSequence, ks: np.ndarray) -> np.ndarray:
    u = rng.uniforms(seq.seed, "iid", ks)
    cum = np.cumsum(seq.probs)
    return np.minimum(np.searchsorted(cum, u, side="right"), len(seq.entries) - 1)


def _markov_state(seq: ParamSequence, k: int) -> int:
    cache = seq._markov_cache
    if k <= len(cache):
        return cache[k - 1]
    with seq._lock:
        t = np.asarray(seq.transition)
        cum_rows = np.cumsum(t, axis=1)
        while len(cache) < k:
            j = len(cache) + 1
            u = float(rng.uniforms(seq.seed, "markov", j))
            if j == 1:
                cum = np.cumsum(seq.init)
            else:
                cum = cum_rows[cache[-1]]
            state = int(np.minimum(np.searchsorted(cum, u, side="right"), len(seq.entries) - 1))
            cache.append(state)
    return cache[k - 1]


def param_at(seq: ParamSequence, k: int) -> MapParams:
    """The map acting at time k (k >= 1)."""
    if k < 1:
        raise ParamError(f"k must be >= 1, got {k}")
    k = k + seq.offset
    if seq.kind == "explicit":
        if k > len(seq.entries):
            raise IndexError(f"explicit sequence has {len(seq.entries)} entries, asked for {k}")
        return seq.entries[k - 1]
    if seq.kind == "periodic":
        return seq.entries[(k - 1) % len(seq.entries)]
    if seq.kind == "iid":
        idx = int(_iid_indices(seq, np.asarray(k)))
        return seq.entries[idx]
    return seq.entries[_markov_state(seq, k)]


def gammas(seq: ParamSequence, k: int, length: int) -> np.ndarray:
    """Bulk gamma_j for j = k .. k+length-1 (vectorized for iid)."""
    if length < 0:
        raise ParamError("length must be >= 0")
    ks = np.arange(k, k + length) + seq.offset
    if seq.kind == "iid":
        idx = _iid_indices(seq, ks)
        gam = np.asarray([p.gamma for p in seq.entries])
        return gam[idx]
    return np.asarray([param_at(seq, int(j)) .gamma for j in range(k, k + length)])


def period_of(seq: ParamSequence) -> int | None:
    """Cycle length for periodic sequences (shifts keep the period), else None."""
    return len(seq.entries) if seq.kind == "periodic" else None


# -- frequency statistics ------------------------------------------------------


def good_count(seq: ParamSequence, k: int, length: int, threshold: float) -> int:
    """#{k <= j <= k+length-1 : gamma_j <= threshold}."""
    if length < 1:
        raise ParamError("length must be >= 1")
    return int(np.count_nonzero(gammas(seq, k, length) <= threshold))


@dataclass(frozen=True)
class FrequencyWindow:
    a: float
    kappa: float
    N: int


def check_frequency(seq: ParamSequence, threshold: float, n_max: int) -> FrequencyWindow:
    """Tightest empirical window [a(1-kappa), a(1+kappa)] containing the
    good-map frequency for all N <= n <= n_max, with N <= n_max / 2.

    kappa is minimized over admissible N; among N achieving the minimum the
    smallest is returned.  The estimate is per-realization: for random
    kinds it describes the sampled prefix only.
    """
    if n_max < 10:
        raise ParamError("n_max must be >= 10")
    good = (gammas(seq, 1, n_max) <= threshold).astype(float)
    counts = np.cumsum(good)
    if counts[-1] == 0:
        raise NoGoodMaps(f"no entry with gamma <= {threshold} in the first {n_max}")
    ns = np.arange(1, n_max + 1, dtype=float)
    ratios = counts / ns
    n_half = n_max // 2
    # suffix extrema of ratios over [N, n_max] for N = 1 .. n_half
    suf_min = np.minimum.accumulate(ratios[::-1])[::-1][:n_half]
    suf_max = np.maximum.accumulate(ratios[::-1])[::-1][:n_half]
    with np.errstate(invalid="ignore", divide="ignore"):
        kappas = (suf_max - suf_min) / (suf_max + suf_min)
    kappas = np.where(suf_max + suf_min > 0.0, kappas, np.inf)
    best = float(np.min(kappas))
    n_idx = int(np.argmax(kappas <= best + 1e-15))
    a = 0.5 * (suf_min[n_idx] + suf_max[n_idx])
    return FrequencyWindow(a=float(a), kappa=float(kappas[n_idx]), N=n_idx + 1)


def theta_profile(seq: ParamSequence, threshold: float, b: float, n_max: int):
    """Deviation profile of the running good-map frequency from b.

    Returns a TailTable whose value at n >= 1 is the suffix supremum
    sup over ell in [n, n_max] of |count(1..ell)/ell - b| (a supremum over
    the tabulated range only, as flagged in the notes); the raw deviation
    profile theta[n-1] = |count(1..n)/n - b| rides along in the notes.
    """
    from .partitions import TailTable

    if not (0.0 < b <= 1.0):
        raise ParamError("b must lie in (0, 1]")
    good = (gammas(seq, 1, n_max) <= threshold).astype(float)
    ratios = np.cumsum(good) / np.arange(1, n_max + 1)
    theta = np.abs(ratios - b)
    sup_tail = np.maximum.accumulate(theta[::-1])[::-1]
    return TailTable(
        values=np.concatenate([[sup_tail[0]], sup_tail]),
        label="theta",
        notes={"b": b, "theta": theta, "tabulated_range_supremum": True},
    )


# -- JSON config ingestion -----------------------------------------------------

_FAMILY_NAMES = {
    "lsv": Family.LSV,
    "cui": Family.CUI,
    "pikovsky": Family.PIKOVSKY,
    "gh": Family.GROSSMANN_HORNER,
}

_ALLOWED_KEYS = {"kind", "family", "support", "probs", "transition", "init", "seed", "cycle"}


def _entry_to_params(entry, family: Family) -> MapParams:
    if isinstance(entry, (int, float)):
        values = {"gamma": float(entry)}
    elif isinstance(entry, dict):
        values = dict(entry)
    else:
        raise ConfigError(f"sequence entry must be a number or object, got {entry!r}")
    try:
        if family is Family.LSV:
            return lsv(values.pop("gamma"))
        if family is Family.CUI:
            return cui(values.pop("gamma"), values.pop("beta"))
        if family is Family.PIKOVSKY:
            return pikovsky(values.pop("gamma"))
        values.pop("gamma", None)
        values.pop("eta", None)
        return grossmann_horner()
    except KeyError as e:
        raise ConfigError(f"sequence entry {entry!r} is missing key {e}") from None
    except ParamError as e:
        raise ConfigError(str(e)) from None


def sequence_from_config(config: dict) -> ParamSequence:
    """Build a ParamSequence from a JSON-style dict.

    Schema: {"kind": "iid"|"markov"|"periodic"|"explicit", "family": str,
    "support": [...], "probs": [...], "transition": [[...]], "init": [...],
    "seed": int, "cycle": [...]}.  Periodic and explicit sequences list
    their entries under "cycle".  Unknown keys are rejected.
    """
    if not isinstance(config, dict):
        raise ConfigError("sequence config must be a JSON object")
    unknown = set(config) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in sequence config: {sorted(unknown)}")
    try:
        kind = config["kind"]
        family = _FAMILY_NAMES[config["family"]]
    except KeyError as e:
        raise ConfigError(f"sequence config is missing or has invalid key {e}") from None
    try:
        if kind in ("periodic", "explicit"):
            entries = [_entry_to_params(e, family) for e in config["cycle"]]
            return periodic(entries) if kind == "periodic" else explicit(entries)
        if kind == "iid":
            support = [_entry_to_params(e, family) for e in config["support"]]
            return iid(support, config["probs"], config["seed"])
        if kind == "markov":
            support = [_entry_to_params(e, family) for e in config["support"]]
            return markov(support, config["transition"], config["seed"], config.get("init"))
    except KeyError as e:
        raise ConfigError(f"sequence config for kind={kind!r} is missing key {e}") from None
    except ParamError as e:
        raise ConfigError(str(e)) from None
    raise ConfigError(f"unknown sequence kind {kind!r}")


def load_sequence(path: str) -> ParamSequence:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    return sequence_from_config(config)

"""Sampling schemes, the time sets K_i, and pathological periods of linear systems.

A scheme is an infinite gap sequence ``delta_1, delta_2, ...`` with every gap in
``[1, delta_max]``.  The set ``K_i`` starts at ``delta_i`` and keeps adding the
following gaps: ``t_j^i = delta_i + ... + delta_{i+j-1}``.

Random schemes use a counter-based generator keyed on ``(seed, block)``, so any
gap can be produced without generating the ones before it and materialization
does not depend on evaluation order.
"""
from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass

import jsonschema
import numpy as np

KINDS = ("periodic", "bounded_gap_random", "n_per_window", "explicit")
_BLOCK = 256


class SchemeError(ValueError):
    pass


class HorizonTooShort(ValueError):
    pass


class UnobservableError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingScheme:
    kind: str
    delta_max: int
    p: int | None = None
    offset: int | None = None
    seed: int | None = None
    N: int | None = None
    T_window: int | None = None
    gaps: tuple = ()
    cyclic: bool = True

    def gap(self, i: int) -> int:
        """The gap ``delta_i`` (``i >= 1``)."""
        if i < 1:
            raise SchemeError("gap indices start at 1")
        if self.kind == "periodic":
            return int(self.offset) if (i == 1 and self.offset is not None) else int(self.p)
        if self.kind == "explicit":
            g = self.gaps
            if i <= len(g):
                return int(g[i - 1])
            return int(g[(i - 1) % len(g)]) if self.cyclic else int(g[-1])
        if self.kind == "bounded_gap_random":
            blk = _random_block(self.seed, (i - 1) // _BLOCK, self.delta_max)
            return int(blk[(i - 1) % _BLOCK])
        if self.kind == "n_per_window":
            return int(self._window_time(i) - (self._window_time(i - 1) if i > 1 else 0))
        raise SchemeError(f"unknown scheme kind {self.kind!r}")

    def gap_seq(self, i: int, count: int) -> list[int]:
        return [self.gap(k) for k in range(i, i + count)]

    def _window_time(self, i: int) -> int:
        m, pos = divmod(i - 1, self.N)
        return m * self.T_window + int(_window_offsets(self.seed, m, self.N, self.T_window)[pos])

    def to_dict(self) -> dict:
        if self.kind == "periodic":
            d = {"kind": "periodic", "p": self.p}
            if self.offset is not None:
                d["offset"] = self.offset
            return d
        if self.kind == "bounded_gap_random":
            return {"kind": self.kind, "delta_max": self.delta_max, "seed": self.seed}
        if self.kind == "n_per_window":
            return {"kind": self.kind, "N": self.N, "T_window": self.T_window, "seed": self.seed}
        return {"kind": "explicit", "gaps": list(self.gaps), "cyclic": self.cyclic,
                "delta_max": self.delta_max}


@functools.lru_cache(maxsize=4096)
def _random_block(seed: int, block: int, delta_max: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), int(block)])
    out = 1 + rng.integers(0, delta_max, size=_BLOCK)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=4096)
def _window_offsets(seed: int, window: int, N: int, T_window: int) -> np.ndarray:
    # positions 1..T_window within the window, so no sample falls on t = 0
    rng = np.random.default_rng([int(seed), int(window)])
    out = np.sort(rng.choice(T_window, size=N, replace=False)) + 1
    out.setflags(write=False)
    return out


# constructors ------------------------------------------------------------


def periodic(p: int, offset: int | None = None) -> SamplingScheme:
    """Constant gaps ``p``; an ``offset`` replaces only the first gap."""
    if p < 1 or (offset is not None and offset < 0):
        raise SchemeError("periodic needs p >= 1 and offset >= 0")
    dmax = max(p, offset or 0)
    return SamplingScheme("periodic", delta_max=dmax, p=int(p), offset=None if offset is None else int(offset))


def bounded_gap_random(delta_max: int, seed: int) -> SamplingScheme:
    """Gaps i.i.d. uniform on ``{1, ..., delta_max}``."""
    if delta_max < 1:
        raise SchemeError("delta_max must be >= 1")
    return SamplingScheme("bounded_gap_random", delta_max=int(delta_max), seed=int(seed))


def n_per_window(N: int, T_window: int, seed: int) -> SamplingScheme:
    """``N`` distinct sample times drawn uniformly inside every window of length ``T_window``.

    The largest possible gap is ``2*T_window - 2*N + 1``; the reported bound
    is the conservative ``T_window + (T_window - N)``.
    """
    if not 1 <= N <= T_window:
        raise SchemeError("need 1 <= N <= T_window")
    return SamplingScheme("n_per_window", delta_max=int(2 * T_window - N), seed=int(seed),
                          N=int(N), T_window=int(T_window))


def explicit(gaps, cyclic: bool = True, delta_max: int | None = None) -> SamplingScheme:
    """A given gap list, repeated cyclically or (``cyclic=False``) with its last gap repeated forever.

    ``explicit([d1, ..., dr, p], cyclic=False)`` is the schedule
    ``d1, ..., dr, p, p, ...``.
    """
    gaps = tuple(int(g) for g in gaps)
    if not gaps or any(g < 0 for g in gaps):
        raise SchemeError("explicit schemes need a non-empty list of nonnegative gaps")
    return SamplingScheme("explicit", delta_max=int(delta_max if delta_max is not None else max(gaps)),
                          gaps=gaps, cyclic=bool(cyclic))


SCHEME_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "p": {"type": "integer", "minimum": 1},
        "offset": {"type": "integer", "minimum": 0},
        "delta_max": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "N": {"type": "integer", "minimum": 1},
        "T_window": {"type": "integer", "minimum": 1},
        "gaps": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "cyclic": {"type": "boolean"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "periodic"}}}, "then": {"required": ["p"]}},
        {"if": {"properties": {"kind": {"const": "bounded_gap_random"}}},
         "then": {"required": ["delta_max", "seed"]}},
        {"if": {"properties": {"kind": {"const": "n_per_window"}}},
         "then": {"required": ["N", "T_window", "seed"]}},
        {"if": {"properties": {"kind": {"const": "explicit"}}}, "then": {"required": ["gaps"]}},
    ],
}


def scheme_from_dict(d: dict) -> SamplingScheme:
    jsonschema.validate(d, SCHEME_SCHEMA)
    kind = d["kind"]
    if kind == "periodic":
        return periodic(d["p"], d.get("offset"))
    if kind == "bounded_gap_random":
        return bounded_gap_random(d["delta_max"], d["seed"])
    if kind == "n_per_window":
        return n_per_window(d["N"], d["T_window"], d["seed"])
    return explicit(d["gaps"], d.get("cyclic", True), d.get("delta_max"))


def scheme_from_json(text: str) -> SamplingScheme:
    return scheme_from_dict(json.loads(text))


# the sets K_i -------------------------------------------------------------


@dataclass(frozen=True)
class SamplingSet:
    i: int
    times: tuple
    horizon: int

    def __contains__(self, t) -> bool:
        return int(t) in self._set

    @functools.cached_property
    def _set(self):
        return frozenset(self.times)

    def __len__(self):
        return len(self.times)

    def mask(self, T: int) -> np.ndarray:
        """Boolean indicator over ``t = 0..T``."""
        m = np.zeros(T + 1, dtype=bool)
        idx = [t for t in self.times if t <= T]
        m[idx] = True
        return m

    def to_csv(self) -> str:
        return "t\n" + "".join(f"{t}\n" for t in self.times)


def materialize(scheme: SamplingScheme, i: int, horizon: int) -> SamplingSet:
    """All ``t_j^i <= horizon``.

    Zero gaps would repeat a time instance (or put one at ``t = 0``); such
    instances are dropped with a warning so the result stays strictly increasing.
    """
    if i < 1:
        raise SchemeError("set indices start at 1")
    if horizon < 1:
        raise SchemeError("horizon must be >= 1")
    times, t, k, zeros = [], 0, i, 0
    while True:
        g = scheme.gap(k)
        k += 1
        if g == 0:
            zeros += 1
            if zeros > horizon + 1 and not times:
                break
            if zeros > 10 * (horizon + 1):
                break
            continue
        t += g
        if t > horizon:
            break
        times.append(t)
    if zeros:
        warnings.warn(f"{zeros} zero gap(s) collapsed while materializing K_{i}", stacklevel=2)
    return SamplingSet(i=i, times=tuple(times), horizon=horizon)


def shift_check(scheme: SamplingScheme, i: int, j: int, k: int, horizon: int) -> bool:
    """Check that ``t_k^{i+j} + t_j^i`` lies in ``K_i``."""
    if min(i, j, k) < 1:
        raise SchemeError("i, j and k must all be positive")
    Ki = materialize(scheme, i, horizon)
    Kij = materialize(scheme, i + j, horizon)
    if len(Kij) < k or len(Ki) < j:
        raise HorizonTooShort(f"horizon {horizon} does not reach t_{k}^{i + j} and t_{j}^{i}")
    total = Kij.times[k - 1] + Ki.times[j - 1]
    if total > horizon:
        raise HorizonTooShort(f"t_{k}^{i + j} + t_{j}^{i} = {total} exceeds horizon {horizon}")
    return total in Ki


@dataclass
class SchemeReport:
    probes: int
    min_gap: int
    max_gap: int
    mean_gap: float
    delta_max: int
    violations: list  # (index, gap)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"probes": self.probes, "min_gap": self.min_gap, "max_gap": self.max_gap,
                "mean_gap": self.mean_gap, "delta_max": self.delta_max, "ok": self.ok,
                "violations": [list(v) for v in self.violations[:50]],
                "n_violations": len(self.violations)}


def scheme_validate(scheme: SamplingScheme, probe_count: int = 1000) -> SchemeReport:
    if probe_count < 1:
        raise SchemeError("probe_count must be >= 1")
    gaps = np.array(scheme.gap_seq(1, probe_count))
    bad = [(i + 1, int(g)) for i, g in enumerate(gaps) if g < 1 or g > scheme.delta_max]
    return SchemeReport(probe_count, int(gaps.min()), int(gaps.max()), float(gaps.mean()),
                        scheme.delta_max, bad)


# pathological periods ------------------------------------------------------

RANK_RTOL = 1e-9


def _obs_singular_values(A, C, p):
    """Singular values of the observability matrix of ``(A^p, C)``, after rank-preserving scaling.

    ``A^p`` is divided by its spectral radius and every row is normalized, so
    geometric decay or growth of ``A^p`` alone does not look like rank loss.
    """
    n = A.shape[0]
    Ap = np.linalg.matrix_power(A, p)
    rad = float(np.max(np.abs(np.linalg.eigvals(Ap))))
    if rad > 0:
        Ap = Ap / rad
    rows, M = [], np.eye(n)
    for _ in range(n):
        rows.append(C @ M)
        M = Ap @ M
    O = np.vstack(rows)
    norms = np.linalg.norm(O, axis=1, keepdims=True)
    O = np.divide(O, norms, out=np.zeros_like(O), where=norms > 0)
    return np.linalg.svd(O, compute_uv=False)


def _rank(sv):
    return int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0


@dataclass
class PeriodReport:
    pathological: list
    marginal: list
    smallest_sv: dict


def period_report(A, C, p_max: int) -> PeriodReport:
    """Rank profile of the ``p``-subsampled observability matrices, ``p = 1..p_max``.

    Periods whose smallest relative singular value is within 10x of the rank
    threshold are listed as ``marginal`` in addition to the rank decision.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    if p_max < 1:
        raise SchemeError("p_max must be >= 1")
    if _rank(_obs_singular_values(A, C, 1)) < n:
        raise UnobservableError("(A, C) is not observable at the base rate")
    bad, marginal, smallest = [], [], {}
    for p in range(1, p_max + 1):
        sv = _obs_singular_values(A, C, p)
        rel = sv[-1] / sv[0] if sv[0] > 0 else 0.0
        smallest[p] = float(rel)
        if _rank(sv) < n:
            bad.append(p)
        elif rel <= 10 * RANK_RTOL:
            marginal.append(p)
    return PeriodReport(bad, marginal, smallest)


def pathological_periods(A, C, p_max: int) -> list[int]:
    """Periods ``p <= p_max`` for which sampling every ``p`` steps loses observability."""
    return period_report(A, C, p_max).pathological


def counterexample_schedule(lead_gaps, p: int) -> SamplingScheme:
    """``d1, ..., dr, p, p, ...``: informative gaps first, then a fixed (possibly pathological) period."""
    return explicit(list(lead_gaps) + [p], cyclic=False)


def uniform_violation_time_bound(c: float, a: float, lam: float) -> int:
    """Smallest integer strictly above ``ln(c) / (ln(a) + lam)``."""
    return int(math.floor(math.log(c) / (math.log(a) + lam))) + 1

"""Seeded search for trajectory pairs that violate a bound or condition.

Phase 1 spreads half the budget over the search box with a scrambled Sobol
sequence.  Phase 2 runs a (1+1) evolution strategy from the best phase-1 point,
halving the step size after 10 consecutive failed mutations.  The decision
vector is ``(x01, x02, w1 segments, w2 segments)``; inputs are piecewise
constant with ``ceil(T/5)`` segments, a class that is closed under time shifts
of whole segments.

A search that finds nothing is evidence, not proof.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .certify import TOL, Certificate, CertificateError, check_bound, check_condition11
from .sampling import SamplingScheme, materialize
from .sysmodel import System, simulate_pair

THREADS_ENV = "SAMPLED_IOSS_THREADS"


@dataclass(frozen=True)
class Target:
    """What to falsify: a bound certificate or a condition11 certificate on a horizon.

    ``set_indices`` lists the sampling sets ``K_i`` checked; the margin of a
    candidate is the minimum over them.
    """

    cert: Certificate
    horizon: int
    scheme: SamplingScheme | None = None
    set_indices: tuple = (1,)

    def __post_init__(self):
        sampled = self.cert.kind in ("sampled", "sampled_discounted", "condition11")
        if sampled and self.scheme is None:
            raise CertificateError(f"{self.cert.kind} targets need a sampling scheme")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def sets(self):
        if self.cert.kind in ("ioss", "discounted"):
            return [None]
        return [materialize(self.scheme, i, self.horizon) for i in self.set_indices]

    def check(self, pair, K_i):
        if self.cert.kind == "condition11":
            return check_condition11(pair, self.cert, K_i, self.horizon)
        return check_bound(pair, self.cert, K_i, self.horizon)


@dataclass(frozen=True)
class SearchSpace:
    """Boxes for the initial states and the input amplitudes (rows ``(lo, hi)``).

    Degenerate rows (``lo == hi``) pin a coordinate.  ``tie_inputs`` forces
    ``w1 = w2``; ``tie_states`` forces ``x01 = x02``.
    """

    x01: np.ndarray
    x02: np.ndarray
    w: np.ndarray | None = None
    segments: int | None = None
    tie_inputs: bool = False
    tie_states: bool = False

    @classmethod
    def box(cls, n: int, q: int, radius: float = 1.0, w_radius: float = 1.0, **kw) -> "SearchSpace":
        xb = np.tile([-radius, radius], (n, 1))
        wb = np.tile([-w_radius, w_radius], (q, 1)) if q else None
        return cls(xb, xb.copy(), wb, **kw)


def _rows(b, k):
    b = np.zeros((0, 2)) if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape != (k, 2):
        raise ValueError(f"search box needs {k} rows of (lo, hi), got shape {b.shape}")
    if np.any(b[:, 1] < b[:, 0]):
        raise ValueError("search box has lo > hi")
    return b


class _Codec:
    """Maps free coordinates in ``[0, 1]^d`` to candidate pairs."""

    def __init__(self, sys: System, space: SearchSpace, T: int):
        self.n, self.q, self.T = sys.n, sys.q, T
        self.seg = space.segments or math.ceil(T / 5)
        self.seg_len = math.ceil(T / self.seg)
        self.tie_inputs, self.tie_states = space.tie_inputs, space.tie_states
        x1 = _rows(space.x01, sys.n)
        x2 = x1 if space.tie_states else _rows(space.x02, sys.n)
        wb = _rows(space.w, sys.q) if sys.q else np.zeros((0, 2))
        wseg = np.repeat(wb, self.seg, axis=0)  # segment-major per input channel
        parts = [x1] + ([] if space.tie_states else [x2]) + [wseg] + ([] if space.tie_inputs else [wseg])
        full = np.vstack(parts) if parts else np.zeros((0, 2))
        self.lo, self.hi = full[:, 0], full[:, 1]
        self.free = np.flatnonzero(self.hi > self.lo)
        self.dim = self.free.size

    def point(self, u: np.ndarray) -> np.ndarray:
        z = self.lo.copy()
        z[self.free] = self.lo[self.free] + u * (self.hi[self.free] - self.lo[self.free])
        return z

    def decode(self, z: np.ndarray):
        n, q, seg = self.n, self.q, self.seg
        k = 0
        x1 = z[k:k + n]; k += n
        if self.tie_states:
            x2 = x1.copy()
        else:
            x2 = z[k:k + n]; k += n
        w1 = z[k:k + q * seg].reshape(q, seg); k += q * seg
        w2 = w1.copy() if self.tie_inputs else z[k:k + q * seg].reshape(q, seg)
        return x1.copy(), x2, self._expand(w1), self._expand(w2)

    def _expand(self, ws):
        if self.q == 0:
            return None
        return np.repeat(ws.T, self.seg_len, axis=0)[: self.T]


@dataclass
class FalsificationResult:
    found: bool
    margin: float
    witness_t: int
    x01: np.ndarray
    x02: np.ndarray
    w1: np.ndarray | None
    w2: np.ndarray | None
    evaluations: int
    seed: int
    set_index: int | None = None
    phase1_margin: float = math.inf
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "verdict": "violated" if self.found else "no violation found",
            "found": self.found, "min_margin": self.margin, "evaluations": self.evaluations,
            "seed": self.seed, "phase1_margin": self.phase1_margin,
            "witness": {"t": self.witness_t, "set_index": self.set_index, "x01": arr(self.x01),
                        "x02": arr(self.x02), "w1": arr(self.w1), "w2": arr(self.w2)},
        }


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 0
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


def evaluate_candidate(sys: System, target: Target, sets, x01, x02, w1, w2):
    """Minimum margin over the target's sampling sets, with the attaining time and set index."""
    pair = simulate_pair(sys, x01, x02, w1, w2, target.horizon)
    best = (math.inf, 0, None)
    for idx, K in zip(target.set_indices if sets[0] is not None else [None], sets):
        r = target.check(pair, K)
        if r.min_margin < best[0]:
            best = (r.min_margin, r.witness_t, idx)
    return best


def falsify(sys: System, target: Target, search: SearchSpace, budget: int, seed: int,
            tol: float = TOL, stop_on_violation: bool = True, min_step: float = 1e-15) -> FalsificationResult:
    """Search for a pair with margin below ``-tol``.

    With ``stop_on_violation`` (default) phase 2 ends at the first violating
    point.  Turning it off keeps refining the witness (deeper margin) until the
    budget is spent or every step size is below ``min_step`` times its range.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    codec = _Codec(sys, search, target.horizon)
    sets = target.sets()
    evals = 0

    def score(z):
        return evaluate_candidate(sys, target, sets, *codec.decode(z))

    # phase 1: quasi-random cover of the box
    if codec.dim == 0:
        cands = [codec.point(np.zeros(0))]
    else:
        n1 = max(1, budget // 2)
        sob = qmc.Sobol(d=codec.dim, scramble=True, seed=np.random.default_rng(seed))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # balance warning for non-powers of 2
            U = sob.random(n1)
        cands = [codec.point(u) for u in U]
    threads = _thread_count()
    if threads > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            scores = list(ex.map(score, cands))
    else:
        scores = [score(z) for z in cands]
    evals += len(cands)
    j = min(range(len(scores)), key=lambda k: (scores[k][0], k))
    x, fx = cands[j], scores[j]
    phase1 = fx[0]

    # phase 2: (1+1)-ES on the free coordinates
    rng = np.random.default_rng([seed, 2])
    span = codec.hi[codec.free] - codec.lo[codec.free]
    sigma = 0.1 * span
    fails = 0
    history = [fx[0]]
    while codec.dim and evals < budget:
        if stop_on_violation and fx[0] < -tol:
            break
        if np.all(sigma < min_step * np.maximum(span, 1.0)):
            break
        y = x.copy()
        y[codec.free] = np.clip(x[codec.free] + sigma * rng.standard_normal(codec.dim),
                                codec.lo[codec.free], codec.hi[codec.free])
        fy = score(y)
        evals += 1
        if fy[0] < fx[0]:
            x, fx, fails = y, fy, 0
            history.append(fx[0])
        else:
            fails += 1
            if fails >= 10:
                sigma = sigma / 2
                fails = 0

    x01, x02, w1, w2 = codec.decode(x)
    return FalsificationResult(fx[0] < -tol, float(fx[0]), int(fx[1]), x01, x02, w1, w2, evals, seed,
                               fx[2], float(phase1), history)


def shift_closure_check(sys: System, space: SearchSpace, T: int, samples: int = 100, seed: int = 0) -> bool:
    """Check on random members that dropping whole leading segments stays in the input class.

    The dropped tail is filled by holding the last segment, the finite-horizon
    stand-in for continuing the shifted sequence.
    """
    codec = _Codec(sys, space, T)
    if sys.q == 0 or codec.seg < 2:
        return True
    wb = _rows(space.w, sys.q)
    rng = np.random.default_rng(seed)
    L = codec.seg_len
    for _ in range(samples):
        w = codec.decode(codec.point(rng.random(codec.dim)))[2]
        k = int(rng.integers(1, codec.seg))
        shifted = np.vstack([w[k * L:], np.repeat(w[-1:], k * L, axis=0)])[:T]
        blocks = [shifted[j:j + L] for j in range(0, T, L)]
        if any(np.any(b != b[0]) for b in blocks):
            return False
        if np.any(shifted < wb[:, 0]) or np.any(shifted > wb[:, 1]):
            return False
    return True


def replay(sys: System, target: Target, result: FalsificationResult) -> float:
    """Re-simulate a reported witness from scratch and return its margin."""
    return evaluate_candidate(sys, target, target.sets(), result.x01, result.x02, result.w1, result.w2)[0]

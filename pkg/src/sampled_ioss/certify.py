"""Certificates and finite-horizon checks of the stability bounds.

Every verdict here is relative to a finite horizon ``T`` and to the sampling
sets actually passed in; "consistent" means "no violation on ``t = 0..T``".

Index conventions used throughout:

* input terms take the sup/max over ``0 <= tau < t``;
* sampled output terms take it over ``tau`` in ``K_i`` with ``tau < t``;
* discounted terms use the age ``t - tau - 1``;
* a sup over an empty index set contributes 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import compfn
from .compfn import KL, ComparisonFunction
from .sampling import SamplingSet
from .sysmodel import StabilizingInput, System, TrajectoryPair, simulate_pair

TOL = 1e-9

SLOTS = {
    "ioss": ("beta", "gamma1", "gamma2"),
    "sampled": ("beta_bar", "gamma1_bar", "gamma2_bar"),
    "discounted": ("beta_x", "beta_u", "beta_y"),
    "sampled_discounted": ("beta_bar_x", "beta_bar_u", "beta_bar_y"),
    "condition11": ("gamma_w", "gamma_h", "t_star"),
    "pair_iiss": ("beta", "gamma1", "sigma1"),
}
BOUND_KINDS = ("ioss", "sampled", "discounted", "sampled_discounted")
SAMPLED_KINDS = ("sampled", "sampled_discounted")


def slot_class(name: str) -> str:
    if name.startswith("beta"):
        return KL
    if name.startswith("sigma"):
        return compfn.L
    return compfn.K


class CertificateError(ValueError):
    pass


class InconclusiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Certificate:
    kind: str
    slots: dict
    provenance: dict = field(default_factory=dict, compare=False)
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in SLOTS:
            raise CertificateError(f"unknown certificate kind {self.kind!r}")
        missing = [s for s in SLOTS[self.kind] if s not in self.slots]
        if missing:
            raise CertificateError(f"{self.kind} certificate is missing slot(s) {missing}")
        for name in SLOTS[self.kind]:
            v = self.slots[name]
            if name == "t_star":
                if int(v) != v or v < 1:
                    raise CertificateError(f"t_star must be a positive integer, got {v!r}")
                continue
            if not isinstance(v, ComparisonFunction):
                raise CertificateError(f"slot {name} must be a comparison function")
            want = slot_class(name)
            have = v.class_tag
            if want == compfn.K and have not in (compfn.K, compfn.KINF) or want != compfn.K and have != want:
                raise CertificateError(f"slot {name} must be of class {want}, got {have}")

    def __getitem__(self, name):
        return self.slots[name]

    @property
    def functions(self) -> tuple:
        return tuple(self.slots[s] for s in SLOTS[self.kind])

    def validate(self, grid: compfn.Grid | None = None) -> dict:
        """Class-check every function slot; raises on any failed check."""
        reports = {}
        for name in SLOTS[self.kind]:
            if name == "t_star":
                continue
            rep = compfn.verify_class(self.slots[name], grid)
            reports[name] = rep
            if rep.failed:
                raise CertificateError(f"slot {name}: {rep.summary()}")
        return reports

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for name in SLOTS[self.kind]:
            v = self.slots[name]
            d[name] = int(v) if name == "t_star" else v.to_dict()
        if self.provenance:
            d["provenance"] = self.provenance
        if self.extras:
            d["extras"] = {k: v.to_dict() for k, v in self.extras.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        kind = d.get("kind")
        if kind not in SLOTS:
            raise CertificateError(f"unknown certificate kind {kind!r}")
        slots = {}
        for name in SLOTS[kind]:
            if name not in d:
                raise CertificateError(f"{kind} certificate is missing slot {name!r}")
            slots[name] = int(d[name]) if name == "t_star" else ComparisonFunction.from_dict(d[name])
        extras = {k: ComparisonFunction.from_dict(v) for k, v in d.get("extras", {}).items()}
        return cls(kind, slots, d.get("provenance", {}), extras)

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def certificate(kind: str, *functions, **provenance) -> Certificate:
    """Positional shorthand: ``certificate("ioss", beta, gamma1, gamma2)``."""
    names = SLOTS.get(kind)
    if names is None:
        raise CertificateError(f"unknown certificate kind {kind!r}")
    if len(functions) != len(names):
        raise CertificateError(f"{kind} needs {len(names)} functions, got {len(functions)}")
    return Certificate(kind, dict(zip(names, functions)), provenance)


def loads(text: str) -> Certificate:
    return Certificate.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# results


@dataclass
class CheckResult:
    min_margin: float
    witness_t: int
    verdict: str  # "consistent" | "violated"
    horizon: int
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tolerance: float = TOL

    @property
    def margins(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def violated(self) -> bool:
        return self.verdict == "violated"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "scope": f"horizon {self.horizon}",
                "min_margin": self.min_margin, "witness": {"t": self.witness_t},
                "tolerance": self.tolerance}

    def margin_csv(self) -> str:
        rows = ["t,lhs,rhs,margin"]
        for t, l, r in zip(self.t, self.lhs, self.rhs):
            rows.append(f"{int(t)},{float(l)!r},{float(r)!r},{float(r - l)!r}")
        return "\n".join(rows) + "\n"


def _result(t, lhs, rhs, horizon, tol) -> CheckResult:
    m = rhs - lhs
    j = int(np.argmin(m))
    mm = float(m[j])
    return CheckResult(mm, int(t[j]), "violated" if mm < -tol else "consistent",
                       horizon, t, lhs, rhs, tol)


# --------------------------------------------------------------------------
# right-hand sides


def _running_sup(v: np.ndarray, T: int) -> np.ndarray:
    """``S[t] = max(v[tau] for tau < t)`` for ``t = 0..T``, with ``S[0] = 0``."""
    out = np.zeros(T + 1)
    if T > 0:
        out[1:] = np.maximum.accumulate(v[:T])
    return out


def _sampled(dy: np.ndarray, K: SamplingSet | None, T: int) -> np.ndarray:
    """``dy`` with unsampled instants zeroed (samples beyond ``T`` are irrelevant)."""
    if K is None:
        return dy[: T + 1]
    return np.where(K.mask(T), dy[: T + 1], 0.0)


def _discounted_max(beta: ComparisonFunction, v: np.ndarray, T: int) -> np.ndarray:
    """``D[t] = max(beta(v[tau], t - tau - 1) for tau < t)``, ``D[0] = 0``."""
    n = min(len(v), T)
    out = np.zeros(T + 1)
    if n == 0:
        return out
    t = np.arange(T + 1)[:, None]
    tau = np.arange(n)[None, :]
    age = t - tau - 1
    valid = age >= 0
    vals = beta(np.broadcast_to(v[:n], age.shape), np.where(valid, age, 0))
    out[:] = np.max(np.where(valid, vals, 0.0), axis=1)
    return out


def bound_rhs(pair: TrajectoryPair, cert: Certificate, K_i: SamplingSet | None, T: int) -> np.ndarray:
    """Right-hand side of the bound named by ``cert.kind`` at ``t = 0..T``."""
    kind = cert.kind
    if kind not in BOUND_KINDS:
        raise CertificateError(f"{kind} is not a bound certificate")
    if (kind in SAMPLED_KINDS) != (K_i is not None):
        raise CertificateError(f"{kind} certificates {'need' if kind in SAMPLED_KINDS else 'take no'} sampling set")
    if T > pair.horizon:
        raise ValueError(f"horizon {T} exceeds the simulated length {pair.horizon}")
    b, g1, g2 = cert.functions
    t = np.arange(T + 1)
    dx0 = float(pair.dx[0])
    dy = _sampled(pair.dy, K_i, T)
    if kind in ("ioss", "sampled"):
        terms = [b(dx0, t), g1(_running_sup(pair.dw, T)), g2(_running_sup(dy, T))]
    else:
        terms = [b(dx0, t), _discounted_max(g1, pair.dw, T), _discounted_max(g2, dy, T)]
    return np.maximum.reduce([np.broadcast_to(np.asarray(x, float), t.shape) for x in terms])


def check_bound(pair: TrajectoryPair, cert: Certificate, K_i: SamplingSet | None = None,
                T: int | None = None, tol: float = TOL) -> CheckResult:
    """Margins ``RHS(t) - |dx(t)|`` of an i-IOSS-type bound on ``t = 0..T``."""
    T = pair.horizon if T is None else T
    rhs = bound_rhs(pair, cert, K_i, T)
    return _result(np.arange(T + 1), pair.dx[: T + 1], rhs, T, tol)


def check_condition11(pair: TrajectoryPair, cond: Certificate, K_i: SamplingSet,
                      T: int | None = None, tol: float = TOL) -> CheckResult:
    """Margins of ``|dy(t)| <= gamma_h(sampled sup) (+) gamma_w(input sup)`` for ``t* <= t <= T``."""
    if cond.kind != "condition11":
        raise CertificateError("expected a condition11 certificate")
    T = pair.horizon if T is None else T
    t_star = int(cond["t_star"])
    if T < t_star:
        raise ValueError(f"horizon {T} is shorter than t* = {t_star}")
    if T > pair.horizon:
        raise ValueError(f"horizon {T} exceeds the simulated length {pair.horizon}")
    hs = cond["gamma_h"](_running_sup(_sampled(pair.dy, K_i, T), T))
    ws = cond["gamma_w"](_running_sup(pair.dw, T))
    t = np.arange(t_star, T + 1)
    rhs = np.maximum(hs, ws)[t_star:]
    return _result(t, pair.dy[t_star: T + 1], rhs, T, tol)


# --------------------------------------------------------------------------
# pairs of i-ISS trajectories


@dataclass
class Classification:
    label: str  # "in_lambda" | "in_psi"
    horizon: int
    min_margin: float
    first_violation: int | None

    def to_dict(self) -> dict:
        return {"label": self.label, "scope": f"horizon {self.horizon}", "min_margin": self.min_margin,
                "first_violation": self.first_violation}


def pair_iiss_rhs(pair: TrajectoryPair, cert: Certificate, T: int) -> np.ndarray:
    b, g1, s1 = cert.functions
    t = np.arange(T + 1)
    out = np.asarray(b(float(pair.dx[0]), t), dtype=float)
    n = min(len(pair.dw), T)
    if n:
        age = t[:, None] - np.arange(n)[None, :] - 1
        valid = age >= 0
        vals = np.asarray(g1(pair.dw[:n]))[None, :] * np.asarray(s1(t=np.where(valid, age, 0)))
        out = np.maximum(out, np.max(np.where(valid, vals, 0.0), axis=1))
    return out


def classify_pair(pair: TrajectoryPair, cert: Certificate, T: int | None = None,
                  tol: float = TOL) -> Classification:
    """``in_lambda`` if the i-ISS pair bound holds on ``t = 0..T``, else ``in_psi``."""
    if cert.kind != "pair_iiss":
        raise CertificateError("expected a pair_iiss certificate")
    T = pair.horizon if T is None else T
    m = pair_iiss_rhs(pair, cert, T) - pair.dx[: T + 1]
    bad = np.flatnonzero(m < -tol)
    return Classification("in_psi" if bad.size else "in_lambda", T, float(m.min()),
                          int(bad[0]) if bad.size else None)


def default_pair_iiss(cert: Certificate) -> Certificate:
    """A pair-i-ISS certificate from an i-IOSS one: same beta and input gain, ``sigma1 = exp(-r)``."""
    b, g1 = cert.functions[0], cert.functions[1]
    return certificate("pair_iiss", b, g1, compfn.exp_decay(1.0), source=cert.kind)


def first_violation_time(pair: TrajectoryPair, beta: ComparisonFunction, T: int | None = None,
                         tol: float = 0.0) -> int | None:
    """Smallest ``t`` with ``|dx(t)| > beta(|dx(0)|, t) + tol``, or None on the horizon."""
    T = pair.horizon if T is None else T
    t = np.arange(T + 1)
    hit = np.flatnonzero(pair.dx[: T + 1] > np.asarray(beta(float(pair.dx[0]), t)) + tol)
    return int(hit[0]) if hit.size else None


# --------------------------------------------------------------------------
# pair samplers for the Assumption-2 probe


@dataclass(frozen=True)
class DrawnPair:
    x01: np.ndarray
    x02: np.ndarray
    w1: object
    w2: object
    horizon: int
    magnitude: float | None = None  # |dx0| when the sampler controls it
    tag: object = None


@dataclass(frozen=True)
class UniformPairs:
    """Both initial states uniform in ``[low, high]^n``, zero inputs."""

    low: float = -1.0
    high: float = 1.0
    horizon: int = 50

    def draw(self, sys: System, rng: np.random.Generator, k: int) -> DrawnPair:
        x1 = rng.uniform(self.low, self.high, sys.n)
        x2 = rng.uniform(self.low, self.high, sys.n)
        return DrawnPair(x1, x2, None, None, self.horizon)


@dataclass(frozen=True)
class LogMagnitudePairs:
    """``|dx0| = 10**-k`` for the listed ``k`` (cycled), random direction, zero inputs."""

    exponents: tuple = (1, 2, 3, 4, 5, 6)
    horizon: int = 200

    def draw(self, sys: System, rng: np.random.Generator, k: int) -> DrawnPair:
        e = self.exponents[k % len(self.exponents)]
        mag = 10.0 ** (-e)
        d = rng.normal(size=sys.n)
        d *= mag / np.linalg.norm(d)
        x2 = rng.uniform(-1.0, 1.0, sys.n)
        return DrawnPair(x2 + d, x2, None, None, self.horizon, magnitude=mag, tag=e)


@dataclass(frozen=True)
class StabilizingPairs:
    """``x01 = 0, w1 = 0`` against ``x02`` in ``[0.5, 1]`` driven by the stabilizing feedback.

    Meant for ``x+ = a x + w``: the second trajectory contracts by 0.5 per
    step until ``t_bar`` and then diverges.
    """

    a: float = 2.0
    t_bars: tuple = (10, 100, 1000)

    def draw(self, sys: System, rng: np.random.Generator, k: int) -> DrawnPair:
        tb = int(self.t_bars[k % len(self.t_bars)])
        x2 = rng.uniform(0.5, 1.0, sys.n)
        # violation comes near t = 1.75 t_bar for the usual beta; leave room
        return DrawnPair(np.zeros(sys.n), x2, None, StabilizingInput(self.a, tb), 2 * tb + 50, tag=tb)


SAMPLERS = {"uniform": UniformPairs, "log_magnitude": LogMagnitudePairs, "stabilizing": StabilizingPairs}


@dataclass
class Assumption2Report:
    trials: int
    psi_pairs: int
    lambda_skipped: int
    no_violation: int
    T_beta: int
    max_first_violation: int | None
    empirical_min_T_beta: int | None
    holds: bool | None
    times: list
    trend_slope: float | None = None
    trend: str | None = None
    by_tag: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["times"] = list(self.times[:100])
        d["by_tag"] = {str(k): v for k, v in self.by_tag.items()}
        return d


def check_assumption2(sys: System, cert: Certificate, pair_sampler, T_beta: int, trials: int,
                      seed: int, pair_cert: Certificate | None = None,
                      trend_threshold: float = 0.25) -> Assumption2Report:
    """Probe the uniform-violation-time assumption on sampled Psi-pairs.

    Each drawn pair is first classified against ``pair_cert`` (by default the
    i-ISS certificate sharing ``beta`` and the input gain of ``cert``); pairs
    satisfying it on their horizon are skipped.  For the remaining pairs the
    first ``t`` with ``|dx(t)| > beta(|dx0|, t)`` is recorded.  When the sampler
    controls ``|dx0|``, a least-squares slope of the violation time against
    ``log10(1/|dx0|)`` is reported; a slope above ``trend_threshold`` per
    decade is flagged as an unbounded trend.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if cert.kind not in ("ioss", "sampled"):
        raise CertificateError("assumption 2 is stated for ioss or sampled certificates")
    if isinstance(pair_sampler, str):
        pair_sampler = SAMPLERS[pair_sampler]()
    pc = pair_cert or default_pair_iiss(cert)
    beta = cert.functions[0]
    rng = np.random.default_rng(seed)
    times, mags, tags = [], [], []
    skipped = nov = 0
    for k in range(trials):
        d = pair_sampler.draw(sys, rng, k)
        pair = simulate_pair(sys, d.x01, d.x02, d.w1, d.w2, d.horizon)
        if classify_pair(pair, pc).label == "in_lambda":
            skipped += 1
            continue
        tv = first_violation_time(pair, beta)
        if tv is None:
            nov += 1
            continue
        times.append(tv)
        mags.append(d.magnitude)
        tags.append(d.tag)
    if not times:
        raise InconclusiveError(f"sampler produced no Psi-pairs with a violation in {trials} trials")
    mx = max(times)
    by_tag = {}
    for tg, tv in zip(tags, times):
        if tg is not None:
            by_tag.setdefault(tg, []).append(tv)
    by_tag = {k: {"min": min(v), "max": max(v), "count": len(v)} for k, v in sorted(by_tag.items())}
    slope = trend = None
    if all(m is not None for m in mags) and len(set(mags)) >= 2:
        decades = -np.log10(np.asarray(mags))
        slope = float(np.polyfit(decades, np.asarray(times, float), 1)[0])
        trend = "unbounded trend" if slope > trend_threshold else "bounded"
    holds = mx <= T_beta and trend != "unbounded trend"
    return Assumption2Report(trials, len(times) + nov, skipped, nov, int(T_beta), mx, mx, holds,
                             times, slope, trend, by_tag)


def violation_time_formula(c: float, a: float, lam: float, s: float = 1.0, root: bool = False) -> int:
    """First integer ``t`` with ``a**t s > c s**p exp(-lam t)``; ``p = 1/2`` if ``root`` else 1."""
    p = 0.5 if root else 1.0
    x = (math.log(c) + (p - 1.0) * math.log(s)) / (math.log(a) + lam)
    return int(math.floor(x)) + 1


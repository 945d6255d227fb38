"""Discrete-time systems ``x+ = f(x, w)``, ``y = h(x)`` and paired simulation."""
from __future__ import annotations

import csv
import functools
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import compfn
from . import exprparse


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class System:
    """A discrete-time system.

    ``f(x, w)`` and ``h(x)`` accept arrays with leading batch axes
    (``x[..., n]``, ``w[..., q]``).  Systems without an input channel have
    ``q = 0`` and ignore whatever input they are given.  Linear systems keep
    their matrices in ``A``, ``B``, ``C`` and get a closed-form simulation path.
    """

    name: str
    n: int
    q: int
    p: int
    f: Callable = field(repr=False)
    h: Callable = field(repr=False)
    alpha_h: compfn.ComparisonFunction | None = None
    alpha_f: compfn.ComparisonFunction | None = None
    A: np.ndarray | None = field(default=None, repr=False)
    B: np.ndarray | None = field(default=None, repr=False)
    C: np.ndarray | None = field(default=None, repr=False)
    source: str | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def is_linear(self) -> bool:
        return self.A is not None


def _as_state(sys: System, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != sys.n:
        raise DimensionMismatch(f"{sys.name}: state has dimension {sys.n}, got shape {x.shape}")
    return x


def _as_input(sys: System, w) -> np.ndarray:
    if sys.q == 0:
        return np.zeros(0)
    if w is None:
        return np.zeros(sys.q)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.shape[-1] != sys.q:
        raise DimensionMismatch(f"{sys.name}: input has dimension {sys.q}, got shape {w.shape}")
    return w


def step(sys: System, x, w=None) -> np.ndarray:
    """One transition ``f(x, w)``."""
    return np.asarray(sys.f(_as_state(sys, x), _as_input(sys, w)), dtype=float)


def output(sys: System, x) -> np.ndarray:
    return np.asarray(sys.h(_as_state(sys, x)), dtype=float)


# --------------------------------------------------------------------------
# catalog


def _linear_maps(A, B, C):
    if B is None:
        return (lambda x, w: x @ A.T), (lambda x: x @ C.T)
    return (lambda x, w: x @ A.T + w @ B.T), (lambda x: x @ C.T)


def linear(A, C, B=None, name: str = "linear") -> System:
    """``x+ = A x + B w``, ``y = C x`` with Lipschitz moduli from the matrix 2-norms."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or C.shape[1] != n:
        raise DimensionMismatch(f"A must be n x n and C p x n, got {A.shape} and {C.shape}")
    if B is not None:
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(n, -1)
        if B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
        if B.shape[1] == 0:
            B = None
    q = 0 if B is None else B.shape[1]
    f, h = _linear_maps(A, B, C)
    c_h = float(np.linalg.norm(C, 2))
    c_f = max(float(np.linalg.norm(A, 2)), float(np.linalg.norm(B, 2)) if B is not None else 0.0)
    for M in (A, C) + ((B,) if B is not None else ()):
        M.setflags(write=False)
    return System(
        name=name, n=n, q=q, p=C.shape[0], f=f, h=h,
        alpha_h=compfn.linear(c_h) if c_h > 0 else None,
        alpha_f=compfn.linear(c_f) if c_f > 0 else None,
        A=A, B=B, C=C,
    )


def rotation8() -> System:
    """Marginally stable 45-degree rotation with output ``y = x1``; period 4 is pathological."""
    r = 1.0 / math.sqrt(2.0)
    return linear([[r, r], [-r, r]], [[1.0, 0.0]], name="rotation8")


def scalar_unstable(a: float = 2.0) -> System:
    sys = linear([[a]], [[1.0]], name=f"scalar_unstable(a={a:g})")
    if a <= 1:
        sys.meta["warning"] = "not unstable (a <= 1)"
    return sys


def scalar_unstable_input(a: float = 2.0) -> System:
    sys = linear([[a]], [[1.0]], B=[[1.0]], name=f"scalar_unstable_input(a={a:g})")
    if a <= 1:
        sys.meta["warning"] = "not unstable (a <= 1)"
    return sys


def contraction() -> System:
    """``x+ = 0.5 x + w``, ``y = x``."""
    return linear([[0.5]], [[1.0]], B=[[1.0]], name="contraction")


def spiral(rho: float, theta_deg: float, name: str | None = None) -> System:
    """Planar spiral ``rho * R(theta)`` observed through the first coordinate."""
    th = math.radians(theta_deg)
    R = rho * np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
    return linear(R, [[1.0, 0.0]], name=name or f"spiral(rho={rho:g}, theta={theta_deg:g})")


CATALOG = {
    "rotation8": rotation8,
    "scalar_unstable": scalar_unstable,
    "scalar_unstable_input": scalar_unstable_input,
    "contraction": contraction,
    "spiral": spiral,
    "linear": linear,
}


def builtin(name: str, **params) -> System:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; known: {sorted(CATALOG)}") from None
    return factory(**params)


# --------------------------------------------------------------------------
# parsed systems


def parse_system(source: str, name: str = "parsed") -> System:
    """Build a system from the expression language of :mod:`exprparse`."""
    prog = exprparse.parse_program(source)
    n, q, p, fx, hx = exprparse.infer_dimensions(prog)
    fs = [exprparse.compile_expr(e) for e in fx]
    hs = [exprparse.compile_expr(e) for e in hx]

    def f(x, w):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        return np.stack([np.broadcast_to(g(x, w), shape) for g in fs], axis=-1).astype(float)

    def h(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        return np.stack([np.broadcast_to(g(x, None), shape) for g in hs], axis=-1).astype(float)

    return System(name=name, n=n, q=q, p=p, f=f, h=h, source=exprparse.program_to_text(prog))


def pretty(sys: System) -> str:
    if sys.source is None:
        raise ValueError(f"{sys.name} has no source text")
    return sys.source


_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\((.*)\))?\s*$", re.S)


def load_system(source: str) -> System:
    """Resolve a system from a catalog name (``scalar_unstable(a=2)``), a file, or inline text.

    Files ending in ``.json`` (or inline text starting with ``{``) hold linear
    matrices ``{"A": ..., "B": ..., "C": ...}``; anything else is parsed with
    the expression grammar.
    """
    if os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
        if source.endswith(".json"):
            return _linear_from_json(json.loads(text), name=os.path.basename(source))
        return parse_system(text, name=os.path.basename(source))
    if source.lstrip().startswith("{"):
        return _linear_from_json(json.loads(source), name="linear")
    m = _CALL.match(source)
    if m and m.group(1) in CATALOG and m.group(1) != "linear":
        params = {}
        if m.group(2):
            for item in m.group(2).split(","):
                if item.strip():
                    k, _, v = item.partition("=")
                    params[k.strip()] = float(v)
        return builtin(m.group(1), **params)
    return parse_system(source, name="inline")


def _linear_from_json(d: dict, name: str) -> System:
    return linear(d["A"], d["C"], B=d.get("B"), name=d.get("name", name))


# --------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class StabilizingInput:
    """State feedback ``w(t) = (0.5 - a) x(t)`` for ``t < t_bar`` and 0 afterwards.

    Applied to ``x+ = a x + w`` this makes the state contract by 0.5 per step
    until ``t_bar``; afterwards the open-loop instability takes over again.
    """

    a: float
    t_bar: int

    def __call__(self, t: int, x: np.ndarray) -> np.ndarray:
        if t < self.t_bar:
            return (0.5 - self.a) * np.asarray(x, dtype=float)
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class TrajectoryPair:
    x01: np.ndarray
    x02: np.ndarray
    w1: np.ndarray  # (T, q) realized inputs
    w2: np.ndarray
    states1: np.ndarray  # (T+1, n)
    states2: np.ndarray
    dy_vec: np.ndarray  # (T+1, p) output difference h(x1) - h(x2)
    dx: np.ndarray  # (T+1,)  |dx(t)|
    dw: np.ndarray  # (T,)    |dw(t)|
    dy: np.ndarray  # (T+1,)  |dh(dx(t))|

    @property
    def horizon(self) -> int:
        return len(self.dx) - 1


@functools.lru_cache(maxsize=64)
def _powers(key: bytes, n: int, T: int) -> np.ndarray:
    A = np.frombuffer(key, dtype=float).reshape(n, n)
    P = np.empty((T + 1, n, n))
    P[0] = np.eye(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            P[k + 1] = A @ P[k]
    if not np.all(np.isfinite(P)):
        return None
    P.setflags(write=False)
    return P


def _free_response(sys: System, x0: np.ndarray, T: int) -> np.ndarray | None:
    """``A^t x0`` for all t at once, or None if the powers of ``A`` overflow."""
    P = _powers(np.ascontiguousarray(sys.A).tobytes(), sys.n, T)
    return None if P is None else P @ x0


def _loop_traj(sys: System, x0, w, T):
    X = np.empty((T + 1, sys.n))
    W = np.zeros((T, sys.q))
    X[0] = x0
    for t in range(T):
        wt = w(t, X[t]) if callable(w) else w[t]
        if sys.q:
            W[t] = wt
        X[t + 1] = sys.f(X[t], W[t])
    return X, W


def _input_array(sys, w, T):
    if callable(w):
        return w
    if sys.q == 0:
        return np.zeros((T, 0))
    if w is None:
        return np.zeros((T, sys.q))
    w = np.asarray(w, dtype=float)
    if w.ndim == 1 and sys.q == 1:
        w = w[:, None]
    if w.ndim != 2 or w.shape[1] != sys.q:
        raise DimensionMismatch(f"input sequence must have shape (T, {sys.q}), got {w.shape}")
    if w.shape[0] < T:
        raise DimensionMismatch(f"input sequence has length {w.shape[0]} < horizon {T}")
    return w[:T]


def simulate(sys: System, x0, w, T: int):
    """States ``x(0..T)`` and the realized inputs ``w(0..T-1)``."""
    x0 = _as_state(sys, x0)
    w = _input_array(sys, w, T)
    if sys.is_linear and not callable(w) and not np.any(w):
        X = _free_response(sys, x0, T)
        if X is not None:
            return X, w
    return _loop_traj(sys, x0, w, T)


def simulate_pair(sys: System, x01, x02, w1=None, w2=None, T: int = 1) -> TrajectoryPair:
    """Simulate two solutions and their increments over ``t = 0..T``.

    Inputs may be arrays of shape ``(>=T, q)``, ``None`` (zero) or callables
    ``w(t, x)`` evaluated along the trajectory (e.g. :class:`StabilizingInput`).
    """
    if T < 1:
        raise ValueError("horizon must be >= 1")
    X1, W1 = simulate(sys, x01, w1, T)
    X2, W2 = simulate(sys, x02, w2, T)
    Y = sys.h(X1) - sys.h(X2)
    return TrajectoryPair(
        x01=X1[0].copy(), x02=X2[0].copy(), w1=np.asarray(W1), w2=np.asarray(W2),
        states1=X1, states2=X2, dy_vec=Y,
        dx=np.linalg.norm(X1 - X2, axis=1),
        dw=np.linalg.norm(np.asarray(W1) - np.asarray(W2), axis=1) if sys.q else np.zeros(T),
        dy=np.linalg.norm(Y, axis=1),
    )


def pair_to_csv(pair: TrajectoryPair) -> str:
    n = pair.states1.shape[1]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["t"] + [f"x1_{k + 1}" for k in range(n)] + [f"x2_{k + 1}" for k in range(n)] + ["dx", "dy"])
    for t in range(pair.horizon + 1):
        wr.writerow([t] + [repr(float(v)) for v in pair.states1[t]] + [repr(float(v)) for v in pair.states2[t]]
                    + [repr(float(pair.dx[t])), repr(float(pair.dy[t]))])
    return buf.getvalue()


# --------------------------------------------------------------------------
# continuity moduli


def estimate_modulus(sys: System, map_tag: str, domain, samples: int = 1000, seed: int = 0,
                     safety: float = 1.1) -> compfn.ComparisonFunction:
    """Empirical linear modulus ``c * s`` for the output map or the transition map.

    Random pairs are drawn in the box ``domain`` (rows ``(lo, hi)``).  For the
    transition map the box covers ``(x, w)``; if only ``n`` rows are given the
    inputs are drawn from ``[-1, 1]``.  The transition modulus is taken in the
    joint argument ``|dx| + |dw|``.  The returned function is the tightest
    dominating line times ``safety`` and is flagged ``estimated`` in its meta.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    box = np.atleast_2d(np.asarray(domain, dtype=float))
    if map_tag == "transition" and box.shape[0] == sys.n and sys.q:
        box = np.vstack([box, np.tile([-1.0, 1.0], (sys.q, 1))])
    want = sys.n if map_tag == "output" else sys.n + sys.q
    if map_tag not in ("output", "transition"):
        raise ValueError("map_tag must be 'output' or 'transition'")
    if box.shape != (want, 2):
        raise DimensionMismatch(f"domain must have {want} rows of (lo, hi), got {box.shape}")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("degenerate domain box (zero volume)")
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0], box[:, 1]
    z1 = lo + (hi - lo) * rng.random((samples, want))
    z2 = lo + (hi - lo) * rng.random((samples, want))
    x1, x2 = z1[:, : sys.n], z2[:, : sys.n]
    if map_tag == "output":
        num = np.linalg.norm(sys.h(x1) - sys.h(x2), axis=1)
        den = np.linalg.norm(x1 - x2, axis=1)
    else:
        w1, w2 = z1[:, sys.n:], z2[:, sys.n:]
        num = np.linalg.norm(sys.f(x1, w1) - sys.f(x2, w2), axis=1)
        den = np.linalg.norm(x1 - x2, axis=1) + (np.linalg.norm(w1 - w2, axis=1) if sys.q else 0.0)
    ok = den > 0
    envelope = float(np.max(num[ok] / den[ok]))
    c = safety * envelope if envelope > 0 else safety * 1e-12
    fn = compfn.linear(c, tag=compfn.K)
    fn.meta.update({"estimated": True, "envelope": envelope, "safety": safety,
                    "samples": samples, "seed": seed, "map": map_tag})
    return fn

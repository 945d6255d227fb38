"""Comparison functions (classes K, K-infinity, L and KL) as small expression trees.

A :class:`ComparisonFunction` pairs a class tag with an immutable node tree built
from a handful of atoms (power/exponential laws, the identity, piecewise-linear
tables and the two-branch square-root law) and closed under pointwise max,
composition, positive scaling and separable products ``k(s) * l(t)``.  Keeping
the tree explicit (instead of wrapping opaque callables) makes certificates
printable, serializable to JSON and exactly re-evaluable.

Evaluation conventions
----------------------
* K / Kinf functions take only ``s``.
* L functions take only ``t``; internally their nodes are evaluated at ``s = 1``.
* KL functions take ``(s, t)``.

Everything is numpy-vectorized: ``s`` and ``t`` may be scalars or arrays that
broadcast against each other.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

K, KINF, L, KL = "K", "Kinf", "L", "KL"
CLASS_TAGS = (K, KINF, L, KL)
_K_LIKE = (K, KINF)


class ComparisonError(ValueError):
    """Base class for comparison-function errors."""


class DomainError(ComparisonError):
    pass


class ClassMismatchError(ComparisonError):
    pass


class UnsupportedFormError(ComparisonError):
    pass


# --------------------------------------------------------------------------
# nodes


def _decay(lam: float, t):
    if t is None or lam == 0.0:
        return 1.0
    return np.exp(-lam * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class PowerExp:
    """``c * s**a * exp(-lam * t)``; the time factor is dropped when no time is given."""

    c: float
    a: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ComparisonError(f"PowerExp needs a positive finite c, got {self.c!r}")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ComparisonError(f"PowerExp needs a positive finite exponent, got {self.a!r}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ComparisonError(f"PowerExp needs a nonnegative decay rate, got {self.lam!r}")

    def ev(self, s, t):
        return self.c * np.power(s, self.a) * _decay(self.lam, t)

    def to_dict(self):
        return {"atom": "powexp", "c": self.c, "a": self.a, "lam": self.lam}

    def __str__(self):
        body = f"{self.c:g}*s^{self.a:g}" if self.a != 1 else f"{self.c:g}*s"
        if self.lam:
            body += f"*exp(-{self.lam:g}t)"
        return body


@dataclass(frozen=True)
class Identity:
    def ev(self, s, t):
        return np.asarray(s, dtype=float) * 1.0

    def to_dict(self):
        return {"atom": "identity"}

    def __str__(self):
        return "s"


@dataclass(frozen=True)
class ZeroAtZeroTable:
    """Piecewise-linear interpolation through sorted breakpoints, starting at (0, 0).

    Beyond the last breakpoint the last segment is extended linearly.
    """

    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ys = tuple(float(v) for v in self.ys)
        if len(xs) != len(ys) or len(xs) < 1:
            raise ComparisonError("table needs matching, non-empty xs and ys")
        if xs[0] != 0.0:
            xs, ys = (0.0,) + xs, (0.0,) + ys
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ComparisonError("table breakpoints must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def ev(self, s, t):
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        s = np.asarray(s, dtype=float)
        out = np.interp(s, xs, ys)
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        return np.where(s > xs[-1], ys[-1] + slope * (s - xs[-1]), out)

    def to_dict(self):
        return {"atom": "table", "xs": list(self.xs), "ys": list(self.ys)}

    def __str__(self):
        return f"table[{len(self.xs)} pts]"


@dataclass(frozen=True)
class SqrtSwitch:
    """Two-branch law: ``c*sqrt(thr*s)`` below the threshold, ``c*s`` above, times ``exp(-lam*t)``.

    With ``threshold = 1`` this is exactly ``c*sqrt(s)`` for ``s < 1`` and ``c*s``
    otherwise; the ``thr`` factor keeps the branches continuous for other thresholds.
    """

    c: float
    lam: float = 0.0
    threshold: float = 1.0

    def __post_init__(self):
        if not self.c > 0 or not self.lam >= 0 or not self.threshold > 0:
            raise ComparisonError("SqrtSwitch needs c > 0, lam >= 0, threshold > 0")

    def ev(self, s, t):
        s = np.asarray(s, dtype=float)
        body = np.where(s < self.threshold, np.sqrt(self.threshold * np.maximum(s, 0.0)), s)
        return self.c * body * _decay(self.lam, t)

    def to_dict(self):
        return {"atom": "sqrtswitch", "c": self.c, "lam": self.lam, "threshold": self.threshold}

    def __str__(self):
        return f"sqrtswitch(c={self.c:g}, lam={self.lam:g}, thr={self.threshold:g})"


@dataclass(frozen=True)
class Max:
    args: tuple

    def ev(self, s, t):
        vals = [a.ev(s, t) for a in self.args]
        return np.maximum.reduce(np.broadcast_arrays(*vals)) if len(vals) > 1 else vals[0]

    def to_dict(self):
        return {"op": "max", "args": [a.to_dict() for a in self.args]}

    def __str__(self):
        return " (+) ".join(f"[{a}]" for a in self.args)


@dataclass(frozen=True)
class Compose:
    """``outer(inner(s, t))``; the outer function acts on the value only."""

    outer: Any
    inner: Any

    def ev(self, s, t):
        return self.outer.ev(self.inner.ev(s, t), None)

    def to_dict(self):
        return {"op": "compose", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}

    def __str__(self):
        return f"({self.outer})o({self.inner})"


@dataclass(frozen=True)
class Scale:
    c: float
    arg: Any

    def ev(self, s, t):
        return self.c * self.arg.ev(s, t)

    def to_dict(self):
        return {"op": "scale", "c": self.c, "arg": self.arg.to_dict()}

    def __str__(self):
        return f"{self.c:g}*({self.arg})"


@dataclass(frozen=True)
class Product:
    """Separable ``k(s) * l(t)``; the L factor is evaluated at ``s = 1``."""

    k: Any
    l: Any

    def ev(self, s, t):
        if t is None:
            raise DomainError("separable product needs a time argument")
        return self.k.ev(s, None) * self.l.ev(1.0, t)

    def to_dict(self):
        return {"op": "product", "k": self.k.to_dict(), "l": self.l.to_dict()}

    def __str__(self):
        return f"({self.k})*({self.l})"


def node_from_dict(d: dict):
    if "atom" in d:
        kind = d["atom"]
        if kind == "powexp":
            return PowerExp(float(d["c"]), float(d.get("a", 1.0)), float(d.get("lam", 0.0)))
        if kind == "identity":
            return Identity()
        if kind == "table":
            return ZeroAtZeroTable(tuple(d["xs"]), tuple(d["ys"]))
        if kind == "sqrtswitch":
            return SqrtSwitch(float(d["c"]), float(d.get("lam", 0.0)), float(d.get("threshold", 1.0)))
        raise ComparisonError(f"unknown atom {kind!r}")
    op = d.get("op")
    if op == "max":
        return Max(tuple(node_from_dict(a) for a in d["args"]))
    if op == "compose":
        return Compose(node_from_dict(d["outer"]), node_from_dict(d["inner"]))
    if op == "scale":
        return Scale(float(d["c"]), node_from_dict(d["arg"]))
    if op == "product":
        return Product(node_from_dict(d["k"]), node_from_dict(d["l"]))
    raise ComparisonError(f"unknown node {d!r}")


# --------------------------------------------------------------------------
# the tagged function


@dataclass(frozen=True)
class ComparisonFunction:
    class_tag: str
    node: Any
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise ComparisonError(f"unknown class tag {self.class_tag!r}")

    @property
    def is_k(self) -> bool:
        return self.class_tag in _K_LIKE

    def __call__(self, s=None, t=None):
        return evaluate(self, s, t)

    def __str__(self):
        return f"{self.class_tag}: {self.node}"

    def to_dict(self) -> dict:
        return {"class": self.class_tag, "node": self.node.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonFunction":
        return cls(d["class"], node_from_dict(d["node"]))


def evaluate(f: ComparisonFunction, s=None, t=None):
    """Evaluate ``f`` at ``s`` (and ``t`` for L/KL functions).

    Scalars in give a Python float out; arrays broadcast.
    """
    tag = f.class_tag
    if tag in (L, KL) and t is None:
        raise DomainError(f"{tag}-function needs a time argument")
    if tag == L:
        s = 1.0
    elif s is None:
        raise DomainError(f"{tag}-function needs an s argument")
    sa = np.asarray(s, dtype=float)
    if np.any(sa < 0) or np.any(np.isnan(sa)):
        raise DomainError("comparison functions are defined for s >= 0 only")
    if t is not None:
        ta = np.asarray(t, dtype=float)
        if np.any(ta < 0):
            raise DomainError("time argument must be nonnegative")
    out = f.node.ev(sa, None if tag in _K_LIKE else t)
    shape = np.broadcast(sa, ta).shape if t is not None else sa.shape
    out = np.array(np.broadcast_to(np.asarray(out, dtype=float), shape))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# constructors


def identity(tag: str = KINF) -> ComparisonFunction:
    return ComparisonFunction(tag, Identity())


def linear(c: float, tag: str = KINF) -> ComparisonFunction:
    return ComparisonFunction(tag, PowerExp(float(c), 1.0, 0.0))


def power(c: float, a: float, tag: str = KINF) -> ComparisonFunction:
    return ComparisonFunction(tag, PowerExp(float(c), float(a), 0.0))


def powexp(c: float, a: float = 1.0, lam: float = 0.0, tag: str | None = None) -> ComparisonFunction:
    """A single power/exponential atom; KL when it decays, K-infinity otherwise."""
    if tag is None:
        tag = KL if lam > 0 else KINF
    return ComparisonFunction(tag, PowerExp(float(c), float(a), float(lam)))


def exp_decay(lam: float = 1.0, c: float = 1.0) -> ComparisonFunction:
    """The L-function ``c * exp(-lam * t)``."""
    return ComparisonFunction(L, PowerExp(float(c), 1.0, float(lam)))


def sqrt_switch(c: float, lam: float, threshold: float = 1.0) -> ComparisonFunction:
    return ComparisonFunction(KL, SqrtSwitch(float(c), float(lam), float(threshold)))


def table(xs: Sequence[float], ys: Sequence[float], tag: str = K) -> ComparisonFunction:
    return ComparisonFunction(tag, ZeroAtZeroTable(tuple(xs), tuple(ys)))


def constant_l(value: float = 1.0) -> ComparisonFunction:
    """A constant tagged L.  Not an L-function; useful for exercising ``verify_class``."""
    return ComparisonFunction(L, PowerExp(float(value), 1.0, 0.0))


# --------------------------------------------------------------------------
# algebra


def oplus(f: ComparisonFunction, g: ComparisonFunction, *more: ComparisonFunction) -> ComparisonFunction:
    """Pointwise maximum."""
    fs = (f, g) + more
    tags = {h.class_tag for h in fs}
    if tags <= set(_K_LIKE):
        tag = K if K in tags else KINF
    elif len(tags) == 1:
        tag = tags.pop()
    else:
        raise ClassMismatchError(f"cannot take the max of classes {sorted(h.class_tag for h in fs)}")
    args = []
    for h in fs:
        args.extend(h.node.args if isinstance(h.node, Max) else (h.node,))
    return ComparisonFunction(tag, Max(tuple(args)))


def compose(outer: ComparisonFunction, inner: ComparisonFunction) -> ComparisonFunction:
    """``outer(inner(s))`` for two K-functions."""
    if not (outer.is_k and inner.is_k):
        raise ClassMismatchError(
            f"compose needs two K-functions, got {outer.class_tag} o {inner.class_tag}"
        )
    tag = KINF if outer.class_tag == inner.class_tag == KINF else K
    return ComparisonFunction(tag, Compose(outer.node, inner.node))


def compose_kl(outer: ComparisonFunction, inner: ComparisonFunction) -> ComparisonFunction:
    """``outer(inner(s, t))``: a K-function applied to the value of a KL-function."""
    if not outer.is_k or inner.class_tag != KL:
        raise ClassMismatchError(
            f"compose_kl needs K o KL, got {outer.class_tag} o {inner.class_tag}"
        )
    return ComparisonFunction(KL, Compose(outer.node, inner.node))


def scale(c: float, f: ComparisonFunction) -> ComparisonFunction:
    """Output scaling ``c * f``."""
    if not c > 0:
        raise ComparisonError("scale factor must be positive")
    if c == 1.0:
        return f
    return ComparisonFunction(f.class_tag, Scale(float(c), f.node))


def scale_arg(f: ComparisonFunction, c: float) -> ComparisonFunction:
    """Argument scaling ``s -> f(c * s)`` of a K-function."""
    return compose(f, linear(c))


def product(k: ComparisonFunction, l: ComparisonFunction) -> ComparisonFunction:
    """Separable KL-function ``k(s) * l(t)``."""
    if not k.is_k or l.class_tag != L:
        raise ClassMismatchError(f"product needs K * L, got {k.class_tag} * {l.class_tag}")
    return ComparisonFunction(KL, Product(k.node, l.node))


def at_time(f: ComparisonFunction, t: float) -> ComparisonFunction:
    """The K-function ``s -> f(s, t)`` of a KL-function, for exponential-family nodes.

    Only the time-0 slice is needed in practice (``beta(s, 0)``); it is formed
    exactly by dropping decay factors where possible and otherwise by composing
    with a scale.
    """
    if f.class_tag != KL:
        raise ClassMismatchError("at_time needs a KL-function")
    return ComparisonFunction(K, _slice(f.node, float(t)))


def _slice(node, t):
    if isinstance(node, PowerExp):
        return PowerExp(node.c * math.exp(-node.lam * t), node.a, 0.0)
    if isinstance(node, SqrtSwitch):
        return SqrtSwitch(node.c * math.exp(-node.lam * t), 0.0, node.threshold)
    if isinstance(node, Max):
        return Max(tuple(_slice(a, t) for a in node.args))
    if isinstance(node, Scale):
        return Scale(node.c, _slice(node.arg, t))
    if isinstance(node, Compose):
        return Compose(node.outer, _slice(node.inner, t))
    if isinstance(node, Product):
        lval = float(node.l.ev(1.0, t))
        return Scale(lval, node.k) if lval != 1.0 else node.k
    if isinstance(node, (Identity, ZeroAtZeroTable)):
        return node
    raise UnsupportedFormError(f"cannot slice {type(node).__name__}")


def inverse(f: ComparisonFunction) -> ComparisonFunction:
    """Closed-form inverse of a single power law (or the identity)."""
    if not f.is_k:
        raise ClassMismatchError("only K-functions are inverted")
    node = f.node
    c = 1.0
    if isinstance(node, Scale):
        c, node = node.c, node.arg
    if isinstance(node, Identity):
        node = PowerExp(1.0, 1.0, 0.0)
    if isinstance(node, PowerExp) and node.lam == 0.0:
        cc, a = c * node.c, node.a
        # y = cc * s^a  =>  s = (y / cc)^(1/a)
        return ComparisonFunction(f.class_tag, PowerExp(cc ** (-1.0 / a), 1.0 / a, 0.0))
    raise UnsupportedFormError(f"no closed-form inverse for {f}")


# --------------------------------------------------------------------------
# class verification


@dataclass(frozen=True)
class Grid:
    s: np.ndarray
    t: np.ndarray


def default_grid() -> Grid:
    s = np.logspace(-6, 3, 64)
    t = np.unique(np.round(np.linspace(0, 256, 64)).astype(int)).astype(float)
    return Grid(s=s, t=t)


@dataclass
class Check:
    name: str
    status: str  # "pass" | "fail" | "inconclusive"
    worst: Any = None
    detail: str = ""


@dataclass
class ClassReport:
    class_tag: str
    checks: list

    @property
    def consistent(self) -> bool:
        """All checks passed on the grid (evidence, not proof)."""
        return bool(self.checks) and all(c.status == "pass" for c in self.checks)

    @property
    def failed(self) -> list:
        return [c for c in self.checks if c.status == "fail"]

    def summary(self) -> str:
        word = "consistent" if self.consistent else "not consistent"
        parts = ", ".join(f"{c.name}={c.status}" for c in self.checks)
        return f"{self.class_tag} {word} on grid ({parts})"


_TINY = np.finfo(float).tiny


def _k_checks(vals0, s, vals, label=""):
    checks = []
    if vals0 is not None:
        ok = vals0 == 0.0
        checks.append(Check(f"zero_at_zero{label}", "pass" if ok else "fail",
                            worst=(0.0, float(vals0))))
    d = np.diff(vals)
    if d.size == 0:
        checks.append(Check(f"strict_increase{label}", "inconclusive", detail="fewer than 2 points"))
    else:
        j = int(np.argmin(d))
        checks.append(Check(f"strict_increase{label}", "pass" if d[j] > 0 else "fail",
                            worst=((float(s[j]), float(vals[j])), (float(s[j + 1]), float(vals[j + 1])))))
    return checks


def _l_checks(t, vals, label=""):
    if len(t) < 2:
        return [Check(f"non_increase{label}", "inconclusive", detail="fewer than 2 points"),
                Check(f"decay{label}", "inconclusive", detail="fewer than 2 points")]
    d = np.diff(vals)
    j = int(np.argmax(d))
    c1 = Check(f"non_increase{label}", "pass" if d[j] <= 0 else "fail",
               worst=((float(t[j]), float(vals[j])), (float(t[j + 1]), float(vals[j + 1]))))
    if vals[0] == 0.0 and np.all(vals == 0.0):
        c2 = Check(f"decay{label}", "pass", detail="constant zero")
    else:
        ok = vals[-1] < vals[0]
        c2 = Check(f"decay{label}", "pass" if ok else "fail",
                   worst=((float(t[0]), float(vals[0])), (float(t[-1]), float(vals[-1]))))
    return [c1, c2]


def _merge(checks, name):
    """Collapse per-slice checks into one, keeping the worst violation."""
    fails = [c for c in checks if c.status == "fail"]
    if fails:
        return Check(name, "fail", worst=fails[0].worst, detail=f"{len(fails)} slice(s) failed")
    if checks and all(c.status == "inconclusive" for c in checks):
        return Check(name, "inconclusive")
    n_skip = sum(c.status == "inconclusive" for c in checks)
    return Check(name, "pass", detail=f"{n_skip} underflowed slice(s) skipped" if n_skip else "")


def verify_class(f: ComparisonFunction, grid: Grid | None = None) -> ClassReport:
    """Test the class invariants of ``f`` on a finite grid.

    Strict increase is checked with zero tolerance.  For KL-functions, time
    slices whose values underflow to (sub)normal zero are skipped, since strict
    increase is not representable there; if every slice underflows the check is
    inconclusive.
    """
    grid = grid or default_grid()
    s = np.sort(np.asarray(grid.s, dtype=float))
    t = np.sort(np.asarray(grid.t, dtype=float))
    tag = f.class_tag
    checks = []
    if tag in _K_LIKE:
        if len(s) < 2:
            return ClassReport(tag, [Check("grid", "inconclusive", detail="need >= 2 s points")])
        checks += _k_checks(f(0.0), s, f(s))
        if tag == KINF:
            checks.append(_unbounded_check(f, s))
    elif tag == L:
        if len(t) < 2:
            return ClassReport(tag, [Check("grid", "inconclusive", detail="need >= 2 t points")])
        checks += _l_checks(t, f(t=t))
    else:
        if len(s) < 2 or len(t) < 2:
            return ClassReport(tag, [Check("grid", "inconclusive", detail="need >= 2 points per axis")])
        vals = f(s[:, None], t[None, :])
        zero = f(0.0, t)
        zchk = Check("zero_at_zero", "pass" if np.all(zero == 0.0) else "fail",
                     worst=None if np.all(zero == 0.0) else float(np.max(zero)))
        inc = []
        for j, tj in enumerate(t):
            col = vals[:, j]
            if col[-1] < _TINY:
                inc.append(Check("strict_increase", "inconclusive", detail=f"underflow at t={tj}"))
                continue
            c = _k_checks(None, s, col)[0]
            if c.status == "fail":
                c.worst = {"t": float(tj), "pair": c.worst}
            inc.append(c)
        dec = []
        for i, si in enumerate(s):
            for c in _l_checks(t, vals[i, :]):
                if c.status == "fail":
                    c.worst = {"s": float(si), "pair": c.worst}
                dec.append(c)
        checks = [zchk, _merge(inc, "strict_increase_in_s"),
                  _merge([c for c in dec if c.name == "non_increase"], "non_increase_in_t"),
                  _merge([c for c in dec if c.name == "decay"], "decay_in_t")]
    return ClassReport(tag, checks)


def _unbounded_check(f, s):
    """Growth beyond the grid: strictly increasing over extra decades, no saturation."""
    ext = np.logspace(np.log10(s[-1]), 15, 13)
    v = f(ext)
    inc = np.all(np.diff(v) > 0)
    ratio = v[-1] / v[-2] if v[-2] > 0 else np.inf
    ok = bool(inc and np.isfinite(v[-1]) and ratio >= 1.001) or bool(inc and np.isinf(v[-1]))
    return Check("unbounded", "pass" if ok else "fail", worst=(float(ext[-1]), float(v[-1])),
                 detail=f"last-decade growth ratio {ratio:.6g}")


# --------------------------------------------------------------------------
# Sontag-type factorization for the exponential family


def _decay_terms(node, coef=1.0):
    """Flatten ``node`` into ``[(coef, k_node, lam)]`` with node == max coef*k(s)*exp(-lam t)."""
    if isinstance(node, PowerExp):
        if node.lam <= 0:
            raise UnsupportedFormError("atom does not decay in t")
        return [(coef * node.c, PowerExp(1.0, node.a, 0.0), node.lam)]
    if isinstance(node, SqrtSwitch):
        if node.lam <= 0:
            raise UnsupportedFormError("atom does not decay in t")
        return [(coef * node.c, SqrtSwitch(1.0, 0.0, node.threshold), node.lam)]
    if isinstance(node, Max):
        out = []
        for a in node.args:
            out += _decay_terms(a, coef)
        return out
    if isinstance(node, Scale):
        return _decay_terms(node.arg, coef * node.c)
    if isinstance(node, Product) and isinstance(node.l, PowerExp) and node.l.lam > 0:
        return [(coef * node.l.c, node.k, node.l.lam)]
    raise UnsupportedFormError(
        f"Sontag factorization is only implemented for max-combinations of "
        f"k(s)*c*exp(-lam*t) terms, got {type(node).__name__}"
    )


def sontag_factorize(beta: ComparisonFunction, grid: Grid | None = None):
    """Return K-infinity functions ``(alpha1, alpha2)`` with ``alpha1(beta(s,r)) <= alpha2(s) * exp(-r)``.

    With ``lam_min`` the slowest decay rate among the terms of ``beta``,
    ``alpha1(v) = v**(1/lam_min)`` and ``alpha2(s) = max_i (c_i * k_i(s))**(1/lam_min)``.
    For a single term this is an equality.  Dominance is re-checked on the grid
    and recorded in ``alpha2.meta``.
    """
    if beta.class_tag != KL:
        raise ClassMismatchError("Sontag factorization needs a KL-function")
    terms = _decay_terms(beta.node)
    lam_min = min(lam for _, _, lam in terms)
    p = 1.0 / lam_min
    alpha1 = ComparisonFunction(KINF, PowerExp(1.0, p, 0.0))
    parts = []
    for c, k, _ in terms:
        if isinstance(k, PowerExp):
            parts.append(PowerExp(c ** p, k.a * p, 0.0))
        else:
            parts.append(Compose(PowerExp(c ** p, p, 0.0), k))
    alpha2 = ComparisonFunction(KINF, parts[0] if len(parts) == 1 else Max(tuple(parts)))

    g = grid or default_grid()
    S, R = np.meshgrid(g.s, g.t, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        lhs = alpha1(beta(S, R))
        rhs = alpha2(S) * np.exp(-R)
        rel = (lhs - rhs) / np.maximum(rhs, _TINY)
    rel = rel[np.isfinite(rel)]
    excess = float(np.max(rel)) if rel.size else 0.0
    alpha2.meta.update({"lam_min": lam_min, "max_rel_excess": excess, "exact": len(terms) == 1})
    return alpha1, alpha2


# --------------------------------------------------------------------------
# serialization


def dumps(f: ComparisonFunction, **kw) -> str:
    """JSON text; floats are written in Python's shortest round-trip form."""
    return json.dumps(f.to_dict(), **kw)


def loads(text: str) -> ComparisonFunction:
    return ComparisonFunction.from_dict(json.loads(text))

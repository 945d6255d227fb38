"""Certificates built constructively from other certificates.

Each builder returns a :class:`Certificate` whose slots are comparison-function
trees, class-checked on the default grid and tagged with their provenance.

Builders
--------
``sampled_from_ioss``
    i-IOSS certificate + output condition  ->  sample-based certificate.
``condition_from_sampled``
    sample-based certificate + output modulus  ->  output condition.
``project_discounted``
    time-discounted sample-based certificate  ->  sample-based certificate.
``discounted_from_condition`` / ``discounted_from_sontag``
    sample-based certificate  ->  time-discounted sample-based certificate,
    via the output condition or via a Sontag-type factorization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import compfn
from .certify import Certificate, CertificateError, certificate
from .compfn import ComparisonFunction, at_time, compose, compose_kl, exp_decay, oplus, product, scale
from .sampling import SamplingScheme


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class SynthesisInput:
    base: Certificate
    alpha_h: ComparisonFunction | None = None
    alpha_tilde_h: ComparisonFunction | None = None
    cond: Certificate | None = None
    T_beta_bar: int | None = None
    sontag: tuple | None = None
    sigma: ComparisonFunction | None = None
    sigma_u: ComparisonFunction | None = None
    sigma_y: ComparisonFunction | None = None
    sigma_1: ComparisonFunction | None = None
    beta_y: ComparisonFunction | None = None
    scheme: SamplingScheme | None = None


def _need(inp, kind, *fields):
    if inp.base.kind != kind:
        raise SynthesisError(f"expected a {kind} base certificate, got {inp.base.kind}")
    for f in fields:
        if getattr(inp, f) is None:
            raise SynthesisError(f"missing input {f}")


def _checked(cert: Certificate) -> Certificate:
    try:
        cert.validate()
        for name, f in cert.extras.items():
            rep = compfn.verify_class(f)
            if rep.failed:
                raise CertificateError(f"extra {name}: {rep.summary()}")
    except CertificateError as e:
        raise SynthesisError(f"internal error, synthesized certificate failed its class check: {e}") from e
    return cert


def _normalized_l(sigma: ComparisonFunction, at: float) -> ComparisonFunction:
    """``sigma(r) / sigma(at)``, so the result equals 1 at ``r = at``."""
    v = float(sigma(t=at))
    if not v > 0:
        raise SynthesisError(f"L-function vanishes at r = {at}; cannot normalize")
    return scale(1.0 / v, sigma)


def _shifted_decay(lam_shift: float) -> ComparisonFunction:
    """``exp(-r) / exp(-lam_shift)``."""
    return exp_decay(1.0, math.exp(lam_shift))


# --------------------------------------------------------------------------


def alpha_tilde_h(alpha_h: ComparisonFunction, alpha_f: ComparisonFunction, t_star: int) -> ComparisonFunction:
    """``max_{t < t*} alpha_h o g^t`` with ``g = alpha_f (+) Id``.

    ``alpha_f`` is a modulus of the transition map in the joint argument
    ``|dx| + |dw|``.  Flooring it at the identity keeps accumulated input
    increments additive, so ``|dy(t)| <= alpha_tilde_h(|dx0| + sum |dw|)``
    for every ``t < t*``.
    """
    if t_star < 1:
        raise SynthesisError("t* must be >= 1")
    g = oplus(alpha_f, compfn.identity(compfn.K))
    terms, it = [alpha_h], alpha_h
    for _ in range(1, t_star):
        it = compose(it, g)
        terms.append(it)
    out = terms[0] if len(terms) == 1 else oplus(*terms)
    out.meta.update({"t_star": t_star, "construction": "max over t < t* of alpha_h o (alpha_f (+) Id)^t"})
    return out


def sampled_from_ioss(inp: SynthesisInput) -> Certificate:
    """Sample-based certificate from an i-IOSS certificate and a condition11 certificate.

    beta_bar(s, t)  = beta(s, t) (+) gamma2(at(2 s)) e^{-(t - t*)}
    gamma1_bar(s)   = gamma1(s) (+) gamma2(at(2 t* s)) (+) gamma2(gamma_w(s))
    gamma2_bar      = gamma2 o gamma_h
    where ``at`` is ``alpha_tilde_h``.
    """
    _need(inp, "ioss", "cond", "alpha_tilde_h")
    if inp.cond.kind != "condition11":
        raise SynthesisError("cond must be a condition11 certificate")
    beta, g1, g2 = inp.base.functions
    gw, gh, ts = inp.cond["gamma_w"], inp.cond["gamma_h"], int(inp.cond["t_star"])
    at = inp.alpha_tilde_h
    early = product(compose(g2, compfn.scale_arg(at, 2.0)), _shifted_decay(ts))
    beta_bar = oplus(beta, early)
    gamma1_bar = oplus(g1, compose(g2, compfn.scale_arg(at, 2.0 * ts)), compose(g2, gw))
    gamma2_bar = compose(g2, gh)
    return _checked(certificate("sampled", beta_bar, gamma1_bar, gamma2_bar,
                                theorem="thm1", inputs={"t_star": ts}))


def condition_from_sampled(inp: SynthesisInput) -> Certificate:
    """``gamma_w = alpha_h o 2 gamma1_bar``, ``gamma_h = alpha_h o 2 gamma2_bar``, ``t* = T_beta_bar``."""
    _need(inp, "sampled", "alpha_h", "T_beta_bar")
    _, g1, g2 = inp.base.functions
    ah = inp.alpha_h
    gw = compose(ah, scale(2.0, g1))
    gh = compose(ah, scale(2.0, g2))
    return _checked(certificate("condition11", gw, gh, int(inp.T_beta_bar),
                                theorem="thm2", inputs={"T_beta_bar": int(inp.T_beta_bar)}))


def project_discounted(cert: Certificate) -> Certificate:
    """Drop the discounting: ``beta_bar = beta_bar_x``, gains are the time-0 slices."""
    if cert.kind != "sampled_discounted":
        raise SynthesisError("expected a sampled_discounted certificate")
    bx, bu, by = cert.functions
    return _checked(certificate("sampled", bx, at_time(bu, 0.0), at_time(by, 0.0), theorem="lemma1"))


def _default_beta_y(gamma2_bar: ComparisonFunction) -> ComparisonFunction:
    f = product(gamma2_bar, exp_decay(1.0))
    f.meta["default"] = "gamma2_bar(s) * exp(-r)"
    return f


def discounted_from_condition(inp: SynthesisInput) -> Certificate:
    """Time-discounted sample-based certificate via the output condition.

    Part one normalizes the gains of the sampled certificate by ``sigma_u``,
    ``sigma_y`` at age ``t* - 2``; part two builds ``beta_w``, ``beta_h`` from the
    condition gains normalized by ``sigma`` at age ``2 t* - 1``.  The base
    discounted output function ``beta_y`` defaults to ``gamma2_bar(s) exp(-r)``.
    """
    _need(inp, "sampled", "cond", "alpha_h")
    ts = int(inp.cond["t_star"])
    if inp.scheme is not None and ts < inp.scheme.delta_max:
        raise SynthesisError(f"t* = {ts} is below delta_max = {inp.scheme.delta_max}; "
                             "some t*-window may contain no sample")
    bb, g1, g2 = inp.base.functions
    gw, gh = inp.cond["gamma_w"], inp.cond["gamma_h"]
    ah = inp.alpha_h
    e = exp_decay(1.0)
    sigma, su, sy = inp.sigma or e, inp.sigma_u or e, inp.sigma_y or e
    age1 = max(ts - 2, 0)
    bt_u = product(g1, _normalized_l(su, age1))
    bt_y = product(g2, _normalized_l(sy, age1))
    b_w = product(gw, _normalized_l(sigma, 2 * ts - 1))
    b_h = product(gh, _normalized_l(sigma, 2 * ts - 1))
    beta_y = inp.beta_y or _default_beta_y(g2)
    by0 = at_time(beta_y, 0.0)
    by0_ah = compose(by0, ah)
    bx = oplus(bb, compose_kl(by0_ah, bb))
    bu = oplus(compose_kl(by0, b_w), bt_u, compose_kl(by0_ah, bt_u))
    byy = oplus(compose_kl(by0, b_h), bt_y, compose_kl(by0_ah, bt_y))
    cert = certificate("sampled_discounted", bx, bu, byy, theorem="thm3",
                       inputs={"t_star": ts, "beta_y": "given" if inp.beta_y else "default gamma2_bar(s)*exp(-r)"})
    cert.extras.update({"beta_tilde_u": bt_u, "beta_tilde_y": bt_y, "beta_w": b_w, "beta_h": b_h})
    return _checked(cert)


def discounted_from_sontag(inp: SynthesisInput) -> Certificate:
    """Time-discounted sample-based certificate via ``alpha1(beta_bar(s, r)) <= alpha2(s) e^{-r}``.

    beta_bar_y(s, r) = alpha1^-1(alpha2(gamma2_bar(s) e^{-r} / e^{-(2T-1)}))
    beta_bar_u(s, r) = alpha1^-1(alpha2(gamma1_bar(s) e^{-r} / e^{-(2T-1)})) (+) gamma1_bar(s) sigma_1(r)
    beta_bar_x       = beta_bar
    with ``T = T_beta_bar``; the auxiliary ``beta_1``, ``beta_2`` are exposed in ``extras``.
    """
    _need(inp, "sampled", "T_beta_bar")
    bb, g1, g2 = inp.base.functions
    T = int(inp.T_beta_bar)
    if inp.sontag is None:
        try:
            a1, a2 = compfn.sontag_factorize(bb)
        except compfn.UnsupportedFormError as e:
            raise SynthesisError(f"no Sontag factorization available: {e}") from e
    else:
        a1, a2 = inp.sontag
    try:
        a1inv = compfn.inverse(a1)
    except compfn.UnsupportedFormError as e:
        raise SynthesisError(f"alpha1 has no closed-form inverse: {e}") from e
    outer = compose(a1inv, a2)
    shifted = _shifted_decay(2 * T - 1)
    by = compose_kl(outer, product(g2, shifted))
    bu = oplus(compose_kl(outer, product(g1, shifted)), product(g1, inp.sigma_1 or exp_decay(1.0)))
    e = exp_decay(1.0)
    sig = _normalized_l(e, 2 * T - 1)
    cert = certificate("sampled_discounted", bb, bu, by, theorem="thm4", inputs={"T_beta_bar": T})
    cert.extras.update({"beta_1": product(g1, sig), "beta_2": product(g2, sig), "alpha1": a1, "alpha2": a2})
    s = compfn.default_grid().s
    cert.provenance["inputs"]["alpha1inv_alpha2_dominates_identity"] = bool(np.all(outer(s) >= s))
    return _checked(cert)


# the builders under the names used in the docs and CLI
BUILDERS = {
    "thm1": sampled_from_ioss,
    "thm2": condition_from_sampled,
    "lemma1": project_discounted,
    "thm3": discounted_from_condition,
    "thm4": discounted_from_sontag,
}

thm1_certificate = sampled_from_ioss
thm2_condition = condition_from_sampled
lemma1_project = project_discounted
thm3_discounted = discounted_from_condition
thm4_discounted = discounted_from_sontag

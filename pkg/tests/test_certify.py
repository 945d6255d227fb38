import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import first_violation_linear_exp, first_violation_sqrt, rhs_direct
from sampled_ioss import certify, compfn, sampling
from sampled_ioss.certify import certificate, check_bound, check_condition11, classify_pair
from sampled_ioss.sysmodel import builtin, simulate_pair

ID = compfn.identity()


def contraction_ioss():
    return certificate("ioss", compfn.powexp(1, 1, 0.6), compfn.linear(2), compfn.linear(1))


def cond_identity(t_star=2):
    return certificate("condition11", ID, ID, t_star)


class TestCertificate:
    def test_slot_classes_enforced(self):
        with pytest.raises(certify.CertificateError):
            certificate("ioss", ID, ID, ID)
        with pytest.raises(certify.CertificateError):
            certificate("condition11", ID, ID, 0)
        with pytest.raises(certify.CertificateError):
            certificate("pair_iiss", compfn.powexp(1, 1, 1.0), ID, ID)

    def test_json_roundtrip(self):
        c = certificate("sampled", compfn.powexp(2, 1, 0.1), ID, compfn.linear(3), theorem="manual")
        again = certify.loads(c.dumps())
        assert again == c and again.provenance == {"theorem": "manual"}
        d = cond_identity(3).to_dict()
        assert d["t_star"] == 3 and certify.Certificate.from_dict(d)["t_star"] == 3

    def test_validate(self):
        contraction_ioss().validate()
        bad = certificate("pair_iiss", compfn.powexp(1, 1, 1.0), ID, compfn.constant_l(1.0))
        with pytest.raises(certify.CertificateError):
            bad.validate()


class TestCheckBound:
    def test_contraction_consistent(self, rng):
        s = builtin("contraction")
        w = rng.normal(size=(60, 1))
        pair = simulate_pair(s, [1.0], [-0.5], w, w, 60)
        r = check_bound(pair, contraction_ioss())
        assert r.verdict == "consistent" and r.min_margin >= 0

    def test_rotation_sampled_violated_at_7(self):
        pair = simulate_pair(builtin("rotation8"), [0.0, 1.0], [0.0, 0.0], T=20)
        K = sampling.materialize(sampling.periodic(4), 1, 20)
        np.testing.assert_allclose(pair.dy[list(K.times)], 0.0, atol=1e-15)
        cert = certificate("sampled", compfn.powexp(2, 1, 0.1), ID, ID)
        r = check_bound(pair, cert, K)
        assert r.verdict == "violated"
        bad = np.flatnonzero(r.margins < -1e-9)
        assert bad[0] == 7  # 2 exp(-0.1 t) < 1 first at t = 7
        assert r.witness_t == 20

    def test_identical_trajectories(self):
        pair = simulate_pair(builtin("rotation8"), [0.3, 0.1], [0.3, 0.1], T=15)
        K = sampling.materialize(sampling.periodic(3), 1, 15)
        for cert in (certificate("sampled", compfn.powexp(2, 1, 0.1), ID, ID),
                     certificate("sampled_discounted", *(compfn.powexp(1, 1, 0.3),) * 3)):
            assert check_bound(pair, cert, K).min_margin >= 0

    def test_missing_set_and_horizon(self):
        pair = simulate_pair(builtin("rotation8"), [0.0, 1.0], [0.0, 0.0], T=10)
        cert = certificate("sampled", compfn.powexp(2, 1, 0.1), ID, ID)
        with pytest.raises(certify.CertificateError):
            check_bound(pair, cert)
        with pytest.raises(ValueError):
            check_bound(pair, cert, sampling.materialize(sampling.periodic(4), 1, 10), T=11)

    def test_empty_sample_set_contributes_zero(self):
        pair = simulate_pair(builtin("rotation8"), [1.0, 0.0], [0.0, 0.0], T=3)
        K = sampling.materialize(sampling.periodic(10), 1, 3)
        cert = certificate("sampled", compfn.powexp(1, 1, 0.0001), ID, compfn.linear(100))
        rhs = certify.bound_rhs(pair, cert, K, 3)
        np.testing.assert_allclose(rhs, np.exp(-0.0001 * np.arange(4)))

    def test_margin_csv(self):
        pair = simulate_pair(builtin("contraction"), [1.0], [0.0], T=3)
        text = check_bound(pair, contraction_ioss()).margin_csv()
        assert text.splitlines()[0] == "t,lhs,rhs,margin" and len(text.splitlines()) == 5


class TestCondition11:
    def test_contraction_full_sampling(self, rng):
        s = builtin("contraction")
        K = sampling.materialize(sampling.periodic(1), 1, 50)
        for _ in range(100):
            pair = simulate_pair(s, rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1), T=50)
            assert check_condition11(pair, cond_identity(), K, 50).min_margin >= 0

    def test_rotation_blind_samples(self):
        pair = simulate_pair(builtin("rotation8"), [0.0, 1.0], [0.0, 0.0], T=12)
        K = sampling.materialize(sampling.periodic(4), 1, 12)
        big = certificate("condition11", compfn.linear(1e6), compfn.linear(1e6), 1)
        r = check_condition11(pair, big, K)
        assert r.violated and pair.dy[2] == pytest.approx(1.0)

    def test_identical(self):
        pair = simulate_pair(builtin("contraction"), [0.2], [0.2], T=10)
        K = sampling.materialize(sampling.periodic(2), 1, 10)
        assert check_condition11(pair, cond_identity(), K).min_margin >= 0

    def test_horizon_below_t_star(self):
        pair = simulate_pair(builtin("contraction"), [0.2], [0.1], T=3)
        K = sampling.materialize(sampling.periodic(1), 1, 3)
        with pytest.raises(ValueError):
            check_condition11(pair, cond_identity(5), K)


class TestClassify:
    def test_contraction_in_lambda(self):
        cert = certificate("pair_iiss", compfn.powexp(1, 1, 0.6), ID, compfn.exp_decay(1.0))
        pair = simulate_pair(builtin("contraction"), [1.0], [0.0], T=40)
        c = classify_pair(pair, cert)
        assert c.label == "in_lambda" and c.horizon == 40

    def test_unstable_in_psi(self):
        cert = certificate("pair_iiss", compfn.powexp(2, 1, 0.1), ID, compfn.exp_decay(1.0))
        pair = simulate_pair(builtin("scalar_unstable", a=2), [1.0], [0.0], T=10)
        c = classify_pair(pair, cert)
        assert c.label == "in_psi" and c.first_violation == 1

    def test_zero_difference(self):
        cert = certificate("pair_iiss", compfn.powexp(2, 1, 0.1), ID, compfn.exp_decay(1.0))
        pair = simulate_pair(builtin("scalar_unstable", a=2), [0.7], [0.7], T=10)
        assert classify_pair(pair, cert).label == "in_lambda"


class TestAssumption2:
    def test_threshold_formula(self):
        assert certify.violation_time_formula(2, 2, 0.1) == 1 == first_violation_linear_exp(2, 2, 0.1)
        for k in range(1, 7):
            s = 10.0 ** -k
            assert certify.violation_time_formula(2, 2, 0.1, s, root=True) == first_violation_sqrt(2, 2, 0.1, s)

    def test_uniform_linear_beta(self):
        cert = certificate("ioss", compfn.powexp(2, 1, 0.1), ID, ID)
        rep = certify.check_assumption2(builtin("scalar_unstable", a=2), cert, certify.UniformPairs(horizon=20),
                                        T_beta=1, trials=200, seed=0)
        assert rep.empirical_min_T_beta == 1 and rep.holds and rep.psi_pairs == 200

    def test_sqrt_beta_trend(self):
        cert = certificate("ioss", compfn.sqrt_switch(2, 0.1), ID, ID)
        rep = certify.check_assumption2(builtin("scalar_unstable", a=2), cert, certify.LogMagnitudePairs(),
                                        T_beta=5, trials=60, seed=0)
        assert rep.trend == "unbounded trend" and not rep.holds
        expected = {k: math.floor((math.log(2) + k / 2 * math.log(10)) / (math.log(2) + 0.1)) + 1 for k in range(1, 7)}
        assert {k: v["max"] for k, v in rep.by_tag.items()} == expected

    def test_stabilizing_pairs_delay_violation(self):
        cert = certificate("ioss", compfn.powexp(2, 1, 0.1), ID, ID)
        rep = certify.check_assumption2(builtin("scalar_unstable_input", a=2), cert,
                                        certify.StabilizingPairs(t_bars=(10, 100)), T_beta=1, trials=4, seed=0)
        for tb, v in rep.by_tag.items():
            assert v["min"] > tb
        assert not rep.holds

    def test_inconclusive(self):
        cert = certificate("ioss", compfn.powexp(2, 1, 0.1), ID, ID)
        with pytest.raises(certify.InconclusiveError):
            certify.check_assumption2(builtin("contraction"), cert, "uniform", 1, 10, 0)


# reference-evaluator agreement -----------------------------------------------------

def _plain(f, two=False):
    if two:
        return lambda s, t: float(f(s, t))
    return lambda s: float(f(s))


CERTS = {
    "ioss": certificate("ioss", compfn.powexp(1.5, 1, 0.2), compfn.power(2, 0.7), compfn.power(3.0, 1.3)),
    "sampled": certificate("sampled", compfn.sqrt_switch(2, 0.1), compfn.linear(0.5), compfn.power(1.2, 2.0)),
    "discounted": certificate("discounted", compfn.powexp(1, 1, 0.3), compfn.powexp(2, 0.5, 0.2), compfn.powexp(4, 1, 0.7)),
    "sampled_discounted": certificate("sampled_discounted", compfn.powexp(1, 1, 0.3),
                                      compfn.oplus(compfn.powexp(2, 1, 0.2), compfn.sqrt_switch(1, 0.5)),
                                      compfn.powexp(4, 1, 0.05)),
}


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(CERTS)), st.integers(0, 2 ** 32 - 1), st.integers(1, 40))
def test_matches_reference_evaluator(kind, seed, T):
    rng = np.random.default_rng(seed)
    s = builtin("scalar_unstable_input", a=1.1)
    pair = simulate_pair(s, rng.normal(size=1), rng.normal(size=1), rng.normal(size=(T, 1)), rng.normal(size=(T, 1)), T)
    cert = CERTS[kind]
    K = sampling.materialize(sampling.bounded_gap_random(4, seed), 1, T) if "sampled" in kind else None
    disc = "discounted" in kind
    b, g1, g2 = cert.functions
    ref = rhs_direct(kind, _plain(b, True), _plain(g1, disc), _plain(g2, disc),
                     float(pair.dx[0]), list(pair.dw), list(pair.dy), T, set(K.times) if K is not None else None)
    got = certify.bound_rhs(pair, cert, K, T)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 30))
def test_more_samples_never_lower_rhs(seed, T):
    rng = np.random.default_rng(seed)
    s = builtin("spiral", rho=1.05, theta_deg=40)
    pair = simulate_pair(s, rng.normal(size=2), rng.normal(size=2), T=T)
    small = sampling.materialize(sampling.periodic(3), 1, T)
    extra = sorted(set(small.times) | {int(t) for t in rng.integers(1, T + 1, 4)})
    big = sampling.SamplingSet(1, tuple(extra), T)
    for cert in (CERTS["sampled"], CERTS["sampled_discounted"]):
        assert np.all(certify.bound_rhs(pair, cert, big, T) >= certify.bound_rhs(pair, cert, small, T))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 30))
def test_full_sampling_at_least_as_tight_as_ioss(seed, T):
    rng = np.random.default_rng(seed)
    s = builtin("spiral", rho=0.95, theta_deg=20)
    pair = simulate_pair(s, rng.normal(size=2), rng.normal(size=2), T=T)
    b, g1, g2 = CERTS["sampled"].functions
    ioss = certificate("ioss", b, g1, g2)
    full = sampling.materialize(sampling.periodic(1), 1, T)
    samp = certify.bound_rhs(pair, CERTS["sampled"], full, T)
    both = certify.bound_rhs(pair, ioss, None, T)
    # K = {1..T} drops only tau = 0 from the output sup
    assert np.all(samp <= both + 1e-15)

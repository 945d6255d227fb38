import numpy as np
import pytest

from sampled_ioss import compfn, sampling
from sampled_ioss.certify import certificate
from sampled_ioss.falsify import SearchSpace, Target, falsify, replay, shift_closure_check
from sampled_ioss.sysmodel import builtin

ID = compfn.identity()


def rotation_target(p, horizon=60):
    cert = certificate("sampled", compfn.powexp(2, 1, 0.1), ID, compfn.linear(3))
    return Target(cert, horizon, sampling.periodic(p))


def test_rotation_blind_period_found():
    s = builtin("rotation8")
    res = falsify(s, rotation_target(4), SearchSpace.box(2, 0), 2000, seed=1)
    assert res.found and res.margin < -1e-9
    assert replay(s, rotation_target(4), res) == pytest.approx(res.margin, abs=1e-12)


def test_rotation_observable_period_not_found():
    s = builtin("rotation8")
    res = falsify(s, rotation_target(3), SearchSpace.box(2, 0), 2000, seed=1)
    assert not res.found and res.margin >= -1e-9


def test_contraction_bound_not_found():
    s = builtin("contraction")
    cert = certificate("ioss", compfn.powexp(2, 1, 0.6), compfn.linear(4), compfn.linear(1))
    res = falsify(s, Target(cert, 30), SearchSpace.box(1, 1), 500, seed=3)
    assert not res.found


def test_zero_volume_box():
    s = builtin("rotation8")
    space = SearchSpace(np.array([[0.0, 0.0], [1.0, 1.0]]), np.zeros((2, 2)))
    res = falsify(s, rotation_target(4, 30), space, 100, seed=0)
    assert res.evaluations == 1 and res.found
    np.testing.assert_array_equal(res.x01, [0.0, 1.0])


def test_same_seed_same_result():
    s = builtin("contraction")
    cert = certificate("ioss", compfn.powexp(1, 1, 0.6), compfn.linear(1), compfn.linear(0.1))
    t = Target(cert, 20)
    a = falsify(s, t, SearchSpace.box(1, 1), 400, seed=9, stop_on_violation=False)
    b = falsify(s, t, SearchSpace.box(1, 1), 400, seed=9, stop_on_violation=False)
    assert a.to_dict() == b.to_dict() and a.history == b.history
    c = falsify(s, t, SearchSpace.box(1, 1), 400, seed=10, stop_on_violation=False)
    assert c.to_dict() != a.to_dict()


def test_thread_count_does_not_change_result(monkeypatch):
    s = builtin("rotation8")
    monkeypatch.delenv("SAMPLED_IOSS_THREADS", raising=False)
    serial = falsify(s, rotation_target(3, 40), SearchSpace.box(2, 0), 600, seed=4)
    monkeypatch.setenv("SAMPLED_IOSS_THREADS", "4")
    threaded = falsify(s, rotation_target(3, 40), SearchSpace.box(2, 0), 600, seed=4)
    assert serial.to_dict() == threaded.to_dict()


def test_tied_inputs_and_states():
    s = builtin("contraction")
    cert = certificate("ioss", compfn.powexp(1, 1, 0.6), compfn.linear(1), compfn.linear(1))
    space = SearchSpace.box(1, 1, tie_inputs=True, tie_states=True)
    res = falsify(s, Target(cert, 20), space, 50, seed=0)
    assert res.x01 == res.x02 and np.array_equal(res.w1, res.w2)
    assert res.margin >= 0


def test_sampled_target_needs_scheme():
    cert = certificate("sampled", compfn.powexp(2, 1, 0.1), ID, ID)
    with pytest.raises(ValueError):
        Target(cert, 10)


def test_condition11_target():
    s = builtin("rotation8")
    cond = certificate("condition11", compfn.linear(10), compfn.linear(10), 2)
    res = falsify(s, Target(cond, 20, sampling.periodic(4)), SearchSpace.box(2, 0), 500, seed=2)
    assert res.found


def test_result_json_fields():
    res = falsify(builtin("rotation8"), rotation_target(4, 20), SearchSpace.box(2, 0), 50, seed=1)
    d = res.to_dict()
    assert set(d) >= {"verdict", "min_margin", "witness", "evaluations", "seed"}
    assert d["witness"]["set_index"] == 1


def test_input_class_closed_under_segment_shifts():
    s = builtin("contraction")
    assert shift_closure_check(s, SearchSpace.box(1, 1, w_radius=2.0), 50, samples=200, seed=1)
    assert shift_closure_check(s, SearchSpace.box(1, 1), 23, samples=50)

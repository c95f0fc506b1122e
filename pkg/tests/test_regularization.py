import math

import numpy as np
import pytest

from h4bp.dynamics import PhaseState, jacobi_constant, make_params
from h4bp.propagation import DEFAULT_CONFIG, propagate_regularized
from h4bp.regularization import (RegState, from_regularized, reg_eom, reg_first_integral,
                                 reg_hamiltonian, to_regularized)
from h4bp.verify import collision_condition, random_bounded_states, regularized_agreement

P = make_params(0.00095)


def test_simple_preimages():
    r = to_regularized(P, PhaseState.planar(1.0, 0.0, 0.0, 0.0))
    assert (r.Q1, r.Q2) == pytest.approx((1.0, 0.0))
    r = to_regularized(P, PhaseState.planar(0.0, 1.0, 0.0, 0.0))
    assert (r.Q1, r.Q2) == pytest.approx((1 / math.sqrt(2), 1 / math.sqrt(2)))
    with pytest.raises(ValueError):
        to_regularized(P, PhaseState.planar(0.0, 0.0, 1.0, 0.0))


def test_inverse_at_rest_momenta():
    s = from_regularized(P, RegState(1.0, 0.0, 0.0, 0.0))
    assert (s.x, s.y) == (1.0, 0.0)
    # zero momenta means velocity equal to minus the frame rotation
    assert (s.vx - s.y, s.vy + s.x) == pytest.approx((0.0, 0.0))


def test_round_trip_random_states():
    rng = np.random.default_rng(4)
    for _ in range(100):
        x, y, vx, vy = rng.uniform(-2, 2, 4)
        s = PhaseState.planar(x, y, vx, vy)
        for branch in ("plus", "minus"):
            back = from_regularized(P, to_regularized(P, s, branch))
            assert np.abs(back.as_planar() - s.as_planar()).max() < 1e-13 * (1 + np.abs(s.as_planar()).max())


def test_double_cover():
    r = to_regularized(P, PhaseState.planar(0.3, -0.2, 0.5, 1.0))
    m = RegState(-r.Q1, -r.Q2, -r.P1, -r.P2, 0.0, r.C)
    assert np.allclose(from_regularized(P, r).as_planar(), from_regularized(P, m).as_planar(),
                       rtol=0, atol=1e-15)
    ta = propagate_regularized(P, DEFAULT_CONFIG, r, 1.0)
    tb = propagate_regularized(P, DEFAULT_CONFIG, m, 1.0)
    for t in np.linspace(0, 1, 11):
        assert np.allclose(ta.state(t).as_planar(), tb.state(t).as_planar(), atol=1e-12)


def test_first_integrals_vanish_on_level():
    rng = np.random.default_rng(5)
    for s in random_bounded_states(P, rng, 100):
        r = to_regularized(P, s)
        assert abs(reg_hamiltonian(P, r)) < 1e-10
        assert abs(reg_first_integral(P, r)) < 1e-10


def test_first_integral_sensitive_to_momentum():
    r = to_regularized(P, PhaseState.planar(0.3, 0.1, 0.2, 1.6))
    base = reg_first_integral(P, r)
    for d in (1e-3, 1e-4, 1e-5):
        moved = RegState(r.Q1, r.Q2, r.P1 + d, r.P2, 0.0, r.C)
        ratio = (reg_first_integral(P, moved) - base) / d
        assert 1e-3 < abs(ratio) < 1e3


def test_collision_point_state():
    for C in (4.0, 0.0):
        r = RegState(0.0, 0.0, math.sqrt(8.0), 0.0, 0.0, C)
        d = reg_eom(P, r)
        assert all(math.isfinite(v) for v in (d.Q1, d.Q2, d.P1, d.P2, d.t_phys))
        assert reg_hamiltonian(P, r) == pytest.approx(0.0, abs=1e-14)


def test_consistent_state_has_jacobi_c():
    s = PhaseState.planar(0.2, 0.1, -1.0, 1.2)
    r = to_regularized(P, s)
    tr = propagate_regularized(P, DEFAULT_CONFIG, r, 3.0)
    assert max(tr.state(t).r for t in np.linspace(0, 3, 31)) < 1.0
    for t in np.linspace(0, 3, 7):
        assert jacobi_constant(P, tr.state(t)) == pytest.approx(r.C, abs=1e-10)


def test_flow_equivalence_and_conservation():
    rng = np.random.default_rng(6)
    for s in random_bounded_states(P, rng, 10):
        mism, drift = regularized_agreement(P, s, 1.0)
        assert mism < 1e-9
        assert drift < 1e-10


def test_hamiltonian_drift_over_fifty_units():
    s = PhaseState.planar(0.25, 0.0, 0.0, 1.7)
    r = to_regularized(P, s)
    tr = propagate_regularized(P, DEFAULT_CONFIG, r, 50.0)
    _, zs = tr.sample(200)
    drift = max(abs(reg_hamiltonian(P, RegState.from_array(z, r.C))) for z in zs)
    assert drift < 1e-10
    assert np.all(np.diff(zs[:, 4]) > 0)


@pytest.mark.parametrize("C,angle", [(4.0, 0.3), (2.0, 2.0), (-1.0, 4.0), (4.3, 5.5)])
def test_collision_transversality(C, angle):
    p2, miss = collision_condition(P, C, angle)
    assert miss < 1e-8
    assert abs(p2 - 8.0) < 1e-8


def test_physical_image_continues_through_collision():
    start = RegState(0.0, 0.0, 2.0, 2.0, 0.0, 4.0)
    tr = propagate_regularized(P, DEFAULT_CONFIG, start, -0.2)
    s = from_regularized(P, RegState.from_array(tr.y1, 4.0))
    r0 = to_regularized(P, s)
    fwd = propagate_regularized(P, DEFAULT_CONFIG, RegState(r0.Q1, r0.Q2, r0.P1, r0.P2, 0.0, 4.0), 0.4)
    _, zs = fwd.sample(401)
    t_phys = zs[:, 4]
    assert np.all(np.diff(t_phys) > 0)
    after = fwd.state(0.4)
    assert after.r > 1e-3 and np.isfinite(after.vx)

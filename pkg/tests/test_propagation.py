import math

import numpy as np
import pytest
from scipy.linalg import expm

from h4bp.dynamics import PhaseState, make_params
from h4bp.equilibria import linearization
from h4bp.orbits import correct_symmetric, kepler_circle
from h4bp.propagation import (DEFAULT_CONFIG, CollisionApproach, IntegratorConfig, RMin,
                              VariationalState, YCross, next_event, propagate,
                              propagate_variational)
from h4bp.verify import (jacobi_drift, random_bounded_states, stm_fd_error,
                         vertical_index_agreement)

P = make_params(0.00095)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="RK45")


def test_zero_time_is_identity():
    s = PhaseState.planar(0.3, 0.1, 0.2, 1.0)
    assert np.array_equal(propagate(P, DEFAULT_CONFIG, s, 0.0).y1, s.as_planar())


def test_jacobi_drift_random_orbits():
    rng = np.random.default_rng(7)
    for s in random_bounded_states(P, rng, 20):
        drift, r = jacobi_drift(P, s, 100.0)
        assert r < 0.5
        assert drift < 1e-11


def test_stm_against_differences():
    rng = np.random.default_rng(8)
    for s in random_bounded_states(P, rng, 20):
        err, det = stm_fd_error(P, s, rng.uniform(1.0, 3.0), h=1e-7)
        assert err < 1e-5
        assert det < 1e-9


def test_stm_determinant_at_ten():
    s = PhaseState.planar(0.3, 0.0, 0.0, 1.5)
    v = propagate_variational(P, DEFAULT_CONFIG, VariationalState.initial(s), 10.0)
    assert abs(np.linalg.det(v.stm) - 1) < 1e-9
    assert abs(np.linalg.det(v.vstm) - 1) < 1e-9


def test_stm_at_equilibrium_is_exponential():
    l1 = P.lambda2 ** (-1 / 3)
    v = propagate_variational(P, DEFAULT_CONFIG, VariationalState.initial(PhaseState.planar(l1, 0, 0, 0)), 1.0)
    assert np.abs(v.stm - expm(linearization(P, (l1, 0.0)))).max() < 1e-9


def test_reversibility():
    s = PhaseState.planar(0.4, 0.1, -0.3, 1.1)
    fwd = propagate(P, DEFAULT_CONFIG, s, 10.0)
    back = propagate(P, DEFAULT_CONFIG, PhaseState.from_array(fwd.y1), -10.0)
    assert np.abs(back.y1 - s.as_planar()).max() < 1e-10


def test_collision_guard_raises():
    with pytest.raises(CollisionApproach):
        propagate(P, DEFAULT_CONFIG, PhaseState.planar(0.1, 0.0, 0.0, 0.0), 5.0, guard=1e-3)


def test_half_period_crossing_of_retrograde_orbit():
    x0, vy = kepler_circle(P, 0.05, retrograde=True)
    o = correct_symmetric(P, (x0, vy), "x")
    tr = propagate(P, DEFAULT_CONFIG, o.ic, o.T)
    t, y = next_event(tr, YCross(direction=1))
    assert t == pytest.approx(0.5 * o.T, rel=1e-9)


def test_event_at_start_is_skipped():
    s = PhaseState.planar(0.3, 0.0, 0.0, -1.9)
    tr = propagate(P, DEFAULT_CONFIG, s, 2.0)
    hit = next_event(tr, YCross())
    assert hit is not None and hit[0] > 1e-10


def test_radius_event(families):
    g = families.family("g")
    m = min(g.members, key=lambda o: o.rmin)
    assert m.rmin < 2e-2
    tr = propagate(P, DEFAULT_CONFIG, m.ic, m.T, guard=1e-6)
    hit = next_event(tr, RMin(threshold=2e-2), after=1e-9) if m.ic.r >= 2e-2 else (0.0, m.ic.as_planar())
    assert hit is not None
    assert math.hypot(hit[1][0], hit[1][1]) <= 2e-2 + 1e-12


def test_event_polish_is_idempotent():
    s = PhaseState.planar(0.3, 0.0, 0.0, -1.9)
    tr = propagate(P, DEFAULT_CONFIG, s, 2.0)
    t1, _ = next_event(tr, YCross(direction=1))
    t2, _ = next_event(tr, YCross(direction=1), after=t1 - 1e-6)
    assert abs(t2 - t1) < 1e-13


def test_short_reference_orbit_closes():
    C, x0, vx0, T = 0.386390, 0.0052630577, -0.000003114, 6.352714861
    from h4bp.dynamics import effective_potential
    yl3 = P.lambda1 ** (-1 / 3)
    s = PhaseState.planar(x0, yl3, vx0, 0.0)
    vy = -math.sqrt(2 * effective_potential(P, s) - C - vx0 ** 2)
    s = PhaseState.planar(x0, yl3, vx0, vy)
    tr = propagate(P, DEFAULT_CONFIG, s, T)
    assert np.abs(tr.y1 - s.as_planar()).max() < 1e-8


def test_vertical_block_matches_spatial_reference():
    x0, vy = kepler_circle(P, 0.2, retrograde=False)
    o = correct_symmetric(P, (x0, vy), "x")
    assert vertical_index_agreement(P, o)[1] < 1e-9

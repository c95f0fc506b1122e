import math

import numpy as np
import pytest

from h4bp.continuation import seed_family
from h4bp.dynamics import PhaseState, apply_symmetry, effective_potential, make_params
from h4bp.orbits import (CorrectionError, closure_error, correct_asymmetric, correct_symmetric,
                         kepler_circle, section_map, stability)
from h4bp.verify import monodromy_checks

P = make_params(0.00095)


def _table_guess(C, x0, vx0):
    yl3 = P.lambda1 ** (-1 / 3)
    s = PhaseState.planar(x0, yl3, vx0, 0.0)
    vy = -math.sqrt(2 * effective_potential(P, s) - C - vx0 ** 2)
    return PhaseState.planar(x0, yl3, vx0, vy), yl3


def test_retrograde_seed_is_bistable():
    o = seed_family(P, "f")
    assert o.bistable
    assert o.residual < 1e-11


def test_short_table_row_through_corrector():
    C, x0, vx0, T = 0.386390, 0.0052630577, -0.000003114, 6.352714861
    guess, yl3 = _table_guess(C, x0, vx0)
    o = correct_asymmetric(P, guess, T_guess=T, section="x", value=yl3, C=C)
    assert abs(o.ic.x - x0) < 1e-6
    assert abs(o.ic.vx - vx0) < 1e-6
    assert abs(o.T - T) < 1e-6


def test_converged_orbit_is_fixed_point():
    o = seed_family(P, "g")
    again = correct_symmetric(P, (o.ic.x, o.ic.vy), "x", C=o.C)
    assert again.iterations == 0
    assert again.ic.x == o.ic.x


def test_asymmetric_corrector_agrees_on_symmetric_orbit():
    x0, vy = kepler_circle(P, 0.15, retrograde=True)
    sym = correct_symmetric(P, (x0, vy), "x")
    asym = correct_asymmetric(P, sym.ic, T_guess=sym.T, C=sym.C)
    assert abs(asym.T - sym.T) < 1e-9
    assert abs(asym.ic.x - sym.ic.x) < 1e-9
    assert abs(asym.ah - sym.ah) < 1e-6


def test_random_state_fails_to_close():
    rng = np.random.default_rng(11)
    failures = 0
    for _ in range(5):
        s = PhaseState.planar(rng.uniform(1.5, 3.0), 0.0, rng.uniform(-1, 1), rng.uniform(1, 3))
        try:
            correct_asymmetric(P, s, max_iter=5)
        except CorrectionError:
            failures += 1
    assert failures >= 4


def test_unreachable_energy_raises():
    with pytest.raises(CorrectionError):
        correct_symmetric(P, (2.0, 0.1), "x", C=50.0)


def test_monodromy_unit_pair_and_symplectic_halves(families):
    for name in ("g", "f"):
        for o in families.family(name).members[:: max(1, len(families.family(name).members) // 4)]:
            if o.collision:
                continue
            unit, ad, _, _ = monodromy_checks(P, o)
            assert unit < 1e-6
            assert ad < 1e-6


def test_half_indices_sum_to_ah(families):
    for o in families.family("a").members[::20]:
        assert o.half_a + o.half_d == pytest.approx(o.ah, abs=1e-9)
        assert o.half_a == pytest.approx(o.half_d, abs=1e-5 * max(1.0, abs(o.ah)))


def test_stability_recomputation_agrees():
    o = seed_family(P, "g")
    st = stability(P, o)
    assert st.ah == pytest.approx(o.ah, abs=1e-8)
    assert st.av == pytest.approx(o.av, abs=1e-8)


def test_symmetric_partner_is_periodic():
    x0, vy = kepler_circle(P, 0.15, retrograde=False)
    o = correct_symmetric(P, (x0, vy), "x")
    image, reverses = apply_symmetry("SS'", o.ic)
    assert not reverses
    sm = section_map(P, image.as_planar(), "x", 1, direction=int(np.sign(image.vy)))
    assert np.abs(sm.y - image.as_planar()).max() < 1e-9
    assert sm.t == pytest.approx(o.T, rel=1e-10)


def test_corrector_contracts():
    x0, vy = kepler_circle(P, 0.2, retrograde=True)
    o = correct_symmetric(P, (x0, vy), "x")
    residuals = []
    from h4bp.orbits import _symmetric_residual, get_axis
    from h4bp.propagation import DEFAULT_CONFIG
    ax = get_axis("x")
    pos = o.ic.x + 1e-3
    for _ in range(4):
        X, sm, G, DG = _symmetric_residual(P, (pos, o.ic.vy), ax, 1, DEFAULT_CONFIG, 0.0, 100.0)
        residuals.append(abs(G))
        if abs(G) < 1e-14:
            break
        pos -= G / DG[0]
    assert all(b < 0.1 * a for a, b in zip(residuals, residuals[1:]) if a > 1e-12)


def test_closure_of_seeds():
    for name in ("g", "f", "a"):
        o = seed_family(P, name)
        assert closure_error(P, o) < 1e-9

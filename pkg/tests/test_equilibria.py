import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from h4bp.dynamics import PhaseState, make_params, potential_hessian
from h4bp.equilibria import (A_coef, ComplexSpectrumError, D_coef, equilibria, frequencies,
                             l3_spectrum_closed_form, linear_seed, linearization, mu_critical,
                             resonant_mu)
from h4bp.propagation import DEFAULT_CONFIG, propagate
from h4bp.verify import TABLE1


def test_mu_critical():
    m0 = mu_critical()
    assert abs(m0 - 0.011942) < 5e-7
    assert abs(D_coef(make_params(m0))) < 1e-12
    lin = frequencies(make_params(m0))
    A = A_coef(make_params(m0))
    assert lin.omega1 == pytest.approx(math.sqrt(A / 2), rel=1e-6)
    assert lin.omega2 == pytest.approx(math.sqrt(A / 2), rel=1e-6)
    assert lin.ratio == pytest.approx(1.0, abs=1e-5)


def test_resonance_printed_values():
    """Six-decimal reference values of the resonant masses, k = 2..10."""
    bad = {k: resonant_mu(k) - v for k, v in TABLE1.items() if abs(resonant_mu(k) - v) >= 5e-7}
    assert not bad, f"rows off by 5e-7 or more: {bad}"


def test_resonance_radicals():
    r2 = 0.5 - math.sqrt(5.0 / 3.0 * (10181.0 + 458.0 * math.sqrt(2073.0))) / 462.0
    r3 = 0.5 - math.sqrt(5.0 * (24077.0 + 6464.0 * math.sqrt(57.0))) / 1218.0
    assert abs(resonant_mu(2) - r2) < 1e-12
    assert abs(resonant_mu(3) - r3) < 1e-12


def test_resonance_k1_is_critical_mass():
    assert resonant_mu(1) == pytest.approx(mu_critical(), abs=1e-12)
    assert abs(resonant_mu(3) - 0.004390) < 1e-6
    assert abs(resonant_mu(10) - 0.000483) < 1e-6


@pytest.mark.parametrize("k", range(1, 11))
def test_resonance_inverts_frequencies(k):
    lin = frequencies(make_params(resonant_mu(k)))
    assert lin.ratio == pytest.approx(k, abs=1e-8 if k > 1 else 1e-5)


def test_printed_k2_mass_gives_ratio_two():
    assert frequencies(make_params(0.007733)).ratio == pytest.approx(2.0, abs=1e-4)


def test_linear_periods():
    lin = frequencies(make_params(0.00095))
    assert abs(lin.short_period - 6.35271) < 1e-4
    assert abs(lin.long_period - 44.8422) < 0.05


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 0.0119420))
def test_frequency_identities(mu):
    p = make_params(mu)
    lin = frequencies(p)
    A, D = A_coef(p), D_coef(p)
    assert lin.omega1 ** 2 + lin.omega2 ** 2 == pytest.approx(A, rel=1e-12)
    assert lin.omega1 * lin.omega2 == pytest.approx(0.5 * math.sqrt(A * A - D), rel=1e-12)
    if D > 1e-6:
        assert lin.ratio == pytest.approx(math.sqrt((A + math.sqrt(D)) / (A - math.sqrt(D))), rel=1e-12)
    assert 0 < lin.omega1 <= math.sqrt(A / 2) <= lin.omega2


def test_equilibria_zero_mass():
    eq = {e.label: e for e in equilibria(make_params(0.0))}
    assert eq["L1"].position[0] == pytest.approx(3 ** (-1 / 3), abs=1e-15)
    assert abs(eq["L1"].position[0] - 0.693361) < 1e-6
    assert not eq["L3"].present and eq["L3"].classification == "absent"
    assert not eq["L4"].present


def test_equilibria_reference_mass():
    p = make_params(0.00095)
    eq = {e.label: e for e in equilibria(p)}
    assert eq["L3"].position == pytest.approx((0.0, p.lambda1 ** (-1 / 3)))
    assert abs(eq["L3"].position[1] - 7.763) < 1e-3
    assert eq["L3"].classification == "center-center"
    assert eq["L4"].position == pytest.approx((0.0, -p.lambda1 ** (-1 / 3)))
    assert eq["L2"].position == pytest.approx((-eq["L1"].position[0], 0.0))


def test_above_critical_mass():
    p = make_params(0.2)
    eq = {e.label: e for e in equilibria(p)}
    ev = eq["L3"].eigenvalues
    assert eq["L3"].classification == "complex-saddle"
    assert np.all(np.abs(ev.real) > 1e-6) and np.all(np.abs(ev.imag) > 1e-6)
    with pytest.raises(ComplexSpectrumError):
        frequencies(p)


@pytest.mark.parametrize("mu", [0.0003, 0.00095, 0.005, 0.011, 0.05, 0.3])
def test_closed_form_spectrum_matches_eigensolver(mu):
    p = make_params(mu)
    num = np.linalg.eigvals(linearization(p, (0.0, p.lambda1 ** (-1 / 3))))
    cf = l3_spectrum_closed_form(p)
    for z in cf:
        assert np.min(np.abs(num - z)) < 1e-9


def test_l3_partials():
    p = make_params(0.00095)
    H = potential_hessian(p, PhaseState(0.0, p.lambda1 ** (-1 / 3)))
    assert H[0, 0] == pytest.approx(p.lambda2 - p.lambda1, rel=1e-12)
    assert H[1, 1] == pytest.approx(3 * p.lambda1, rel=1e-9)
    assert abs(H[0, 1]) < 1e-15
    assert potential_hessian(p, PhaseState(0.37, 0.0))[0, 1] == 0.0


def test_hessian_against_differences():
    p = make_params(0.00095)
    from h4bp.dynamics import potential_gradient
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(20):
        x, y = rng.uniform(-1.5, 1.5, 2)
        H = potential_hessian(p, PhaseState(x, y))
        for j, e in enumerate(np.eye(3)[:2] * h):
            gp = potential_gradient(p, PhaseState(x + e[0], y + e[1]))
            gm = potential_gradient(p, PhaseState(x - e[0], y - e[1]))
            col = (gp - gm) / (2 * h)
            assert np.abs(col[:2] - H[:2, j]).max() / max(1.0, np.abs(H).max()) < 1e-7


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.5))
def test_collinear_points_are_saddle_centres(mu):
    p = make_params(mu)
    for e in equilibria(p)[:2]:
        ev = e.eigenvalues
        real = ev[np.abs(ev.imag) < 1e-12]
        imag = ev[np.abs(ev.real) < 1e-12]
        assert len(real) == 2 and len(imag) == 2
        assert real.real.max() > 0 and imag.imag.max() > 0
        assert np.sort(real.real) == pytest.approx(np.sort(-real.real))


def test_short_seed_geometry():
    p = make_params(0.00095)
    lin = frequencies(p)
    s = linear_seed(p, "short", 1e-3)
    assert s.xi0 == 0.0 and s.etadot0 == 0.0
    assert s.xidot0 == pytest.approx(lin.omega2 * lin.alpha2 * 1e-3)
    assert s.semi_axis_a / s.semi_axis_b == pytest.approx(abs(lin.alpha2))
    assert s.eccentricity == pytest.approx(math.sqrt(1 - lin.alpha2 ** 2))
    assert s.period == pytest.approx(lin.short_period)


def test_long_seed_degenerate_at_zero_mass():
    with pytest.raises(ComplexSpectrumError):
        linear_seed(make_params(0.0), "long", 1e-3)


def test_small_short_seed_is_nearly_periodic():
    p = make_params(0.00095)
    seed = linear_seed(p, "short", 1e-6)
    s0 = seed.state()
    tr = propagate(p, DEFAULT_CONFIG, s0, seed.period)
    assert np.abs(tr.y1 - s0.as_planar()).max() < 1e-8

import math

import mpmath as mp
import numpy as np
import pytest
from oracles import mp_U, quad_melnikov

from melnikov_sign import (
    AdmissibilityError,
    NoPeriodAnnulus,
    Parameters,
    kernel_U_inner,
    melnikov,
    melnikov_derivative,
    melnikov_grid,
    melnikov_values,
    parse,
    predicted_initial_condition,
    sin_oracle,
    v_of,
)
from melnikov_sign import _kernels as K

TWO_PI = 2 * math.pi


def test_p1_value_and_derivative(p1):
    P, f = p1
    assert melnikov(math.pi / 2, P, f) == pytest.approx(2.0, abs=1e-10)
    assert melnikov_derivative(0.0, P, f) == pytest.approx(2.0, abs=1e-10)
    assert abs(melnikov_derivative(math.pi / 2, P, f)) <= 1e-10


def test_even_period_vanishes():
    P = Parameters(1, 1, 2 * TWO_PI)
    vals = melnikov_values(np.linspace(0, P.sigma, 64, endpoint=False), P, parse("sin(t)"))
    assert np.max(np.abs(vals)) <= 1e-10


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("alpha, eta, beta", [(1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (0.5, 2.0, 3.0)])
def test_oracle_equivalence(i, alpha, eta, beta):
    P = Parameters(alpha, eta, TWO_PI * i / beta)
    f = parse(f"sin({beta}*t)")
    phis = np.linspace(0, P.sigma, 64, endpoint=False)
    vals = melnikov_values(phis, P, f)
    ref = [sin_oracle(i, p, alpha, eta, beta) for p in phis]
    assert np.max(np.abs(vals - ref)) <= 1e-8


def test_sin_oracle_examples():
    assert sin_oracle(1, math.pi / 2, 1, 1, 1) == 2.0
    assert sin_oracle(2, 0.7, 1, 1, 1) == 0.0
    assert sin_oracle(3, math.pi / 6, 2, 1, 1) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        sin_oracle(0, 0.0, 1, 1, 1)


def test_constant_forcing_matches_direct_integral():
    # f = 1: M = 2 * int_0^{s} U(t, s) dt, computed independently at 40 digits
    for alpha, eta, sigma in [(1.0, 1.0, TWO_PI), (1.0, 0.0, 3.0), (1.0, -1.0, 4.0), (-1.0, -1.0, 9.0)]:
        P = Parameters(alpha, eta, sigma)
        s = sigma / 2
        ref = float(2 * mp.quad(lambda t: mp_U(t, s, alpha, eta), [0, s]))
        for phi in (0.0, 1.3):
            assert melnikov(phi, P, parse("1")) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("alpha, eta, sigma", [
    (1.0, 1.0, TWO_PI), (1.5, 0.5, 9.0), (1.0, 0.0, 3.0), (1.0, -1.0, 4.0), (-1.0, -1.0, 9.0),
])
@pytest.mark.parametrize("src, fn", [
    ("cos(t)*x", lambda t, x, y: math.cos(t) * x),
    ("sin(t)*y + x*y", lambda t, x, y: math.sin(t) * y + x * y),
    ("exp(cos(t)) - y^2", lambda t, x, y: math.exp(math.cos(t)) - y * y),
])
def test_general_forcing_matches_quadpack(alpha, eta, sigma, src, fn):
    P = Parameters(alpha, eta, sigma)
    f = parse(src)
    for phi in (0.0, 0.4, 2.1):
        assert melnikov(phi, P, f) == pytest.approx(quad_melnikov(phi, alpha, eta, sigma, fn), abs=1e-10)


def test_sigma_periodicity_of_M():
    P = Parameters(1.5, 0.5, 9.0)
    f = parse("sin(2*pi*t/9) * (1 + x) + cos(4*pi*t/9) * y")
    for phi in np.linspace(0, 9.0, 7):
        assert melnikov(phi + 9.0, P, f) == pytest.approx(melnikov(phi, P, f), abs=1e-10)


def test_derivative_matches_finite_differences():
    P = Parameters(1.5, 0.5, 9.0)
    f = parse("sin(2*pi*t/9) * (1 + x) + cos(4*pi*t/9) * y")
    h = 1e-5 * P.sigma
    for phi in (0.3, 2.0, 5.5):
        fd = (melnikov(phi + h, P, f) - melnikov(phi - h, P, f)) / (2 * h)
        assert melnikov_derivative(phi, P, f) == pytest.approx(fd, abs=1e-6)


def test_constant_forcing_has_zero_derivative():
    P = Parameters(1, 1, TWO_PI)
    assert melnikov_derivative(0.7, P, parse("1")) == 0.0


def test_kernel_identity_in_integrand():
    P = Parameters(1, 1, TWO_PI)
    s = P.sigma / 2
    for t in np.linspace(0, s, 11):
        assert K.kernel_u_value(t, s, 1.0, 1.0) == pytest.approx(kernel_U_inner(t, s, P), abs=1e-12)


def test_grid_zeros_p1(p1):
    P, f = p1
    res = melnikov_grid(P, f, 64)
    assert [round(z.phi_star, 12) for z in res.zeros] == [0.0, round(math.pi, 12)]
    assert res.zeros[0].dM == pytest.approx(2.0, abs=1e-8)
    assert res.zeros[1].dM == pytest.approx(-2.0, abs=1e-8)
    assert not res.degenerate_flat
    assert all(0 <= p < P.sigma for p in res.phi_grid)


def test_grid_zeros_cos():
    res = melnikov_grid(Parameters(1, 1, TWO_PI), parse("cos(t)"), 64)
    got = [z.phi_star for z in res.zeros]
    assert got == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-10)
    assert [math.copysign(1, z.dM) for z in res.zeros] == [-1, 1]


def test_grid_zeros_off_grid_and_wraparound():
    # zeros at 0.1 + k*pi/2 -> the last one sits in the wrap interval [sigma - h, sigma)
    P = Parameters(1, 1, TWO_PI)
    res = melnikov_grid(P, parse("sin(4*(t - 0.1)) + 0.05*sin(t)*0"), 37)
    for z in res.zeros:
        assert abs(melnikov(z.phi_star, P, parse("sin(4*(t - 0.1))"))) <= 1e-9
        assert abs(z.dM) > 1e-6
    gaps = np.diff([z.phi_star for z in res.zeros])
    assert np.all(gaps > P.sigma / 37)


def test_grid_degenerate_flat():
    res = melnikov_grid(Parameters(1, 1, TWO_PI), parse("1"), 32)
    assert res.degenerate_flat and res.zeros == []
    res = melnikov_grid(Parameters(1, 1, 2 * TWO_PI), parse("sin(t)"), 64)
    assert res.degenerate_flat


def test_non_simple_zero_is_separated():
    # sin(t)^2 + const shifts: M has double zeros where it touches zero
    P = Parameters(1, 1, TWO_PI)
    res = melnikov_grid(P, parse("sin(t)"), 16)
    assert len(res.zeros) == 2 and res.non_simple == []


def test_grid_rejects_small_n(p1):
    with pytest.raises(ValueError):
        melnikov_grid(*p1, 8)


def test_thread_count_does_not_change_values(monkeypatch, p1):
    P, f = p1
    phis = np.linspace(0, P.sigma, 40, endpoint=False)
    serial = melnikov_values(phis, P, f, threads=1)
    monkeypatch.setenv("MELNIKOV_THREADS", "4")
    assert np.array_equal(melnikov_values(phis, P, f), serial)


@pytest.mark.parametrize("params", [
    Parameters(1, -1, TWO_PI),           # C7: sigma/2 = pi is the open end of I
    Parameters(1, -1, 3 * math.pi),      # C7: outside
    Parameters(-1, -1, TWO_PI),          # C9: lower boundary
    Parameters(-1, -1, 4 * math.pi),     # C9: upper boundary
    Parameters(-1, -1, 1.0),             # C9: below
])
def test_admissibility_gating(params):
    with pytest.raises(AdmissibilityError) as info:
        melnikov(0.0, params, parse("sin(t)"))
    assert info.value.interval == (math.pi, TWO_PI) or info.value.interval == (0.0, math.pi)
    assert "open interval" in str(info.value)


def test_no_annulus_is_rejected():
    with pytest.raises(NoPeriodAnnulus):
        melnikov(0.0, Parameters(-1, 1, 1.0), parse("sin(t)"))


def test_predicted_initial_condition():
    assert predicted_initial_condition(0.0, Parameters(1, 1, TWO_PI)) == (0.0, 0.0, v_of(math.pi, Parameters(1, 1, 1)))
    assert predicted_initial_condition(0.0, Parameters(1, 1, TWO_PI))[2] == pytest.approx(0.9171523356672744, rel=1e-15)
    assert predicted_initial_condition(1.0, Parameters(2, 0, 2.0)) == (1.0, 0.0, 1.0)
    th, x, y = predicted_initial_condition(0.5, Parameters(-1, -1, 3 * math.pi))
    assert (th, x) == (0.5, 0.0) and y == pytest.approx(1.0, rel=1e-14)


def test_large_sigma_case_c1_is_finite():
    # sqrt(eta)*sigma > 700: the kernel prefactor would overflow naively
    P = Parameters(1, 1, 1600.0)
    val = melnikov(0.3, P, parse("x"))
    assert math.isfinite(val)

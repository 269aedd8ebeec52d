import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from twistspec import sturm
from twistspec.errors import CertificateError, NumericalFailure, PreconditionError
from twistspec.geometry import CrossSection, constant_rate, linear_rate, make_profile
from twistspec.variational import (DiskGroundState, PhaseIntegral, TentProfile, bump_profile,
                                   closed_form_psi1, gap_certificate, gap_direct, gap_scan,
                                   singular_sequence, weight_w, weight_w_times_dpsi)

SYM = CrossSection(-1.0, 1.0)
lin = linear_rate()


@given(st.integers(min_value=1, max_value=200), st.floats(min_value=-500, max_value=500))
def test_tent_range(n, s):
    v = TentProfile(n)(s)
    assert 0.0 <= v <= 1.0
    assert (abs(s) < n) <= (v == 1.0)


@pytest.mark.parametrize("n", [1, 3, 16])
def test_tent_derivative_energy(n):
    tent = TentProfile(n)
    bp = tent.breakpoints
    total = sum(quad(lambda s: float(tent.derivative(s)) ** 2, a, b)[0] for a, b in zip(bp[:-1], bp[1:]))
    assert total == pytest.approx(2.0 / n, rel=1e-14)
    assert tent.derivative_norm_sq == 2.0 / n


def test_tent_rejects_bad_index():
    with pytest.raises(PreconditionError):
        TentProfile(0)


def test_weight_examples():
    t = np.array([-0.7, -0.1, 0.2, 0.9])
    assert np.allclose(weight_w(constant_rate(0.0), 3.0, t), 1.0 / t, rtol=1e-15)
    w = weight_w(lin, 5.0, t)
    assert np.all(w[t < 0] < 0) and np.all(w[t > 0] > 0)
    assert weight_w(lin, 1.0, 1.0) == 0.5
    with pytest.raises(PreconditionError):
        weight_w(lin, 1.0, np.array([0.3, 0.0]))


def test_weight_times_derivative_is_continuous_at_zero():
    gs = DiskGroundState(SYM)
    t = np.array([-0.5, -1e-3, -1e-9])
    assert np.allclose(weight_w_times_dpsi(lin, 2.0, t, gs), weight_w(lin, 2.0, t) * gs.derivative(t), rtol=1e-7)
    at0 = weight_w_times_dpsi(lin, 2.0, 0.0, gs)
    near = weight_w_times_dpsi(lin, 2.0, -1e-6, gs)
    assert math.isfinite(at0) and at0 == pytest.approx(near, rel=1e-9)


def test_closed_form_boundary_behaviour():
    cs = CrossSection(-1.0, 0.5)
    psi = closed_form_psi1(cs)
    assert psi(cs.a1) == pytest.approx(0.0, abs=1e-15)
    assert psi.derivative(-1e-12) == pytest.approx(0.0, abs=1e-10)
    assert psi(0.25) == 0.0
    assert psi(-0.5) > 0.0
    norm = quad(lambda t: abs(t) * psi(t) ** 2, cs.a1, 0.0, epsabs=1e-14)[0]
    assert norm == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("cs", [CrossSection(-0.5, 1.0), CrossSection(1.0, 2.0)])
def test_closed_form_preconditions(cs):
    with pytest.raises(PreconditionError):
        closed_form_psi1(cs)


@pytest.mark.parametrize("a2", [0.0, 0.5])
def test_closed_form_agrees_with_solver(a2):
    cs = CrossSection(-1.0, a2)
    res = sturm.refine(sturm.assemble_effective(cs, 0, sturm.Grid1D(4096)), 1, tol=1e-8).result
    psi = closed_form_psi1(cs)
    diff = res.eigenvectors[0] - psi(res.centers)
    assert math.sqrt(float(np.sum(res.mass * diff ** 2))) < 1e-5


def test_gap_boundary_term_bound():
    for b in gap_scan(lin, SYM, (4, 8, 16)).breakdowns:
        assert b.boundary_term <= b.bound
        assert b.boundary_term * b.n <= 2 * DiskGroundState(SYM).l2_norm_sq


def test_gap_coupling_decreases_and_certifies():
    scan = gap_scan(lin, SYM)
    assert scan.coupling_decreasing
    assert scan.n_star is not None
    assert all(b.coupling_term < 0 and b.certifies for b in scan.breakdowns)


@pytest.mark.parametrize("n", [4, 16])
@pytest.mark.parametrize("name", ["linear", "constant"])
def test_gap_identity_two_ways(name, n):
    p = make_profile(name)
    b = gap_certificate(p, SYM, n)
    direct = gap_direct(p, SYM, n)
    assert b.total == pytest.approx(direct, rel=1e-6)


@pytest.mark.parametrize("name", ["linear", "quadratic", "sqrt", "vanishing", "constant"])
@pytest.mark.parametrize("cs", [SYM, CrossSection(-1.0, 0.5), CrossSection(0.0, 1.0), CrossSection(-0.3, 1.2)])
def test_certificate_holds_for_every_builtin_profile(name, cs):
    assert gap_scan(make_profile(name), cs).n_star is not None


def test_bounded_twist_boundary_term_decays_like_one_over_n():
    assert gap_scan(constant_rate(1.0), SYM).boundary_slope() == pytest.approx(-1.0, abs=0.1)


def test_certificate_refuses_annulus():
    with pytest.raises(PreconditionError):
        gap_certificate(lin, CrossSection(1.0, 2.0), 4)


def test_positive_coupling_is_a_hard_failure(monkeypatch):
    monkeypatch.setattr(DiskGroundState, "dpsi_over_t", lambda self, t: np.abs(np.asarray(t)) + 1.0)
    with pytest.raises(CertificateError):
        gap_certificate(lin, SYM, 4)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_bump_is_normalised_and_localised(n):
    lo, hi = n * n, n * n + n
    assert quad(lambda s: float(bump_profile(n, s)) ** 2, lo, hi, epsabs=1e-13)[0] == pytest.approx(1.0, rel=1e-9)
    outside = np.array([lo - 1e-9, hi + 1e-9, 0.0, -lo])
    assert np.all(bump_profile(n, outside) == 0.0)


def test_phase_integral_is_oriented():
    phase = PhaseIntegral(lin)
    s = np.array([-3.0, 0.0, 2.0, 10.0])
    assert np.allclose(phase(s), [-4.5, 0.0, 2.0, 50.0], atol=1e-8)


def test_phase_integral_reports_failure():
    with pytest.raises(NumericalFailure):
        PhaseIntegral(make_profile("sqrt"), tol=1e-300)(np.array([-50.0, 50.0]))


def test_singular_sequence_structure():
    s = np.linspace(0, 40, 801)
    t = np.linspace(-1, 1, 41)
    real = singular_sequence(lin, SYM, 0, 4, t_cells=512)
    v0 = real.sample(s, t)
    assert np.all(v0.imag == 0)
    assert real.support == (16.0, 20.0)
    assert np.all(v0[(s < 16) | (s > 25)] == 0)
    twisted = singular_sequence(lin, SYM, 1, 4, t_cells=512)
    # |Psi| differs only through psi_1^m, the phase is unimodular
    lon0, lon1 = real.longitudinal(s), twisted.longitudinal(s)
    assert np.allclose(np.abs(lon0), np.abs(lon1), rtol=1e-14, atol=0)


@pytest.mark.parametrize("m", [0, 1])
def test_singular_sequence_norm_lower_bound(m):
    seq = singular_sequence(lin, SYM, m, 3, t_cells=512)
    value, lower = seq.check_norm()
    assert value >= lower
    assert seq.shift == pytest.approx(sturm.effective_exact(SYM, m, 1), rel=1e-4)

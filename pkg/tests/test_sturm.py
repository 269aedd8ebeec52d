import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistspec import kernels, sturm
from twistspec.errors import NumericalFailure, PreconditionError
from twistspec.geometry import CrossSection, constant_rate, interval_mode, linear_rate, vanishing_rate
from twistspec.specfun import annulus_radial_eigenvalue
from twistspec.sturm import (Grid1D, SturmLiouvilleProblem, assemble_effective, assemble_transverse,
                             distinct_levels, effective_exact, lambda1_exact, lambda1_upper_bound,
                             lambda_of_s_sweep, rayleigh_quotient, refine, solve)

J01_SQ = 2.404825557695773 ** 2
SYM = CrossSection(-1.0, 1.0)


def test_flat_transverse_gives_sine_modes():
    res = solve(assemble_transverse(constant_rate(0.0), CrossSection(0, 1), 0.3), 4)
    exact = (np.arange(1, 5) * math.pi) ** 2
    assert np.allclose(res.eigenvalues, exact, rtol=1e-5)
    assert np.all(res.eigenvalues < exact)     # cell-centred FV converges from below


def test_zero_rate_at_origin_gives_first_interval_mode():
    lam = solve(assemble_transverse(linear_rate(), SYM, 0.0), 1).eigenvalues[0]
    assert lam == pytest.approx(math.pi ** 2 / 4, rel=1e-6)


def test_transverse_far_out_approaches_annulus():
    cs = CrossSection(1.0, 2.0)
    lam = solve(assemble_transverse(linear_rate(), cs, 1e3), 1).eigenvalues[0]
    assert abs(lam - annulus_radial_eigenvalue(1.0, 2.0, 1)) < 1e-3


def test_transverse_needs_sixteen_cells():
    with pytest.raises(PreconditionError):
        assemble_transverse(linear_rate(), SYM, 1.0, Grid1D(8))


def test_grid_never_puts_a_centre_on_zero():
    faces = Grid1D(101).faces(-1.0, 0.5)
    assert 0.0 in faces
    centres = 0.5 * (faces[1:] + faces[:-1])
    assert np.all(centres != 0.0)
    assert Grid1D(64).placement(1, 2) == "uniform"


def test_symmetric_fibre_is_doubly_degenerate():
    res = solve(assemble_effective(SYM, 0), 2)
    assert res.eigenvalues[0] == pytest.approx(J01_SQ, rel=1e-6)
    assert round(res.eigenvalues[0], 4) == 5.7832
    assert res.multiplicity_flags[:2].tolist() == [True, True]
    assert set(res.branches.tolist()) == {0, 1}
    vals, mult = distinct_levels(res)
    assert len(vals) == 1 and mult.tolist() == [2]


def test_asymmetric_fibre_lives_on_larger_half():
    cs = CrossSection(-1.0, 0.5)
    res = solve(assemble_effective(cs, 0), 1)
    assert res.eigenvalues[0] == pytest.approx(J01_SQ, rel=1e-6)
    assert not res.multiplicity_flags[0]
    right = res.centers > 0
    assert res.weighted_norm_sq(0, right) < 1e-8
    assert res.weighted_norm_sq(0) == pytest.approx(1.0, abs=1e-12)


def test_positive_cross_section_is_single_interval():
    slp = assemble_effective(CrossSection(1.0, 2.0), 0)
    assert not slp.split and slp.zero_condition is None
    res = solve(slp, 1)
    assert res.grid["blocks"] == 1 and res.branches is None


def test_split_conditions_follow_m():
    assert assemble_effective(SYM, 0).zero_condition == "neumann_at_zero"
    assert assemble_effective(SYM, 1).zero_condition == "dirichlet_at_zero"


def test_sliver_side_of_zero():
    g = Grid1D(256)
    assert g.placement(-1e-200, 1.0) == "uniform"
    lam = solve(assemble_transverse(constant_rate(0.0), CrossSection(-1e-200, 1.0), 0.0, g), 1)
    assert lam.eigenvalues[0] == pytest.approx(math.pi ** 2, rel=1e-4)
    with pytest.raises(PreconditionError):
        solve(assemble_effective(CrossSection(-1e-200, 1.0), 0, g), 1)


def test_split_problem_validation():
    with pytest.raises(PreconditionError):
        SturmLiouvilleProblem(np.abs, np.abs, 1.0, 2.0, split=True, zero_condition="neumann_at_zero")
    with pytest.raises(PreconditionError):
        SturmLiouvilleProblem(np.abs, np.abs, -1.0, 2.0, split=True)
    with pytest.raises(PreconditionError):
        solve(assemble_effective(SYM, 0), 0)


def test_observed_order_is_second():
    r = refine(assemble_effective(SYM, 0, Grid1D(256)), 1, tol=1e-9, max_cells=8192)
    assert r.observed_order >= 1.8
    assert abs(r.extrapolated[0] - J01_SQ) < abs(r.history[-1][1][0] - J01_SQ)


def test_refinement_reaches_tight_tolerance():
    r = refine(assemble_effective(SYM, 0, Grid1D(2048)), 1, tol=1e-8)
    assert r.converged
    assert abs(r.result.eigenvalues[0] - J01_SQ) < 1e-7


def test_lowest_fibre_increases_with_m():
    lam = [solve(assemble_effective(SYM, m, Grid1D(1024)), 1).eigenvalues[0]
           for m in (0, 0.5, 1, 2)]
    assert all(b > a for a, b in zip(lam, lam[1:]))


@pytest.mark.parametrize("m", [0, 1, 2])
def test_fibre_matches_bessel_closed_form(m):
    cs = CrossSection(-1.0, 0.5)
    res = solve(assemble_effective(cs, m, Grid1D(4096)), 3)
    vals, _ = distinct_levels(res)
    for k in (1, 2):
        assert vals[k - 1] == pytest.approx(effective_exact(cs, m, k), rel=2e-5)


def test_exact_closed_forms():
    assert lambda1_exact(SYM) == pytest.approx(J01_SQ, rel=1e-15)
    assert lambda1_exact(CrossSection(1, 2)) == pytest.approx(9.753322124750715, rel=1e-12)
    assert effective_exact(SYM, 0.5, 1) is None


def test_upper_bound_examples():
    cs = CrossSection(1.0, 2.0)
    assert lambda1_upper_bound(cs) == pytest.approx(math.pi ** 2)
    assert solve(assemble_effective(cs, 0), 1).eigenvalues[0] < math.pi ** 2
    assert lambda1_upper_bound(SYM) == pytest.approx(math.pi ** 2)
    e1, _ = interval_mode(SYM, 1)
    e2, _ = interval_mode(SYM, 2)
    assert e1 < lambda1_exact(SYM) < e2


degenerate = st.tuples(st.floats(min_value=0.1, max_value=3), st.floats(min_value=0.0, max_value=3)).map(
    lambda ab: CrossSection(-ab[0], ab[1]))


@given(degenerate)
def test_degenerate_ground_state_below_second_interval_mode(cs):
    e2, _ = interval_mode(cs, 2)
    assert lambda1_exact(cs) < e2
    assert lambda1_exact(cs) < lambda1_upper_bound(cs)


@settings(max_examples=15)
@given(st.floats(min_value=-1.5, max_value=-0.2), st.floats(min_value=0.2, max_value=1.5))
def test_split_equals_min_of_halves(a1, a2):
    g = Grid1D(512)
    whole = solve(assemble_effective(CrossSection(a1, a2), 0, g), 1).eigenvalues[0]
    # each half on its own carries exactly the cells of the corresponding block
    faces = g.faces(a1, a2)
    nl = int(np.sum(faces[1:] <= 0.0))
    halves = [solve(SturmLiouvilleProblem(np.abs, np.abs, lo, hi, grid=Grid1D(n)), 1).eigenvalues[0]
              for lo, hi, n in ((a1, 0.0, nl), (0.0, a2, 512 - nl))]
    assert whole == min(halves)


@settings(max_examples=15)
@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-2, max_value=0.5),
       st.floats(min_value=0.3, max_value=2))
def test_solver_invariants(s, a1, width):
    cs = CrossSection(a1, a1 + width)
    slp = assemble_transverse(linear_rate(), cs, s, Grid1D(256))
    res = solve(slp, 3)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    assert np.all(res.residuals <= np.array(res.grid["residual_tolerance"]))
    for i, lam in enumerate(res.eigenvalues):
        assert res.weighted_norm_sq(i) == pytest.approx(1.0, abs=1e-12)
        assert rayleigh_quotient(slp, res.eigenvectors[i]) == pytest.approx(lam, rel=1e-10)
    # the infimum can only be lowered by the discrete minimiser
    _, chi = interval_mode(cs, 1)
    assert res.eigenvalues[0] <= rayleigh_quotient(slp, chi(res.centers)) * (1 + 1e-12)


def test_sweep_converges_for_diverging_profile():
    cs = CrossSection(-1.0, 0.5)
    sw = lambda_of_s_sweep(linear_rate(), cs, [2.0 ** k for k in range(4, 9)], Grid1D(1024))
    gaps = np.abs(sw.gap)
    assert np.all(np.diff(gaps) < 0)


def test_sweep_tends_to_interval_mode_for_vanishing_profile():
    sw = lambda_of_s_sweep(vanishing_rate(), SYM, [0.0, 10.0, 100.0, 1000.0])
    e1 = math.pi ** 2 / 4
    assert abs(sw.lam[-1] - e1) < 1e-5
    # monotone down to the discretisation floor of about 5e-7
    assert np.all(np.diff(np.abs(sw.lam - e1)) <= 1e-8)


def test_threaded_sweep_is_identical():
    s = np.linspace(-20, 20, 9)
    a = lambda_of_s_sweep(linear_rate(), SYM, s, Grid1D(256))
    b = lambda_of_s_sweep(linear_rate(), SYM, s, Grid1D(256), threads=4)
    assert np.array_equal(a.lam, b.lam)


def test_sweep_rejects_non_finite_samples():
    with pytest.raises(PreconditionError):
        lambda_of_s_sweep(linear_rate(), SYM, [1.0, math.nan])


def test_broken_inverse_iteration_is_reported(monkeypatch):
    monkeypatch.setattr(kernels, "solve_shifted", lambda d, e, lam, x: np.cos(np.arange(len(d)) * 1.3))
    with pytest.raises(NumericalFailure):
        solve(assemble_effective(CrossSection(1.0, 2.0), 0, Grid1D(128)), 2)

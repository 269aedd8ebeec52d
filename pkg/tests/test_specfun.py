"""Bessel evaluators against frozen high-precision references (mpmath, 40 digits)."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistspec.specfun import (BesselDomainError, annulus_radial_eigenvalue, bessel_j,
                               bessel_j_derivative, bessel_j_zero, bessel_y)

# (x, J0, J1, J2, J5); samples straddle the series / recurrence / asymptotic switches
J_REF = [
    (0.5, 0.9384698072408129, 0.2422684576748739, 0.03060402345868264, 8.053627241357474e-06),
    (1.9, 0.28181855937438555, 0.5811570727134341, 0.3299257276923872, 0.00553849301361588),
    (2.1, 0.16660698033199028, 0.5682921357570386, 0.37462362515090364, 0.008828417117386467),
    (7.3, 0.2882169476350144, 0.08257043049325784, -0.2655949118834369, 0.31370617089730907),
    (12.0, 0.047689310796833535, -0.2234471044906276, -0.08493049487860481, -0.07347096310165858),
    (24.9, 0.0832459683530155, -0.13485569953140886, -0.09407775144790777, -0.08024676273394245),
    (25.1, 0.10827567149994945, -0.11463478413442257, -0.1174099172477122, -0.05119417047462766),
    (100.0, 0.019985850304223122, -0.07714535201411216, -0.021528757344505364, -0.07419573696451393),
    (999.0, 0.01736929635519413, -0.01830972847491162, -0.01740595246825702, -0.018099770689430347),
]

# (x, Y0, Y1, Y3)
Y_REF = [
    (0.5, -0.44451873350670656, -1.471472392670243, -42.059494304723884),
    (1.9, 0.4968199712838202, -0.1644057723315953, -1.2458651308290132),
    (2.1, 0.5182937375137607, -0.05167861213042353, -1.0292956037786418),
    (7.3, 0.0627738863740376, -0.2845943718680721, 0.20747385287639497),
    (12.0, -0.22523731263436145, -0.05709921826089652, 0.12900614368007832),
    (24.9, -0.13649918399676522, -0.08600255759555425, 0.10682044483174945),
    (25.1, -0.11676770763803694, -0.11062223322783099, 0.12782592837717188),
    (100.0, -0.07724431336508315, -0.020372312002759792, 0.02344578668776091),
    (999.0, -0.018318419519867724, -0.01737846690654301, 0.01745167462543922),
]

J_ZEROS = {
    0: [2.404825557695773, 5.520078110286311, 8.653727912911013],
    1: [3.8317059702075125, 7.015586669815619, 10.173468135062722],
    2: [5.135622301840683, 8.417244140399864, 11.619841172149059],
}


@pytest.mark.parametrize("row", J_REF, ids=lambda r: f"x={r[0]}")
def test_bessel_j_reference(row):
    x, *ref = row
    for n, want in zip((0, 1, 2, 5), ref):
        assert bessel_j(n, x) == pytest.approx(want, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("row", Y_REF, ids=lambda r: f"x={r[0]}")
def test_bessel_y_reference(row):
    x, *ref = row
    for n, want in zip((0, 1, 3), ref):
        assert bessel_y(n, x) == pytest.approx(want, rel=1e-10)


def test_bessel_j_at_origin():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(4, 0.0) == 0.0


def test_bessel_j_parity():
    x = np.array([0.3, 4.0, 30.0])
    assert np.allclose(bessel_j(0, -x), bessel_j(0, x), rtol=1e-15)
    assert np.allclose(bessel_j(1, -x), -bessel_j(1, x), rtol=1e-15)


def test_bessel_j_vanishes_at_first_zero():
    assert abs(bessel_j(0, 2.404825557695773)) < 1e-12


def test_scalar_in_scalar_out_and_arrays():
    assert isinstance(bessel_j(0, 1.0), float)
    out = bessel_j(0, np.linspace(0, 50, 7))
    assert out.shape == (7,)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_argument_is_rejected(bad):
    with pytest.raises(BesselDomainError):
        bessel_j(0, bad)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_bessel_y_domain(x):
    with pytest.raises(BesselDomainError):
        bessel_y(0, x)


def test_bessel_y_log_singularity():
    assert bessel_y(0, 1e-8) < -10


def test_bessel_y_first_zero():
    assert abs(bessel_y(0, 0.8935769662791675)) < 1e-14


def test_wronskian_at_one():
    x = 1.0
    w = bessel_j(1, x) * bessel_y(0, x) - bessel_j(0, x) * bessel_y(1, x)
    assert w == pytest.approx(2 / (math.pi * x), abs=1e-10)


@given(st.floats(min_value=-2, max_value=2), st.integers(min_value=0, max_value=4))
def test_wronskian_log_grid(logx, nu):
    x = 10.0 ** logx
    w = bessel_j(nu + 1, x) * bessel_y(nu, x) - bessel_j(nu, x) * bessel_y(nu + 1, x)
    assert w == pytest.approx(2 / (math.pi * x), rel=1e-10)


@given(st.floats(min_value=0.05, max_value=900), st.integers(min_value=1, max_value=6))
def test_three_term_recurrence(x, n):
    lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
    rhs = 2 * n / x * bessel_j(n, x)
    scale = max(abs(bessel_j(n - 1, x)), abs(bessel_j(n + 1, x)), 1e-300)
    assert abs(lhs - rhs) <= 1e-11 * scale


@given(st.floats(min_value=0.1, max_value=500))
def test_derivative_identity(x):
    assert bessel_j_derivative(0, x) == pytest.approx(-bessel_j(1, x), rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("order", sorted(J_ZEROS))
def test_zero_reference(order):
    for k, want in enumerate(J_ZEROS[order], start=1):
        z = bessel_j_zero(order, k)
        assert (z.order, z.index) == (order, k)
        assert abs(z.value - want) <= 1e-12


def test_first_zero_of_j0_is_about_two_point_four():
    assert round(bessel_j_zero(0, 1).value, 1) == 2.4
    z2 = bessel_j_zero(0, 2).value
    assert 5 < z2 < 6 and abs(bessel_j(0, z2)) < 1e-12


def test_zero_index_validation():
    with pytest.raises(ValueError):
        bessel_j_zero(0, 0)


def test_zero_interlacing():
    j0 = [bessel_j_zero(0, k).value for k in range(1, 25)]
    j1 = [bessel_j_zero(1, k).value for k in range(1, 25)]
    for a, b in zip(j0, j0[1:]):
        assert sum(a < z < b for z in j1) == 1
    assert all(b > a for a, b in zip(j0, j0[1:]))


ANNULUS_REF = {(1.0, 2.0, 1): 9.753322124750715, (1.0, 2.0, 2): 39.35599565759258,
               (1.0, 2.0, 3): 88.70263330892449, (0.5, 3.0, 2): 6.180472210853135}


@pytest.mark.parametrize("key", sorted(ANNULUS_REF))
def test_annulus_reference(key):
    assert annulus_radial_eigenvalue(*key) == pytest.approx(ANNULUS_REF[key], rel=1e-12)


def test_annulus_higher_order_reference():
    assert annulus_radial_eigenvalue(1.0, 2.0, 1, order=1) == pytest.approx(10.218113344665941, rel=1e-12)
    assert annulus_radial_eigenvalue(1.0, 2.0, 2, order=3) == pytest.approx(43.770414223642334, rel=1e-12)


def test_annulus_below_interval_bound():
    assert annulus_radial_eigenvalue(1.0, 2.0, 1) < math.pi ** 2


def test_thin_annulus_limit():
    eps = 1e-3
    lam = annulus_radial_eigenvalue(1.0, 1.0 + eps, 1)
    assert lam * eps ** 2 / math.pi ** 2 == pytest.approx(1.0, rel=1e-2)


@pytest.mark.parametrize("r1,r2", [(0.0, 1.0), (2.0, 1.0), (1.0, 1.0)])
def test_annulus_precondition(r1, r2):
    with pytest.raises(ValueError):
        annulus_radial_eigenvalue(r1, r2, 1)


@given(st.floats(min_value=0.1, max_value=5), st.floats(min_value=0.05, max_value=5))
def test_annulus_increasing_in_k(r1, width):
    vals = [annulus_radial_eigenvalue(r1, r1 + width, k) for k in (1, 2, 3, 4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[0] < (math.pi / width) ** 2

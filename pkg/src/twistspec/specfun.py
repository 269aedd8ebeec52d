"""Integer-order Bessel functions J_n, Y_n and their zeros.

Evaluation regimes (per element of ``x``):

* ``|x| < 2``: ascending power series (no cancellation trouble there);
* ``2 <= |x| <= 25``: Miller's backward recurrence for J, normalised by
  ``J_0 + 2 sum J_2k = 1``; Y_0 and Y_1 from Neumann series in those J_k;
* ``|x| > 25``: Hankel asymptotic expansions for orders 0 and 1, forward
  recurrence to higher orders (Miller again when the order exceeds x).

Y_n for n >= 2 always comes from forward recurrence, which is stable for Y.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_SERIES_MAX = 2.0
_ASYMPTOTIC_MIN = 25.0
_ROOT_TOL = 1e-12


class BesselDomainError(ValueError):
    pass


class RootBracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class BesselZero:
    order: int
    index: int
    value: float


def _check_order(order):
    if int(order) != order or order < 0:
        raise BesselDomainError(f"order must be a nonnegative integer, got {order!r}")
    return int(order)


def _as_array(x):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise BesselDomainError("Bessel functions need finite arguments")
    return arr


def _wrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


# -- J ------------------------------------------------------------------------

def _j_series(n, x):
    q = -(x * x) / 4.0
    term = (x / 2.0) ** n / math.factorial(n)
    total = term.copy()
    for k in range(1, 40):
        term = term * q / (k * (k + n))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _miller(x, kmax):
    """Normalised J_0..J_kmax at positive x by backward recurrence.

    Returns an array of shape (kmax + 1, len(x)).
    """
    xmax = float(x.max())
    start = int(max(kmax, xmax) + 20 + 10 * xmax ** (1.0 / 3.0))
    start += start % 2
    out = np.zeros((kmax + 1, x.size))
    vp = np.zeros_like(x)
    v = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        vm = (2.0 * k / x) * v - vp
        vp, v = v, vm
        # v now holds the unnormalised J_{k-1}
        if k - 1 <= kmax:
            out[k - 1] = v
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * v
        big = np.abs(v) > 1e250
        if big.any():
            scale = np.where(big, 1e-250, 1.0)
            v *= scale
            vp *= scale
            norm *= scale
            out *= scale
    norm += v
    return out / norm


def _hankel_pq(nu, x):
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    for k in range(1, 60):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        size = np.abs(term)
        live = size < prev
        if not live.any() or np.all(size < 1e-17):
            break
        contrib = np.where(live, term, 0.0)
        # a_k enters P (k even) or Q (k odd) with alternating sign pairs
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * contrib
        else:
            q += sign * contrib
        prev = np.where(live, size, 0.0)
    return p, q


def _hankel_01(x):
    """(J0, J1, Y0, Y1) at large positive x."""
    c, s = np.cos(x), np.sin(x)
    amp = np.sqrt(2.0 / (np.pi * x))
    r2 = math.sqrt(0.5)
    # chi_0 = x - pi/4, chi_1 = x - 3 pi/4, expanded to avoid cancellation
    cos0, sin0 = (c + s) * r2, (s - c) * r2
    cos1, sin1 = (s - c) * r2, -(s + c) * r2
    p0, q0 = _hankel_pq(0.0, x)
    p1, q1 = _hankel_pq(1.0, x)
    j0 = amp * (p0 * cos0 - q0 * sin0)
    y0 = amp * (p0 * sin0 + q0 * cos0)
    j1 = amp * (p1 * cos1 - q1 * sin1)
    y1 = amp * (p1 * sin1 + q1 * cos1)
    return j0, j1, y0, y1


def _j_positive(n, x):
    """J_n at x >= 0 (array)."""
    out = np.empty_like(x)
    zero = x == 0.0
    out[zero] = 1.0 if n == 0 else 0.0
    small = (~zero) & (x < _SERIES_MAX)
    if small.any():
        out[small] = _j_series(n, x[small])
    mid = (x >= _SERIES_MAX) & ((x <= _ASYMPTOTIC_MIN) | (n >= x))
    if mid.any():
        out[mid] = _miller(x[mid], n)[n]
    large = (x > _ASYMPTOTIC_MIN) & (n < x)
    if large.any():
        xl = x[large]
        j0, j1, _, _ = _hankel_01(xl)
        if n == 0:
            out[large] = j0
        else:
            jm, j = j0, j1
            for k in range(1, n):
                jm, j = j, (2.0 * k / xl) * j - jm
            out[large] = j
    return out


def bessel_j(order, x):
    """Bessel function of the first kind J_order(x), integer order."""
    n = _check_order(order)
    arr = _as_array(x)
    flat = np.atleast_1d(arr).ravel()
    val = _j_positive(n, np.abs(flat))
    if n % 2:
        val = np.where(flat < 0, -val, val)
    return _wrap(val.reshape(arr.shape), x)


# -- Y ------------------------------------------------------------------------

def _y01_series(x):
    q = -(x * x) / 4.0
    log_term = np.log(x / 2.0)
    # Y0 = (2/pi) [(ln(x/2)+gamma) J0 + sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k/(k!)^2]
    t0 = np.ones_like(x)
    s0 = np.zeros_like(x)
    harmonic = 0.0
    for k in range(1, 40):
        t0 = t0 * q / (k * k)
        harmonic += 1.0 / k
        s0 -= harmonic * t0
    y0 = (2.0 / np.pi) * ((log_term + EULER_GAMMA) * _j_series(0, x) + s0)
    # Y1 = -2/(pi x) + (2/pi) ln(x/2) J1
    #      - (x/(2 pi)) sum_k (psi(k+1)+psi(k+2)) (-x^2/4)^k / (k!(k+1)!)
    t1 = np.ones_like(x)
    psi_a = -EULER_GAMMA
    psi_b = 1.0 - EULER_GAMMA
    s1 = (psi_a + psi_b) * t1
    for k in range(1, 40):
        t1 = t1 * q / (k * (k + 1))
        psi_a += 1.0 / k
        psi_b += 1.0 / (k + 1)
        s1 = s1 + (psi_a + psi_b) * t1
    y1 = -2.0 / (np.pi * x) + (2.0 / np.pi) * log_term * _j_series(1, x) - x / (2.0 * np.pi) * s1
    return y0, y1


def _y01_neumann(x):
    kmax = int(x.max() + 20 + 10 * x.max() ** (1.0 / 3.0)) + 2
    jk = _miller(x, kmax)
    lg = np.log(x / 2.0) + EULER_GAMMA
    y0 = (2.0 / np.pi) * lg * jk[0]
    y1 = -(2.0 / np.pi) * (jk[0] / x - lg * jk[1])
    for k in range(1, kmax // 2):
        sign = -1.0 if k % 2 else 1.0
        y0 -= (4.0 / np.pi) * sign * jk[2 * k] / k
        y1 += (2.0 / np.pi) * sign * (jk[2 * k - 1] - jk[2 * k + 1]) / k
    return y0, y1


def bessel_y(order, x):
    """Bessel function of the second kind Y_order(x), integer order, x > 0."""
    n = _check_order(order)
    arr = _as_array(x)
    flat = np.atleast_1d(arr).ravel()
    if np.any(flat <= 0.0):
        raise BesselDomainError("Y_n(x) needs x > 0 (logarithmic singularity at 0)")
    y0 = np.empty_like(flat)
    y1 = np.empty_like(flat)
    regimes = (
        (flat < _SERIES_MAX, _y01_series),
        ((flat >= _SERIES_MAX) & (flat <= _ASYMPTOTIC_MIN), _y01_neumann),
        (flat > _ASYMPTOTIC_MIN, lambda z: _hankel_01(z)[2:]),
    )
    for mask, fn in regimes:
        if mask.any():
            y0[mask], y1[mask] = fn(flat[mask])
    if n == 0:
        val = y0
    else:
        ym, y = y0, y1
        for k in range(1, n):
            ym, y = y, (2.0 * k / flat) * y - ym
        val = y
    return _wrap(val.reshape(arr.shape), x)


def bessel_j_derivative(order, x):
    n = _check_order(order)
    if n == 0:
        return -np.asarray(bessel_j(1, x)) if np.ndim(x) else -bessel_j(1, x)
    return 0.5 * (np.asarray(bessel_j(n - 1, x)) - np.asarray(bessel_j(n + 1, x)))


# -- zeros --------------------------------------------------------------------

def _bisect(fn, lo, hi, flo, xtol):
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid, mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


@functools.lru_cache(maxsize=1024)
def _j_zero(n, index):
    fn = functools.partial(bessel_j, n)
    step = 0.5 * math.pi
    # j_{n,1} > n, and consecutive zeros are more than pi/2 apart
    x = max(float(n), 0.5)
    fx = fn(x)
    found = 0
    while True:
        y = x + step
        fy = fn(y)
        if fx == 0.0 or (fx < 0.0) != (fy < 0.0):
            found += 1
            if found == index:
                break
        x, fx = y, fy
    lo, hi = _bisect(fn, x, y, fx, 1e-9)
    root = 0.5 * (lo + hi)
    for _ in range(6):
        d = float(bessel_j_derivative(n, root))
        if d == 0.0:
            break
        delta = fn(root) / d
        root -= delta
        if abs(delta) < 1e-16 * root:
            break
    if not (x <= root <= y) or abs(fn(root)) > 1e-12:
        raise RootBracketError(f"zero j_{n},{index} failed to converge")
    return root


def bessel_j_zero(order, index):
    """The ``index``-th positive zero of J_order."""
    n = _check_order(order)
    if int(index) != index or index < 1:
        raise BesselDomainError("zero index must be a positive integer")
    return BesselZero(n, int(index), _j_zero(n, int(index)))


def _cross(order, r1, r2, kappa):
    return (bessel_j(order, kappa * r1) * bessel_y(order, kappa * r2)
            - bessel_j(order, kappa * r2) * bessel_y(order, kappa * r1))


def annulus_radial_eigenvalue(r1, r2, k, order=0):
    """k-th Dirichlet eigenvalue of the annulus r1 < |x| < r2 among modes
    with angular dependence exp(i*order*phi); order 0 gives the radially
    symmetric ones.

    Roots kappa of J(kappa r1) Y(kappa r2) - J(kappa r2) Y(kappa r1) are
    bracketed with step pi / (2 (r2 - r1)) and refined by bisection;
    the eigenvalue is kappa**2.
    """
    if not (0.0 < r1 < r2):
        raise BesselDomainError("annulus needs 0 < r1 < r2")
    if int(k) != k or k < 1:
        raise BesselDomainError("eigenvalue index must be a positive integer")
    n = _check_order(order)
    return _annulus_root(float(r1), float(r2), int(k), n) ** 2


@functools.lru_cache(maxsize=1024)
def _annulus_root(r1, r2, k, n):
    fn = functools.partial(_cross, n, r1, r2)
    step = math.pi / (2.0 * (r2 - r1))
    x = 0.5 * step
    fx = fn(x)
    found = 0
    for _ in range(100000):
        y = x + step
        fy = fn(y)
        if (fx < 0.0) != (fy < 0.0):
            found += 1
            if found == k:
                lo, hi = _bisect(fn, x, y, fx, 4 * np.finfo(float).eps * y)
                root = 0.5 * (lo + hi)
                scale = abs(bessel_j(n, root * r1)) + abs(bessel_y(n, root * r1))
                if abs(fn(root)) > 1e-8 * scale * max(1.0, abs(bessel_y(n, root * r2))):
                    raise RootBracketError("cross-product root did not converge")
                return root
        x, fx = y, fy
    raise RootBracketError(f"could not bracket annulus root k={k}")

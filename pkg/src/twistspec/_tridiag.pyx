# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for symmetric tridiagonal eigenproblems.

The matrix is given by its diagonal ``d`` (length n) and off-diagonal ``e``
(length n-1). Both routines below are mirrored line for line in
``_tridiag_py``.
"""
import numpy as np

from libc.math cimport fabs, fmax

cdef double EPS = 2.220446049250313e-16
cdef double SAFMIN = 2.2250738585072014e-308


cdef Py_ssize_t _count(const double[::1] d, const double[::1] e2,
                       double lam, double pivmin) noexcept nogil:
    cdef Py_ssize_t i, n = d.shape[0], neg = 0
    cdef double piv = d[0] - lam
    if fabs(piv) < pivmin:
        piv = -pivmin
    if piv < 0.0:
        neg += 1
    for i in range(1, n):
        piv = (d[i] - lam) - e2[i - 1] / piv
        if fabs(piv) < pivmin:
            piv = -pivmin
        if piv < 0.0:
            neg += 1
    return neg


def _prepare(d, e):
    d = np.ascontiguousarray(d, dtype=np.float64)
    e2 = np.ascontiguousarray(np.asarray(e, dtype=np.float64) ** 2)
    if e2.shape[0] != d.shape[0] - 1:
        raise ValueError("off-diagonal must have length len(d) - 1")
    pivmin = SAFMIN * max(1.0, float(e2.max()) if e2.size else 1.0)
    return d, e2, pivmin


def sturm_count(d, e, double lam):
    """Number of eigenvalues strictly below ``lam`` (LDL^T inertia)."""
    cdef double pivmin
    d, e2, pivmin = _prepare(d, e)
    return int(_count(d, e2, lam, pivmin))


def gershgorin(d, e):
    d = np.asarray(d, dtype=np.float64)
    r = np.zeros_like(d)
    ae = np.abs(np.asarray(e, dtype=np.float64))
    r[:-1] += ae
    r[1:] += ae
    return float((d - r).min()), float((d + r).max())


def bisect_eigenvalues(d, e, Py_ssize_t first, Py_ssize_t stop, double abstol=0.0):
    """Eigenvalues with (0-based) indices ``first .. stop-1`` by bisection."""
    cdef double pivmin, lo, hi, mid, width, glo, ghi
    cdef Py_ssize_t k, n
    d, e2, pivmin = _prepare(d, e)
    cdef const double[::1] dv = d
    cdef const double[::1] ev = e2
    n = dv.shape[0]
    if first < 0 or stop > n or first >= stop:
        raise ValueError("invalid index range")
    glo, ghi = gershgorin(d, np.sqrt(e2))
    width = fmax(fabs(glo), fabs(ghi))
    glo -= 2.0 * EPS * width * n + 2.0 * pivmin
    ghi += 2.0 * EPS * width * n + 2.0 * pivmin
    out = np.empty(stop - first)
    cdef double[::1] ov = out
    with nogil:
        for k in range(first, stop):
            lo = glo
            hi = ghi
            while hi - lo > abstol + 2.0 * EPS * fmax(fabs(lo), fabs(hi)) + pivmin:
                mid = 0.5 * (lo + hi)
                if mid == lo or mid == hi:
                    break
                if _count(dv, ev, mid, pivmin) > k:
                    hi = mid
                else:
                    lo = mid
            ov[k - first] = 0.5 * (lo + hi)
    return out


def solve_shifted(d, e, double shift, rhs):
    """Solve ``(T - shift I) x = rhs`` by Gaussian elimination with row
    interchanges. Exactly zero pivots are replaced by a tiny value, which is
    what inverse iteration at a converged eigenvalue needs."""
    cdef Py_ssize_t i, n
    cdef double fact, temp, tiny
    dd = np.array(d, dtype=np.float64) - shift
    du = np.array(e, dtype=np.float64)
    dl = du.copy()
    du2 = np.zeros(max(len(du) - 1, 0))
    b = np.array(rhs, dtype=np.float64)
    n = dd.shape[0]
    cdef double[::1] D = dd
    cdef double[::1] DU = du
    cdef double[::1] DL = dl
    cdef double[::1] DU2 = du2
    cdef double[::1] B = b
    tiny = EPS * fmax(np.abs(dd).max(), np.abs(du).max() if n > 1 else 0.0)
    if tiny == 0.0:
        tiny = SAFMIN
    with nogil:
        for i in range(n - 1):
            if fabs(D[i]) >= fabs(DL[i]):
                if D[i] == 0.0:
                    D[i] = tiny
                fact = DL[i] / D[i]
                D[i + 1] -= fact * DU[i]
                B[i + 1] -= fact * B[i]
            else:
                fact = D[i] / DL[i]
                D[i] = DL[i]
                temp = D[i + 1]
                D[i + 1] = DU[i] - fact * temp
                DU[i] = temp
                if i < n - 2:
                    DU2[i] = DU[i + 1]
                    DU[i + 1] = -fact * DU2[i]
                temp = B[i]
                B[i] = B[i + 1]
                B[i + 1] = temp - fact * B[i + 1]
        if D[n - 1] == 0.0:
            D[n - 1] = tiny
        B[n - 1] /= D[n - 1]
        if n > 1:
            B[n - 2] = (B[n - 2] - DU[n - 2] * B[n - 1]) / D[n - 2]
        for i in range(n - 3, -1, -1):
            B[i] = (B[i] - DU[i] * B[i + 1] - DU2[i] * B[i + 2]) / D[i]
    return b

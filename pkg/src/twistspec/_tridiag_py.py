"""Pure-Python fallback for the compiled tridiagonal kernels.

Same algorithms as ``_tridiag.pyx``. The bisection is vectorised over the
requested indices so that one sweep over the matrix serves every interval,
but the sweep itself is an interpreted loop and therefore slow for large n.
"""
import numpy as np
from scipy.linalg import solve_banded

EPS = np.finfo(float).eps
SAFMIN = np.finfo(float).tiny


def _prepare(d, e):
    d = np.asarray(d, dtype=np.float64)
    e2 = np.asarray(e, dtype=np.float64) ** 2
    if e2.shape[0] != d.shape[0] - 1:
        raise ValueError("off-diagonal must have length len(d) - 1")
    pivmin = SAFMIN * max(1.0, float(e2.max()) if e2.size else 1.0)
    return d, e2, pivmin


def _counts(d, e2, lam, pivmin):
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    piv = d[0] - lam
    piv = np.where(np.abs(piv) < pivmin, -pivmin, piv)
    neg = (piv < 0).astype(np.int64)
    for i in range(1, d.shape[0]):
        piv = (d[i] - lam) - e2[i - 1] / piv
        piv = np.where(np.abs(piv) < pivmin, -pivmin, piv)
        neg += piv < 0
    return neg


def sturm_count(d, e, lam):
    """Number of eigenvalues strictly below ``lam`` (LDL^T inertia)."""
    d, e2, pivmin = _prepare(d, e)
    return int(_counts(d, e2, lam, pivmin)[0])


def gershgorin(d, e):
    d = np.asarray(d, dtype=np.float64)
    r = np.zeros_like(d)
    ae = np.abs(np.asarray(e, dtype=np.float64))
    r[:-1] += ae
    r[1:] += ae
    return float((d - r).min()), float((d + r).max())


def bisect_eigenvalues(d, e, first, stop, abstol=0.0):
    """Eigenvalues with (0-based) indices ``first .. stop-1`` by bisection."""
    d, e2, pivmin = _prepare(d, e)
    n = d.shape[0]
    if first < 0 or stop > n or first >= stop:
        raise ValueError("invalid index range")
    glo, ghi = gershgorin(d, np.sqrt(e2))
    width = max(abs(glo), abs(ghi))
    glo -= 2.0 * EPS * width * n + 2.0 * pivmin
    ghi += 2.0 * EPS * width * n + 2.0 * pivmin
    k = np.arange(first, stop)
    lo = np.full(k.shape, glo)
    hi = np.full(k.shape, ghi)
    while True:
        active = hi - lo > abstol + 2.0 * EPS * np.maximum(np.abs(lo), np.abs(hi)) + pivmin
        mid = 0.5 * (lo + hi)
        active &= (mid != lo) & (mid != hi)
        if not active.any():
            break
        above = _counts(d, e2, mid[active], pivmin) > k[active]
        idx = np.flatnonzero(active)
        hi[idx[above]] = mid[active][above]
        lo[idx[~above]] = mid[active][~above]
    return 0.5 * (lo + hi)


def solve_shifted(d, e, shift, rhs):
    """Solve ``(T - shift I) x = rhs`` with a banded LU (partial pivoting)."""
    d = np.asarray(d, dtype=np.float64) - shift
    e = np.asarray(e, dtype=np.float64)
    n = d.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = e
    ab[1] = d
    ab[2, :-1] = e
    tiny = EPS * max(np.abs(d).max(), np.abs(e).max() if n > 1 else 0.0) or SAFMIN
    try:
        return solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError:
        # exactly singular at a converged eigenvalue; nudge the shift
        ab[1] -= tiny
        return solve_banded((1, 1), ab, rhs)

"""Truncated twisted-strip operator on (-S, S) x (a1, a2).

Five-point finite-volume scheme for the form
``int f^-1 |d_s u|^2 + int f |d_t u|^2`` in ``L^2(f ds dt)``:

* s-faces carry ``ht/hs`` times the harmonic mean of ``f^-1`` taken at the
  two points ``s_face -+ hs/2``; end faces use the same rule with a virtual
  point, so a Dirichlet problem on (-S, S) is exactly a restriction of the
  one on (-2S, 2S) when both share the same ``hs``;
* t-faces carry ``hs * f(s_centre, t_face) / dt`` with the t-grid of
  :class:`twistspec.sturm.Grid1D`, so each s-column reproduces the 1D
  transverse matrix;
* the mass is ``f(s_centre, t_centre) hs ht``.

Unknowns are ordered s-major: index ``i * nt + j``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh, splu

from .errors import InvariantViolation, NumericalFailure, PreconditionError
from .geometry import DivergenceClass, jacobian, interval_mode
from .sturm import Grid1D, SpectralResult, lambda1_exact
from .variational import singular_sequence


class EndCondition(str, Enum):
    DIRICHLET = "dirichlet_ends"
    NEUMANN = "neumann_ends"


@dataclass(frozen=True)
class Grid2D:
    s_truncation: float
    ns: int
    nt: int
    end_condition: EndCondition = EndCondition.DIRICHLET
    s_window: Optional[tuple] = None    # sub-interval of (-S, S) actually meshed

    def __post_init__(self):
        object.__setattr__(self, "end_condition", EndCondition(self.end_condition))
        if not self.s_truncation > 0:
            raise PreconditionError("truncation S must be positive")
        if self.ns < 16 or self.nt < 16:
            raise PreconditionError("Grid2D needs ns, nt >= 16")
        if self.s_window is not None:
            lo, hi = self.s_window
            if not (-self.s_truncation <= lo < hi <= self.s_truncation):
                raise PreconditionError("s_window must lie inside (-S, S)")

    @property
    def s_range(self):
        if self.s_window is not None:
            return tuple(map(float, self.s_window))
        return -float(self.s_truncation), float(self.s_truncation)

    @property
    def hs(self):
        lo, hi = self.s_range
        return (hi - lo) / self.ns

    def s_faces(self):
        lo, hi = self.s_range
        return np.linspace(lo, hi, self.ns + 1)

    def t_faces(self, cs):
        return Grid1D(self.nt).faces(cs.a1, cs.a2)

    def refined(self):
        return Grid2D(self.s_truncation, 2 * self.ns, 2 * self.nt, self.end_condition, self.s_window)

    def with_ends(self, end_condition):
        return Grid2D(self.s_truncation, self.ns, self.nt, end_condition, self.s_window)


@dataclass
class Operator2DAssembly:
    stiffness: sp.csr_matrix
    mass: sp.dia_matrix
    grid: Grid2D
    profile: object
    cs: object
    s_centers: np.ndarray
    t_centers: np.ndarray
    t_faces: np.ndarray
    s_cond: np.ndarray = None       # (ns-1, nt) interior s-face conductances
    t_cond: np.ndarray = None       # (ns, nt-1) interior t-face conductances
    t_wall: np.ndarray = None       # (ns, nt) Dirichlet t = a1, a2 faces
    s_end: np.ndarray = None        # (ns, nt) s = +-S faces, zero for Neumann ends

    @property
    def mass_diagonal(self):
        return self.mass.diagonal()

    @property
    def shape(self):
        return self.grid.ns, self.grid.nt

    def form(self, v):
        """v^T A v for real v."""
        return float(v @ (self.stiffness @ v))

    def energy(self, v):
        """v^T A v as a sum of nonnegative flux terms; the s-end terms are
        added last so a Neumann energy never exceeds the Dirichlet one bitwise."""
        u = np.asarray(v, dtype=float).reshape(self.shape)
        inner = (np.sum(self.s_cond * np.diff(u, axis=0) ** 2)
                 + np.sum(self.t_cond * np.diff(u, axis=1) ** 2)
                 + np.sum(self.t_wall * u * u))
        return float(inner + np.sum(self.s_end * u * u))

    def rayleigh_quotient(self, v):
        v = np.asarray(v, dtype=float)
        return self.energy(v) / float(np.sum(self.mass_diagonal * v * v))

    def h1_norm_sq(self, v):
        return float(v @ (self.stiffness @ v) + v @ (self.mass @ v))


def _s_conductance(p, s_face, hs, t_c):
    """Harmonic mean of f^-1 over the two half-cells adjacent to a face."""
    return 2.0 / (jacobian(p, s_face - hs / 2, t_c) + jacobian(p, s_face + hs / 2, t_c))


def assemble(p, cs, grid):
    ns, nt = grid.ns, grid.nt
    sf = grid.s_faces()
    sc = 0.5 * (sf[1:] + sf[:-1])
    hs = grid.hs
    tf = grid.t_faces(cs)
    tc = 0.5 * (tf[1:] + tf[:-1])
    ht = np.diff(tf)
    idx = np.arange(ns * nt).reshape(ns, nt)
    cs_int = _s_conductance(p, sf[1:-1, None], hs, tc[None, :]) * ht[None, :] / hs
    s_end = np.zeros((ns, nt))
    if grid.end_condition is EndCondition.DIRICHLET:
        s_end[0] = _s_conductance(p, sf[0], hs, tc) * ht / (hs / 2)
        s_end[-1] = _s_conductance(p, sf[-1], hs, tc) * ht / (hs / 2)
    ct = jacobian(p, sc[:, None], tf[None, 1:-1]) / np.diff(tc)[None, :] * hs
    wall = np.zeros((ns, nt))
    wall[:, 0] = jacobian(p, sc, tf[0]) * hs / (tc[0] - tf[0])
    wall[:, -1] += jacobian(p, sc, tf[-1]) * hs / (tf[-1] - tc[-1])

    diag = wall + s_end
    diag[:-1] += cs_int
    diag[1:] += cs_int
    diag[:, :-1] += ct
    diag[:, 1:] += ct

    rows = np.concatenate([idx[:-1].ravel(), idx[1:].ravel(), idx[:, :-1].ravel(),
                           idx[:, 1:].ravel(), idx.ravel()])
    cols = np.concatenate([idx[1:].ravel(), idx[:-1].ravel(), idx[:, 1:].ravel(),
                           idx[:, :-1].ravel(), idx.ravel()])
    vals = np.concatenate([-cs_int.ravel(), -cs_int.ravel(), -ct.ravel(), -ct.ravel(),
                           diag.ravel()])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(ns * nt, ns * nt))
    mass = (jacobian(p, sc[:, None], tc[None, :]) * hs * ht[None, :]).ravel()
    return Operator2DAssembly(A, sp.diags(mass), grid, p, cs, sc, tc, tf, cs_int, ct, wall, s_end)


def _verify(asm, vals, vecs, tol):
    A, mdiag = asm.stiffness, asm.mass_diagonal
    res = np.empty(len(vals))
    for i, (lam, v) in enumerate(zip(vals, vecs.T)):
        r = A @ v - lam * mdiag * v
        res[i] = math.sqrt(np.sum(r * r / mdiag)) / math.sqrt(np.sum(mdiag * v * v))
    return res


def lowest_eigenpairs(asm, count, tol=1e-8, sigma=None, seed=0):
    """Lowest ``count`` eigenpairs of A v = lambda B v by shift-invert Lanczos.

    The default shift 0 lies below the spectrum (Dirichlet conditions in t
    keep A positive definite under either end condition), so the
    eigenvalues nearest the shift are the lowest ones. Residuals are
    re-checked as ``||A v - lambda B v||_{B^-1} <= tol * ||v||_B``.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    n = asm.stiffness.shape[0]
    if count >= n - 1:
        raise PreconditionError("count must be smaller than the number of unknowns")
    shift = 0.0 if sigma is None else float(sigma)
    v0 = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    try:
        vals, vecs = eigsh(asm.stiffness.tocsc(), k=count, M=asm.mass.tocsc(), sigma=shift,
                           which="LM", v0=v0, tol=0.0)
    except (ArpackNoConvergence, ArpackError, RuntimeError) as exc:
        raise NumericalFailure(f"shift-invert Lanczos failed: {exc}") from exc
    mdiag = asm.mass_diagonal
    # Ritz values from the flux-form quotient: accurate to a few ulps
    vals = np.array([asm.rayleigh_quotient(v) for v in vecs.T])
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / np.sqrt(np.sum(mdiag[:, None] * vecs * vecs, axis=0))
    signs = np.sign(mdiag @ vecs)
    vecs *= np.where(signs == 0, 1.0, signs)
    res = _verify(asm, vals, vecs, tol)
    if np.any(res > tol):
        raise NumericalFailure(f"eigenpair residuals {res} exceed tol={tol}")
    flags = np.zeros(len(vals), dtype=bool)
    close = np.abs(np.diff(vals)) <= 1e-8 * np.abs(vals[1:])
    flags[:-1] |= close
    flags[1:] |= close
    s, t = np.meshgrid(asm.s_centers, asm.t_centers, indexing="ij")
    meta = {"ns": asm.grid.ns, "nt": asm.grid.nt, "S": asm.grid.s_truncation,
            "end_condition": asm.grid.end_condition.value, "shift": shift, "tol": tol}
    return SpectralResult(vals, vecs.T.copy(), res, flags,
                          np.column_stack([s.ravel(), t.ravel()]), mdiag, meta)


# -- bracketing ------------------------------------------------------------------------

def spectral_threshold(p, cs):
    """Bottom of the essential spectrum suggested by the profile class, or None."""
    if p.divergence_class is DivergenceClass.DIVERGING:
        return lambda1_exact(cs)
    if p.divergence_class is DivergenceClass.VANISHING:
        return interval_mode(cs, 1)[0]
    return None


@dataclass
class BracketRow:
    S: float
    ns: int
    dirichlet: np.ndarray
    neumann: np.ndarray
    below: Optional[int]        # dirichlet values below threshold - margin


@dataclass
class BracketReport:
    rows: list
    threshold: Optional[float]
    margin: float
    nt: int
    density: float
    stable: list = field(default_factory=list)   # drift flags between consecutive S

    @property
    def bracketing_holds(self):
        return all(r.neumann[0] <= r.dirichlet[0] for r in self.rows)

    @property
    def dirichlet_monotone(self):
        low = [r.dirichlet[0] for r in self.rows]
        return all(b <= a for a, b in zip(low, low[1:]))


def bracket_pair(p, cs, grid, count=1, tol=1e-8):
    """Dirichlet and Neumann lowest eigenvalues on one grid.

    The Neumann values come from Rayleigh-Ritz on the span of both computed
    eigenvector sets, so each is a variational upper bound for the discrete
    Neumann eigenvalue. For the lowest one the Neumann quotient of the
    Dirichlet ground state is a candidate as well; its flux-form evaluation
    drops only nonnegative terms, so the computed ordering Neumann <= Dirichlet
    survives rounding even when the two agree to machine precision.
    """
    asm_d = assemble(p, cs, grid.with_ends(EndCondition.DIRICHLET))
    asm_n = assemble(p, cs, grid.with_ends(EndCondition.NEUMANN))
    rd = lowest_eigenpairs(asm_d, count, tol)
    rn = lowest_eigenpairs(asm_n, count, tol)
    V = np.vstack([rn.eigenvectors, rd.eigenvectors]).T
    mdiag = asm_n.mass_diagonal
    G = V.T @ (mdiag[:, None] * V)
    K = V.T @ (asm_n.stiffness @ V)
    w, U = np.linalg.eigh(G)
    keep = w > 1e-12 * w.max()
    T = U[:, keep] / np.sqrt(w[keep])
    ritz = np.sort(np.linalg.eigvalsh(T.T @ K @ T))[:count]
    neumann = np.minimum(rn.eigenvalues, ritz)
    neumann[0] = min(neumann[0], asm_n.rayleigh_quotient(rd.eigenvectors[0]))
    return rd, np.sort(neumann)


def _ns_for(S, density):
    ns = 2.0 * S * density
    if abs(ns - round(ns)) > 1e-9:
        raise PreconditionError(f"2*S*density must be an integer for nested grids (S={S})")
    return int(round(ns))


def bracket_discrete_spectrum(p, cs, S_list, density=16.0, nt=64, count=4, margin=0.0,
                              tol=1e-8, threads=None, drift_tol=1e-3):
    """Dirichlet/Neumann lowest eigenvalues on (-S, S) for every S.

    All truncations share the same s-spacing ``1/density`` so the Dirichlet
    problems are nested and their lowest eigenvalue must not increase with S.
    """
    S_list = [float(S) for S in S_list]
    if any(b <= a for a, b in zip(S_list, S_list[1:])):
        raise PreconditionError("S_list must be increasing")
    threshold = spectral_threshold(p, cs)

    def one(S):
        ns = _ns_for(S, density)
        rd, neumann = bracket_pair(p, cs, Grid2D(S, ns, nt), count, tol)
        below = None if threshold is None else int(np.sum(rd.eigenvalues < threshold - margin))
        return BracketRow(S, ns, rd.eigenvalues, neumann, below)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, S_list))
    else:
        rows = [one(S) for S in S_list]

    report = BracketReport(rows, threshold, margin, nt, density)
    for a, b in zip(rows, rows[1:]):
        if threshold is None:
            report.stable.append(None)
            continue
        ka = a.dirichlet[a.dirichlet < threshold - margin]
        kb = b.dirichlet[: len(ka)]
        report.stable.append(bool(len(ka) and np.all(np.abs(kb - ka) <= drift_tol * np.abs(ka))))
    slack = 10 * tol * max(abs(r.dirichlet[0]) for r in rows)
    for a, b in zip(rows, rows[1:]):
        if b.dirichlet[0] > a.dirichlet[0] + slack:
            raise InvariantViolation(
                f"Dirichlet eigenvalue increased from S={a.S} to S={b.S}: "
                f"{a.dirichlet[0]!r} -> {b.dirichlet[0]!r}")
    return report


def grid_convergence(p, cs, grid, count=1, tol=1e-8):
    """Lowest eigenvalue on ``grid`` and on its dyadic refinement."""
    coarse = lowest_eigenpairs(assemble(p, cs, grid), count, tol).eigenvalues
    fine = lowest_eigenpairs(assemble(p, cs, grid.refined()), count, tol).eigenvalues
    return coarse, fine, np.abs(fine - coarse) / np.abs(fine)


# -- Weyl sequences --------------------------------------------------------------------

def weyl_grid(n, m, nt=64, S=None, hs=None):
    """A windowed grid resolving Psi_n^m for theta'(s) = O(s).

    The window is ``[n^2 - 1, n^2 + n + 1]``. The s-step resolves both the
    bump (scale n) and the phase ``exp(i m int |theta'|)`` near the window's
    right end.
    """
    lo, hi = n * n - 1.0, n * n + n + 1.0
    if S is None:
        S = (n + 1) ** 2 + 1.0
    if hs is None:
        hs = n / 100.0 if m == 0 else min(n / 100.0, 0.05 / (abs(m) * hi))
    ns = max(16, int(math.ceil((hi - lo) / hs)))
    return Grid2D(S, ns, nt, EndCondition.DIRICHLET, (lo, hi))


def weyl_residual(asm, p, cs, m, n):
    """Dual-norm proxy ``||(A - lambda_1^m B) v||_{M^-1} / ||v||_B`` with
    ``M = A + B`` and v the samples of Psi_n^m.

    ``lambda_1^m`` is the discrete fibre eigenvalue on the same t-grid. The
    complex grid function is split into real and imaginary parts.
    """
    S = asm.grid.s_truncation
    if S < (n + 1) ** 2 + 1:
        raise PreconditionError(f"truncation S={S} too small for n={n}; need S >= {(n + 1) ** 2 + 1}")
    lo, hi = asm.grid.s_range
    if lo > n * n or hi < n * n + n:
        raise PreconditionError("the meshed s-range does not cover the support of phi_n")
    seq = singular_sequence(p, cs, m, n, t_cells=asm.grid.nt)
    psi = seq.ground(asm.t_centers)
    longi = seq.longitudinal(asm.s_centers)
    lam = seq.shift
    A, mdiag = asm.stiffness, asm.mass_diagonal
    try:
        lu = splu((A + asm.mass).tocsc())
    except RuntimeError as exc:
        raise NumericalFailure(f"factorisation of A + B failed: {exc}") from exc
    num = den = 0.0
    for part in (longi.real, longi.imag):
        if not np.any(part):
            continue
        v = np.outer(part, psi).ravel()
        r = A @ v - lam * mdiag * v
        num += float(r @ lu.solve(r))
        den += float(v @ (mdiag * v))
    return math.sqrt(num / den)

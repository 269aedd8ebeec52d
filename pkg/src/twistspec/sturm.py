"""Weighted Sturm-Liouville eigenproblems -(p u')' + q u = lam w u.

Discretisation is a three-point finite-volume scheme on cells: flux
``p(t_face) (u_R - u_L) / (t_R - t_L)`` through every face, Dirichlet
faces at half-cell distance, lumped mass ``w(t_centre) * width``. When the
interval contains 0 a face is always pinned there, so centres never sit on
t = 0 and a weight vanishing at 0 closes that face on its own.

The resulting symmetric tridiagonal pencil (A, diag B) is reduced to
``B^-1/2 A B^-1/2`` and handed to the Sturm-sequence bisection and inverse
iteration in :mod:`twistspec.kernels`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import NumericalFailure, PreconditionError
from .geometry import CrossSection, jacobian
from .specfun import annulus_radial_eigenvalue, bessel_j_zero

DEFAULT_CELLS = 2048
MAX_CELLS = 2 ** 17
DEGENERACY_GAP = 1e-8
RESIDUAL_TOL = 1e-8
EPS = np.finfo(float).eps
MIN_SIDE = 1e-9     # relative width below which a side of t = 0 is not resolved


@dataclass(frozen=True)
class Grid1D:
    """Cell layout on (a1, a2): uniform, or uniform on each side of a face
    pinned at t = 0 when the interval straddles it."""
    cells: int = DEFAULT_CELLS

    def __post_init__(self):
        if self.cells < 2:
            raise PreconditionError("a grid needs at least 2 cells")

    def pins_zero(self, a1, a2):
        return a1 < 0.0 < a2 and min(-a1, a2) >= MIN_SIDE * (a2 - a1)

    def faces(self, a1, a2):
        if self.pins_zero(a1, a2):
            left = min(max(1, round(self.cells * (-a1) / (a2 - a1))), self.cells - 1)
            return np.concatenate([np.linspace(a1, 0.0, left + 1),
                                   np.linspace(0.0, a2, self.cells - left + 1)[1:]])
        return np.linspace(a1, a2, self.cells + 1)

    def placement(self, a1, a2):
        return "split-at-zero" if self.pins_zero(a1, a2) else "uniform"

    def refined(self):
        return Grid1D(2 * self.cells)


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    p: Callable
    w: Callable
    a1: float
    a2: float
    q: Optional[Callable] = None
    split: bool = False
    zero_condition: Optional[str] = None   # "neumann_at_zero" | "dirichlet_at_zero"
    grid: Grid1D = Grid1D()
    label: str = ""

    def __post_init__(self):
        if self.split and not (self.a1 < 0.0 < self.a2):
            raise PreconditionError("a split domain must straddle t = 0")
        if self.split and self.zero_condition not in ("neumann_at_zero", "dirichlet_at_zero"):
            raise PreconditionError("split domains need an interior condition at 0")

    def with_grid(self, grid):
        return SturmLiouvilleProblem(self.p, self.w, self.a1, self.a2, self.q,
                                     self.split, self.zero_condition, grid, self.label)


@dataclass
class _Block:
    """One decoupled tridiagonal piece, kept in flux form.

    ``cond`` are interior face conductances, ``left``/``right`` the boundary
    face conductances and ``pot`` the lumped potential.
    """
    cells: slice
    cond: np.ndarray
    left: float
    right: float
    pot: np.ndarray
    mass: np.ndarray

    @property
    def diag(self):
        d = self.pot.copy()
        d[:-1] += self.cond
        d[1:] += self.cond
        d[0] += self.left
        d[-1] += self.right
        return d

    @property
    def off(self):
        return -self.cond

    def energy(self, u):
        """u^T A u as a sum of nonnegative terms (no cancellation)."""
        return float(np.sum(self.cond * np.diff(u) ** 2) + self.left * u[0] ** 2
                     + self.right * u[-1] ** 2 + np.sum(self.pot * u * u))


@dataclass
class Discretization:
    faces: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    blocks: list

    @property
    def mass(self):
        return np.concatenate([b.mass for b in self.blocks])

    def stiffness_apply(self, u):
        out = np.zeros_like(u)
        for b in self.blocks:
            v = u[b.cells]
            r = b.diag * v
            r[:-1] += b.off * v[1:]
            r[1:] += b.off * v[:-1]
            out[b.cells] = r
        return out

    def energy(self, u):
        return sum(b.energy(u[b.cells]) for b in self.blocks)


def discretize(slp):
    faces = slp.grid.faces(slp.a1, slp.a2)
    centers = 0.5 * (faces[1:] + faces[:-1])
    widths = np.diff(faces)
    p_face = np.asarray(slp.p(faces), dtype=float) * np.ones_like(faces)
    w_c = np.asarray(slp.w(centers), dtype=float) * np.ones_like(centers)
    if np.any(w_c <= 0):
        raise PreconditionError("weight must be positive at cell centres")
    cond = p_face[1:-1] / np.diff(centers)
    left = p_face[0] / (centers[0] - faces[0])
    right = p_face[-1] / (faces[-1] - centers[-1])
    pot = np.zeros_like(centers)
    if slp.q is not None:
        pot = np.asarray(slp.q(centers), dtype=float) * widths
    mass = w_c * widths

    if not slp.split:
        return Discretization(faces, centers, widths,
                              [_Block(slice(0, len(centers)), cond, left, right, pot, mass)])

    if not slp.grid.pins_zero(slp.a1, slp.a2):
        raise PreconditionError(
            f"one side of t = 0 in ({slp.a1}, {slp.a2}) is too thin to split on")
    k = int(np.searchsorted(faces, 0.0))      # faces[k] == 0
    inner_l = inner_r = 0.0
    if slp.zero_condition == "dirichlet_at_zero":
        # zero whenever p(0) = 0; the potential then does the work
        inner_l = p_face[k] / (faces[k] - centers[k - 1])
        inner_r = p_face[k] / (centers[k] - faces[k])
    blocks = [
        _Block(slice(0, k), cond[:k - 1], left, inner_l, pot[:k], mass[:k]),
        _Block(slice(k, len(centers)), cond[k:], inner_r, right, pot[k:], mass[k:]),
    ]
    return Discretization(faces, centers, widths, blocks)


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray            # (count, n_cells), B-normalised
    residuals: np.ndarray
    multiplicity_flags: np.ndarray
    centers: np.ndarray
    mass: np.ndarray                    # diagonal of B
    grid: dict = field(default_factory=dict)
    branches: Optional[np.ndarray] = None   # block index, split domains only

    def weighted_norm_sq(self, i, mask=None):
        v = self.eigenvectors[i]
        if mask is not None:
            return float(np.sum(self.mass[mask] * v[mask] ** 2))
        return float(np.sum(self.mass * v * v))

    def __len__(self):
        return len(self.eigenvalues)


def _inverse_iteration(d, e, vals, max_iter=6):
    n = len(d)
    rng = np.random.default_rng(20180201)
    start = rng.uniform(0.5, 1.5, n)
    scale = max(np.abs(d).max(), np.abs(e).max() if n > 1 else 0.0, 1.0)
    vecs = []
    for i, lam in enumerate(vals):
        cluster = [vecs[j] for j in range(i) if abs(vals[j] - lam) <= 1e-7 * max(abs(lam), 1.0)]
        x = start / np.linalg.norm(start)
        for it in range(max_iter):
            y = kernels.solve_shifted(d, e, lam, x)
            for c in cluster:
                y -= (c @ y) * c
            x = y / np.linalg.norm(y)
            tx = d * x
            tx[:-1] += e * x[1:]
            tx[1:] += e * x[:-1]
            if it >= 1 and np.linalg.norm(tx - lam * x) <= 1e2 * math.sqrt(n) * EPS * scale:
                break
        vecs.append(x)
    return vecs


def solve(slp, count, residual_tol=RESIDUAL_TOL):
    """Lowest ``count`` eigenpairs of the discretised problem.

    On a split domain the two halves are solved independently and merged
    (ties ordered left block first). Eigenvectors are normalised to
    ``u^T B u = 1`` and signed to have positive weighted mean.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    disc = discretize(slp)
    n_total = len(disc.centers)
    found = []
    op_norm = 0.0
    for bi, b in enumerate(disc.blocks):
        k = min(count, len(b.diag))
        root = np.sqrt(b.mass)
        d = b.diag / b.mass
        e = b.off / (root[:-1] * root[1:])
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise NumericalFailure("discretised operator has non-finite entries")
        op_norm = max(op_norm, *map(abs, kernels.gershgorin(d, e)))
        vals = kernels.bisect_eigenvalues(d, e, 0, k)
        for lam, x in zip(vals, _inverse_iteration(d, e, vals)):
            # bisection is only accurate to eps * ||C||; the Rayleigh quotient
            # in flux form is accurate to the square of the vector error
            ub = x / root
            lam = b.energy(ub) / float(np.sum(b.mass * ub * ub))
            u = np.zeros(n_total)
            u[b.cells] = ub
            found.append((float(lam), bi, u))
    found.sort(key=lambda item: (item[0], item[1]))
    found = found[:count]
    if len(found) < count:
        raise PreconditionError(f"grid has fewer than {count} cells")

    mass = disc.mass
    lams = np.array([f[0] for f in found])
    vecs = np.array([f[2] for f in found])
    for v in vecs:
        weighted = np.sum(mass * v)
        if weighted < 0 or (weighted == 0 and v[np.flatnonzero(np.abs(v) > 0)[0]] < 0):
            v *= -1.0
    residuals = np.array([
        np.linalg.norm(disc.stiffness_apply(v) - lam * mass * v) / np.linalg.norm(mass * v)
        for lam, v in zip(lams, vecs)])
    # fine grids cannot beat the backward-error floor eps * ||B^-1/2 A B^-1/2||
    declared = np.maximum(residual_tol * np.maximum(1.0, np.abs(lams)), 1e3 * EPS * op_norm)
    bad = residuals > declared
    if np.any(bad):
        raise NumericalFailure(
            f"inverse iteration did not converge for eigenvalue(s) {lams[bad]} "
            f"(residuals {residuals[bad]})")
    flags = np.zeros(len(lams), dtype=bool)
    close = np.abs(np.diff(lams)) <= DEGENERACY_GAP * np.abs(lams[1:])
    flags[:-1] |= close
    flags[1:] |= close
    meta = {"cells": slp.grid.cells,
            "placement": slp.grid.placement(slp.a1, slp.a2),
            "blocks": len(disc.blocks),
            "backend": kernels.BACKEND,
            "residual_tolerance": declared.tolist(),
            "label": slp.label}
    return SpectralResult(lams, vecs, residuals, flags, disc.centers, mass, meta,
                          np.array([f[1] for f in found]) if slp.split else None)


def rayleigh_quotient(slp, u):
    disc = discretize(slp)
    return disc.energy(np.asarray(u, dtype=float)) / float(np.sum(disc.mass * u * u))


# -- problem builders -------------------------------------------------------------

def assemble_transverse(profile, cs, s, grid=Grid1D()):
    """L_s: p = w = f(s, .), Dirichlet at both ends."""
    s = float(s)
    if grid.cells < 16:
        raise PreconditionError("transverse grids need at least 16 cells")

    def f(t):
        return jacobian(profile, s, t)

    return SturmLiouvilleProblem(p=f, w=f, a1=cs.a1, a2=cs.a2, grid=grid,
                                 label=f"transverse s={s!r}")


def assemble_effective(cs, m=0.0, grid=Grid1D()):
    """Fibre operator -(1/|t|)(|t| u')' + m^2/t^2 in L^2(|t| dt).

    A straddling interval is split at 0: Neumann there for m = 0,
    Dirichlet for m != 0.
    """
    m = float(m)
    q = None
    if m != 0.0:
        def q(t, _m2=m * m):
            return _m2 / np.abs(t)
    split = cs.a1 < 0.0 < cs.a2
    zero = None
    if split:
        zero = "neumann_at_zero" if m == 0.0 else "dirichlet_at_zero"
    return SturmLiouvilleProblem(p=np.abs, w=np.abs, a1=cs.a1, a2=cs.a2, q=q,
                                 split=split, zero_condition=zero, grid=grid,
                                 label=f"effective m={m!r}")


# -- refinement -------------------------------------------------------------------

@dataclass
class RefinedSpectrum:
    result: SpectralResult
    history: list                       # [(cells, eigenvalues)]
    converged: bool
    observed_order: float
    extrapolated: np.ndarray


def refine(slp, count=1, tol=1e-8, max_cells=MAX_CELLS):
    """Dyadic refinement until every requested eigenvalue moves by < tol."""
    grid = slp.grid
    history = []
    result = None
    converged = False
    while True:
        result = solve(slp.with_grid(grid), count)
        history.append((grid.cells, result.eigenvalues.copy()))
        if len(history) >= 2:
            change = np.abs(history[-1][1] - history[-2][1]).max()
            if change < tol:
                converged = True
                break
        if grid.cells * 2 > max_cells:
            break
        grid = grid.refined()
    order = float("nan")
    if len(history) >= 3:
        d1 = np.abs(history[-2][1][0] - history[-3][1][0])
        d2 = np.abs(history[-1][1][0] - history[-2][1][0])
        if d1 > 0 and d2 > 0:
            order = math.log2(d1 / d2)
    extrap = history[-1][1].copy()
    if len(history) >= 2:
        extrap = history[-1][1] + (history[-1][1] - history[-2][1]) / 3.0
    return RefinedSpectrum(result, history, converged, order, extrap)


# -- closed forms and sweeps ---------------------------------------------------------

def lambda1_exact(cs):
    """Lowest eigenvalue of the limiting annulus, from Bessel closed forms."""
    if cs.sign_class.value == "degenerate":
        return (bessel_j_zero(0, 1).value / cs.r2) ** 2
    return annulus_radial_eigenvalue(cs.r1, cs.r2, 1)


def effective_exact(cs, m, k):
    """Closed-form k-th distinct eigenvalue of the m-th fibre for integer m,
    or None when there is none."""
    if m != int(m):
        return None
    n = abs(int(m))
    if cs.a1 * cs.a2 > 0:
        return annulus_radial_eigenvalue(cs.r1, cs.r2, k, order=n)
    radii = sorted({abs(cs.a1), abs(cs.a2)} - {0.0})
    vals = sorted({(bessel_j_zero(n, j).value / r) ** 2 for r in radii for j in range(1, k + 1)})
    return vals[k - 1]


def distinct_levels(result):
    """Collapse flagged near-degenerate runs: (values, multiplicities)."""
    vals, mult = [], []
    lam = result.eigenvalues
    for i, v in enumerate(lam):
        if i and abs(v - lam[i - 1]) <= DEGENERACY_GAP * abs(v):
            mult[-1] += 1
        else:
            vals.append(float(v))
            mult.append(1)
    return np.array(vals), np.array(mult)


def lambda1_upper_bound(cs):
    """(pi / (r2 - r1))^2, a strict upper bound for lambda_1."""
    return (math.pi / (cs.r2 - cs.r1)) ** 2


@dataclass
class TransverseSweep:
    s: np.ndarray
    lam: np.ndarray
    lambda1: float          # discrete lambda_1 on the same grid
    grid: Grid1D

    @property
    def gap(self):
        return self.lam - self.lambda1


def lambda_of_s_sweep(profile, cs, s_samples, grid=Grid1D(), threads=None):
    s = np.asarray(s_samples, dtype=float)
    if not np.all(np.isfinite(s)):
        raise PreconditionError("s samples must be finite")

    def one(si):
        return solve(assemble_transverse(profile, cs, si, grid), 1).eigenvalues[0]

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            lam = np.array(list(pool.map(one, s)))
    else:
        lam = np.array([one(si) for si in s])
    lam1 = solve(assemble_effective(cs, 0.0, grid), 1).eigenvalues[0]
    return TransverseSweep(s, lam, float(lam1), grid)


def effective_table(cs, m_values, k_max, grid=Grid1D(), threads=None):
    """lambda_k^m for every m and k = 1..k_max, shape (len(m), k_max)."""
    def one(m):
        return solve(assemble_effective(cs, m, grid), k_max).eigenvalues

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, m_values))
    else:
        rows = [one(m) for m in m_values]
    return np.array(rows)


def _is_crosssection(obj):
    return isinstance(obj, CrossSection)

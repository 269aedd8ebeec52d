"""Hand-built test functions and the quantities they certify.

Two families live here:

* ``Psi_n = phi_n(s) psi_1(t)`` with the tent ``phi_n``; the sign of
  ``h[Psi_n] - lambda_1 ||Psi_n||^2`` certifies spectrum below lambda_1 on
  degenerate cross-sections.
* ``Psi_n^m = phi_n(s) exp(i m int_0^s |theta'|) psi_1^m(t)`` with a smooth
  bump travelling to infinity, used as a Weyl sequence by
  :func:`twistspec.spectra2d.weyl_residual`.

Integrals use composite Gauss-Legendre rules: panels in t are refined
geometrically toward t = 0, where ``f`` changes on the scale ``1/|theta'|``,
and panels in s break at the kinks of the tent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import CertificateError, NumericalFailure, PreconditionError
from .geometry import CrossSection, jacobian
from .specfun import bessel_j, bessel_j_zero
from . import sturm

GL_POINTS = 16


def _gauss(edges, points=GL_POINTS):
    """Nodes and weights of a composite Gauss-Legendre rule on ``edges``."""
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _graded_edges(r, levels=40, uniform=8):
    """Edges on (0, r): a few uniform panels, then halving toward 0."""
    outer = np.linspace(r / 2, r, uniform + 1)
    inner = r / 2 * 0.5 ** np.arange(1, levels)
    return np.concatenate([[0.0], inner[::-1], outer])


@dataclass(frozen=True)
class TentProfile:
    """1 on |s| < n, linear down to 0 on n <= |s| <= 2n."""
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError("tent index must be a positive integer")

    def __call__(self, s):
        a = np.abs(np.asarray(s, dtype=float))
        return np.clip(2.0 - a / self.n, 0.0, 1.0)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        ramp = (a > self.n) & (a < 2 * self.n)
        return np.where(ramp, -np.sign(s) / self.n, 0.0)

    @property
    def breakpoints(self):
        n = float(self.n)
        return np.array([-2 * n, -n, 0.0, n, 2 * n])

    @property
    def derivative_norm_sq(self):
        return 2.0 / self.n


def weight_w(p, s, t):
    """W = 1/t - f_t/f = 1 / (t (1 + theta'^2 t^2)); undefined at t = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t == 0.0):
        raise PreconditionError("W is singular at t = 0")
    k = p.rate(s) ** 2
    return 1.0 / (t * (1.0 + k * t * t))


def weight_w_times_dpsi(p, s, t, ground_state):
    """W psi_1', continuous through t = 0 because psi_1'/t stays bounded."""
    k = p.rate(s) ** 2
    t = np.asarray(t, dtype=float)
    return ground_state.dpsi_over_t(t) / (1.0 + k * t * t)


class DiskGroundState:
    """psi_1(t) = c J0(sqrt(lambda_1) |t|) on the longer half of (a1, a2),
    zero on the shorter one, normalised in L^2(|t| dt).

    When |a1| = a2 the left half is used.
    """

    def __init__(self, cs):
        if cs.a1 * cs.a2 > 0:
            raise PreconditionError("the disk ground state needs a1 * a2 <= 0")
        self.cs = cs
        self.radius = cs.r2
        self.side = -1.0 if -cs.a1 >= cs.a2 else 1.0
        self.j01 = bessel_j_zero(0, 1).value
        self.kappa = self.j01 / self.radius
        self.eigenvalue = self.kappa ** 2
        self.scale = 1.0 / math.sqrt(0.5 * self.radius ** 2 * bessel_j(1, self.j01) ** 2)

    def _support(self, t):
        return self.side * t > 0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = self.kappa * np.abs(t)
        out = np.where(self._support(t) & (x <= self.j01),
                       self.scale * bessel_j(0, np.minimum(x, self.j01)), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        x = np.minimum(self.kappa * np.abs(t), self.j01)
        val = -self.scale * self.kappa * bessel_j(1, x) * np.sign(t)
        out = np.where(self._support(t), val, 0.0)
        return out if out.ndim else float(out)

    def dpsi_over_t(self, t):
        """psi_1'(t)/t = -c kappa^2 J1(x)/x, with J1(x)/x -> 1/2 at 0."""
        t = np.asarray(t, dtype=float)
        x = np.minimum(self.kappa * np.abs(t), self.j01)
        small = x < 1e-8
        ratio = np.where(small, 0.5 - x * x / 16.0,
                         bessel_j(1, np.where(small, 1.0, x)) / np.where(small, 1.0, x))
        out = np.where(self._support(t) | (t == 0.0),
                       -self.scale * self.kappa ** 2 * ratio, 0.0)
        return out if out.ndim else float(out)

    def quadrature(self, points=GL_POINTS):
        """Composite rule on the support, graded toward t = 0."""
        nodes, weights = _gauss(_graded_edges(self.radius), points)
        return self.side * nodes, weights

    @cached_property
    def l2_norm_sq(self):
        t, w = self.quadrature()
        return float(np.sum(w * self(t) ** 2))


def closed_form_psi1(cs):
    """Ground state of the effective operator for |a1| >= a2 >= 0 >= a1."""
    if not (cs.a1 <= 0.0 <= cs.a2 and -cs.a1 >= cs.a2):
        raise PreconditionError("closed form needs |a1| >= a2 >= 0 >= a1")
    return DiskGroundState(cs)


@dataclass(frozen=True)
class GapBreakdown:
    n: int
    boundary_term: float
    coupling_term: float
    bound: float            # (2/n) ||psi_1||^2_{L^2}
    norm_sq: float          # ||Psi_n||^2 in L^2(f ds dt)

    @property
    def total(self):
        return self.boundary_term + self.coupling_term

    @property
    def certifies(self):
        return self.total < 0.0


def _s_rule(tent, panel=1.0, points=GL_POINTS):
    edges = []
    bp = tent.breakpoints
    for a, b in zip(bp[:-1], bp[1:]):
        k = max(1, int(math.ceil((b - a) / panel)))
        edges.append(np.linspace(a, b, k + 1)[:-1])
    edges.append([bp[-1]])
    return _gauss(np.concatenate(edges), points)


def gap_certificate(p, cs, n, s_panel=1.0, points=GL_POINTS):
    """Closed-form right-hand side of the gap identity for Psi_n = phi_n psi_1.

    ``h[Psi_n] - lambda_1 ||Psi_n||^2 = ||phi_n' psi_1 / f||^2
                                      + int phi_n^2 psi_1 psi_1' / (t f)``.
    """
    if cs.a1 * cs.a2 > 0:
        raise PreconditionError("the certificate needs a1 * a2 <= 0")
    gs = DiskGroundState(cs)
    tent = TentProfile(n)
    s, ws = _s_rule(tent, s_panel, points)
    t, wt = gs.quadrature(points)
    psi = gs(t)
    f = jacobian(p, s[:, None], t[None, :])
    inv_f = 1.0 / f
    boundary = float(ws @ (tent.derivative(s) ** 2 * ((inv_f * psi * psi) @ wt)))
    coupling = float(ws @ (tent(s) ** 2 * ((inv_f * psi * gs.dpsi_over_t(t)) @ wt)))
    norm_sq = float(ws @ (tent(s) ** 2 * ((f * psi * psi) @ wt)))
    if coupling > 0.0:
        raise CertificateError(f"coupling term {coupling!r} > 0 at n={n}")
    return GapBreakdown(int(n), boundary, coupling, tent.derivative_norm_sq * gs.l2_norm_sq, norm_sq)


def gap_direct(p, cs, n, s_panel=1.0, points=GL_POINTS):
    """h[Psi_n] - lambda_1 ||Psi_n||^2 by direct quadrature of the form."""
    gs = DiskGroundState(cs)
    tent = TentProfile(n)
    s, ws = _s_rule(tent, s_panel, points)
    t, wt = gs.quadrature(points)
    psi, dpsi = gs(t), gs.derivative(t)
    f = jacobian(p, s[:, None], t[None, :])
    ds_part = ws @ (tent.derivative(s) ** 2 * ((psi * psi / f) @ wt))
    dt_part = ws @ (tent(s) ** 2 * ((f * dpsi * dpsi) @ wt))
    mass = ws @ (tent(s) ** 2 * ((f * psi * psi) @ wt))
    return float(ds_part + dt_part - gs.eigenvalue * mass)


@dataclass
class GapScan:
    breakdowns: list
    n_star: int | None      # first n after which every total is negative

    @property
    def coupling_decreasing(self):
        c = [b.coupling_term for b in self.breakdowns]
        return all(y < x for x, y in zip(c, c[1:]))

    def boundary_slope(self):
        n = np.array([b.n for b in self.breakdowns], dtype=float)
        y = np.array([b.boundary_term for b in self.breakdowns])
        return float(np.polyfit(np.log(n), np.log(y), 1)[0])


def gap_scan(p, cs, n_values=(4, 8, 16, 32, 64), **kw):
    rows = [gap_certificate(p, cs, n, **kw) for n in sorted(n_values)]
    n_star = None
    for i, row in enumerate(rows):
        if all(r.total < 0 for r in rows[i:]):
            n_star = row.n
            break
    return GapScan(rows, n_star)


# -- singular sequences ---------------------------------------------------------------

def _bump(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xi = np.where(inside, x, 0.5)
    return np.where(inside, np.exp(-1.0 / (xi * (1.0 - xi))), 0.0)


_BUMP_SCALE = 1.0 / math.sqrt(integrate.quad(lambda x: float(_bump(x)) ** 2, 0.0, 1.0,
                                             epsabs=0, epsrel=1e-13)[0])


def bump_profile(n, s):
    """phi_n(s) = n^-1/2 phi_0(s/n - n), unit L^2 norm, support [n^2, n^2 + n]."""
    s = np.asarray(s, dtype=float)
    return _BUMP_SCALE * _bump(s / n - n) / math.sqrt(n)


class PhaseIntegral:
    """s -> int_0^s |theta'(sigma)| d sigma by adaptive quadrature between
    consecutive requested points."""

    def __init__(self, p, tol=1e-8):
        self.p = p
        self.tol = tol

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        order = np.argsort(flat)
        knots = flat[order]
        fn = lambda x: float(abs(self.p.rate(x)))
        out = np.empty_like(knots)
        acc, err_total, prev = 0.0, 0.0, 0.0
        # walk outward from 0 on each side so the error does not depend on a far start point
        neg = np.flatnonzero(knots < 0)[::-1]
        pos = np.flatnonzero(knots >= 0)
        for idx, sign in ((pos, 1.0), (neg, -1.0)):
            acc, prev = 0.0, 0.0
            for i in idx:
                val, err = integrate.quad(fn, prev, knots[i], epsabs=self.tol * 1e-3,
                                          epsrel=1e-13, limit=200)
                acc += val
                err_total += err
                prev = knots[i]
                out[i] = acc
        if err_total > self.tol:
            raise NumericalFailure(f"phase integral error estimate {err_total:.3g} exceeds {self.tol}")
        result = np.empty_like(out)
        result[order] = out
        return result.reshape(s.shape)


@dataclass
class FibreGroundState:
    """psi_1^m from the sturm solver, normalised in L^2(|t| dt)."""
    cs: CrossSection
    m: float
    eigenvalue: float
    centers: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.centers, self.values, left=0.0, right=0.0)

    @property
    def l2_norm_sq(self):
        disc_w = np.diff(self.cs_faces)
        return float(np.sum(disc_w * self.values ** 2))

    @property
    def cs_faces(self):
        return sturm.Grid1D(len(self.centers)).faces(self.cs.a1, self.cs.a2)


def fibre_ground_state(cs, m, cells=2048):
    """Lowest eigenfunction of the m-th fibre on ``cells`` cells.

    For |a1| = a2 the ground state is doubly degenerate; the mirror-even
    combination is returned, which is continuous across t = 0.
    """
    res = sturm.solve(sturm.assemble_effective(cs, m, sturm.Grid1D(cells)), 2)
    v = res.eigenvectors[0].copy()
    if res.multiplicity_flags[0] and cs.a1 == -cs.a2:
        v = (res.eigenvectors[0] + res.eigenvectors[1]) / math.sqrt(2.0)
    return FibreGroundState(cs, float(m), float(res.eigenvalues[0]), res.centers, v)


class SingularSequence:
    """Psi_n^m(s, t) = phi_n(s) omega^m(s) psi_1^m(t)."""

    def __init__(self, p, cs, m, n, t_cells=2048, phase_tol=1e-8):
        if int(n) != n or n < 1:
            raise PreconditionError("n must be a positive integer")
        self.p, self.cs, self.m, self.n = p, cs, float(m), int(n)
        self.ground = fibre_ground_state(cs, m, t_cells)
        self.phase = PhaseIntegral(p, phase_tol)

    @property
    def support(self):
        return float(self.n ** 2), float(self.n ** 2 + self.n)

    @property
    def shift(self):
        return self.ground.eigenvalue

    def longitudinal(self, s):
        """phi_n(s) omega^m(s) as a complex array."""
        s = np.asarray(s, dtype=float)
        phi = bump_profile(self.n, s)
        if self.m == 0.0:
            return phi.astype(complex)
        return phi * np.exp(1j * self.m * self.phase(s))

    def sample(self, s, t):
        """Values on the tensor grid ``s x t``, shape (len(s), len(t))."""
        return np.outer(self.longitudinal(s), self.ground(t))

    def norm_sq(self, points=GL_POINTS):
        """||Psi_n^m||^2 in L^2(f ds dt)."""
        lo, hi = self.support
        s, ws = _gauss(np.linspace(lo, hi, 4 * self.n + 1), points)
        faces = self.ground.cs_faces
        t, wt = _gauss(faces, 2)
        vals = self.ground(t)
        f = jacobian(self.p, s[:, None], t[None, :])
        return float(ws @ (bump_profile(self.n, s) ** 2 * ((f * vals * vals) @ wt)))

    def check_norm(self):
        """||Psi_n^m|| >= ||psi_1^m||_{L^2}, since f >= 1 and ||phi_n|| = 1."""
        lower = self.ground.l2_norm_sq
        value = self.norm_sq()
        if value < lower * (1.0 - 1e-6):
            raise CertificateError(f"norm {value} below lower bound {lower}")
        return value, lower


def singular_sequence(p, cs, m, n, t_cells=2048):
    return SingularSequence(p, cs, m, n, t_cells)

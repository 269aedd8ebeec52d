"""Acceptance suite: ten numbered checks with closed-form oracles.

Each check returns a :class:`CriterionResult`. A check whose tolerance lies
below what the discretisation can reach at its finest allowed grid reports
``tolerance infeasible`` instead of a plain failure.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import spectra2d, sturm, variational
from .geometry import CrossSection, constant_rate, interval_mode, linear_rate, sqrt_rate, vanishing_rate
from .specfun import annulus_radial_eigenvalue, bessel_j_zero

J01_SQ = 5.783185962946785

DEFAULT_TOLERANCES = {
    "disk": 1e-6,              # 1: |lambda_1 - j01^2|
    "degenerate_mass": 1e-8,   # 3: weighted mass on the short half
    "degenerate_eig": 1e-6,    # 3: |lambda_1 - j01^2/a1^2|
    "transverse_final": 1e-2,  # 4: |lambda(256) - lambda_1|
    "annulus": 1e-6,           # 5: |sturm - cross-product root|
    "slope": 0.1,              # 6: |slope + 1|
    "s_drift": 1e-3,           # 7: relative shift S=12 -> 24
    "flat_1d": 1e-8,           # 10: relative, refined 1D
    "flat_2d": 5e-4,           # 10: relative, 2D rectangle at fixed grid
}

RUNTIME_LIMITS = {1: 5.0, 2: 5.0, 3: 30.0, 4: 30.0, 5: 30.0, 6: 10.0, 7: 180.0, 8: 180.0,
                  9: 300.0, 10: 60.0}

PASS, FAIL, INFEASIBLE = "pass", "fail", "tolerance infeasible"


@dataclass
class CriterionResult:
    number: int
    title: str
    anchor: str
    status: str = FAIL
    details: dict = field(default_factory=dict)
    runtime: float = 0.0
    limit: float | None = None

    @property
    def passed(self):
        return self.status == PASS

    def line(self):
        tag = {PASS: "PASS", FAIL: "FAIL", INFEASIBLE: "INFEASIBLE"}[self.status]
        return f"[{tag}] criterion {self.number:2d}: {self.title} ({self.runtime:.2f}s)"


def _refined(slp, count, tol):
    """Refine until successive values move by < tol/10; report feasibility."""
    ref = sturm.refine(slp, count, tol=min(tol / 10.0, 1e-8))
    return ref


def _status(ok, error, tol, converged):
    if ok:
        return PASS
    if not converged and error > tol:
        return INFEASIBLE
    return FAIL


def criterion_1(tol):
    cs = CrossSection(-1.0, 1.0)
    ref = _refined(sturm.assemble_effective(cs, 0.0), 1, tol["disk"])
    lam = float(ref.result.eigenvalues[0])
    err = abs(lam - J01_SQ)
    exact = bessel_j_zero(0, 1).value ** 2
    ok = err <= tol["disk"] and abs(exact - J01_SQ) < 1e-12
    return _status(ok, err, tol["disk"], ref.converged), {
        "lambda1": lam, "oracle": J01_SQ, "error": err, "cells": ref.history[-1][0],
        "observed_order": ref.observed_order}


def criterion_2(tol):
    d = CrossSection(-1.0, 1.0)
    a = CrossSection(1.0, 2.0)
    lam_d = float(sturm.refine(sturm.assemble_effective(d, 0.0), 1).result.eigenvalues[0])
    lam_a = float(sturm.refine(sturm.assemble_effective(a, 0.0), 1).result.eigenvalues[0])
    e1d, e2d = interval_mode(d, 1)[0], interval_mode(d, 2)[0]
    e1a = interval_mode(a, 1)[0]
    checks = {
        "E1 < lambda1 (-1,1)": e1d < lam_d,
        "lambda1 < E2 (-1,1)": lam_d < e2d,
        "lambda1 < E1 (1,2)": lam_a < e1a,
        "lambda1 < (pi/(r2-r1))^2 (1,2)": lam_a < sturm.lambda1_upper_bound(a),
    }
    return (PASS if all(checks.values()) else FAIL), {
        "lambda1_disk": lam_d, "lambda1_annulus": lam_a, "E1_disk": e1d, "E2_disk": e2d,
        "E1_annulus": e1a, "checks": checks}


def criterion_3(tol):
    cs = CrossSection(-1.0, 0.5)
    ref = _refined(sturm.assemble_effective(cs, 0.0), 1, tol["degenerate_eig"])
    res = ref.result
    short = res.weighted_norm_sq(0, res.centers > 0)
    lam = float(res.eigenvalues[0])
    target = J01_SQ / cs.a1 ** 2
    err = abs(lam - target)
    sym = sturm.solve(sturm.assemble_effective(CrossSection(-1.0, 1.0), 0.0), 2)
    flag = bool(sym.multiplicity_flags[0] and sym.multiplicity_flags[1])
    ok = short < tol["degenerate_mass"] and err <= tol["degenerate_eig"] and flag
    status = _status(ok, err, tol["degenerate_eig"], ref.converged) if short < tol["degenerate_mass"] and flag else FAIL
    return status, {"mass_short_half": short, "lambda1": lam, "oracle": target, "error": err,
                    "degeneracy_flag_symmetric": flag}


def criterion_4(tol):
    cs = CrossSection(-1.0, 1.0)
    samples = [4.0, 16.0, 64.0, 256.0]
    sweep = sturm.lambda_of_s_sweep(linear_rate(), cs, samples, sturm.Grid1D(8192))
    gap = np.abs(sweep.lam - J01_SQ)
    dec = bool(np.all(np.diff(gap) < 0))
    ok = dec and gap[-1] < tol["transverse_final"]
    return (PASS if ok else FAIL), {"s": samples, "lambda_s": sweep.lam.tolist(),
                                    "abs_gap": gap.tolist(), "strictly_decreasing": dec}


def criterion_5(tol):
    cs = CrossSection(1.0, 2.0)
    ref = _refined(sturm.assemble_effective(cs, 0.0), 3, tol["annulus"])
    oracle = [annulus_radial_eigenvalue(1.0, 2.0, k) for k in (1, 2, 3)]
    err = np.abs(ref.result.eigenvalues - oracle)
    ok = bool(np.all(err <= tol["annulus"]))
    return _status(ok, float(err.max()), tol["annulus"], ref.converged), {
        "sturm": ref.result.eigenvalues.tolist(), "oracle": oracle, "error": err.tolist(),
        "cells": ref.history[-1][0]}


def criterion_6(tol):
    cs = CrossSection(-1.0, 1.0)
    scan = variational.gap_scan(linear_rate(), cs, (4, 8, 16, 32, 64))
    gs = variational.DiskGroundState(cs)
    cap = 2.0 * gs.l2_norm_sq
    scaled = [b.boundary_term * b.n for b in scan.breakdowns]
    slope = scan.boundary_slope()
    checks = {
        "total < 0 for some n <= 64": any(b.total < 0 for b in scan.breakdowns),
        "n * boundary_term <= 2 ||psi1||^2": all(v <= cap for v in scaled),
        "slope within tolerance of -1": abs(slope + 1.0) <= tol["slope"],
    }
    return (PASS if all(checks.values()) else FAIL), {
        "n": [b.n for b in scan.breakdowns], "boundary": [b.boundary_term for b in scan.breakdowns],
        "coupling": [b.coupling_term for b in scan.breakdowns],
        "total": [b.total for b in scan.breakdowns], "n_times_boundary": scaled,
        "cap": cap, "slope": slope, "n_star": scan.n_star, "checks": checks}


def criterion_7(tol):
    cs = CrossSection(-1.0, 1.0)
    p = linear_rate()
    g12 = spectra2d.Grid2D(12.0, 384, 64)
    coarse, fine, _ = spectra2d.grid_convergence(p, cs, g12)
    lam12 = float(coarse[0])
    grid_err = abs(float(fine[0]) - lam12)
    lam24 = float(spectra2d.lowest_eigenpairs(
        spectra2d.assemble(p, cs, spectra2d.Grid2D(24.0, 768, 64)), 1).eigenvalues[0])
    drift = abs(lam24 - lam12) / abs(lam12)
    margin = J01_SQ - lam12
    ok = margin > grid_err and drift < tol["s_drift"]
    return (PASS if ok else FAIL), {"lambda_S12": lam12, "lambda_S12_refined": float(fine[0]),
                                    "grid_error": grid_err, "margin": margin,
                                    "lambda_S24": lam24, "relative_drift": drift}


def _bracket_cases():
    return [
        ("linear (-1,1) S=12", linear_rate(), CrossSection(-1.0, 1.0), spectra2d.Grid2D(12.0, 384, 64)),
        ("flat (-1,1) S=4", constant_rate(0.0), CrossSection(-1.0, 1.0), spectra2d.Grid2D(4.0, 128, 64)),
        ("linear (1,2) S=6", linear_rate(), CrossSection(1.0, 2.0), spectra2d.Grid2D(6.0, 192, 64)),
        ("vanishing (-1,1) S=6", vanishing_rate(), CrossSection(-1.0, 1.0), spectra2d.Grid2D(6.0, 192, 64)),
        ("sqrt (-1,0.5) S=6", sqrt_rate(), CrossSection(-1.0, 0.5), spectra2d.Grid2D(6.0, 192, 64)),
        ("uniform (-0.5,1) S=6", constant_rate(1.0), CrossSection(-0.5, 1.0), spectra2d.Grid2D(6.0, 192, 64)),
    ]


def criterion_8(tol):
    rows = {}
    for name, p, cs, grid in _bracket_cases():
        rd, neumann = spectra2d.bracket_pair(p, cs, grid, 1)
        d, n = rd.eigenvalues[0], neumann[0]
        rows[name] = {"dirichlet": float(d), "neumann": float(n), "holds": bool(n <= d)}
    return (PASS if all(r["holds"] for r in rows.values()) else FAIL), rows


def criterion_9(tol):
    cs = CrossSection(-1.0, 1.0)
    p = linear_rate()
    out = {}
    for m in (0.0, 1.0):
        vals = []
        for n in (2, 4, 8):
            grid = spectra2d.weyl_grid(n, m)
            vals.append(spectra2d.weyl_residual(spectra2d.assemble(p, cs, grid), p, cs, m, n))
        out[f"m={m:g}"] = vals
    ok = all(all(b < a for a, b in zip(v, v[1:])) for v in out.values())
    return (PASS if ok else FAIL), {"n": [2, 4, 8], "residuals": out}


def criterion_10(tol):
    cs = CrossSection(-1.0, 1.0)
    flat = constant_rate(0.0)
    exact = np.array([interval_mode(cs, k)[0] for k in (1, 2, 3, 4)])
    ref = sturm.refine(sturm.assemble_transverse(flat, cs, 0.0), 4, tol=1e-9)
    rel1 = np.abs(ref.extrapolated - exact) / exact
    ok1 = bool(np.all(rel1 <= tol["flat_1d"]))

    S = 2.0
    grid = spectra2d.Grid2D(S, 128, 128)
    got = spectra2d.lowest_eigenpairs(spectra2d.assemble(flat, cs, grid), 3).eigenvalues
    rect = np.sort([(j * math.pi / (2 * S)) ** 2 + interval_mode(cs, k)[0]
                    for j in range(1, 6) for k in range(1, 4)])[:3]
    rel2 = np.abs(got - rect) / rect
    ok2 = bool(np.all(rel2 <= tol["flat_2d"]))
    status = PASS if ok1 and ok2 else FAIL
    if not ok1 and not ref.converged and rel1.max() > tol["flat_1d"]:
        status = INFEASIBLE
    return status, {"E_k": exact.tolist(), "sturm_refined": ref.extrapolated.tolist(),
                    "rel_error_1d": rel1.tolist(), "rectangle": rect.tolist(),
                    "spectra2d": got.tolist(), "rel_error_2d": rel2.tolist()}


CRITERIA = [
    (1, "disk closed form lambda_1 = j01^2", "lambda_1 = (j_{0,1}/r2)^2 for a1*a2 <= 0", criterion_1),
    (2, "ordering E1 < lambda_1 < E2 and annulus upper bound", "E1 < lambda_1 < E2; lambda_1 < (pi/(r2-r1))^2", criterion_2),
    (3, "degenerate ground state on the longer half", "psi_1 vanishes on the shorter half; double eigenvalue when |a1| = a2", criterion_3),
    (4, "transverse eigenvalue tends to lambda_1", "liminf lambda(s) >= lambda_1 under diverging twist", criterion_4),
    (5, "annulus cross-product oracle", "J0(k r1) Y0(k r2) = J0(k r2) Y0(k r1)", criterion_5),
    (6, "variational gap certificate", "h[Psi_n] - lambda_1 ||Psi_n||^2 < 0", criterion_6),
    (7, "2D eigenvalue below lambda_1", "discrete spectrum in (0, lambda_1) for a1*a2 <= 0", criterion_7),
    (8, "Neumann <= Dirichlet bracketing", "form-domain inclusion", criterion_8),
    (9, "Weyl residual decay", "||(H - lambda_1^m) Psi_n^m||_* -> 0", criterion_9),
    (10, "flat strip sanity", "theta' = 0 gives E_k and the separable rectangle", criterion_10),
]


def run_criterion(number, tolerances=None):
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    num, title, anchor, fn = CRITERIA[number - 1]
    res = CriterionResult(num, title, anchor, limit=RUNTIME_LIMITS.get(num))
    t0 = time.perf_counter()
    res.status, res.details = fn(tol)
    res.runtime = time.perf_counter() - t0
    if res.limit is not None and res.runtime > res.limit and res.status == PASS:
        res.status = FAIL
        res.details["runtime_exceeded"] = True
    return res


def run_all(tolerances=None, numbers=None, threads=None, echo=None):
    numbers = list(numbers or range(1, len(CRITERIA) + 1))
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda k: run_criterion(k, tolerances), numbers))
        if echo:
            for r in results:
                echo(r.line())
        return results
    results = []
    for k in numbers:
        r = run_criterion(k, tolerances)
        if echo:
            echo(r.line())
        results.append(r)
    return results

"""Command-line front end: ``twistspec <command> [--config PATH] [--out DIR]
[--format csv|json] [--threads N]``.

Every command writes one table (``<command>.csv`` or ``<command>.json``)
and a run manifest (``<command>_manifest.json``) echoing the effective
configuration, timings, diagnostics and the pass/fail state of every
inequality it asserts.

Exit codes: 0 ok, 1 an asserted inequality failed, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, acceptance, kernels, spectra2d, sturm, variational
from .config import default_config, load
from .errors import ConfigurationError, InvariantViolation, NumericalFailure, PreconditionError
from .geometry import (DivergenceClass, SignClass, gauss_curvature, interval_mode,
                       mean_curvature, potential_v1, potential_v2)

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_QUANTITY_FN = {"gauss_curvature": gauss_curvature, "mean_curvature": mean_curvature,
                "v1": potential_v1, "v2": potential_v2}


class Run:
    """Collects table rows, checks and timings for one command."""

    def __init__(self, command, cfg, threads):
        self.command = command
        self.cfg = cfg
        self.threads = threads
        self.columns = []
        self.rows = []
        self.checks = []
        self.timings = {}
        self.diagnostics = {}

    def check(self, name, anchor, passed):
        self.checks.append({"name": name, "anchor": anchor, "passed": bool(passed)})

    def timed(self, label, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        self.timings[label] = self.timings.get(label, 0.0) + time.perf_counter() - t0
        return out

    @property
    def ok(self):
        return all(c["passed"] for c in self.checks)


# -- serialisation ---------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_outputs(run, out_dir, fmt):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        table = out_dir / f"{run.command}.csv"
        with table.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(run.columns)
            for row in run.rows:
                w.writerow([_cell(v) for v in row])
    else:
        table = out_dir / f"{run.command}.json"
        records = [dict(zip(run.columns, row)) for row in run.rows]
        table.write_text(json.dumps(_jsonable(records), indent=1) + "\n")
    manifest = {
        "command": run.command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "threads": run.threads,
        "config": run.cfg.to_dict(),
        "timings_s": run.timings,
        "diagnostics": run.diagnostics,
        "checks": run.checks,
        "status": "pass" if run.ok else "fail",
        "table": table.name,
    }
    path = out_dir / f"{run.command}_manifest.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=1, sort_keys=False) + "\n")
    return table, path


# -- commands ----------------------------------------------------------------------------

def cmd_transverse(run):
    cfg = run.cfg
    p, cs = cfg.build_profile(), cfg.build_cross_section()
    tr = cfg.transverse
    sweep = run.timed("sweep", sturm.lambda_of_s_sweep, p, cs, tr.s, sturm.Grid1D(tr.cells),
                      threads=run.threads)
    lam1 = sturm.lambda1_exact(cs)
    t_probe = 0.5 * (cs.a1 + cs.a2) if tr.t_probe is None else tr.t_probe
    run.columns = ["s", "lambda_s", "lambda1", "gap"] + list(tr.quantities)
    for s, lam in zip(sweep.s, sweep.lam):
        extra = [float(_QUANTITY_FN[q](p, s, t_probe)) for q in tr.quantities]
        run.rows.append([float(s), float(lam), lam1, float(lam - lam1)] + extra)

    # s*: first sample from which |gap| decreases along increasing |s|
    order = np.argsort(np.abs(sweep.s))
    gaps = np.abs(sweep.lam[order] - lam1)
    s_star = None
    for i in range(len(gaps)):
        if np.all(np.diff(gaps[i:]) < 0):
            s_star = float(np.abs(sweep.s[order][i]))
            break
    run.diagnostics.update({"lambda1_closed_form": lam1, "lambda1_discrete": sweep.lambda1,
                            "s_star": s_star, "t_probe": t_probe, "cells": tr.cells})
    run.check("lambda1 < (pi/(r2-r1))^2", "upper bound for the limiting annulus eigenvalue",
              sweep.lambda1 < sturm.lambda1_upper_bound(cs))


def cmd_effective(run):
    cfg = run.cfg
    cs = cfg.build_cross_section()
    ef = cfg.effective
    table, mult, meta = {}, {}, {}
    # two halves of a split domain can each contribute every level: ask for 2k
    count = 2 * ef.k if cs.straddles_zero else ef.k
    for m in ef.m:
        slp = sturm.assemble_effective(cs, m, sturm.Grid1D(ef.cells))
        if ef.refine:
            ref = run.timed("solve", sturm.refine, slp, count, tol=ef.tol)
            result = ref.result
            meta[repr(m)] = {"cells": ref.history[-1][0], "converged": ref.converged,
                             "observed_order": ref.observed_order}
        else:
            result = run.timed("solve", sturm.solve, slp, count)
            meta[repr(m)] = {"cells": ef.cells}
        vals, mults = sturm.distinct_levels(result)
        table[m], mult[m] = vals[:ef.k], mults[:ef.k]
    run.columns = ["m", "k", "lambda", "multiplicity", "closed_form", "abs_error"]
    for m in ef.m:
        for k in range(1, len(table[m]) + 1):
            exact = sturm.effective_exact(cs, m, k)
            lam = float(table[m][k - 1])
            run.rows.append([m, k, lam, int(mult[m][k - 1]), exact,
                             None if exact is None else abs(lam - exact)])
    run.diagnostics["grids"] = meta

    nonneg = sorted({abs(m) for m in ef.m})
    first = [float(table[next(x for x in ef.m if abs(x) == a)][0]) for a in nonneg]
    run.check("lambda_1^m strictly increasing in |m|", "m -> lambda_1^m increasing on m >= 0",
              all(b > a for a, b in zip(first, first[1:])))
    run.check("lambda_k^m strictly increasing in k", "spectral ordering of each fibre",
              all(np.all(np.diff(table[m]) > 0) for m in ef.m))
    if 0.0 in table:
        lam1 = float(table[0.0][0])
        run.check("lambda1 < (pi/(r2-r1))^2", "upper bound for the limiting annulus eigenvalue",
                  lam1 < sturm.lambda1_upper_bound(cs))
        if cs.sign_class is SignClass.DEGENERATE:
            run.check("lambda1 < E2", "degenerate cross-sections: lambda_1 below E_2",
                      lam1 < interval_mode(cs, 2)[0])
            if cs.a1 == -cs.a2:
                run.check("E1 < lambda1", "symmetric cross-section: E_1 < lambda_1",
                          interval_mode(cs, 1)[0] < lam1)


def cmd_spectrum2d(run):
    cfg = run.cfg
    p, cs = cfg.build_profile(), cfg.build_cross_section()
    b = cfg.spectrum2d
    rep = run.timed("bracket", spectra2d.bracket_discrete_spectrum, p, cs, b.S, density=b.density,
                    nt=b.nt, count=b.count, margin=b.margin, tol=b.tol, threads=run.threads)
    run.columns = ["S", "ns", "nt", "end_condition", "index", "eigenvalue", "below_threshold"]
    thr = rep.threshold
    for row in rep.rows:
        for end, vals in (("dirichlet_ends", row.dirichlet), ("neumann_ends", row.neumann)):
            for i, v in enumerate(vals, start=1):
                below = None if thr is None else bool(v < thr - b.margin)
                run.rows.append([row.S, row.ns, b.nt, end, i, float(v), below])
    run.diagnostics.update({
        "threshold": thr, "threshold_kind": {DivergenceClass.DIVERGING: "lambda1",
                                             DivergenceClass.VANISHING: "E1"}.get(p.divergence_class),
        "below_counts": {repr(r.S): r.below for r in rep.rows},
        "S_stable": rep.stable, "margin": b.margin})
    run.check("neumann_ends <= dirichlet_ends", "form-domain inclusion bracketing", rep.bracketing_holds)
    run.check("dirichlet_ends nonincreasing in S", "domain monotonicity", rep.dirichlet_monotone)
    if cs.sign_class is SignClass.DEGENERATE and p.divergence_class is DivergenceClass.DIVERGING:
        run.check("count below lambda1 >= 1", "discrete spectrum below lambda_1 for a1*a2 <= 0",
                  (rep.rows[-1].below or 0) >= 1)


def cmd_gap(run):
    cfg = run.cfg
    p, cs = cfg.build_profile(), cfg.build_cross_section()
    if cs.a1 * cs.a2 > 0:
        raise ConfigurationError("gap: the certificate needs a cross-section with a1*a2 <= 0")
    rows = []
    for n in sorted(cfg.gap.n):
        br = run.timed("certificate", variational.gap_certificate, p, cs, n, s_panel=cfg.gap.s_panel)
        direct = run.timed("direct", variational.gap_direct, p, cs, n, s_panel=cfg.gap.s_panel)
        rows.append((br, direct))
    run.columns = ["n", "boundary_term", "coupling_term", "total", "bound", "direct", "rel_diff"]
    for br, direct in rows:
        run.rows.append([br.n, br.boundary_term, br.coupling_term, br.total, br.bound, direct,
                         abs(br.total - direct) / max(abs(direct), 1e-300)])
    totals = [br.total for br, _ in rows]
    n_star = None
    for i, (br, _) in enumerate(rows):
        if all(t < 0 for t in totals[i:]):
            n_star = br.n
            break
    run.diagnostics["n_star"] = n_star
    c = [br.coupling_term for br, _ in rows]
    run.check("coupling term decreasing in n", "n -> c_n decreasing", all(y < x for x, y in zip(c, c[1:])))
    run.check("boundary_term <= (2/n) ||psi1||^2", "tent bound on the longitudinal energy",
              all(br.boundary_term <= br.bound for br, _ in rows))
    run.check("total < 0 for some n", "h[Psi_n] - lambda_1 ||Psi_n||^2 < 0", any(t < 0 for t in totals))
    run.check("identity agrees with direct quadrature to 1e-6", "integration-by-parts identity",
              all(r[-1] <= 1e-6 for r in run.rows))


def cmd_weyl(run):
    cfg = run.cfg
    p, cs = cfg.build_profile(), cfg.build_cross_section()
    w = cfg.weyl
    jobs = [(m, n) for m in w.m for n in sorted(w.n)]

    def one(job):
        m, n = job
        grid = spectra2d.weyl_grid(n, m, nt=w.nt)
        asm = spectra2d.assemble(p, cs, grid)
        seq = variational.singular_sequence(p, cs, m, n, t_cells=w.nt)
        norm, lower = seq.check_norm()
        return (m, n, spectra2d.weyl_residual(asm, p, cs, m, n), seq.shift, grid, norm, lower)

    if run.threads and run.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(run.threads) as pool:
            results = run.timed("residuals", lambda: list(pool.map(one, jobs)))
    else:
        results = run.timed("residuals", lambda: [one(j) for j in jobs])
    run.columns = ["m", "n", "residual", "lambda1_m", "S", "ns", "nt", "norm_sq", "norm_lower"]
    for m, n, r, lam, g, norm, lower in results:
        run.rows.append([m, n, r, lam, g.s_truncation, g.ns, g.nt, norm, lower])
    if p.divergence_class is DivergenceClass.DIVERGING:
        for m in w.m:
            vals = [r for mm, _, r, *_ in results if mm == m]
            run.check(f"residual strictly decreasing in n (m={m!r})", "Weyl sequence at lambda_1^m",
                      all(b < a for a, b in zip(vals, vals[1:])))
    else:
        run.diagnostics["note"] = "profile is not diverging; residuals reported without assertion"


def cmd_verify(run):
    tol = run.cfg.verify.tolerances
    results = run.timed("acceptance", acceptance.run_all, tol, threads=run.threads, echo=print)
    run.columns = ["criterion", "title", "status", "runtime_s", "limit_s"]
    for r in results:
        run.rows.append([r.number, r.title, r.status, r.runtime, r.limit])
        run.check(f"criterion {r.number}: {r.title}", r.anchor, r.passed)
    run.diagnostics["criteria"] = {str(r.number): {"status": r.status, **r.details} for r in results}
    run.diagnostics["tolerances"] = {**acceptance.DEFAULT_TOLERANCES, **tol}


COMMANDS = {
    "transverse": (cmd_transverse, "lowest transverse eigenvalue lambda(s) along s"),
    "effective": (cmd_effective, "eigenvalues of the fibres of the effective operator"),
    "spectrum2d": (cmd_spectrum2d, "Dirichlet/Neumann bracketing of the truncated 2D operator"),
    "gap": (cmd_gap, "variational certificate below lambda_1"),
    "weyl": (cmd_weyl, "Weyl-sequence residual decay"),
    "verify": (cmd_verify, "run the acceptance suite"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="twistspec", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", metavar="PATH", help="YAML experiment configuration")
        sp.add_argument("--out", metavar="DIR", help="output directory (default: output.path)")
        sp.add_argument("--format", choices=("csv", "json"), help="table format (default: output.format)")
        sp.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for sweeps")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        cfg = load(args.config) if args.config else default_config()
        run = Run(args.command, cfg, args.threads)
        COMMANDS[args.command][0](run)
        out = args.out or cfg.output.path
        fmt = args.format or cfg.output.format
        table, manifest = write_outputs(run, out, fmt)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for c in run.checks:
        if not c["passed"]:
            print(f"FAILED: {c['name']} [{c['anchor']}]", file=sys.stderr)
    print(f"wrote {table} and {manifest}")
    return EXIT_OK if run.ok else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())

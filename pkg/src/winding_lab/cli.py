"""Command-line interface: every computation writes CSV or JSON plus a run manifest.

Exit codes: 0 success, 2 convergence failure, 3 parameters outside a
formula's regime (or invalid), 4 orthogonal polynomial breakdown.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import asymptotics as asy
from .errors import (
    BandPoint, Breakdown, NearBandEdge, NonConvergence, NotInWindow, OutOfBand, OutOfRegime,
    OutsideDisk, RegionAmbiguous, RejectionBudgetExceeded,
)
from .kernel import KernelContext, density_profile, semicircle_overlay, uniform_grid
from .model import ModelParams
from .orthopoly import build_op_system, eval_poly
from .simulator import DEFAULT_BUDGET, SimConfig, discrete_winding_distribution, empirical_winding
from .winding import sigma_shift, winding_distribution

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONVERGENCE, EXIT_REGIME, EXIT_BREAKDOWN = 0, 2, 3, 4

REGIME_ERRORS = (OutOfRegime, NotInWindow, BandPoint, OutOfBand, OutsideDisk, NearBandEdge,
                 RegionAmbiguous, ValueError)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, Breakdown):
        return EXIT_BREAKDOWN
    if isinstance(exc, (NonConvergence, RejectionBudgetExceeded)):
        return EXIT_CONVERGENCE
    if isinstance(exc, REGIME_ERRORS):
        return EXIT_REGIME
    raise exc


def threads() -> int:
    try:
        return max(1, int(os.environ.get("WINDING_LAB_THREADS", "1")))
    except ValueError:
        return 1


def parse_sweep(text: str) -> list[float]:
    """'lo:hi:step' -> inclusive list of values (hi included up to rounding)."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"sweep must be lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("sweep needs step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]


def parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def parse_complex_list(text: str) -> list[complex]:
    return [complex(v.replace(" ", "")) for v in text.split(",") if v]


def parse_bounds(text: str) -> tuple[float, float, float, float]:
    vals = [float(v) for v in text.split(":")]
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("bounds must be xmin:xmax:ymin:ymax")
    return tuple(vals)


def method_for(precision: str) -> str:
    return "mp" if precision == "dd" else "gaussian"


# ---------------------------------------------------------------- commands
# each returns (columns, rows, diagnostics)

def cmd_winding(a):
    mus = a.sweep if a.sweep is not None else [a.mu]
    method = method_for(a.precision)

    def one(mu):
        return mu, winding_distribution(a.n, a.T, mu, method=method)

    if threads() > 1 and len(mus) > 1:
        with ThreadPoolExecutor(threads()) as pool:
            results = list(pool.map(one, mus))
    else:
        results = [one(mu) for mu in mus]
    rows, diag = [], []
    for mu, d in results:
        for w in d.omegas:
            rows.append([mu, w, d[w], d.imag_residue, d.quadrature_nodes])
        diag.append({"mu": mu, "M": d.quadrature_nodes, "imag_residue": d.imag_residue,
                     "clamped": d.clamped, "tail_mass": d.tail_mass, "breakdown_events": d.breakdown_events})
    return ["mu", "omega", "probability", "imag_residue", "quadrature_nodes"], rows, diag


def regime_label(n, T, mu):
    try:
        return f"hermite-{asy.hermite_window_k(n, T, mu)}"
    except NotInWindow:
        return "subcritical"


def cmd_compare_norms(a):
    rows = []
    method = method_for(a.precision)
    for n in a.n_list:
        sys_ = build_op_system(ModelParams(n, a.T, a.mu, a.tau), n, method=method)
        exact = complex(sys_.log_h[n]).real
        g2 = complex(sys_.gamma_sq[n])
        regime = regime_label(n, a.T, a.mu)
        sub = herm = float("nan")
        if abs(a.mu) < asy.mu_crit(a.T):
            sub = math.log(abs(asy.predict_norms_subcritical(n, a.T, a.mu).h_nn))
        if regime != "subcritical":
            herm = math.log(abs(asy.predict_norms_hermite(n, a.T, a.mu, a.tau).h_nn))
        rows.append([n, exact, sub, herm, abs(exact - sub), abs(exact - herm), g2.real, g2.imag, regime])
    cols = ["n", "log_abs_h_exact", "log_abs_h_pred_sub", "log_abs_h_pred_herm", "err_sub", "err_herm",
            "gamma_sq_re", "gamma_sq_im", "regime"]
    return cols, rows, [{"method": method}]


def cmd_sigchart(a):
    ctx = asy.AsymptoticContext.build(a.T, a.mu)
    c = 2 / math.sqrt(a.T)
    if a.bounds is None:
        bounds = (-c - 2, c + 2, min(ctx.z_tilde_c.imag, a.mu) - 2, a.mu + 2)
    else:
        bounds = a.bounds
    X, Y, V = asy.sigchart_grid(a.T, a.mu, bounds[:2], bounds[2:], a.grid or 201)
    rows = [["grid", x, y, v] for x, y, v in zip(X.ravel(), Y.ravel(), V.ravel())]
    for name, z in (("a", ctx.a), ("b", ctx.b), ("z_tilde_c", ctx.z_tilde_c), ("minus_i_delta", -1j * ctx.delta)):
        rows.append([name, z.real, z.imag, float("nan")])
    return ["kind", "x", "y", "re_phi"], rows, [{"bounds": list(bounds), "mu_c": ctx.mu_c, "delta": ctx.delta}]


def cmd_density(a):
    tau = sigma_shift(a.n) if a.tau is None else a.tau
    params = ModelParams(a.n, a.T, a.mu, tau)
    ctx = KernelContext.build(params, a.t, method=method_for(a.precision))
    grid = uniform_grid(a.grid or 512)
    prof = density_profile(ctx, grid)
    overlay = semicircle_overlay(grid, a.n, a.T, a.t)
    rows = [[th, d, s] for th, d, s in zip(grid, prof.density, overlay)]
    return ["theta", "density", "semicircle_overlay"], rows, [{"total_mass": prof.total(), "max_imag": prof.max_imag,
                                                               "tau": tau}]


def cmd_simulate(a):
    cfg = SimConfig.from_continuum(a.n, a.T, a.mu, a.lattice_size, a.seed)
    emp = empirical_winding(cfg, a.samples, method=a.method, budget=a.budget)
    exact = discrete_winding_distribution(cfg)
    omegas = sorted(set(emp.probs) | set(exact.probs))
    rows = [[w, emp.counts.get(w, 0), emp[w], emp.half_widths.get(w, 0.0), exact[w]] for w in omegas]
    return (["omega", "count", "frequency", "wilson_half_width", "exact_discrete"], rows,
            [{"config": cfg.metadata(), "samples": a.samples, "method": a.method}])


def cmd_poly_compare(a):
    rows = []
    crit = asy.mu_crit(a.T)
    for n in a.n_list:
        sys_ = build_op_system(ModelParams(n, a.T, a.mu, a.tau), n, method=method_for(a.precision))
        for z in a.z:
            exact = complex(eval_poly(sys_, n, z))
            if abs(a.mu) < crit and regime_label(n, a.T, a.mu) == "subcritical":
                pred, regime = asy.predict_poly_subcritical(z, n, a.T, a.mu), "subcritical"
            else:
                pred, regime = asy.predict_poly_hermite(z, n, a.T, a.mu), regime_label(n, a.T, a.mu)
            ratio = exact / pred
            rows.append([n, z.real, z.imag, exact.real, exact.imag, pred.real, pred.imag, ratio.real, ratio.imag, regime])
    cols = ["n", "z_re", "z_im", "exact_re", "exact_im", "pred_re", "pred_im", "ratio_re", "ratio_im", "regime"]
    return cols, rows, []


COMMANDS = {
    "winding": cmd_winding,
    "compare-norms": cmd_compare_norms,
    "sigchart": cmd_sigchart,
    "density": cmd_density,
    "simulate": cmd_simulate,
    "poly-compare": cmd_poly_compare,
}


# ---------------------------------------------------------------- output

def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _json_number(v):
    # json has no NaN; use null so the output stays strict JSON
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(fmt, command, columns, rows, manifest):
    if fmt == "json":
        records = [{c: _json_number(_plain(v)) for c, v in zip(columns, r)} for r in rows]
        return json.dumps({"schema": f"winding_lab.{command}.v{SCHEMA_VERSION}", "manifest": manifest,
                           "rows": records}, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema: winding_lab.{command}.v{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else _plain(v) for v in r])
    if manifest.get("error"):
        buf.write(f"# error: {manifest['error']['type']}: {manifest['error']['message']}\n")
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="winding-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, n=True, mu=True, tau=False):
        if n:
            sp.add_argument("--n", type=int, required=True, help="number of walkers")
        sp.add_argument("--T", type=float, default=1.0, help="return time")
        if mu:
            sp.add_argument("--mu", type=float, default=0.0, help="drift")
        if tau:
            sp.add_argument("--tau", type=float, default=0.0, help="lattice phase in [0, 1)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--precision", choices=("double", "dd"), default="double",
                        help="dd evaluates lattice sums in mpmath at 32 digits")
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    s = sub.add_parser("winding", help="exact winding distribution, optionally over a drift sweep")
    common(s)
    s.add_argument("--sweep", type=parse_sweep, default=None, help="drift sweep lo:hi:step")

    s = sub.add_parser("compare-norms", help="exact vs predicted norms h_{n,n}")
    s.add_argument("--n", dest="n_list", type=parse_ints, required=True, help="comma-separated n values")
    common(s, n=False, tau=True)

    s = sub.add_parser("sigchart", help="sign chart of Re phi on a grid with marker rows")
    common(s, n=False)
    s.add_argument("--grid", type=int, default=201, help="points per axis")
    s.add_argument("--bounds", type=parse_bounds, default=None, help="xmin:xmax:ymin:ymax")

    s = sub.add_parser("density", help="one-point density at time t")
    common(s)
    s.add_argument("--tau", type=float, default=None, help="lattice phase (default 1/2 for even n, 0 for odd)")
    s.add_argument("--t", type=float, required=True, help="observation time in (0, T)")
    s.add_argument("--grid", type=int, default=512, help="number of angles on [-pi, pi)")

    s = sub.add_parser("simulate", help="Monte Carlo winding law of discrete bridges")
    common(s)
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lattice-size", type=int, default=120, help="sites on the ring (even)")
    s.add_argument("--method", choices=("doob", "rejection"), default="doob")
    s.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="proposal budget for the rejection method")

    s = sub.add_parser("poly-compare", help="exact p_{n,n}(z) vs the large-n prediction")
    s.add_argument("--n", dest="n_list", type=parse_ints, required=True, help="comma-separated n values")
    common(s, n=False, tau=True)
    s.add_argument("--z", type=parse_complex_list, default=[3 + 0j], help="comma-separated complex points")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    params = {k: _plain(v) for k, v in vars(args).items()}
    manifest = {"command": args.command, "parameters": params, "version": __version__,
                "python": platform.python_version(), "numpy": np.__version__,
                "seed": getattr(args, "seed", None)}
    start = time.perf_counter()
    code = EXIT_OK
    try:
        columns, rows, diag = COMMANDS[args.command](args)
        manifest["diagnostics"] = _plain(diag)
    except Exception as exc:  # mapped to an exit code or re-raised
        code = exit_code(exc)
        columns, rows = ["status"], []
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
    manifest["wall_time_s"] = time.perf_counter() - start
    text = render(args.format, args.command, columns, rows, manifest)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if args.format == "csv":
            with open(args.out + ".manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=1, default=str)
    else:
        sys.stdout.write(text)
        if args.format == "csv":
            sys.stderr.write(json.dumps(manifest, default=str) + "\n")
    if code:
        sys.stderr.write(f"error: {manifest['error']['type']}: {manifest['error']['message']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

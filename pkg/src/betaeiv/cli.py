"""Command-line interface: fit models from CSV, simulate datasets, run
Monte Carlo studies, and emit residual/envelope reports.

Exit codes: 0 on success, 1 on input or configuration errors, 2 when a
requested fit did not converge (outputs are still written). All numeric
CSV output uses full round-trip precision; companion figures are rendered
next to each output file unless --no-plot is given.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .estimators import fit_aml, fit_mpl, fit_naive, fit_rc, two_sided_p_value, wald_interval
from .exceptions import BetaEivError
from .model import (
    Dataset,
    DeltaParams,
    MeasurementSpec,
    ThetaParams,
    make_links,
    measurement_from_reliability,
)
from .quadrature import hermite_rule
from .residuals import simulated_envelope, weighted_residuals
from .simulate import METHODS, SimDesign, run_monte_carlo, simulate_dataset


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _print_table(header, rows):
    display = [[f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v) for v in row]
               for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in display)) if display else len(h)
              for i, h in enumerate(header)]
    line = "  ".join(h.ljust(widths[i]) for i, h in enumerate(header))
    print(line)
    print("-" * len(line))
    for r in display:
        print("  ".join(r[i].ljust(widths[i]) for i in range(len(header))))


def _read_dataset(path, no_intercept=False):
    path = Path(path)
    if not path.exists():
        raise CliError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CliError(f"{path}: empty file")
        header = [h.strip() for h in header]
        raw = [row for row in reader if row and any(cell.strip() for cell in row)]
    for required in ("y", "w"):
        if required not in header:
            raise CliError(f"{path}: missing required column {required!r}")
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(row[j]) for row in raw])
        except (ValueError, IndexError):
            raise CliError(f"{path}: column {name!r} contains non-numeric entries")
    n = len(raw)
    z_names = [h for h in header if h.startswith("z") and h != "y" and h != "w"]
    v_names = [h for h in header if h.startswith("v") and h != "y" and h != "w"]
    z_cols = [cols[h] for h in z_names]
    v_cols = [cols[h] for h in v_names]
    if not no_intercept:
        z_cols = [np.ones(n)] + z_cols
        v_cols = [np.ones(n)] + v_cols
    if not z_cols or not v_cols:
        raise CliError(
            f"{path}: --no-intercept requires explicit z*/v* columns for both submodels"
        )
    try:
        return Dataset(y=cols["y"], Z=np.column_stack(z_cols),
                       V=np.column_stack(v_cols), w=cols["w"])
    except ValueError as exc:
        raise CliError(f"{path}: {exc}")


def calibrate_from_validation(path):
    """Least-squares regression of the surrogate on the true covariate over
    a validation subsample with columns x and w; returns (tau0, tau1,
    sigma2_e) with the residual variance on n-2 degrees of freedom."""
    path = Path(path)
    if not path.exists():
        raise CliError(f"validation file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        x, w = [], []
        for row in reader:
            try:
                x.append(float(row["x"]))
                w.append(float(row["w"]))
            except (KeyError, TypeError, ValueError):
                raise CliError(f"{path}: needs numeric columns 'x' and 'w'")
    if len(x) < 3:
        raise CliError(f"{path}: at least 3 validation rows are required")
    x = np.asarray(x)
    w = np.asarray(w)
    X = np.column_stack([np.ones(x.size), x])
    coef, *_ = np.linalg.lstsq(X, w, rcond=None)
    resid = w - X @ coef
    sigma2_e = float(np.sum(resid**2) / (x.size - 2))
    return float(coef[0]), float(coef[1]), sigma2_e


def _resolve_measurement(args, dataset, required):
    if getattr(args, "calibrate_from", None):
        tau0, tau1, sigma2_e = calibrate_from_validation(args.calibrate_from)
        print(f"calibration regression: tau0={tau0:.6g} tau1={tau1:.6g} "
              f"sigma2_e={sigma2_e:.6g}")
        return MeasurementSpec(tau0=tau0, tau1=tau1, sigma2_e=sigma2_e)
    if args.sigma2e is not None and args.kx is not None:
        raise CliError("--sigma2e and --kx are mutually exclusive")
    if args.sigma2e is not None:
        return MeasurementSpec(tau0=args.tau0, tau1=args.tau1, sigma2_e=args.sigma2e)
    if args.kx is not None:
        if not 0.0 < args.kx <= 1.0:
            raise CliError("--kx must lie in (0, 1]")
        s2w = float(np.var(dataset.w, ddof=1))
        sigma2_e = s2w * (1.0 - args.tau1 * args.kx)
        if sigma2_e < 0.0:
            raise CliError("--kx with this tau1 implies a negative error variance")
        return MeasurementSpec(tau0=args.tau0, tau1=args.tau1, sigma2_e=sigma2_e)
    if required:
        raise CliError(
            "methods other than 'naive' need a measurement spec: give "
            "--sigma2e or --kx (or --calibrate-from)"
        )
    return MeasurementSpec(tau0=args.tau0, tau1=args.tau1, sigma2_e=0.0)


_DESIGN_KEYS = {
    "n", "theta_true", "delta_true", "meas", "precision_varying", "n_reps",
    "q", "seed", "level", "n_boot", "link_mean", "link_precision",
}
_THETA_KEYS = {"alpha", "beta", "gamma", "lambda"}
_MEAS_KEYS = {"tau0", "tau1", "sigma2e", "kx"}
_DELTA_KEYS = {"mu_x", "sigma2_x"}


def _load_design(path):
    path = Path(path)
    if not path.exists():
        raise CliError(f"design file not found: {path}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})")
    unknown = set(spec) - _DESIGN_KEYS
    if unknown:
        raise CliError(f"{path}: unknown design keys {sorted(unknown)}")
    for key in ("n", "theta_true", "delta_true", "meas", "n_reps", "seed"):
        if key not in spec:
            raise CliError(f"{path}: missing design key {key!r}")
    th = spec["theta_true"]
    if set(th) - _THETA_KEYS:
        raise CliError(f"{path}: unknown theta_true keys {sorted(set(th) - _THETA_KEYS)}")
    de = spec["delta_true"]
    if set(de) - _DELTA_KEYS:
        raise CliError(f"{path}: unknown delta_true keys {sorted(set(de) - _DELTA_KEYS)}")
    me = spec["meas"]
    if set(me) - _MEAS_KEYS:
        raise CliError(f"{path}: unknown meas keys {sorted(set(me) - _MEAS_KEYS)}")
    lam = th.get("lambda")
    theta = ThetaParams(
        alpha=np.atleast_1d(th["alpha"]),
        beta=th["beta"],
        gamma=np.atleast_1d(th["gamma"]),
        lam=lam,
    )
    delta = DeltaParams(mu_x=de["mu_x"], sigma2_x=de["sigma2_x"])
    if "sigma2e" in me and "kx" in me:
        raise CliError(f"{path}: give either meas.sigma2e or meas.kx, not both")
    if "kx" in me:
        meas = measurement_from_reliability(
            me.get("tau0", 0.0), me.get("tau1", 1.0), me["kx"], delta.sigma2_x
        )
    elif "sigma2e" in me:
        meas = MeasurementSpec(me.get("tau0", 0.0), me.get("tau1", 1.0), me["sigma2e"])
    else:
        raise CliError(f"{path}: meas needs sigma2e or kx")
    links = make_links(spec.get("link_mean", "logit"), spec.get("link_precision", "log"))
    try:
        return SimDesign(
            n=int(spec["n"]),
            theta_true=theta,
            delta_true=delta,
            meas=meas,
            n_reps=int(spec["n_reps"]),
            seed=int(spec["seed"]),
            precision_varying=spec.get("precision_varying", theta.has_lam),
            q=int(spec.get("q", 50)),
            level=float(spec.get("level", 0.95)),
            n_boot=int(spec.get("n_boot", 0)),
            links=links,
        )
    except ValueError as exc:
        raise CliError(f"{path}: {exc}")


def _add_data_flags(p):
    p.add_argument("--input", required=True, help="dataset CSV with columns y, w, z*, v*")
    p.add_argument("--no-intercept", action="store_true",
                   help="do not prepend an intercept column to Z and V")


def _add_meas_flags(p):
    p.add_argument("--tau0", type=float, default=0.0, help="additive surrogate bias")
    p.add_argument("--tau1", type=float, default=1.0, help="multiplicative surrogate bias")
    p.add_argument("--sigma2e", type=float, default=None, help="measurement error variance")
    p.add_argument("--kx", type=float, default=None,
                   help="reliability ratio (error variance inferred from the data)")
    p.add_argument("--calibrate-from", default=None, metavar="CSV",
                   help="estimate (tau0, tau1, sigma2e) by least squares from a "
                        "validation CSV with columns x, w")


def _add_common_flags(p):
    p.add_argument("--link-mean", choices=["logit", "probit", "cloglog"], default="logit")
    p.add_argument("--link-precision", choices=["log"], default="log")
    p.add_argument("--quad-points", type=int, default=50, help="Gauss-Hermite points")
    p.add_argument("--boot", type=int, default=200,
                   help="bootstrap replicates for regression-calibration SEs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser():
    parser = _Parser(prog="betaeiv",
                     description="Beta regression with a mismeasured covariate")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="fit one or all estimators to a CSV dataset")
    _add_data_flags(p_fit)
    p_fit.add_argument("--method", choices=list(METHODS) + ["all"], default="mpl")
    _add_meas_flags(p_fit)
    _add_common_flags(p_fit)

    p_sim = sub.add_parser("simulate", help="draw one dataset from a design file")
    p_sim.add_argument("--design", required=True, help="design JSON")
    p_sim.add_argument("--replicate", type=int, default=0)
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--no-plot", action="store_true")

    p_mc = sub.add_parser("mc", help="run the Monte Carlo study for a design file")
    p_mc.add_argument("--design", required=True, help="design JSON")
    p_mc.add_argument("--method", choices=list(METHODS) + ["all"], default="all")
    p_mc.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p_mc.add_argument("--out", default=None)
    p_mc.add_argument("--no-plot", action="store_true")

    p_res = sub.add_parser("residuals",
                           help="fit a model and emit residual/leverage/envelope data")
    _add_data_flags(p_res)
    p_res.add_argument("--method", choices=list(METHODS), default="mpl")
    _add_meas_flags(p_res)
    p_res.add_argument("--nsim-envelope", type=int, default=100)
    p_res.add_argument("--x-values", choices=["calibrated", "surrogate"],
                       default="calibrated")
    _add_common_flags(p_res)

    return parser


def _fit_methods(args, dataset, links):
    methods = list(METHODS) if args.method == "all" else [args.method]
    meas = _resolve_measurement(args, dataset, required=any(m != "naive" for m in methods))
    rule = hermite_rule(args.quad_points)
    fits = {}
    for method in methods:
        if method == "naive":
            fits[method] = fit_naive(dataset, links)
        elif method == "aml":
            fits[method] = fit_aml(dataset, meas, links, rule)
        elif method == "mpl":
            fits[method] = fit_mpl(dataset, meas, links, rule)
        elif method == "rc":
            fits[method] = fit_rc(dataset, meas, links, n_boot=args.boot, seed=args.seed)
    return fits, meas


def cmd_fit(args) -> int:
    dataset = _read_dataset(args.input, args.no_intercept)
    links = make_links(args.link_mean, args.link_precision)
    fits, _ = _fit_methods(args, dataset, links)

    header = ["method", "parameter", "estimate", "std_error", "z", "p_value"]
    rows = []
    fig_rows = []
    for method, fit in fits.items():
        est = fit.estimates()
        for name, e, s in zip(fit.param_names, est, fit.standard_errors):
            z = e / s if s > 0 else np.inf * np.sign(e) if e else 0.0
            rows.append([method, name, float(e), float(s), float(z),
                         two_sided_p_value(z)])
            lo, hi = wald_interval(float(e), float(s), args.level)
            fig_rows.append({"method": method, "parameter": name,
                             "estimate": float(e), "ci_lower": lo, "ci_upper": hi})
    _print_table(header, rows)
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
        if not args.no_plot:
            from .plots import save_fit_figure

            path = save_fit_figure(fig_rows, str(Path(args.out).with_suffix("")) + "_coef.png")
            print(f"wrote {path}")
    if not all(fit.converged for fit in fits.values()):
        bad = [m for m, f in fits.items() if not f.converged]
        print(f"warning: non-converged fits: {bad}", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args) -> int:
    design = _load_design(args.design)
    dataset = simulate_dataset(design, args.replicate)
    header = ["y", "w"]
    rows = [[float(y), float(w)] for y, w in zip(dataset.y, dataset.w)]
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out} ({dataset.n} rows)")
    else:
        _print_table(header, rows[:10])
        if dataset.n > 10:
            print(f"... ({dataset.n} rows total; use --out to save)")
    return 0


def cmd_mc(args) -> int:
    design = _load_design(args.design)
    methods = list(METHODS) if args.method == "all" else [args.method]
    report = run_monte_carlo(design, methods, n_jobs=args.jobs)
    header = ["kx", "n", "method", "parameter", "bias", "rmse", "coverage", "n_fail"]
    dict_rows = report.to_rows()
    rows = [[r[k] for k in header] for r in dict_rows]
    _print_table(header, rows)
    print(f"rng: {report.rng}")
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
        if not args.no_plot:
            from .plots import save_mc_figures

            for r in dict_rows:
                r["level"] = design.level
            for path in save_mc_figures(dict_rows, str(Path(args.out).with_suffix(""))):
                print(f"wrote {path}")
    return 0


def cmd_residuals(args) -> int:
    dataset = _read_dataset(args.input, args.no_intercept)
    links = make_links(args.link_mean, args.link_precision)
    meas = _resolve_measurement(args, dataset, required=args.method != "naive")
    rule = hermite_rule(args.quad_points)
    if args.method == "naive":
        fit = fit_naive(dataset, links)
    elif args.method == "aml":
        fit = fit_aml(dataset, meas, links, rule)
    elif args.method == "mpl":
        fit = fit_mpl(dataset, meas, links, rule)
    else:
        fit = fit_rc(dataset, meas, links, n_boot=args.boot, seed=args.seed)

    report = weighted_residuals(dataset, fit, meas, links, x_values=args.x_values)
    env = simulated_envelope(
        dataset, fit, meas, links,
        n_sim=args.nsim_envelope, level=args.level, seed=args.seed,
        x_values=args.x_values,
    )
    ranks = np.argsort(np.argsort(report.r))
    header = ["index", "x_predicted", "residual", "leverage", "env_lower", "env_upper"]
    rows = [
        [t, float(report.x_predicted[t]), float(report.r[t]),
         float(report.h_star_diag[t]),
         float(env.lower[ranks[t]]), float(env.upper[ranks[t]])]
        for t in range(dataset.n)
    ]
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
        if not args.no_plot:
            from .plots import save_residual_figures

            for path in save_residual_figures(
                report.x_predicted, report.r, env.lower, env.upper,
                str(Path(args.out).with_suffix("")),
            ):
                print(f"wrote {path}")
    else:
        _print_table(header, rows)
    if not fit.converged:
        print("warning: fit did not converge", file=sys.stderr)
        return 2
    return 0


_DISPATCH = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "residuals": cmd_residuals,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[args.subcommand](args)
    except (CliError, BetaEivError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: simulate, estimate, verify, laplace, fisher, experiment.

Exit codes: 0 success, 1 invalid input (message on stderr, nothing written),
2 numerical failure (diagnostic on stderr).  Relative output paths resolve
against ``$ARMLE_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import laplace as lap
from .asymptotics import fisher_info
from .errors import NumericalError, OutsideStabilityRegion, ValidationError
from .estimation import lse, mle
from .innovations import system_for
from .montecarlo import (config_from_mapping, dumps17, fmt_float, read_config_file, report_dict,
                         run_experiment, write_outputs)
from .noise import parse_noise
from .simulate import simulate_trajectory
from .state_space import ArModel
from .verify import RANDOMIZED, SUITES, run_suite

OUTPUT_ENV = "ARMLE_OUTPUT_DIR"

NOISE_HELP = ("noise covariance: white | ma1:A | ar1:A | fgn:H | custom:PATH "
              "(PATH holds one autocovariance per line, lag 0 first, equal to 1.0). "
              "Sets rho(n) and hence the innovation kernels k, K and the PACF beta_n")
THETA_HELP = "AR coefficients theta_1,...,theta_p, comma separated (dimensionless)"
SEED_HELP = "64-bit master seed; replication i uses SeedSequence([seed, i]). Required"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if not p.is_absolute() and base:
        p = Path(base) / p
    return p


def _theta(text: str, p: int | None) -> np.ndarray:
    try:
        theta = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ValidationError(f"--theta: cannot parse {text!r}", field="theta") from exc
    if theta.size == 0:
        raise ValidationError("--theta is empty", field="theta")
    if p is not None and theta.size != p:
        raise ValidationError(f"--theta has {theta.size} values but --p is {p}", field="theta")
    return theta


def _int_list(text: str, name: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse {text!r}", field=name) from exc
    if not vals or min(vals) < 1:
        raise ValidationError(f"{name}: need positive integers", field=name)
    return vals


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


# subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    theta = _theta(args.theta, args.p)
    noise = parse_noise(args.noise)
    system = system_for(noise, args.n)
    bundle = simulate_trajectory(ArModel(theta), noise, system, args.n, args.seed, args.generator)
    lines = ["n,eps,xi,x"]
    for i in range(args.n):
        lines.append(f"{i + 1},{fmt_float(bundle.eps[i])},{fmt_float(bundle.xi[i])},{fmt_float(bundle.x[i])}")
    _emit("\n".join(lines) + "\n", _out_path(args.out))
    return 0


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_series(path: str) -> np.ndarray:
    try:
        lines = [line for line in Path(path).read_text().splitlines()
                 if line.strip() and not line.lstrip().startswith("#")]
        if lines and not _is_number(lines[0].split(",")[-1]):
            lines = lines[1:]  # header row, e.g. the output of `simulate`
        vals = [float(line.split(",")[-1]) for line in lines]
    except (OSError, ValueError) as exc:
        raise ValidationError(f"--data: cannot read {path}: {exc}", field="data") from exc
    return np.array(vals)


def cmd_estimate(args) -> int:
    noise = parse_noise(args.noise)
    out = {}
    if args.data is not None:
        if args.p is None:
            raise ValidationError("--p is required with --data", field="p")
        x = _read_series(args.data)
        p = args.p
        theta_true = None
    else:
        if args.theta is None or args.seed is None or args.n is None:
            raise ValidationError("simulation needs --theta, --n and --seed (or pass --data)", field="theta")
        theta_true = _theta(args.theta, args.p)
        p = theta_true.size
        sim_system = system_for(noise, args.n)
        x = simulate_trajectory(ArModel(theta_true), noise, sim_system, args.n, args.seed, args.generator).x
        out["theta_true"] = theta_true
        out["seed"] = args.seed
    system = system_for(noise, x.shape[0])
    res = mle(x, p, system, theta_true=theta_true)
    out.update({"noise": noise.label(), "N": int(x.shape[0]), "p": p, "theta_hat": res.theta_hat,
                "bracket": res.bracket, "loglik": res.loglik, "condition": res.condition})
    if res.M is not None:
        out["M"] = res.M
    if args.lse:
        out["theta_lse"] = lse(x, p)
    _emit(dumps17(out) + "\n", _out_path(args.out))
    return 0


def cmd_verify(args) -> int:
    if args.suite in RANDOMIZED and args.seed is None:
        raise ValidationError(f"verify {args.suite} is randomized and needs --seed", field="seed")
    kw = {}
    if args.suite == "laplace-vs-mc" and args.replications is not None:
        kw["replications"] = args.replications
    checks = run_suite(args.suite, seed=args.seed, **kw)
    for c in checks:
        print(c.line())
    n_fail = sum(not c.passed for c in checks)
    print(f"{args.suite}: {len(checks) - n_fail}/{len(checks)} checks passed")
    return 0 if n_fail == 0 else 2


def cmd_laplace(args) -> int:
    theta = _theta(args.theta, args.p)
    alpha = _theta(args.alpha, theta.size) if args.alpha else np.eye(theta.size)[0]
    noise = parse_noise(args.noise)
    Ns = _int_list(args.n, "--n")
    if (args.mu is None) == (not args.mu_over_n):
        raise ValidationError("give exactly one of --mu or --mu-over-n", field="mu")
    if args.mu is not None and args.mu < 0:
        raise ValidationError("--mu must be >= 0", field="mu")
    if args.method == "monte_carlo" and args.seed is None:
        raise ValidationError("--method monte_carlo needs --seed", field="seed")
    if args.method == "p1_closed_form" and theta.size != 1:
        raise ValidationError("p1_closed_form needs p = 1", field="method")
    target = lap.limit_target(theta, alpha)
    system = system_for(noise, max(Ns) + 1, kernels=False)
    rows = ["N,mu,L,target,method"]
    for N in Ns:
        mu = 1.0 / N if args.mu_over_n else args.mu
        if args.method == "explicit":
            ev = lap.laplace_explicit(theta, system, alpha, mu, N)
        elif args.method == "p1_closed_form":
            ev = lap.p1_laplace(theta, system, mu, N)
        elif args.method == "eigen_approx":
            ev = lap.eigen_approx(theta, alpha, mu, N)
        else:
            ev = lap.laplace_monte_carlo(theta, noise, alpha, mu, N, args.replications, args.seed)
        rows.append(f"{N},{fmt_float(mu)},{fmt_float(ev.value)},{fmt_float(target)},{ev.method}")
    print("\n".join(rows))
    return 0


def cmd_fisher(args) -> int:
    theta = _theta(args.theta, args.p)
    fi = fisher_info(theta)
    out = {"theta": theta, "info": fi.info, "inverse": fi.inverse, "spectral_radius": fi.spectral_radius,
           "near_boundary": fi.near_boundary, "lyapunov_residual": fi.residual, "series_gap": fi.series_gap}
    print(dumps17(out))
    return 0


def cmd_experiment(args) -> int:
    raw: dict = {}
    base = Path(os.environ[OUTPUT_ENV]) if os.environ.get(OUTPUT_ENV) else None
    if args.config:
        raw.update(read_config_file(args.config))
    for key in ("theta", "noise", "n", "m", "seed", "estimators", "bins", "generator", "chunk",
                "csv", "json", "hist"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = str(val)
    if base is not None and not any(raw.get(k) for k in ("csv", "json", "hist")):
        stem = Path(args.config).stem if args.config else "experiment"
        raw.update(csv=f"{stem}.csv", json=f"{stem}.json", hist=f"{stem}_hist.csv")
    cfg = config_from_mapping(raw, base_dir=base)
    report = run_experiment(cfg, threads=args.threads)
    written = write_outputs(report, include_timing=args.timing)
    if cfg.json_path is None:
        print(dumps17(report_dict(report, include_timing=args.timing)))
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


# parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="armle", description="Exact MLE for AR(p) models driven by stationary Gaussian noise.",
                     epilog=f"Relative output paths resolve against ${OUTPUT_ENV} when set. "
                            "Exit codes: 0 ok, 1 invalid input, 2 numerical failure.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", formatter_class=fmt,
                        help="simulate one AR(p) path; CSV of n, eps_n, xi_n, X_n")
    sp.add_argument("--p", type=int, default=None, help="AR order; checked against --theta if given")
    sp.add_argument("--theta", required=True, help=THETA_HELP)
    sp.add_argument("--noise", default="white", help=NOISE_HELP)
    sp.add_argument("--n", type=int, required=True, help="path length N (number of observations)")
    sp.add_argument("--seed", type=int, required=True, help=SEED_HELP)
    sp.add_argument("--generator", choices=("innovation", "circulant"), default="innovation",
                    help="noise sampler: innovation kernel xi = K(sigma eps), or circulant embedding (fgn only)")
    sp.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", formatter_class=fmt,
                        help="exact MLE of theta: JSON with theta_hat, bracket <M>_N, loglik")
    sp.add_argument("--p", type=int, default=None, help="AR order p (required with --data)")
    sp.add_argument("--theta", default=None, help="true theta for a simulated path; " + THETA_HELP)
    sp.add_argument("--noise", default="white", help=NOISE_HELP)
    sp.add_argument("--n", type=int, default=None, help="simulated path length N")
    sp.add_argument("--seed", type=int, default=None, help="seed of the simulated path (required unless --data)")
    sp.add_argument("--generator", choices=("innovation", "circulant"), default="innovation",
                    help="noise sampler for the simulated path")
    sp.add_argument("--data", default=None, help="observed series, one value per line (last CSV column used)")
    sp.add_argument("--lse", action="store_true", help="also report the ordinary least-squares estimate")
    sp.add_argument("--out", default=None, help="JSON path (stdout if omitted)")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("verify", formatter_class=fmt, help="run an oracle-equivalence suite; PASS/FAIL table")
    sp.add_argument("suite", choices=SUITES,
                    help="cholesky: kernel identities at N=128 (tol 1e-8); mle-vs-gls: MLE vs dense GLS (1e-8) and "
                         "theta_hat - theta = <M>^-1 M (1e-10); laplace-vs-mc: explicit L_N(mu) vs Monte Carlo "
                         "(3 SE); lyapunov: Fisher information solvers (1e-12 residual, 1e-10 agreement)")
    sp.add_argument("--seed", type=int, default=None, help="master seed (required by randomized suites)")
    sp.add_argument("--replications", type=int, default=None,
                    help="Monte Carlo replications per laplace-vs-mc case (default 200000)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("laplace", formatter_class=fmt,
                        help="L_N(mu) = E exp(-(mu/2) alpha' <M>_N alpha) on a grid of N; CSV N,mu,L,target,method")
    sp.add_argument("--p", type=int, default=None, help="AR order; checked against --theta if given")
    sp.add_argument("--theta", required=True, help=THETA_HELP)
    sp.add_argument("--alpha", default=None, help="direction alpha, comma separated (default: first unit vector)")
    sp.add_argument("--noise", default="white", help=NOISE_HELP)
    sp.add_argument("--n", required=True, help="comma-separated horizons N")
    sp.add_argument("--mu", type=float, default=None, help="fixed mu >= 0 (dimensionless)")
    sp.add_argument("--mu-over-n", action="store_true", help="use mu = 1/N; L then tends to target "
                                                             "exp(-alpha' I(theta) alpha / 2)")
    sp.add_argument("--method", choices=("explicit", "p1_closed_form", "eigen_approx", "monte_carlo"),
                    default="explicit", help="evaluation route")
    sp.add_argument("--replications", type=int, default=200_000, help="Monte Carlo replications")
    sp.add_argument("--seed", type=int, default=None, help="seed for --method monte_carlo")
    sp.set_defaults(func=cmd_laplace)

    sp = sub.add_parser("fisher", formatter_class=fmt,
                        help="Fisher information I(theta) solving I = A0 I A0' + b b'; JSON")
    sp.add_argument("--p", type=int, default=None, help="AR order; checked against --theta if given")
    sp.add_argument("--theta", required=True, help=THETA_HELP)
    sp.set_defaults(func=cmd_fisher)

    sp = sub.add_parser("experiment", formatter_class=fmt,
                        help="replicated estimation study of sqrt(N)(theta_hat - theta); CSV + JSON report")
    sp.add_argument("--config", default=None, help="key = value file (keys as the flags below); flags override it")
    sp.add_argument("--theta", default=None, help=THETA_HELP)
    sp.add_argument("--noise", default=None, help=NOISE_HELP)
    sp.add_argument("--n", type=int, default=None, help="path length N, at least 10p")
    sp.add_argument("--m", type=int, default=None, help="number of replications M, at least 2")
    sp.add_argument("--seed", type=int, default=None, help=SEED_HELP + " (here or in the config file)")
    sp.add_argument("--estimators", default=None, help="comma-separated subset of mle,lse (default mle)")
    sp.add_argument("--bins", type=int, default=None, help="histogram bins (default 60)")
    sp.add_argument("--generator", default=None, help="innovation | circulant (default innovation)")
    sp.add_argument("--chunk", type=int, default=None, help="replications per work unit (default 64)")
    sp.add_argument("--csv", default=None, help="per-replication CSV path")
    sp.add_argument("--json", default=None, help="summary JSON path (stdout if no outputs are set)")
    sp.add_argument("--hist", default=None, help="histogram CSV path")
    sp.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    sp.add_argument("--timing", action="store_true",
                    help="record runtime_seconds in the JSON (otherwise null, keeping output byte-stable)")
    sp.set_defaults(func=cmd_experiment)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, OutsideStabilityRegion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

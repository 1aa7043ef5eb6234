"""Command-line entry point: ``patchsel {analyze,simulate,ess,sweep,validate}``.

Exit status is 0 on success, 1 on a model or input error (the error name is
printed on standard error) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .analytic import TOL_ZERO, classify_outcome
from .errors import ModelError, ParseError
from .ess import EssOptions, solve_ess
from .landscape import DispersalMatrix
from .rng import default_seed
from .sde_sim import (
    EULER,
    LOG_EULER,
    SimConfig,
    simulate_dimorphic,
    simulate_dispersal,
    simulate_linearized_invasion,
    simulate_monomorphic,
)
from .sweep import SweepSpec, sweep_grid

DEFAULT_DT = 1e-3
DEFAULT_T_MAX = 1000.0
DEFAULT_REPLICATES = 8


def _provenance(args) -> dict:
    return {
        "dt": getattr(args, "dt", DEFAULT_DT),
        "t_max": getattr(args, "t_max", DEFAULT_T_MAX),
        "burn_in": _burn_in(args),
        "replicates": getattr(args, "replicates", DEFAULT_REPLICATES),
        "seed": args.seed,
    }


def _burn_in(args) -> float:
    b = getattr(args, "burn_in", None)
    if b is None:
        return 0.1 * getattr(args, "t_max", DEFAULT_T_MAX)
    return b


def _comment(args) -> str:
    return " ".join(f"{k}={io.fmt(v)}" for k, v in _provenance(args).items())


def _out(args):
    if getattr(args, "out", None) in (None, "-"):
        return sys.stdout, False
    return open(args.out, "w", newline=""), True


def cmd_validate(args) -> int:
    L = io.load_landscape(args.landscape)
    doc = {"valid": True, "n": L.n, "positive_definite": L.is_positive_definite, "provenance": _provenance(args)}
    sys.stdout.write(io.to_json(doc))
    return 0


def cmd_analyze(args) -> int:
    L = io.load_landscape(args.landscape)
    rep = classify_outcome(L, io.parse_strategy(args.alpha), io.parse_strategy(args.beta), args.tol_zero)
    if args.format == "csv":
        io.write_csv(sys.stdout, list(rep.FIELDS), [io.report_row(rep)], _comment(args))
    else:
        doc = rep.to_dict()
        doc["provenance"] = _provenance(args)
        sys.stdout.write(io.to_json(doc))
    return 0


def cmd_simulate(args) -> int:
    L = io.load_landscape(args.landscape)
    cfg = SimConfig(
        dt=args.dt, t_max=args.t_max, burn_in=_burn_in(args), seed=args.seed,
        replicates=args.replicates, scheme=args.scheme, record_every=args.record_every,
    )
    alpha = io.parse_strategy(args.alpha) if args.alpha else None
    beta = io.parse_strategy(args.beta) if args.beta else None
    if args.model in ("monomorphic", "dimorphic", "linearized") and alpha is None:
        raise argparse.ArgumentTypeError("--alpha is required for this model")
    if args.model in ("dimorphic", "linearized") and beta is None:
        raise argparse.ArgumentTypeError("--beta is required for this model")
    extra = {}
    if args.model == "monomorphic":
        traj = simulate_monomorphic(L, alpha, args.x0, cfg, replicate=args.replicate)
    elif args.model == "dimorphic":
        traj = simulate_dimorphic(L, alpha, beta, args.x0, args.y0, cfg, replicate=args.replicate)
    elif args.model == "linearized":
        est = simulate_linearized_invasion(L, alpha, beta, args.x0, args.y0, cfg)
        traj = est.trajectories[0]
        extra = {"slope": est.slope, "stderr": est.stderr}
    else:
        if args.dispersal is None:
            raise argparse.ArgumentTypeError("--dispersal is required for the dispersal model")
        rates = io.parse_vector(args.dispersal)
        if rates.size != L.n * L.n:
            raise ParseError(f"--dispersal needs {L.n * L.n} entries (row-major rate matrix)")
        D = DispersalMatrix.from_offdiagonal(rates.reshape(L.n, L.n), args.delta)
        x0 = io.parse_vector(args.x0_vector) if args.x0_vector else np.full(L.n, args.x0 / L.n)
        traj = simulate_dispersal(L, D, x0, cfg, replicate=args.replicate)
    stream, close = _out(args)
    try:
        io.write_trajectory(stream, traj, _comment(args))
    finally:
        if close:
            stream.close()
    if close:
        doc = {"stats": traj.stats.to_dict(), **extra, "provenance": _provenance(args)}
        sys.stdout.write(io.to_json(doc))
    return 0


def _ess_options(args) -> EssOptions:
    return EssOptions(verify_samples=args.samples, seed=args.seed, regularize=args.regularize)


def cmd_ess(args) -> int:
    L = io.load_landscape(args.landscape)
    res = solve_ess(L, _ess_options(args))
    doc = res.to_dict()
    doc["provenance"] = _provenance(args)
    sys.stdout.write(io.to_json(doc))
    return 0


def cmd_sweep(args) -> int:
    L = io.load_landscape(args.landscape)
    if args.kind == "strategy":
        spec = SweepSpec(
            L, "strategy", args.resolution, tuple(args.alpha_range), tuple(args.beta_range),
            tol_zero=args.tol_zero, workers=args.workers,
        )
    else:
        if args.param is None or args.range is None:
            raise argparse.ArgumentTypeError("ESS sweeps need --param and --range")
        values = tuple(np.linspace(args.range[0], args.range[1], args.resolution).tolist())
        spec = SweepSpec(L, "ess", args.resolution, param=args.param, values=values,
                         ess_options=_ess_options(args), workers=args.workers)
    stream, close = _out(args)
    try:
        sweep_grid(spec, stream, _comment(args))
    finally:
        if close:
            stream.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="patchsel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, landscape=True):
        if landscape:
            sp.add_argument("--landscape", required=True, help="landscape JSON file")
        sp.add_argument("--seed", type=int, default=default_seed())

    sp = sub.add_parser("validate", help="check a landscape file")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("analyze", help="invasion report for a strategy pair")
    common(sp)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--tol-zero", type=float, default=TOL_ZERO)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="write a sample path as CSV")
    common(sp)
    sp.add_argument("--model", choices=("monomorphic", "dimorphic", "linearized", "dispersal"), default="monomorphic")
    sp.add_argument("--alpha")
    sp.add_argument("--beta")
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--y0", type=float, default=1.0)
    sp.add_argument("--x0-vector", help="per-patch initial abundances for the dispersal model")
    sp.add_argument("--dispersal", help="row-major dispersal rate matrix; diagonal is ignored")
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=DEFAULT_DT)
    sp.add_argument("--t-max", type=float, default=DEFAULT_T_MAX)
    sp.add_argument("--burn-in", type=float, default=None, help="default: 10%% of --t-max")
    sp.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--record-every", type=int, default=1000)
    sp.add_argument("--scheme", choices=(LOG_EULER, EULER), default=LOG_EULER)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ess", help="solve for an evolutionarily stable strategy")
    common(sp)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--regularize", type=float, default=None, help="add eps * I to the covariance")
    sp.set_defaults(func=cmd_ess)

    sp = sub.add_parser("sweep", help="grid sweep written as CSV")
    common(sp)
    sp.add_argument("--kind", choices=("strategy", "ess"), default="strategy")
    sp.add_argument("--resolution", type=int, default=101)
    sp.add_argument("--alpha-range", type=float, nargs=2, default=(0.0, 1.0))
    sp.add_argument("--beta-range", type=float, nargs=2, default=(0.0, 1.0))
    sp.add_argument("--param", help="mu_i, kappa_i, sigma_ij (1-based) or noise")
    sp.add_argument("--range", type=float, nargs=2)
    sp.add_argument("--tol-zero", type=float, default=TOL_ZERO)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--regularize", type=float, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sweep)
    return p


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as e:
        parser.print_usage(sys.stderr)
        print(f"UsageError: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"FileNotFound: {e.filename}", file=sys.stderr)
        return 1
    except ModelError as e:
        print(f"{io.error_name(e)}: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()

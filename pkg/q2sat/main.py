"""
Command-line entry point.

    python q2sat/main.py gen --n 10 --d 0.1 --seed 7 --out inst.json
    python q2sat/main.py spectrum --in inst.json
    python q2sat/main.py scaling --n 5..11 --samples 500 --out runs/

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from chain import fit_gap_exponent, gap_law_table
from config import (
    DEFAULT_BETA,
    DEFAULT_BIN_WIDTH,
    DEFAULT_DELTA,
    DEFAULT_DENSITY,
    DEFAULT_MULTIPLIER,
    SETTINGS,
)
from dynamics import evolution_report, evolve_lab, evolve_rotating, schedule_from_gap
from errors import NumericalError, ParameterError
from experiments import (
    d_spot_check,
    fit_loglog,
    run_dynamics_sweep,
    run_histogram,
    run_scaling,
    write_dynamics_csv,
    write_dynamics_plot,
    write_fit_json,
    write_histogram_csv,
    write_histogram_plot,
    write_scaling_csv,
    write_scaling_plot,
)
from hamiltonian import build_h0, make_schedule, write_coo
from holonomy import compute_holonomy, ground_coefficients, holonomy_report, predict_final_state
from instance import Q2SATInstance, generate_instance, make_clause, read_instance, write_instance
from reports import dumps_json, write_csv, write_json
from spectrum import component_spectrum, dense_spectrum, ground_and_gap, spectrum_report, summarize_dense
from store import RunLedger

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -------------------------------------------------------------------
# Run configuration
# -------------------------------------------------------------------


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subcommand: str
    instance_path: Optional[str] = None
    n: Optional[int] = None
    d: Optional[float] = None
    seed: Optional[int] = None
    beta: complex = DEFAULT_BETA
    delta: float = DEFAULT_DELTA
    output: Optional[str] = None
    workers: int = 1
    multiplier: float = DEFAULT_MULTIPLIER
    steps: Optional[int] = None

    @model_validator(mode="after")
    def _one_source(self):
        generation = [v for v in (self.n, self.d, self.seed) if v is not None]
        if self.instance_path is not None and generation:
            raise ValueError("give either --in or generation parameters (--n/--d/--seed), not both")
        return self

    def load_instance(self) -> Q2SATInstance:
        if self.instance_path is not None:
            return read_instance(self.instance_path)
        if self.n is None:
            raise ParameterError("no instance: pass --in FILE or --n N")
        d = DEFAULT_DENSITY if self.d is None else self.d
        return generate_instance(self.n, d, make_clause(self.beta, self.delta), self.seed or 0)


def run_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(
            subcommand=args.command,
            instance_path=getattr(args, "instance", None),
            n=getattr(args, "n", None),
            d=getattr(args, "d", None),
            seed=getattr(args, "seed", None),
            beta=complex(args.beta_re, args.beta_im),
            delta=args.delta,
            output=args.out,
            workers=getattr(args, "workers", 1),
            multiplier=getattr(args, "multiplier", DEFAULT_MULTIPLIER),
            steps=getattr(args, "steps", None),
        )
    except ValueError as e:
        raise UsageError(str(e)) from e


def parse_n_range(text: str) -> List[int]:
    """'5..11', '8..64:2' or '8,9,10'."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = span.split("..")
            return list(range(int(lo), int(hi) + 1, int(step) if step else 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range '{text}' (use A..B, A..B:STEP or A,B,C)")


def parse_axis(text: str):
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad axis '{text}' (use X,Y,Z)")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"axis needs three components, got '{text}'")
    return tuple(parts)


def _emit(obj: dict, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_json(out, obj)
    else:
        sys.stdout.write(dumps_json(obj))


def _out_dir(args) -> Path:
    path = Path(args.out or SETTINGS.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _ledger(args) -> Optional[RunLedger]:
    url = args.db or SETTINGS.db_url
    return RunLedger(url) if url else None


def _schedule_for(gap: Optional[float], args):
    if args.time is not None:
        return make_schedule(args.time, axis=args.axis, direction=args.direction)
    # H0 = 0 has no gap; every T is a closed path with nothing to follow
    return schedule_from_gap(gap if gap is not None else 1.0, args.multiplier, axis=args.axis,
                             direction=args.direction)


# -------------------------------------------------------------------
# Subcommands
# -------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = run_config(args)
    if cfg.n is None:
        raise UsageError("gen needs --n")
    inst = cfg.load_instance()
    out = args.out or str(Path(SETTINGS.output_dir) / f"instance_n{inst.n}_s{inst.seed}.json")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_instance(inst, out)
    logger.info(f"Instance n={inst.n} m={inst.m} written to {out}")
    return 0


def cmd_spectrum(args) -> int:
    inst = run_config(args).load_instance()
    h0 = build_h0(inst)
    if args.coo:
        write_coo(h0, args.coo)
    if args.method == "dense":
        res = summarize_dense(dense_spectrum(h0), tol=1e-9 * inst.clause.delta)
    elif args.method == "components":
        res = component_spectrum(inst)
    else:
        res = ground_and_gap(h0, workers=args.workers, energy_unit=inst.clause.delta)
    _emit(spectrum_report(res, inst.digest(), inst.n, inst.m, seed=inst.seed, timings=args.timings), args.out)
    return 0


def cmd_evolve(args) -> int:
    cfg = run_config(args)
    inst = cfg.load_instance()
    spec = component_spectrum(inst, with_basis=True)
    sched = _schedule_for(spec.gap_delta, args)
    h0 = build_h0(inst)
    psi0 = np.zeros(h0.dimension, dtype=complex)
    psi0[0 if args.initial == "zeros" else -1] = 1.0
    if args.frame == "rotating":
        result = evolve_rotating(h0, sched, psi0, basis=spec.ground_basis, checkpoints=args.checkpoints)
    else:
        result = evolve_lab(h0, sched, psi0, steps=cfg.steps, basis=spec.ground_basis,
                            checkpoints=args.checkpoints)
    report = evolution_report(result, inst.digest())
    if not args.timings:
        report.pop("wall_time_ms")
    _emit(report, args.out)
    return 0


def cmd_holonomy(args) -> int:
    inst = run_config(args).load_instance()
    h0 = build_h0(inst)
    spec = ground_and_gap(h0, energy_unit=inst.clause.delta)
    sched = make_schedule(args.time, axis=args.axis, direction=args.direction)
    gh = compute_holonomy(spec.ground_basis, sched, steps=args.path_steps, sign=args.sign)
    psi0 = np.zeros(h0.dimension, dtype=complex)
    psi0[0] = 1.0
    coeffs = ground_coefficients(psi0, spec.ground_basis)
    predicted = predict_final_state(gh.holonomy, coeffs, spec.ground_basis, sched)
    evolved = None
    if not args.no_evolve:
        evolved = evolve_rotating(h0, sched, psi0, basis=spec.ground_basis).final_state
    report = holonomy_report(gh, predicted, spec.ground_basis, evolved)
    report["instance"] = inst.digest()
    report["T"] = sched.total_time
    _emit(report, args.out)
    return 0


def cmd_chain(args) -> int:
    out = _out_dir(args)
    rows = gap_law_table(args.n, args.betas, args.boundary, args.delta)
    write_csv(out / "chain_gaps.csv", ["n", "beta", "boundary", "gap"],
              [(r.n, r.beta, r.boundary, r.gap) for r in rows])
    fits = {}
    for beta in args.betas:
        picked = [r for r in rows if r.beta == beta]
        if len(picked) >= 2:
            fits[format(beta, ".17g")] = fit_gap_exponent([r.n for r in picked], [r.gap for r in picked])
    write_json(out / "chain_fit.json", {"boundary": args.boundary, "exponents": fits})
    return 0


def cmd_scaling(args) -> int:
    out = _out_dir(args)
    clause = make_clause(complex(args.beta_re, args.beta_im), args.delta)
    records = run_scaling(args.n, args.d, args.samples, clause, args.base_seed, args.workers,
                          _ledger(args), full=args.full)
    try:
        fit = fit_loglog(records)
    except ParameterError as e:
        logger.warning(f"No fit: {e}")
        fit = None
    write_scaling_csv(out / "scaling.csv", records)
    write_fit_json(out / "scaling_fit.json", fit, records)
    write_scaling_plot(out / "scaling.dat", records, fit)
    if fit:
        logger.info(f"Fit: slope={fit.slope:.4f} intercept={fit.intercept:.4f} r={fit.correlation_r:.4f}")
    return 0


def cmd_hist(args) -> int:
    out = _out_dir(args)
    clause = make_clause(complex(args.beta_re, args.beta_im), args.delta)
    samples = args.samples or (10000 if args.full else 2000)
    result = run_histogram(args.n, args.d, samples, clause, args.base_seed, args.workers, args.bin_width,
                           _ledger(args))
    write_histogram_csv(out / f"hist_n{args.n:02d}.csv", result.bins)
    write_histogram_plot(out / f"hist_n{args.n:02d}.dat", result.bins)
    if result.values:
        logger.info(f"n={args.n}: mean={result.mean:.6g} median={result.median:.6g} "
                    f"excluded={result.excluded_count}")
    return 0


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    clause = make_clause(complex(args.beta_re, args.beta_im), args.delta)
    kwargs = dict(multiplier=args.multiplier, clause=clause, base_seed=args.base_seed, workers=args.workers,
                  ledger=_ledger(args), frame=args.frame, steps=args.steps)
    if args.spot:
        spots = {}
        for n in args.n:
            for d, agg in d_spot_check(n, samples=args.samples, **kwargs).items():
                spots.setdefault(str(n), {})[format(d, ".17g")] = {
                    "samples": agg.sample_count,
                    "excluded": agg.excluded_count,
                    "mean_trivial_probability": agg.mean_trivial_probability,
                    "sem_trivial_probability": agg.sem_trivial_probability,
                    "mean_ground_fidelity": agg.mean_ground_fidelity,
                }
        write_json(out / "spot_check.json", spots)
        return 0
    table = run_dynamics_sweep(args.n, args.d, args.samples, **kwargs)
    write_dynamics_csv(out / "dynamics.csv", table)
    write_dynamics_plot(out / "dynamics.dat", table)
    return 0


# -------------------------------------------------------------------
# Parser
# -------------------------------------------------------------------


def _add_clause_flags(p) -> None:
    p.add_argument("--beta-re", type=float, default=DEFAULT_BETA.real, help="Re(beta) of the clause")
    p.add_argument("--beta-im", type=float, default=DEFAULT_BETA.imag, help="Im(beta) of the clause")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="clause energy Delta")


def _add_instance_flags(p) -> None:
    p.add_argument("--in", dest="instance", help="instance JSON file (excludes --n/--d/--seed)")
    p.add_argument("--n", type=int, help="number of qubits for a generated instance")
    p.add_argument("--d", type=float, help=f"edge density (default: {DEFAULT_DENSITY})")
    p.add_argument("--seed", type=int, help="generator seed (default: 0)")
    _add_clause_flags(p)


def _add_rotation_flags(p, default_time=None) -> None:
    p.add_argument("--axis", type=parse_axis, default=(0.0, 1.0, 0.0), help="rotation axis X,Y,Z")
    p.add_argument("--direction", type=int, choices=[1, -1], default=1, help="traversal direction")
    p.add_argument("--time", type=float, default=default_time, help="total time T (overrides --multiplier)")


def _add_ensemble_flags(p, n_default: str, d_default: float = DEFAULT_DENSITY) -> None:
    p.add_argument("--n", type=parse_n_range, default=parse_n_range(n_default), help="qubit counts, A..B or A,B")
    p.add_argument("--d", type=float, default=d_default, help="edge density")
    p.add_argument("--base-seed", type=int, default=0, help="seed of instance 0; instance i uses base+i")
    p.add_argument("--workers", type=int, default=SETTINGS.workers, help="worker processes")
    p.add_argument("--db", default=None, help="run ledger URL (default: Q2SAT_DB_URL, empty disables)")
    _add_clause_flags(p)


def build_parser() -> CliParser:
    parser = CliParser(prog="q2sat", description="Adiabatic rotation simulator for quantum 2-SAT with identical clauses.",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen", help="write a random instance file", formatter_class=fmt)
    _add_instance_flags(p)
    p.add_argument("--out", help="instance path (default: $Q2SAT_OUTPUT_DIR/instance_nN_sS.json)")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("spectrum", help="ground energy, gap and degeneracy report", formatter_class=fmt)
    _add_instance_flags(p)
    p.add_argument("--method", choices=["full", "components", "dense"], default="full", help="solver")
    p.add_argument("--workers", type=int, default=SETTINGS.workers, help="threads for sector solves")
    p.add_argument("--coo", help="also dump H0 in coordinate format to this path")
    p.add_argument("--timings", action="store_true", help="include wall times (output no longer reproducible)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("evolve", help="adiabatic run and measurement report", formatter_class=fmt)
    _add_instance_flags(p)
    _add_rotation_flags(p)
    p.add_argument("--multiplier", type=float, default=DEFAULT_MULTIPLIER, help="T = multiplier pi/(50 delta^2); 1 is the literal schedule")
    p.add_argument("--steps", type=int, help="RK4 steps (default: step rule)")
    p.add_argument("--frame", choices=["lab", "rotating"], default="lab", help="integration frame")
    p.add_argument("--initial", choices=["zeros", "ones"], default="zeros", help="trivial initial state")
    p.add_argument("--checkpoints", type=int, default=0, help="intermediate diagnostics rows")
    p.add_argument("--timings", action="store_true", help="include wall times (output no longer reproducible)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("holonomy", help="gauge matrix, holonomy and dynamics cross-check", formatter_class=fmt)
    _add_instance_flags(p)
    _add_rotation_flags(p, default_time=1000.0)
    p.add_argument("--sign", type=int, choices=[1, -1], default=1, help="U = exp(sign i A T)")
    p.add_argument("--path-steps", type=int, default=1, help="midpoint steps of the path-ordered product")
    p.add_argument("--no-evolve", action="store_true", help="skip the full-evolution cross-check")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(handler=cmd_holonomy)

    p = sub.add_parser("chain", help="one-magnon gap-law table", formatter_class=fmt)
    p.add_argument("--n", type=parse_n_range, default=parse_n_range("8..64:2"), help="chain lengths")
    p.add_argument("--betas", type=float, nargs="+", default=[2 ** -0.5], help="beta values")
    p.add_argument("--boundary", choices=["periodic", "open"], default="periodic", help="boundary condition")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="clause energy Delta")
    p.add_argument("--out", help="output directory (default: $Q2SAT_OUTPUT_DIR)")
    p.set_defaults(handler=cmd_chain)

    p = sub.add_parser("scaling", help="<1/delta^2> against n and the log-log fit", formatter_class=fmt)
    _add_ensemble_flags(p, "5..11")
    p.add_argument("--samples", type=int, help="samples per n (default: desk table, or full table with --full)")
    p.add_argument("--full", action="store_true", help="full sample counts (10000/1000/100)")
    p.add_argument("--out", help="output directory (default: $Q2SAT_OUTPUT_DIR)")
    p.set_defaults(handler=cmd_scaling)

    p = sub.add_parser("hist", help="histogram of 1/delta^2 at one n", formatter_class=fmt)
    p.add_argument("--n", type=int, default=11, help="number of qubits")
    p.add_argument("--d", type=float, default=DEFAULT_DENSITY, help="edge density")
    p.add_argument("--samples", type=int, help="instances (default: 2000, or 10000 with --full)")
    p.add_argument("--full", action="store_true", help="full sample count")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH, help="bin width")
    p.add_argument("--base-seed", type=int, default=0, help="seed of instance 0")
    p.add_argument("--workers", type=int, default=SETTINGS.workers, help="worker processes")
    p.add_argument("--db", default=None, help="run ledger URL")
    _add_clause_flags(p)
    p.add_argument("--out", help="output directory (default: $Q2SAT_OUTPUT_DIR)")
    p.set_defaults(handler=cmd_hist)

    p = sub.add_parser("sweep", help="trivial probability after the rotation, per n", formatter_class=fmt)
    _add_ensemble_flags(p, "8..10")
    p.add_argument("--samples", type=int, default=50, help="instances per n")
    p.add_argument("--multiplier", type=float, default=DEFAULT_MULTIPLIER, help="T = multiplier pi/(50 delta^2); 1 is the literal schedule")
    p.add_argument("--frame", choices=["lab", "rotating"], default="lab", help="integration frame")
    p.add_argument("--steps", type=int, help="RK4 steps (default: step rule)")
    p.add_argument("--spot", action="store_true", help="spot check at d in {0.1, 0.15, 0.2} instead")
    p.add_argument("--out", help="output directory (default: $Q2SAT_OUTPUT_DIR)")
    p.set_defaults(handler=cmd_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1

    logging.basicConfig(level=SETTINGS.log_level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (UsageError, ParameterError) as e:
        print(f"q2sat {args.command}: error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"q2sat {args.command}: numerical failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

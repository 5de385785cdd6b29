"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 guardrail breach,
3 solver failure, 4 usage or configuration error.
"""
import argparse
import csv
import datetime as _dt
import json
import os
import sys
from contextlib import nullcontext

from .errors import ConfigurationError, GuardrailBreach, PhysvacError, SchemaError, SolverFailure

EXIT_OK, EXIT_VERIFY, EXIT_GUARDRAIL, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2, 3, 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class _Run:
    """Collects artifacts and writes ``manifest.json`` on exit."""

    def __init__(self, out, command, config):
        self.out = out
        self.command = command
        self.config = config
        self.artifacts = []
        self.start = _now()
        if out:
            os.makedirs(out, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out, name)
        self.artifacts.append(p)
        return p

    def finish(self, reason, status, extra=None):
        if not self.out:
            return status
        from .io import write_manifest

        manifest = {
            "command": self.command,
            "config": self.config.to_dict() if self.config is not None else None,
            "version": _version(),
            "start": self.start,
            "end": _now(),
            "termination": reason,
            "exit_status": status,
            "artifacts": list(self.artifacts),
        }
        if extra:
            manifest.update(extra)
        mpath = os.path.join(self.out, "manifest.json")
        manifest["artifacts"].append(mpath)
        write_manifest(mpath, manifest)
        return status


def _config(args):
    from .config import config_from_dict, load_config

    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict({})
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_simulate(args):
    from .dynamics import simulate
    from .io import write_fields, write_trace

    cfg = _config(args)
    run = _Run(args.out, "simulate", cfg)
    grid = cfg.make_grid()
    count = [0]

    def dump(state, rep):
        if args.out:
            base = os.path.join(args.out, f"fields_{count[0]:05d}")
            meta, binp = write_fields(base, {"disp": state.disp, "v": state.v}, grid)
            run.artifacts += [meta, binp]
        count[0] += 1

    res = simulate(cfg, on_output=dump)
    if args.out:
        write_trace(run.path("trace.csv"), res.reports)
    print(f"steps {res.steps}  dt {res.dt:.6g}  E-drift {res.e_drift:.3e}  reports {len(res.reports)}")
    if res.breach is not None:
        print(f"terminated: {res.breach}", file=sys.stderr)
        return run.finish("guardrail-breach", EXIT_GUARDRAIL, {"breach": str(res.breach)})
    return run.finish("completed", EXIT_OK, {"e_drift": res.e_drift})


def cmd_iterate(args):
    from .dynamics import picard_run

    cfg = _config(args)
    run = _Run(args.out, "iterate", cfg)
    tr = picard_run(cfg, args.iterations)
    for i, d in enumerate(tr.defects):
        print(f"iterate {i}: defect {d:.6e}  Adev {tr.adev[i]:.4f}  J [{tr.jmin[i]:.4f}, {tr.jmax[i]:.4f}]")
    if args.out:
        with open(run.path("picard.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "defect", "Adev", "Jmin", "Jmax"])
            for i, d in enumerate(tr.defects):
                w.writerow([i, repr(d), repr(tr.adev[i]), repr(tr.jmin[i]), repr(tr.jmax[i])])
    if tr.breach is not None:
        print(f"aborted: {tr.breach}", file=sys.stderr)
        return run.finish("guardrail-breach", EXIT_GUARDRAIL, {"breach": str(tr.breach)})
    return run.finish("completed", EXIT_OK)


def cmd_elliptic(args):
    from .degelliptic import EllipticProblem, solve
    from .io import read_fields, write_fields

    cfg = _config(args)
    run = _Run(args.out, "elliptic-solve", cfg)
    grid = cfg.make_grid()
    dump = read_fields(args.input)
    if tuple(dump.dims) != grid.shape:
        raise SchemaError(f"dump dims {dump.dims} do not match config grid {grid.shape}")
    if "G" not in dump.fields:
        raise SchemaError("input dump has no field named 'G'")
    prob = EllipticProblem(cfg.weight_field(grid), grid, cfg.lam, cfg.tol, cfg.max_iter)
    try:
        u, hist = solve(dump.fields["G"], prob, return_history=True)
    except SolverFailure:
        run.finish("solver-failure", EXIT_SOLVER)
        raise
    print(f"solved {len(hist)} component(s); final relative residuals "
          + ", ".join(f"{h[-1]:.2e}" for h in hist))
    if args.out:
        meta, binp = write_fields(os.path.join(args.out, "solution"), {"u": u}, grid)
        run.artifacts += [meta, binp]
        with open(run.path("residuals.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "iteration", "relative_residual"])
            for c, h in enumerate(hist):
                for i, r in enumerate(h):
                    w.writerow([c, i, repr(r)])
    return run.finish("completed", EXIT_OK)


def cmd_energy(args):
    from .dynamics import FlowState
    from .energies import total_energy
    from .io import read_fields, write_trace

    cfg = _config(args)
    run = _Run(args.out, "energy-report", cfg)
    grid = cfg.make_grid()
    wf = cfg.weight_field(grid)
    if args.input:
        d = read_fields(args.input)
        if tuple(d.dims) != grid.shape:
            raise SchemaError(f"dump dims {d.dims} do not match config grid {grid.shape}")
        state = FlowState(d.fields.get("disp", grid.zeros(3)), d.fields.get("v", grid.zeros(3)))
    else:
        state = FlowState.identity(grid, cfg.initial_velocity(grid))
    rep = total_energy(state, state.kinematics(grid), wf, cfg.N_monitor, grid, cfg.quadrature)
    for name in ("E", "EN", "BN", "CN", "DN", "TEN", "Jmin", "Jmax", "Adev"):
        print(f"{name:5s} {getattr(rep, name):.12e}")
    if args.out:
        write_trace(run.path("energy.csv"), [rep])
        with open(run.path("energy_tables.json"), "w") as fh:
            json.dump({tab: {",".join(map(str, k)): v for k, v in getattr(rep, tab).items()}
                       for tab in ("table_E", "table_B", "table_C", "table_D")}, fh, indent=2)
    return run.finish("completed", EXIT_OK)


def cmd_convergence(args):
    from .convergence import convergence_study

    run = _Run(args.out, "convergence", None)
    table = convergence_study(args.study)
    for line in table.lines():
        print(line)
    if args.out:
        with open(run.path(f"convergence_{args.study}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "level", "size", "error", "order"])
            for name, errs in table.errors.items():
                for lvl, h, e in zip(table.levels, table.sizes, errs):
                    w.writerow([name, str(lvl), repr(h), repr(e), repr(table.orders[name])])
    return run.finish("completed", EXIT_OK, {"orders": table.orders})


def cmd_verify(args):
    from .verify import run_verification

    run = _Run(args.out, "verify", None)
    results = run_verification(seed=args.seed or 0)
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    if failed:
        return run.finish("verification-failed", EXIT_VERIFY, {"failed": failed})
    return run.finish("completed", EXIT_OK)


def build_parser():
    from .convergence import STUDIES

    p = _Parser(prog="physvac", description="Flow-map laboratory for gas with a physical vacuum boundary.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_, config=True):
        sp = sub.add_parser(name, help=help_)
        if config:
            sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized inputs")
        sp.set_defaults(func=fn)
        return sp

    add("simulate", cmd_simulate, "integrate the flow map and write trace, fields and manifest")
    sp = add("iterate", cmd_iterate, "run the frozen-coefficient fixed-point iteration")
    sp.add_argument("--iterations", type=int, default=5)
    sp = add("elliptic-solve", cmd_elliptic, "solve the degenerate elliptic equation for a dumped G")
    sp.add_argument("--input", required=True, help="field dump containing 'G'")
    sp = add("energy-report", cmd_energy, "evaluate all energy functionals")
    sp.add_argument("--input", help="field dump with 'disp' and 'v' (default: initial state)")
    sp = add("convergence", cmd_convergence, "run a refinement ladder and print observed orders", config=False)
    sp.add_argument("--study", required=True, choices=STUDIES)
    add("verify", cmd_verify, "run the invariant suite", config=False)
    return p


def _thread_limit():
    n = os.environ.get("VEL_THREADS")
    if not n:
        return nullcontext()
    try:
        count = int(n)
    except ValueError:
        raise _UsageError(f"VEL_THREADS must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(count, 1))


def run_cli(argv=None):
    """Parse ``argv`` and dispatch; returns the process exit status."""
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "iterations", 0) is not None and getattr(args, "iterations", 0) < 0:
            raise _UsageError("--iterations must be >= 0")
        with _thread_limit():
            return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GuardrailBreach as exc:
        print(f"guardrail breach: {exc}", file=sys.stderr)
        return EXIT_GUARDRAIL
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PhysvacError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run_cli())

"""Command-line interface.

Subcommands
-----------
rates <config>          branch shifts, decays and jump amplitudes per n
gate toffoli <config>   single-point Toffoli-like gate report
gate cz <config>        single-point CZ gate report
sweep <config>          grid sweep to CSV (see runner)
compare <config>        two-engine deviation table (see runner)

All subcommands read the [system] section of the same INI format; sweep and
compare also use [sweep] / [compare] / [integrator].  Exit codes: 0 on
success, 2 when any grid point failed (the sweep still completes and the CSV
records the error), 1 on a configuration problem.
"""
from __future__ import annotations

import argparse
import sys

from dataclasses import replace

from . import effective, gates, runner

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):   # usage problems are config errors: exit 1
        self.print_usage(sys.stderr)
        raise runner.ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="heraldgate",
                     description="heralded phase gates in coupled "
                                 "dissipative resonators")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, engine=True):
        p.add_argument("config", help="INI configuration file")
        if engine:
            p.add_argument("--engine", choices=runner.ENGINES,
                           help="override the configured engine")
        p.add_argument("--n-max", type=int, dest="n_max",
                       help="override the field Fock cutoff")
        p.add_argument("--rtol", type=float, help="integrator tolerance")
        p.add_argument("--out", help="output CSV path")

    p_rates = sub.add_parser("rates", help="dump the branch rate table")
    add_common(p_rates, engine=False)
    p_rates.add_argument("--method", default="exact",
                         choices=("exact", "taylor", "numeric"),
                         help="rate computation path (default exact)")

    p_gate = sub.add_parser("gate", help="single-point gate report")
    gate_sub = p_gate.add_subparsers(dest="kind", required=True)
    for kind in runner.GATE_KINDS:
        add_common(gate_sub.add_parser(kind))

    add_common(sub.add_parser("sweep", help="run a grid sweep"))
    add_common(sub.add_parser("compare", help="compare two engines"),
               engine=False)
    return parser


def _load(args) -> runner.SweepConfig:
    cfg = runner.load_config(args.config)
    if getattr(args, "engine", None):
        cfg = replace(cfg, engine=args.engine)
    if args.n_max is not None:
        cfg = replace(cfg, n_max=args.n_max)
    if args.rtol is not None:
        cfg = replace(cfg, rtol=args.rtol)
    cfg.validate()
    return cfg


def _cmd_rates(args) -> int:
    cfg = _load(args)
    params = cfg.base if cfg.n_max is None else \
        replace(cfg.base, n_max=cfg.n_max)
    table = effective.rate_table(params, args.method)
    if args.out:
        effective.rate_table_to_csv(table, args.out)
        print(f"wrote {args.out}")
    else:
        print(f"# provenance: {table[0].provenance}")
        print(f"{'n':>3} {'Delta_n':>15} {'Gamma_n':>15}")
        for r in table:
            print(f"{r.n:3d} {r.shift:15.8e} {r.decay:15.8e}")
    return 0


def _cmd_gate(args) -> int:
    cfg = _load(args)
    params = runner._point_params(cfg, None, cfg.grid[0]) if cfg.grid \
        else cfg.base
    report = gates.gate_metrics(params, args.kind, cfg.engine,
                                **runner._engine_kwargs(cfg, cfg.engine))
    print(f"{args.kind} gate, engine {cfg.engine} "
          f"(provenance {report.provenance})")
    print(f"  success probability  P = {report.success_probability:.6f}")
    print(f"  conditional fidelity F = {report.conditional_fidelity:.6f}"
          f"   (error {1 - report.conditional_fidelity:.3e})")
    line = f"  duration             t = {report.duration:.4f} / gamma"
    if cfg.gamma_MHz is not None:
        line += (f"  = {runner.gamma_time_to_us(report.duration, cfg.gamma_MHz):.3f} us"
                 f"  (gamma / 2 pi = {cfg.gamma_MHz:g} MHz)")
    print(line)
    if report.scaling:
        print("  scaling:", ", ".join(f"{k} = {v:.6g}"
                                      for k, v in report.scaling.items()))
    if report.diagnostics:
        d = report.diagnostics
        print(f"  diagnostics: trace_err = {d['trace_error']:.2e}, "
              f"herm_err = {d['herm_error']:.2e}, "
              f"top_fock = {d['top_fock']:.2e}, "
              f"wall = {d['wall_time']:.1f} s, n_max = {d['n_max']}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("kind,N,C_B,lambda,Delta_e1,P,F,t,provenance\n")
            fh.write(gates.report_csv_row(report, params) + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    result = runner.run_sweep(cfg, out=args.out)
    where = result.path if result.path else "(not written)"
    print(f"{len(result.rows)} points, {result.n_errors} failed -> {where}")
    return 2 if result.n_errors else 0


def _cmd_compare(args) -> int:
    cfg = _load(args)
    report = runner.compare_engines(cfg, out=args.out)
    print(f"engines {report.engines[0]} vs {report.engines[1]}: "
          f"{len(report.rows)} points, {report.n_errors} failed")
    print(f"  max |dP| = {report.max_dev_P:.3e}   max |dF| = {report.max_dev_F:.3e}")
    if report.path:
        print(f"wrote {report.path}")
    return 2 if report.n_errors else 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "rates":
            return _cmd_rates(args)
        if args.command == "gate":
            return _cmd_gate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_compare(args)
    except runner.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

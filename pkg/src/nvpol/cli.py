"""Command line entry point: ``nvpol <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from . import hyperfine as hfm
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .dissipation import MODELS, InvalidStateError, NumericalFailure
from .experiments import figure_tables, metadata, run_table, sweep_table
from .linalg import DimensionError
from .sequences import ProtocolInapplicableError
from .selftest import run_selftest
from .tables import OUTPUT_DIR_ENV, resolve_output, write_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    p.add_argument("--config", help="flat key = value file; flags override its keys")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    for f in fields(ExperimentConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name,
                       metavar=f.name.upper(), help=argparse.SUPPRESS)


def build_parser():
    parser = _Parser(prog="nvpol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nvpol {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="single protocol run, trajectory CSV")
    _add_config_flags(p)
    p = sub.add_parser("sweep", help="protocol sweep over one axis")
    _add_config_flags(p)

    p = sub.add_parser("figure", help="regenerate the data behind one figure")
    p.add_argument("name", choices=["2", "3", "4", "5", "6", "s2"])
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--workers", type=int)

    sub.add_parser("models", help="print the optical rate models")
    p = sub.add_parser("families", help="print the hyperfine family registry")
    p.add_argument("--file", action="append", default=[], help="extra family data file")
    sub.add_parser("selftest", help="run the invariant suite")
    return parser


def _config_from_args(args):
    overrides = list(args.set)
    for f in fields(ExperimentConfig):
        v = getattr(args, "cfg_" + f.name)
        if v is not None:
            overrides.append(f"{f.name}={v}")
    if args.config:
        return load_config(args.config, overrides)
    return apply_overrides(ExperimentConfig(), overrides).validate()


def cmd_run(args):
    cfg = _config_from_args(args)
    if cfg.sweep is not None:
        raise ConfigError("run takes no sweep axis; use the sweep command")
    table, res = run_table(cfg.run_spec(), metadata(cfg.to_text()))
    write_table(table, resolve_output(cfg.output, f"run_{cfg.protocol}.csv"))
    for k, v in res.readouts.items():
        print(f"{k} = {v:.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config_from_args(args)
    if cfg.sweep is None:
        raise ConfigError("sweep needs a sweep axis and grid")
    table, points = sweep_table(cfg.sweep, cfg.grid_values(), cfg.run_spec(),
                                metadata(cfg.to_text()), workers=cfg.workers)
    write_table(table, resolve_output(cfg.output, f"sweep_{cfg.protocol}_{cfg.sweep}.csv"))
    failed = [p for p in points if p.error]
    for p in failed:
        print(f"point {p.value}: {p.error}", file=sys.stderr)
    if failed and len(failed) == len(points):
        return EXIT_NUMERIC if any("Numerical" in p.error for p in failed) else EXIT_CONFIG
    return EXIT_OK


def cmd_figure(args):
    out_dir = args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    tables = figure_tables(args.name, workers=args.workers)
    for stem, table in tables.items():
        path = os.path.join(out_dir, stem + ".csv")
        write_table(table, path)
        print(path)
    return EXIT_OK


def cmd_models(args):
    keys = ("gamma", "e", "k0S", "k+S", "k-S", "kS0", "kS+", "kS-")
    print("rate      " + "".join(f"{'model ' + m:>12}" for m in MODELS))
    for key in keys:
        vals = [MODELS[m].mhz()[key] for m in MODELS]
        print(f"{key:<10}" + "".join(f"{v:>12.6g}" for v in vals))
    print("(rates in MHz)")
    return EXIT_OK


def cmd_families(args):
    reg = hfm.family_registry(args.file)
    print(f"{'family':<10}{'species':<8}{'manifold':<9}"
          f"{'A_zz':>10}{'A_perp':>10}{'A_perp2':>10}{'A_ani':>10}  source")
    for rec in reg:
        name = rec.name
        for t in (rec.ground, rec.excited):
            lc = hfm.ladder_components(t)
            vals = np.array([lc.a_zz, lc.a_perp, lc.a_perp_prime, lc.a_ani]) / (2 * np.pi)
            print(f"{name:<10}{rec.species:<8}{t.manifold:<9}"
                  + "".join(f"{v:>10.4g}" for v in vals) + f"  {rec.source}")
    print("(hyperfine in MHz)")
    return EXIT_OK


def cmd_selftest(args):
    return EXIT_OK if run_selftest(sys.stdout) else EXIT_NUMERIC


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "figure": cmd_figure,
            "models": cmd_models, "families": cmd_families, "selftest": cmd_selftest}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (NumericalFailure, InvalidStateError, DimensionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ProtocolInapplicableError, hfm.UnknownFamilyError, ValueError,
            KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"configuration error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

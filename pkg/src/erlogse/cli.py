"""Command-line entry point: ``erlogse <study> [--config FILE] [--out DIR] [--threads N]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import ALL_TABLEAUX, load_config
from .errors import ConfigurationError, RelaxationBreakdown, TableauError
from .tableaux import load_tableau, validate_tableau


def _common(p: argparse.ArgumentParser, top: bool = False) -> None:
    # flags may come before or after the subcommand; the subparser must not
    # clobber a value given at the top level
    default = None if top else argparse.SUPPRESS
    p.add_argument("--config", type=Path, default=default, help="key = value configuration file")
    p.add_argument("--out", type=Path, default=default, help="output directory (default: results)")
    p.add_argument("--threads", type=int, default=default, help="worker threads for study points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erlogse", description=__doc__)
    _common(parser, top=True)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("converge-eps", "regularization error versus eps"),
        ("converge-time", "temporal error versus tau, per tableau"),
        ("converge-space", "spatial error versus N"),
        ("gamma-study", "max |gamma - 1| versus tau, per tableau"),
        ("dynamics", "two-Gausson collision with mass history"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "dynamics":
            p.add_argument("--no-relaxation", action="store_true", help="force gamma = 1")
    p = sub.add_parser("validate-tableau", help="check order conditions of shipped or user tableaus")
    _common(p)
    p.add_argument("tableaux", nargs="*", help="registry names or .tab files (default: all shipped)")
    return parser


def _cfg(study: str, args):
    overrides = {"threads": args.threads}
    if getattr(args, "no_relaxation", False):
        overrides["relaxation"] = False
    cfg = load_config(study, args.config, **overrides)
    if cfg.threads < 1:
        raise ConfigurationError("--threads must be at least 1")
    if not cfg.cache_dir:
        cfg.cache_dir = str(args.out / "cache")
    return cfg


def _write(report, out: Path) -> int:
    for path in ex.write_report(report, out):
        print(path)
    for name, fits in report.fits.items():
        shown = ", ".join(f"{k}={v:.4g}" for k, v in fits.items())
        print(f"  {name}: {shown}")
    return 0


def cmd_converge_eps(args) -> int:
    cfg = _cfg("converge-eps", args)
    return _write(ex.study_epsilon(cfg.eps_list, cfg.reg_order_list, cfg), args.out)


def cmd_converge_time(args) -> int:
    cfg = _cfg("converge-time", args)
    rows, fits = [], {}
    for k in cfg.reg_order_list:
        for eps in cfg.eps_list:
            rep = ex.study_time(cfg.tau_list, cfg.tableau_list, eps, k, cfg)
            rows += rep.rows
            fits.update(rep.fits)
    return _write(ex.StudyReport("converge-time", rows, fits), args.out)


def cmd_converge_space(args) -> int:
    cfg = _cfg("converge-space", args)
    return _write(ex.study_space(cfg.n_list, cfg), args.out)


def cmd_gamma_study(args) -> int:
    cfg = _cfg("gamma-study", args)
    return _write(ex.study_gamma(cfg.tau_list, cfg.tableau_list, cfg), args.out)


def cmd_dynamics(args) -> int:
    cfg = _cfg("dynamics", args)
    res = ex.run_dynamics(cfg)
    for path in ex.write_dynamics(res, args.out):
        print(path)
    print(f"  max relative mass error: {res.relative_mass_error.max():.3e}")
    return 0


def cmd_validate_tableau(args) -> int:
    status = 0
    for source in args.tableaux or ALL_TABLEAUX:
        try:
            report = validate_tableau(load_tableau(source, validate=False))
        except (TableauError, OSError) as exc:
            print(f"{source}: {exc}", file=sys.stderr)
            status = 1
            continue
        print(report.summary())
        if not report.ok:
            status = 1
    return status


COMMANDS = {
    "converge-eps": cmd_converge_eps,
    "converge-time": cmd_converge_time,
    "converge-space": cmd_converge_space,
    "gamma-study": cmd_gamma_study,
    "dynamics": cmd_dynamics,
    "validate-tableau": cmd_validate_tableau,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.out is None:
        args.out = Path("results")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, RelaxationBreakdown, TableauError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point ``wkbflow``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 a check,
comparison or convergence study missed its threshold.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from ..errors import ConfigInvalid, WkbflowError
from .checks import SUITES, run_suite
from .compare import CompareSetup, compare
from .config import load_config, parse_number
from .runner import run, simulate

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _tier_config(path: str, tier: str, output_dir: str | None):
    cfg = load_config(path)
    cfg.tier = tier
    if output_dir:
        cfg.output_dir = output_dir
    return cfg


def cmd_run(args, tier: str) -> int:
    cfg = _tier_config(args.config, tier, args.output_dir)
    code, report = run(cfg)
    print(json.dumps(report, indent=2, sort_keys=True))
    return code


def setup_from_config(cfg, variant: str) -> CompareSetup:
    if cfg.dim != 1:
        raise ConfigInvalid("the comparison harness runs in one dimension", field="grid.dim")
    return CompareSetup(length=cfg.lengths[0], n_x=cfg.n_x[0], n_theta=cfg.n_theta,
                        t_end=cfg.t_end, cfl=cfg.cfl_value, c_s=cfg.c_s, rho_ref=cfg.rho_ref,
                        initial=dict(cfg.initial), variant=variant)


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if args.config_reduced:
        other = load_config(args.config_reduced)
        if other.lengths != cfg.lengths or other.dim != cfg.dim:
            raise ConfigInvalid("full and reduced configs describe different domains",
                                field="grid.lengths")
        if other.initial != cfg.initial:
            raise ConfigInvalid("full and reduced configs use different initial data",
                                field="initial")
    eps_list = [parse_number(e) for e in args.eps.split(",")] if args.eps else [cfg.eps]
    report = compare(setup_from_config(cfg, args.variant), eps_list)
    _emit(report, args.output)
    return EXIT_OK if report["passed"] or len(eps_list) < 2 else EXIT_CHECK


def cmd_convergence(args) -> int:
    """Time-step refinement: successive differences of the final state shrink at RK4 order."""
    cfg = load_config(args.config)
    if args.tier:
        cfg.tier = args.tier
    from .presets import build_initial
    from .runner import make_stepper

    state0 = build_initial(cfg.tier, cfg.grid, cfg.params, cfg.eps, cfg.initial, cfg.seed)
    dt0 = cfg.dt if cfg.dt is not None else make_stepper(cfg, state0).limit(state0)
    finals = []
    for level in range(args.levels):
        c = dataclasses.replace(cfg, dt=dt0 / 2 ** level, cfl=None, diag_every=10 ** 9,
                                snapshot_every=0)
        state, _, _ = simulate(c, state=state0)
        finals.append(np.concatenate([np.ravel(np.real(a)) for a in state.arrays()[:2]]))
    diffs = [float(np.linalg.norm(finals[i] - finals[i + 1]) / np.linalg.norm(finals[-1]))
             for i in range(len(finals) - 1)]
    orders = [float(np.log2(diffs[i] / diffs[i + 1])) for i in range(len(diffs) - 1)
              if diffs[i + 1] > 0]
    report = {"tier": cfg.tier, "dt": [dt0 / 2 ** k for k in range(args.levels)],
              "successive_differences": diffs, "observed_orders": orders,
              "expected_order": 4, "order_threshold": args.min_order,
              "passed": bool(orders and min(orders) >= args.min_order)}
    _emit(report, args.output)
    return EXIT_OK if report["passed"] or not orders else EXIT_CHECK


def cmd_check(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = [run_suite(n) for n in names]
    report = reports[0] if len(reports) == 1 else {
        "suite": "all", "suites": reports, "passed": all(r["passed"] for r in reports)}
    _emit(report, args.output)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wkbflow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for tier in ("base", "extended", "reduced"):
        p = sub.add_parser(f"run-{tier}", help=f"run the {tier} tier")
        p.add_argument("--config", required=True)
        p.add_argument("--output-dir")
        p.set_defaults(func=lambda a, t=tier: cmd_run(a, t))
    p = sub.add_parser("compare", help="full-vs-reduced eps convergence")
    p.add_argument("--config", required=True)
    p.add_argument("--config-reduced")
    p.add_argument("--eps", help="comma separated, fractions allowed (1/16,1/32)")
    p.add_argument("--variant", choices=("base", "extended"), default="base")
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("convergence", help="time-step refinement study")
    p.add_argument("--config", required=True)
    p.add_argument("--tier", choices=("base", "extended", "reduced"))
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--min-order", type=float, default=3.5)
    p.add_argument("--output")
    p.set_defaults(func=cmd_convergence)
    p = sub.add_parser("check", help="run an invariant suite")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WkbflowError as exc:
        print(f"solver error [{exc.invariant}]: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

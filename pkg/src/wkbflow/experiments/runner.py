"""Single runs of any tier: time loop, CSV diagnostics and WKBF snapshots."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import base as tier1
from .. import extended as tier2
from .. import reduced as tier3
from ..errors import WkbflowError
from ..hamiltonian import isothermal_hamiltonian
from ..snapshot import write_snapshot
from ..torus import ScalarField
from .config import RunConfig
from .presets import build_initial


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


@dataclass
class Stepper:
    step: Callable
    limit: Callable
    diagnostics: Callable
    columns: list
    fields: Callable


def _min_grad_S(S) -> float:
    return float(S.grad_norm().values.min())


def make_stepper(cfg: RunConfig, state) -> Stepper:
    params = cfg.params
    H = isothermal_hamiltonian(params)
    cfl = cfg.cfl_value
    dim = cfg.dim
    mom_cols = [f"momentum_{i}" for i in range(dim)] if dim > 1 else ["momentum"]

    if cfg.tier == "base":
        def diag(s):
            row = [s.t, tier1.mass(s), *tier1.momentum(s), tier1.energy(s, H)]
            if dim == 1:
                row.append(tier1.circulation_base(s))
            return row

        cols = ["t", "mass", *mom_cols, "energy"] + (["circulation"] if dim == 1 else [])
        return Stepper(lambda s, dt: tier1.step_rk4(s, H, dt, cfl),
                       lambda s: tier1.cfl_limit(s, H, cfl), diag, cols,
                       lambda s: {"rho": s.rho, "p": s.p, "h": s.h, "chi": s.chi})

    if cfg.tier == "extended":
        closure = tier2.EikonalClosure(params.c_s)

        def diag(s):
            wa = float(s.grid.integrate(tier2.specific_wave_action(s).harmonics[..., 0].real))
            row = [s.t, tier2.total_mass(s), *tier2.total_momentum(s), wa]
            if dim == 1:
                fam = tier2.circulation_family(s, s.grid.n_theta)
                row += [fam.min(), fam.max()]
            return row + [_min_grad_S(s.S)]

        cols = (["t", "mass", *mom_cols, "wave_action_mean"]
                + (["circulation_theta_min", "circulation_theta_max"] if dim == 1 else [])
                + ["min_grad_S"])
        return Stepper(lambda s, dt: tier2.step_extended(s, H, closure, dt, cfl),
                       lambda s: tier2.cfl_limit(s, H, closure, cfl), diag, cols,
                       lambda s: {"rho": s.rho, "p": s.p, "h": s.h, "chi": s.chi,
                                  "S_periodic": s.S.periodic_part})

    def diag(s):
        row = [s.t, tier3.mass(s), *tier3.momentum(s), tier3.total_action(s)]
        if dim == 1:
            row.append(tier3.mean_circulation(s))
        return row + [_min_grad_S(s.S)]

    cols = (["t", "mass", *mom_cols, "wave_action_total"]
            + (["mean_circulation"] if dim == 1 else []) + ["min_grad_S"])
    return Stepper(lambda s, dt: tier3.step_reduced(s, params, dt, cfl),
                   lambda s: tier3.cfl_limit(s, params, cfl), diag, cols,
                   lambda s: {"rho_bar": s.rho_bar, "p_bar": s.p_bar, "chi_bar": s.chi_bar,
                              "action": s.action,
                              "S_periodic": ScalarField(s.grid, s.S.periodic_part.values)})


def simulate(cfg: RunConfig, state=None, on_diag=None, on_snapshot=None, rows=None,
             columns=None):
    """Advance the configured initial state to t_end; returns (final_state, rows, columns).

    ``rows`` and ``columns`` may be caller-owned lists so that diagnostics
    gathered before a solver error survive the exception.
    """
    if state is None:
        state = build_initial(cfg.tier, cfg.grid, cfg.params, cfg.eps, cfg.initial, cfg.seed)
    st = make_stepper(cfg, state)
    rows = [] if rows is None else rows
    if columns is not None:
        columns[:] = st.columns
    rows.append(st.diagnostics(state))
    if on_snapshot is not None and cfg.snapshot_every:
        on_snapshot(0, state, st)
    step = 0
    t_end = cfg.t_end
    if cfg.dt is not None:
        n_steps = int(np.ceil(t_end / cfg.dt - 1e-12))
        dt_fixed = t_end / n_steps if n_steps else 0.0
    while t_end - state.t > 1e-12 * max(1.0, t_end):
        if cfg.dt is not None:
            dt = dt_fixed
        else:
            dt = min(st.limit(state), t_end - state.t)
        state = st.step(state, dt)
        step += 1
        if cfg.dt is not None and step == n_steps:
            state = dataclasses.replace(state, t=t_end)
        if step % cfg.diag_every == 0:
            rows.append(st.diagnostics(state))
            if on_diag is not None:
                on_diag(rows[-1])
        if on_snapshot is not None and cfg.snapshot_every and step % cfg.snapshot_every == 0:
            on_snapshot(step, state, st)
    if step % cfg.diag_every != 0:
        rows.append(st.diagnostics(state))
    return state, rows, st.columns


def run(cfg: RunConfig) -> tuple:
    """Execute a configured run and write its artifacts. Returns (exit_code, report)."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"{cfg.tier}_timeseries.csv")
    report = {"tier": cfg.tier, "csv": csv_path, "snapshots": []}

    def snap(step, state, st):
        path = os.path.join(out, f"{cfg.tier}_{step:06d}.wkbf")
        write_snapshot(path, st.fields(state), state.grid)
        report["snapshots"].append(path)

    code = 0
    rows, cols = [], []
    try:
        state, _, _ = simulate(cfg, on_snapshot=snap, rows=rows, columns=cols)
        report["t_final"] = state.t
        report["status"] = "ok"
    except WkbflowError as exc:
        code = 3
        report["status"] = "solver_error"
        report["error"] = {"type": type(exc).__name__, "invariant": exc.invariant,
                           "message": str(exc), "field": exc.field, "value": exc.value,
                           "location": None if exc.location is None else
                           [int(i) for i in np.atleast_1d(exc.location)]}
    if cols:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([fmt(v) for v in r])
    with open(os.path.join(out, f"{cfg.tier}_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return code, report

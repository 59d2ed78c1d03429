"""Run configuration: INI files with a fixed key list.

Sections and keys (anything else is rejected)::

    [run]          tier (base|extended|reduced), t_end, dt | cfl, seed,
                   output_dir, diag_every, snapshot_every
    [grid]         dim, lengths, n_x, n_theta      (lists are comma separated)
    [hamiltonian]  hamiltonian (isothermal), c_s, rho_ref
    [wave]         eps
    [initial]      preset plus the preset's parameters
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import ConfigInvalid
from ..hamiltonian import IsothermalParams
from ..torus import TorusGrid
from .presets import DEFAULTS, PARAM_KEYS

SCHEMA = {
    "run": {"tier", "t_end", "dt", "cfl", "seed", "output_dir", "diag_every", "snapshot_every"},
    "grid": {"dim", "lengths", "n_x", "n_theta"},
    "hamiltonian": {"hamiltonian", "c_s", "rho_ref"},
    "wave": {"eps"},
    "initial": {"preset"} | set(PARAM_KEYS),
}
TIERS = ("base", "extended", "reduced")


def parse_number(text: str) -> float:
    """Floats, with simple fractions such as ``1/16`` allowed."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise ConfigInvalid(f"not a number: {text!r}") from None


def _list(text: str) -> list:
    return [parse_number(t) for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    tier: str = "base"
    t_end: float = 1.0
    dt: float | None = None
    cfl: float | None = None
    seed: int = 0
    output_dir: str = "wkbflow_out"
    diag_every: int = 1
    snapshot_every: int = 0
    dim: int = 1
    lengths: tuple = (2 * np.pi,)
    n_x: tuple = (128,)
    n_theta: int = 16
    c_s: float = 1.0
    rho_ref: float = 1.0
    eps: float = 1 / 16
    initial: dict = field(default_factory=lambda: {"preset": "rest"})

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.dim, self.lengths, self.n_x, self.n_theta)

    @property
    def params(self) -> IsothermalParams:
        return IsothermalParams(self.c_s, self.rho_ref)

    @property
    def cfl_value(self) -> float:
        return 0.4 if self.cfl is None else self.cfl


def _get(section, key, conv, section_name):
    try:
        return conv(section[key])
    except ConfigInvalid as exc:
        raise ConfigInvalid(str(exc), field=f"{section_name}.{key}") from None
    except (ValueError, TypeError):
        raise ConfigInvalid("malformed value", field=f"{section_name}.{key}") from None


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    return config_from_parser(cp)


def config_from_string(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid(f"cannot parse config: {exc}") from None
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> RunConfig:
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigInvalid(f"unknown section [{name}]", field=name)
        for key in cp[name]:
            if key not in SCHEMA[name]:
                raise ConfigInvalid(f"unknown key {key!r}", field=f"{name}.{key}")
    cfg = RunConfig()
    num = parse_number
    if cp.has_section("run"):
        s = cp["run"]
        if "tier" in s:
            cfg.tier = s["tier"].strip()
        if "t_end" in s:
            cfg.t_end = _get(s, "t_end", num, "run")
        if "dt" in s:
            cfg.dt = _get(s, "dt", num, "run")
        if "cfl" in s:
            cfg.cfl = _get(s, "cfl", num, "run")
        if "seed" in s:
            cfg.seed = _get(s, "seed", int, "run")
        if "output_dir" in s:
            cfg.output_dir = s["output_dir"].strip()
        if "diag_every" in s:
            cfg.diag_every = _get(s, "diag_every", int, "run")
        if "snapshot_every" in s:
            cfg.snapshot_every = _get(s, "snapshot_every", int, "run")
    if cp.has_section("grid"):
        s = cp["grid"]
        if "dim" in s:
            cfg.dim = _get(s, "dim", int, "grid")
        if "lengths" in s:
            cfg.lengths = tuple(_get(s, "lengths", _list, "grid"))
        elif cfg.dim != len(cfg.lengths):
            cfg.lengths = cfg.lengths * cfg.dim
        if "n_x" in s:
            cfg.n_x = tuple(int(v) for v in _get(s, "n_x", _list, "grid"))
        elif cfg.dim != len(cfg.n_x):
            cfg.n_x = cfg.n_x * cfg.dim
        if "n_theta" in s:
            cfg.n_theta = _get(s, "n_theta", int, "grid")
    if cp.has_section("hamiltonian"):
        s = cp["hamiltonian"]
        if s.get("hamiltonian", "isothermal").strip() != "isothermal":
            raise ConfigInvalid("only the isothermal Hamiltonian is available",
                                field="hamiltonian.hamiltonian")
        if "c_s" in s:
            cfg.c_s = _get(s, "c_s", num, "hamiltonian")
        if "rho_ref" in s:
            cfg.rho_ref = _get(s, "rho_ref", num, "hamiltonian")
    if cp.has_section("wave") and "eps" in cp["wave"]:
        cfg.eps = _get(cp["wave"], "eps", num, "wave")
    if cp.has_section("initial"):
        cfg.initial = {k: v.strip() for k, v in cp["initial"].items()}
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.tier not in TIERS:
        raise ConfigInvalid(f"tier must be one of {TIERS}", field="run.tier")
    if cfg.dt is not None and cfg.cfl is not None:
        raise ConfigInvalid("dt and cfl are mutually exclusive", field="run.dt")
    if cfg.dt is not None and cfg.dt <= 0:
        raise ConfigInvalid("dt must be positive", field="run.dt", value=cfg.dt)
    if cfg.cfl is not None and not 0 < cfg.cfl <= 1:
        raise ConfigInvalid("cfl must lie in (0, 1]", field="run.cfl", value=cfg.cfl)
    if cfg.t_end < 0:
        raise ConfigInvalid("t_end must be non-negative", field="run.t_end", value=cfg.t_end)
    if cfg.diag_every < 1 or cfg.snapshot_every < 0:
        raise ConfigInvalid("diag_every >= 1 and snapshot_every >= 0 required", field="run.diag_every")
    if not cfg.eps > 0:
        raise ConfigInvalid("eps must be positive", field="wave.eps", value=cfg.eps)
    try:
        cfg.grid
        cfg.params
    except ValueError as exc:
        raise ConfigInvalid(str(exc), field="grid") from None
    preset = cfg.initial.get("preset")
    if preset not in DEFAULTS:
        raise ConfigInvalid(f"unknown preset {preset!r}; choose from {sorted(DEFAULTS)}",
                            field="initial.preset")
    for key, val in cfg.initial.items():
        if key == "preset":
            continue
        if key not in DEFAULTS[preset]:
            raise ConfigInvalid(f"preset {preset!r} does not take {key!r}", field=f"initial.{key}")
        cfg.initial[key] = parse_number(val) if isinstance(val, str) else float(val)

"""Run configuration: JSON loading, validation and defaults."""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, PhysvacError
from .geometry import Grid
from .presets import VELOCITY_PRESETS, initial_velocity
from .weights import WEIGHT_PRESETS, build_weight

__all__ = ["SimConfig", "load_config", "config_from_dict", "cfl_bound"]


def cfl_bound(grid_dims, gamma, max_w, cfl=0.5):
    """``cfl * h3 / sqrt(gamma * max w)``."""
    return cfl * (1.0 / grid_dims[2]) / np.sqrt(gamma * max_w)


@dataclass(frozen=True)
class SimConfig:
    grid: tuple = (32, 32, 64)
    gamma: float = 2.0
    K: float = 1.0
    weight: str = "parabolic"
    density_file: Optional[str] = None
    velocity: str = "rest"
    amplitude: float = 1e-3
    dt: Optional[float] = None  # filled from the CFL bound when omitted
    cfl: float = 0.5
    T_end: float = 1.0
    N_monitor: int = 2
    adev_max: float = 1.0 / 8.0
    j_lo: float = 2.0 / 3.0
    j_hi: float = 2.0
    C0: Optional[float] = None  # if set, J bounds become [1/C0, C0]
    enforce_guardrails: bool = True
    output_every: int = 10
    lam: float = 10.0
    tol: float = 1e-10
    max_iter: int = 5000
    quadrature: str = "corrected"
    max_order: int = 4
    seed: int = 0

    # -- derived objects -------------------------------------------------
    def make_grid(self):
        return Grid(*self.grid)

    def weight_field(self, grid=None):
        grid = grid or self.make_grid()
        if self.weight == "from-density" and self.density_file:
            from .io import read_fields

            data = read_fields(self.density_file)
            if "rho0" not in data.fields:
                raise ConfigurationError("density_file", "dump has no 'rho0' field")
            return build_weight(data.fields["rho0"], self.gamma, grid, self.K)
        return build_weight(self.weight, self.gamma, grid, self.K)

    def initial_velocity(self, grid=None):
        return initial_velocity(self.velocity, self.amplitude, grid or self.make_grid())

    def guardrails(self):
        from .dynamics import Guardrails

        if self.C0 is not None:
            return Guardrails(self.adev_max, 1.0 / self.C0, self.C0)
        return Guardrails(self.adev_max, self.j_lo, self.j_hi)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["grid"] = list(self.grid)
        return d


_KEYMAP = {"lambda": "lam"}
_FIELDS = {f.name for f in fields(SimConfig)}


def _validate(cfg):
    if len(cfg.grid) != 3 or any(int(n) != n or n < 4 for n in cfg.grid):
        raise ConfigurationError("grid", f"expected three integers >= 4, got {list(cfg.grid)}")
    if not cfg.gamma > 1:
        raise ConfigurationError("gamma", f"must exceed 1 (alpha = 1/(gamma-1)), got {cfg.gamma}")
    if not cfg.K > 0:
        raise ConfigurationError("K", "must be positive")
    if cfg.weight not in WEIGHT_PRESETS:
        raise ConfigurationError("weight", f"unknown preset {cfg.weight!r}; choose from {WEIGHT_PRESETS}")
    if cfg.velocity not in VELOCITY_PRESETS:
        raise ConfigurationError("velocity", f"unknown preset {cfg.velocity!r}; choose from {VELOCITY_PRESETS}")
    if not cfg.T_end > 0:
        raise ConfigurationError("T_end", "must be positive")
    if not 1 <= cfg.N_monitor <= cfg.max_order:
        raise ConfigurationError("N_monitor", f"must lie in [1, max_order={cfg.max_order}]")
    if not cfg.output_every >= 1:
        raise ConfigurationError("output_every", "must be >= 1")
    if not cfg.lam > 0:
        raise ConfigurationError("lambda", "must be positive")
    if not 0 < cfg.tol <= 1e-4:
        raise ConfigurationError("tol", "must lie in (0, 1e-4]")
    if cfg.quadrature not in ("corrected", "midpoint"):
        raise ConfigurationError("quadrature", "must be 'corrected' or 'midpoint'")
    if not 0 < cfg.j_lo < 1 < cfg.j_hi or not cfg.adev_max > 0:
        raise ConfigurationError("j_lo", "guardrails need 0 < j_lo < 1 < j_hi and adev_max > 0")
    if cfg.C0 is not None and not cfg.C0 > 1:
        raise ConfigurationError("C0", "must exceed 1")
    if not 0 < cfg.cfl <= 1:
        raise ConfigurationError("cfl", "must lie in (0, 1]")


def config_from_dict(d):
    """Validate a plain mapping and fill defaults; unknown keys are rejected."""
    if not isinstance(d, dict):
        raise ConfigurationError("<root>", "configuration must be a JSON object")
    kw = {}
    for key, value in d.items():
        name = _KEYMAP.get(key, key)
        if key in _KEYMAP.values() or name not in _FIELDS:
            raise ConfigurationError(key, "unknown configuration key")
        kw[name] = tuple(value) if name == "grid" else value
    try:
        cfg = SimConfig(**kw)
    except TypeError as exc:
        raise ConfigurationError("<root>", str(exc)) from None
    _validate(cfg)
    try:
        max_w = float(cfg.weight_field().w.max())
    except PhysvacError as exc:
        raise ConfigurationError("weight", str(exc)) from None
    bound = cfl_bound(cfg.grid, cfg.gamma, max_w, cfg.cfl)
    if cfg.dt is None:
        cfg = replace(cfg, dt=bound)
    elif not cfg.dt > 0:
        raise ConfigurationError("dt", "must be positive")
    elif cfg.dt > bound:
        raise ConfigurationError("dt", f"{cfg.dt} violates the CFL bound dt <= {bound:.6g}")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError("<file>", f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigurationError("<file>", f"{path}: {exc.strerror}") from None
    return config_from_dict(data)

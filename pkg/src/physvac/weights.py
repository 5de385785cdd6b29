"""Degenerate enthalpy weights, weighted norms and Hardy/embedding checks."""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    DegenerateTestFunctionError,
    InvalidDensityError,
    InvalidExponentError,
    ResolutionError,
)
from .geometry import discrete_gradient, eulerian_gradient, face_average, partial

__all__ = [
    "WEIGHT_PRESETS",
    "WeightField",
    "build_weight",
    "check_physical_vacuum",
    "multi_indices",
    "mixed_derivatives",
    "norm_X",
    "norm_Y",
    "norm_Z",
    "hardy_ratio",
    "embedding_report",
]

WEIGHT_PRESETS = ("parabolic", "sine", "from-density")
DEFAULT_MAX_ORDER = 4


@dataclass(frozen=True)
class WeightField:
    """The weight ``w``, its gradient, exponents, and face values of ``w^(1+alpha)``.

    ``W_face`` lives on the ``n3 - 1`` interior x3-faces: the arithmetic mean
    of the two adjacent nodal ``w`` raised to ``1 + alpha``. The two boundary
    faces carry zero flux and are not stored.
    """

    w: np.ndarray
    Dw: np.ndarray
    alpha: float
    gamma: float
    K: float
    W_face: np.ndarray
    name: str = "custom"

    @property
    def tangentially_constant(self):
        return bool(np.all(self.w == self.w[:1, :1, :]))

    def power(self, s):
        return self.w ** s


def _exponents(gamma):
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 1.0:
        raise InvalidExponentError(f"gamma must be > 1 (alpha = 1/(gamma-1)), got {gamma}")
    return gamma, 1.0 / (gamma - 1.0)


def build_weight(preset_or_rho0, gamma, grid, K=1.0):
    """Construct a :class:`WeightField`.

    ``preset_or_rho0`` is ``"parabolic"`` (w = x3(1-x3)), ``"sine"``
    (w = sin(pi x3)/pi), ``"from-density"`` (rho0 = (x3(1-x3))^alpha, so that
    w = K x3(1-x3)), or an array/callable giving rho0 at the nodes, in which
    case w = K rho0^(gamma-1). The closed-form presets ignore ``K``.
    """
    gamma, alpha = _exponents(gamma)
    K = float(K)
    if not K > 0:
        raise InvalidDensityError(f"K must be positive, got {K}")
    x3 = np.broadcast_to(grid.x3, grid.shape)
    Dw = grid.zeros(3)
    if isinstance(preset_or_rho0, str) and preset_or_rho0 == "parabolic":
        name = "parabolic"
        w = x3 * (1.0 - x3)
        Dw[2] = 1.0 - 2.0 * x3
    elif isinstance(preset_or_rho0, str) and preset_or_rho0 == "sine":
        name = "sine"
        w = np.sin(np.pi * x3) / np.pi
        Dw[2] = np.cos(np.pi * x3)
    else:
        if isinstance(preset_or_rho0, str):
            if preset_or_rho0 != "from-density":
                raise InvalidDensityError(f"unknown weight preset {preset_or_rho0!r}")
            rho0 = (x3 * (1.0 - x3)) ** alpha
        elif callable(preset_or_rho0):
            rho0 = np.asarray(preset_or_rho0(grid.x1, grid.x2, grid.x3), dtype=float)
        else:
            rho0 = np.asarray(preset_or_rho0, dtype=float)
        rho0 = np.broadcast_to(grid.check(rho0, "rho0"), grid.shape)
        if not np.all(np.isfinite(rho0)):
            raise InvalidDensityError("rho0 contains non-finite values")
        if np.any(rho0 < 0):
            idx = np.unravel_index(np.argmin(rho0), rho0.shape)
            raise InvalidDensityError(f"rho0 is negative at node {idx}: {rho0[idx]:.3e}")
        if np.any(rho0 == 0):
            raise InvalidDensityError("rho0 must be positive at every cell-centered node")
        name = "from-density"
        w = K * rho0 ** (gamma - 1.0)
        Dw = discrete_gradient(w, grid)
    w = np.ascontiguousarray(np.broadcast_to(w, grid.shape), dtype=float)
    W_face = face_average(w) ** (1.0 + alpha)
    return WeightField(w=w, Dw=Dw, alpha=alpha, gamma=gamma, K=K, W_face=W_face, name=name)


class VacuumCheck(NamedTuple):
    C: float
    ok: bool


def check_physical_vacuum(wf, grid, bound=10.0):
    """Comparability constant of ``w`` with the distance to the boundary."""
    x3 = np.broadcast_to(grid.x3, grid.shape)
    d = np.minimum(x3, 1.0 - x3)
    C = float(max(np.max(wf.w / d), np.max(d / wf.w)))
    return VacuumCheck(C, C < bound)


# --------------------------------------------------------------------------
# weighted norms


def multi_indices(N, start=1):
    """``(m1, m2, n)`` with ``start <= m1 + m2 + n <= N`` in graded lex order."""
    out = []
    for d in range(start, N + 1):
        for m1 in range(d, -1, -1):
            for m2 in range(d - m1, -1, -1):
                out.append((m1, m2, d - m1 - m2))
    return out


def _check_order(b, grid, max_order):
    if b < 0:
        raise ResolutionError(f"derivative order must be >= 0, got {b}")
    if b > max_order:
        raise ResolutionError(f"derivative order {b} exceeds the configured maximum {max_order}")
    if grid.n3 < 3 + 2 * b:
        raise ResolutionError(f"n3 = {grid.n3} is too coarse for {b} normal derivatives")


def mixed_derivatives(F, grid, indices):
    """Map each ``(m1, m2, n)`` to the derivative of ``F``.

    Derivatives are composed in a fixed order (all x1 first, then x2, then x3)
    and shared between indices through a cache.
    """
    cache = {(0, 0, 0): np.asarray(F, dtype=float)}

    def get(key):
        if key not in cache:
            m1, m2, n = key
            if n > 0:
                cache[key] = partial(get((m1, m2, n - 1)), 2, grid)
            elif m2 > 0:
                cache[key] = partial(get((m1, m2 - 1, 0)), 1, grid)
            else:
                cache[key] = partial(get((m1 - 1, 0, 0)), 0, grid)
        return cache[key]

    return {key: get(key) for key in indices}


def _sq(F):
    return F * F


def norm_X(F, wf, b, grid, max_order=DEFAULT_MAX_ORDER, rule="corrected"):
    """``sqrt(sum_{|m|+n<=b} int w^(alpha+n) |d^m d3^n F|^2)``."""
    F = grid.check(F)
    _check_order(b, grid, max_order)
    total = 0.0
    for (m1, m2, n), dF in mixed_derivatives(F, grid, multi_indices(b, 0)).items():
        total += grid.integrate(wf.w ** (wf.alpha + n) * _sq(dF), rule)
    return float(np.sqrt(total))


def norm_Y(F, wf, kin, b, grid, max_order=DEFAULT_MAX_ORDER, rule="corrected"):
    """``sqrt(sum int w^(1+alpha+n) J^(-1/alpha) |D_eta d^m d3^n F|^2)``."""
    F = grid.check(F)
    _check_order(b, grid, max_order)
    Jw = kin.J ** (-1.0 / wf.alpha)
    total = 0.0
    for (m1, m2, n), dF in mixed_derivatives(F, grid, multi_indices(b, 0)).items():
        G = eulerian_gradient(discrete_gradient(dF, grid), kin.A)
        total += grid.integrate(wf.w ** (1.0 + wf.alpha + n) * Jw * _sq(G), rule)
    return float(np.sqrt(total))


def norm_Z(F, wf, kin, b, grid, max_order=DEFAULT_MAX_ORDER, rule="corrected"):
    """``sqrt(sum int w^(1+alpha+n) J^(-1/alpha) |d^m d3^n F|^2)``."""
    F = grid.check(F)
    _check_order(b, grid, max_order)
    Jw = kin.J ** (-1.0 / wf.alpha)
    total = 0.0
    for (m1, m2, n), dF in mixed_derivatives(F, grid, multi_indices(b, 0)).items():
        total += grid.integrate(wf.w ** (1.0 + wf.alpha + n) * Jw * _sq(dF), rule)
    return float(np.sqrt(total))


def hardy_ratio(v, wf, grid, rule="corrected"):
    """``int w^(alpha-1) v^2 / int w^(alpha+1) (d3 v)^2``."""
    v = grid.check(v)
    num = grid.integrate(wf.w ** (wf.alpha - 1.0) * _sq(v), rule)
    den = grid.integrate(wf.w ** (wf.alpha + 1.0) * _sq(partial(v, 2, grid)), rule)
    if not den > 1e-300 * max(num, 1.0):
        raise DegenerateTestFunctionError("test function has no normal derivative (denominator is zero)")
    return num / den


class EmbeddingReport(NamedTuple):
    sup: float
    xnorm: float
    ratio: Optional[float]  # None when F vanishes
    in_regime: bool  # b >= floor(alpha) + 4


def embedding_report(F, wf, b, grid, rule="corrected"):
    """Sup norm against the weighted X norm of order ``b``."""
    F = grid.check(F)
    sup = float(np.max(np.abs(F)))
    xnorm = norm_X(F, wf, b, grid, max_order=max(b, DEFAULT_MAX_ORDER), rule=rule)
    ratio = sup / xnorm if xnorm > 0 else None
    return EmbeddingReport(sup, xnorm, ratio, b >= int(np.floor(wf.alpha)) + 4)

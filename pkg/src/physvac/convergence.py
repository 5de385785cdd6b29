"""Refinement ladders and observed orders of accuracy."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .geometry import Grid, kinematics_of, lie_derivatives, piola_divergence

__all__ = [
    "STUDIES",
    "DEFAULT_LADDERS",
    "OrderTable",
    "observed_order",
    "convergence_study",
    "smooth_test_map",
    "manufactured_elliptic",
]

STUDIES = ("elliptic", "energy-drift", "curl-residual", "piola", "curl-transport")

# x3 is refined together with the tangential directions at half resolution
DEFAULT_LADDERS = {
    "elliptic": [(16, 4, 32), (32, 4, 64), (64, 4, 128)],
    "piola": [(16, 16, 32), (32, 32, 64), (64, 64, 128)],
    "curl-residual": [(16, 16, 32), (32, 32, 64), (64, 64, 128)],
    "energy-drift": [4e-3, 2e-3, 1e-3],
    "curl-transport": [(16, 16, 32), (32, 32, 64), (64, 64, 128)],
}

# dt = TRANSPORT_COURANT * h3, so time and space are refined together
TRANSPORT_COURANT = 0.32
TRANSPORT_T_END = 0.04


def observed_order(sizes, errors):
    """Least-squares slope of ``log(error)`` against ``log(size)``."""
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        return float("nan")
    slope = np.polyfit(np.log(sizes), np.log(errors), 1)[0]
    return float(slope)


@dataclass
class OrderTable:
    kind: str
    levels: list  # grid dims or time steps
    sizes: list  # h3 or dt
    errors: dict  # quantity -> per-level errors
    orders: dict = field(default_factory=dict)
    monotone: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # auxiliary per-level data

    def lines(self):
        out = [f"study {self.kind}"]
        for name, errs in self.errors.items():
            cells = "  ".join(f"{lvl}: {e:.3e}" for lvl, e in zip(self.levels, errs))
            flag = "" if self.monotone[name] else "  (non-monotone)"
            out.append(f"  {name}: {cells}  order {self.orders[name]:.3f}{flag}")
        return out


def _table(kind, levels, sizes, errors):
    t = OrderTable(kind, list(levels), list(sizes), errors)
    for name, errs in errors.items():
        t.orders[name] = observed_order(sizes, errs)
        t.monotone[name] = bool(np.all(np.diff(errs) < 0))
    return t


def smooth_test_map(grid, eps=0.05):
    """A smooth periodic displacement whose derivatives mix all directions."""
    x1, x2, x3 = grid.x1, grid.x2, grid.x3
    tp = 2 * np.pi
    return eps * np.stack(np.broadcast_arrays(
        np.sin(tp * x1) * np.cos(tp * x2) * x3 * (1 - x3),
        np.cos(tp * x1) * np.sin(np.pi * x3) + 0 * x2,
        np.sin(tp * x1) * np.sin(tp * x2) * x3 ** 2,
    )).astype(float)


def manufactured_elliptic(grid, wf, lam):
    """``u* = sin(2 pi x1) x3 (1 - x3)`` and its image under the elliptic operator.

    Valid for the parabolic weight ``w = x3 (1 - x3)``.
    """
    x1, x3 = grid.x1, grid.x3
    a = wf.alpha
    s = np.sin(2 * np.pi * x1) + 0 * grid.x2
    w = x3 * (1 - x3)
    u = s * w
    G = (4 * np.pi ** 2 + lam) * u - s * ((1 + a) * (1 - 2 * x3) ** 2 - 2 * w)
    return u, G


def _elliptic(ladder, gamma=2.0, lam=10.0, tol=1e-12):
    from .degelliptic import EllipticProblem, solve, regularity_gain
    from .weights import build_weight

    errs, reg0, reg1 = [], [], []
    for dims in ladder:
        g = Grid(*dims)
        wf = build_weight("parabolic", gamma, g)
        prob = EllipticProblem(wf, g, lam, tol)
        u_star, G = manufactured_elliptic(g, wf, lam)
        u = solve(G, prob)
        e = u - u_star
        wa = wf.w ** wf.alpha
        errs.append(np.sqrt(g.pairing(wa * e, e) / g.pairing(wa * u_star, u_star)))
        reg0.append(regularity_gain(u, G, prob, 0).ratio)
        reg1.append(regularity_gain(u, G, prob, 1).ratio)
    return {"weighted_error": errs}, {"regularity_k0": reg0, "regularity_k1": reg1}


def _piola(ladder):
    errs = []
    for dims in ladder:
        g = Grid(*dims)
        errs.append(float(np.max(np.abs(piola_divergence(kinematics_of(smooth_test_map(g), g), g)))))
    return {"piola_residual": errs}


def lagrangian_gradient(grid, disp):
    """``F^i = A^r_i h_{,r}`` for ``h = sin(2 pi x1) cos(2 pi x2) sin(pi x3)^2``."""
    from .geometry import discrete_gradient

    kin = kinematics_of(disp, grid)
    tp = 2 * np.pi
    h = np.sin(tp * grid.x1) * np.cos(tp * grid.x2) * np.sin(np.pi * grid.x3) ** 2
    Dh = discrete_gradient(np.broadcast_to(h, grid.shape).copy(), grid)
    return np.einsum("ri...,r...->i...", kin.A, Dh), kin


def _curl(ladder, gamma=2.0):
    from .dynamics import FlowState, curl_acceleration_residual
    from .weights import build_weight

    grad_errs, acc_errs = [], []
    for dims in ladder:
        g = Grid(*dims)
        disp = smooth_test_map(g)
        F, kin = lagrangian_gradient(g, disp)
        grad_errs.append(float(np.max(np.abs(lie_derivatives(F, kin, g).curl))))
        wf = build_weight("parabolic", gamma, g)
        acc_errs.append(curl_acceleration_residual(FlowState(disp, g.zeros(3)), wf, g))
    return {"curl_of_gradient": grad_errs, "curl_of_acceleration": acc_errs}


def _transport(ladder, gamma=2.0, amplitude=0.2):
    from .dynamics import FlowState, _accel_from_kin, _kdk, curl_transport_residual, step_count
    from .weights import build_weight

    errs = []
    for dims in ladder:
        g = Grid(*dims)
        wf = build_weight("parabolic", gamma, g)
        steps, dt = step_count(TRANSPORT_T_END, TRANSPORT_COURANT * g.h3)
        state = FlowState.identity(g, smooth_test_map(g, amplitude))
        acc = _accel_from_kin(state.kinematics(g), wf, g)
        states = [state]
        for _ in range(steps):
            state, _, acc = _kdk(state, wf, g, dt, acc)
            states.append(state)
        errs.append(curl_transport_residual(states, wf, g))
    return {"curl_transport": errs}


def energy_drift_runs(dts, base=None):
    """Relative drift of the zeroth energy for each time step in ``dts``."""
    from .config import config_from_dict
    from .dynamics import simulate

    base = dict(base or {})
    base.setdefault("grid", [32, 32, 64])
    base.setdefault("gamma", 2.0)
    base.setdefault("velocity", "tangential-shear")
    base.setdefault("amplitude", 1e-3)
    base.setdefault("T_end", 1.0)
    base.setdefault("enforce_guardrails", False)
    base.setdefault("output_every", 10 ** 9)
    return [simulate(config_from_dict(dict(base, dt=dt))).e_drift for dt in dts]


def convergence_study(kind, ladder=None, **options):
    """Run a refinement ladder and return an :class:`OrderTable`.

    Grids (or time steps for ``energy-drift``) must halve from level to level.
    ``curl-transport`` refines the time step together with the grid.
    A non-monotone error sequence is flagged in the table, not raised.
    """
    if kind not in STUDIES:
        raise ContractError(f"unknown study {kind!r}; choose from {STUDIES}")
    ladder = list(ladder or DEFAULT_LADDERS[kind])
    if len(ladder) < 3:
        raise ContractError("a ladder needs at least three levels")
    if kind == "energy-drift":
        ratios = [ladder[i] / ladder[i + 1] for i in range(len(ladder) - 1)]
        sizes = ladder
    else:
        ratios = [ladder[i + 1][2] / ladder[i][2] for i in range(len(ladder) - 1)]
        sizes = [1.0 / dims[2] for dims in ladder]
    if not np.allclose(ratios, 2.0):
        raise ContractError("consecutive ladder levels must differ by a factor of 2")
    if kind == "elliptic":
        errors, extra = _elliptic(ladder, **options)
        table = _table(kind, ladder, sizes, errors)
        table.extra = extra
        return table
    if kind == "piola":
        return _table(kind, ladder, sizes, _piola(ladder))
    if kind == "curl-residual":
        return _table(kind, ladder, sizes, _curl(ladder, **options))
    if kind == "curl-transport":
        return _table(kind, ladder, sizes, _transport(ladder, **options))
    return _table(kind, ladder, sizes, {"energy_drift": energy_drift_runs(ladder, options.get("base"))})

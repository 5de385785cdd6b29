"""Weighted energy functionals of a flow-map state.

All tables are keyed by ``(m1, m2, n)``: ``m1`` and ``m2`` tangential
derivatives, ``n`` normal derivatives, enumerated in graded lexicographic
order for ``1 <= m1 + m2 + n <= N``. Flow-map derivatives are taken of the
displacement; the affine part is constant and is annihilated by ``D_eta``.
"""
from dataclasses import dataclass, field

import numpy as np

from .geometry import discrete_gradient, eulerian_gradient, lie_derivatives
from .weights import mixed_derivatives, multi_indices, _check_order

__all__ = [
    "EnergyReport",
    "zeroth_energy",
    "instant_energy_table",
    "curl_energies",
    "div_energy",
    "total_energy",
    "initial_total_energy",
]

MAX_MONITOR_ORDER = 4


@dataclass
class EnergyReport:
    t: float
    E: float
    table_E: dict = field(default_factory=dict)
    table_B: dict = field(default_factory=dict)
    table_C: dict = field(default_factory=dict)
    table_D: dict = field(default_factory=dict)
    EN: float = 0.0
    BN: float = 0.0
    CN: float = 0.0
    DN: float = 0.0
    TEN: float = 0.0
    Jmin: float = 1.0
    Jmax: float = 1.0
    Adev: float = 0.0

    def row(self):
        """Values in trace-column order."""
        return [self.t, self.E, self.EN, self.BN, self.CN, self.DN, self.TEN,
                self.Jmin, self.Jmax, self.Adev]


def zeroth_energy(state, kin, wf, grid, rule="corrected"):
    """``int 1/2 w^alpha |v|^2 + alpha w^(1+alpha) J^(-1/alpha)``."""
    a = wf.alpha
    kinetic = 0.5 * wf.w ** a * np.sum(state.v * state.v, axis=0)
    potential = a * wf.w ** (1.0 + a) * kin.J ** (-1.0 / a)
    return grid.integrate(kinetic + potential, rule)


def _weights(wf, kin, n):
    return wf.w ** (1.0 + wf.alpha + n) * kin.J ** (-1.0 / wf.alpha)


def _derivs(F, N, grid):
    _check_order(N, grid, MAX_MONITOR_ORDER)
    return mixed_derivatives(F, grid, multi_indices(N))


def instant_energy_table(state, kin, wf, N, grid, rule="corrected"):
    dv = _derivs(state.v, N, grid)
    deta = _derivs(state.disp, N, grid)
    table = {}
    for key in dv:
        n = key[2]
        G = eulerian_gradient(discrete_gradient(deta[key], grid), kin.A)
        vel = grid.integrate(wf.w ** (wf.alpha + n) * dv[key] ** 2, rule)
        geo = grid.integrate(_weights(wf, kin, n) * G ** 2, rule)
        table[key] = 0.5 * vel + 0.5 * geo
    return table


def curl_energies(F, kin, wf, N, grid, is_velocity=True, rule="corrected"):
    """``1/2 int w^(1+alpha+n) J^(-1/alpha) |curl_eta d^m d3^n F|^2``.

    Pass the velocity for the B table or the displacement for the C table;
    ``is_velocity`` only documents intent, the formula is the same.
    """
    table = {}
    for key, dF in _derivs(F, N, grid).items():
        curl = lie_derivatives(dF, kin, grid).curl
        table[key] = 0.5 * grid.integrate(_weights(wf, kin, key[2]) * curl ** 2, rule)
    return table


def div_energy(disp, kin, wf, N, grid, rule="corrected"):
    """``1/(2 alpha) int w^(1+alpha+n) J^(-1/alpha) |div_eta d^m d3^n eta|^2``."""
    table = {}
    for key, dF in _derivs(disp, N, grid).items():
        div = lie_derivatives(dF, kin, grid).div
        table[key] = grid.integrate(_weights(wf, kin, key[2]) * div ** 2, rule) / (2.0 * wf.alpha)
    return table


def total_energy(state, kin, wf, N, grid, rule="corrected"):
    """Fill a complete :class:`EnergyReport` for ``state``.

    Shares every derivative and Lie derivative between the tables; the
    numbers equal those of the individual table functions.
    """
    E = zeroth_energy(state, kin, wf, grid, rule)
    dv = _derivs(state.v, N, grid)
    deta = _derivs(state.disp, N, grid)
    tE, tB, tC, tD = {}, {}, {}, {}
    for key in dv:
        n = key[2]
        c = _weights(wf, kin, n)
        lv = lie_derivatives(dv[key], kin, grid)
        le = lie_derivatives(deta[key], kin, grid)
        vel = grid.integrate(wf.w ** (wf.alpha + n) * dv[key] ** 2, rule)
        tE[key] = 0.5 * vel + 0.5 * grid.integrate(c * le.grad ** 2, rule)
        tB[key] = 0.5 * grid.integrate(c * lv.curl ** 2, rule)
        tC[key] = 0.5 * grid.integrate(c * le.curl ** 2, rule)
        tD[key] = grid.integrate(c * le.div ** 2, rule) / (2.0 * wf.alpha)
    EN = E + sum(tE.values())
    BN = sum(tB.values())
    return EnergyReport(
        t=float(state.t), E=E, table_E=tE, table_B=tB, table_C=tC, table_D=tD,
        EN=EN, BN=BN, CN=sum(tC.values()), DN=sum(tD.values()), TEN=EN + BN,
        Jmin=float(kin.J.min()), Jmax=float(kin.J.max()), Adev=kin.adev,
    )


def initial_total_energy(u0, wf, N, grid, rule="corrected"):
    """Total energy of the undeformed state ``eta = x``, ``v = u0``.

    Written independently of the Lie-derivative machinery: with ``J = 1`` and
    ``A = I`` the flow-map part drops out and the curl is the plain curl.
    """
    a = wf.alpha
    total = grid.integrate(0.5 * wf.w ** a * np.sum(u0 * u0, axis=0) + a * wf.w ** (1.0 + a), rule)
    for (m1, m2, n), du in _derivs(u0, N, grid).items():
        D = discrete_gradient(du, grid)
        curl = np.stack([D[2, 1] - D[1, 2], D[0, 2] - D[2, 0], D[1, 0] - D[0, 1]])
        dens = wf.w ** (a + n) * np.sum(du * du, axis=0) + wf.w ** (1.0 + a + n) * np.sum(curl * curl, axis=0)
        total += 0.5 * grid.integrate(dens, rule)
    return total

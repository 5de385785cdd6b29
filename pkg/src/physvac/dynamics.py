"""Time integration of the degenerate acoustic equation for the flow map."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ContractError, GuardrailBreach
from .geometry import compute_kinematics, deformation_gradient, kinematics_of, partial

__all__ = [
    "FlowState",
    "Guardrails",
    "acceleration",
    "step_leapfrog",
]


@dataclass(frozen=True)
class FlowState:
    """Flow map ``eta = affine @ x + disp`` with Lagrangian velocity ``v``.

    ``affine`` is a constant background deformation (identity by default).
    It lets uniform dilations and shears be represented while ``disp`` stays
    periodic in x1 and x2.
    """

    disp: np.ndarray
    v: np.ndarray
    t: float = 0.0
    affine: Optional[np.ndarray] = None

    @classmethod
    def identity(cls, grid, v=None, affine=None):
        vel = grid.zeros(3) if v is None else np.array(v, dtype=float)
        return cls(grid.zeros(3), vel, 0.0, affine)

    def eta(self, grid):
        M = np.eye(3) if self.affine is None else np.asarray(self.affine)
        return np.einsum("ij,j...->i...", M, grid.coords()) + self.disp

    def deformation_gradient(self, grid):
        return deformation_gradient(self.disp, grid, self.affine)

    def kinematics(self, grid):
        return kinematics_of(self.disp, grid, self.affine)

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class Guardrails:
    """Admissible region ``max|A - I| <= adev_max`` and ``j_lo <= J <= j_hi``."""

    adev_max: float = 1.0 / 8.0
    j_lo: float = 2.0 / 3.0
    j_hi: float = 2.0

    def check(self, kin, t):
        eye = np.eye(3).reshape(3, 3, 1, 1, 1)
        dev = np.max(np.abs(kin.A - eye), axis=(0, 1))
        i = np.unravel_index(np.argmax(dev), dev.shape)
        if dev[i] > self.adev_max:
            raise GuardrailBreach(t, "Adev", dev[i], i)
        i = np.unravel_index(np.argmin(kin.J), kin.J.shape)
        if kin.J[i] < self.j_lo:
            raise GuardrailBreach(t, "Jmin", kin.J[i], i)
        i = np.unravel_index(np.argmax(kin.J), kin.J.shape)
        if kin.J[i] > self.j_hi:
            raise GuardrailBreach(t, "Jmax", kin.J[i], i)


def _accel_from_kin(kin, wf, grid):
    a1 = 1.0 + wf.alpha
    P = kin.A * kin.J ** (-1.0 / wf.alpha)  # P[k, i] = A^k_i J^(-1/alpha)
    out = np.empty((3,) + grid.shape)
    for i in range(3):
        src = wf.Dw[0] * P[0, i] + wf.Dw[1] * P[1, i] + wf.Dw[2] * P[2, i]
        div = partial(P[0, i], 0, grid) + partial(P[1, i], 1, grid) + partial(P[2, i], 2, grid)
        out[i] = -a1 * src - wf.w * div
    return out


def acceleration(state, wf, grid, kin=None):
    """``eta_tt`` from the degenerate acoustic equation, in expanded form.

    ``-(1+alpha) (d_k w) A^k_i J^(-1/alpha) - w d_k(A^k_i J^(-1/alpha))``,
    which never divides by the vanishing weight.
    """
    if kin is None:
        kin = state.kinematics(grid)
    return _accel_from_kin(kin, wf, grid)


def _kdk(state, wf, grid, dt, acc):
    v_half = state.v + (0.5 * dt) * acc
    disp = state.disp + dt * v_half
    kin = kinematics_of(disp, grid, state.affine)
    acc_new = _accel_from_kin(kin, wf, grid)
    v = v_half + (0.5 * dt) * acc_new
    return FlowState(disp, v, state.t + dt, state.affine), kin, acc_new


def step_leapfrog(state, wf, grid, dt, guardrails=None):
    """One kick-drift-kick step; raises :class:`GuardrailBreach` if requested."""
    if dt == 0:
        return state
    new, kin, _ = _kdk(state, wf, grid, dt, acceleration(state, wf, grid))
    if guardrails is not None:
        guardrails.check(kin, new.t)
    return new


# --------------------------------------------------------------------------
# driver


@dataclass
class SimResult:
    reports: list
    e_drift: float  # max_t |E(t) - E(0)| / E(0), sampled every step
    breach: Optional[GuardrailBreach]
    final: FlowState
    steps: int
    dt: float
    states: Optional[list] = None

    @property
    def reason(self):
        return "guardrail-breach" if self.breach is not None else "completed"


def step_count(T_end, dt):
    """Number of uniform steps reaching ``T_end`` without exceeding ``dt``."""
    n = int(np.ceil(T_end / dt - 1e-9))
    return max(n, 1), T_end / max(n, 1)


def simulate(config, keep_states=False, on_output=None, initial=None):
    """Integrate to ``config.T_end`` with kick-drift-kick leapfrog.

    Reports are produced at step 0, every ``output_every`` steps and at the
    final step. A guardrail breach ends the run cleanly: the breaching state
    is not reported and ``result.breach`` records where and when it happened.
    """
    from .energies import total_energy, zeroth_energy

    grid = config.make_grid()
    wf = config.weight_field(grid)
    guard = config.guardrails() if config.enforce_guardrails else None
    state = initial if initial is not None else FlowState.identity(grid, config.initial_velocity(grid))
    steps, dt = step_count(config.T_end, config.dt)
    rule = config.quadrature

    kin = state.kinematics(grid)
    reports, states = [], []
    breach = None

    def emit(st, k):
        rep = total_energy(st, k, wf, config.N_monitor, grid, rule)
        reports.append(rep)
        if keep_states:
            states.append(st)
        if on_output is not None:
            on_output(st, rep)

    try:
        if guard is not None:
            guard.check(kin, state.t)
    except GuardrailBreach as exc:
        return SimResult([], 0.0, exc, state, 0, dt, states if keep_states else None)
    E0 = zeroth_energy(state, kin, wf, grid, rule)
    drift = 0.0
    emit(state, kin)
    acc = _accel_from_kin(kin, wf, grid)
    n = 0
    for n in range(1, steps + 1):
        new, kin, acc = _kdk(state, wf, grid, dt, acc)
        if guard is not None:
            try:
                guard.check(kin, new.t)
            except GuardrailBreach as exc:
                breach = exc
                n -= 1
                break
        state = new
        drift = max(drift, abs(zeroth_energy(state, kin, wf, grid, rule) - E0) / E0)
        if n % config.output_every == 0 or n == steps:
            emit(state, kin)
    if breach is not None and (not reports or reports[-1].t != state.t):
        emit(state, state.kinematics(grid))
    return SimResult(reports, drift, breach, state, n, dt, states if keep_states else None)


# --------------------------------------------------------------------------
# curl diagnostics


def curl_acceleration_residual(state, wf, grid):
    """``max |curl_eta(eta_tt)|``; zero in the continuum."""
    from .geometry import lie_derivatives

    kin = state.kinematics(grid)
    return float(np.max(np.abs(lie_derivatives(_accel_from_kin(kin, wf, grid), kin, grid).curl)))


def curl_transport_residual(states, wf, grid):
    """Residual of the transport identity for ``curl_eta v``.

    ``d/dt curl_eta v`` is taken by central differences over consecutive
    states and compared with ``eps_ijk (dA^s_j/dt) v^k_{,s}`` (the term
    carrying ``curl_eta v_t`` vanishes for the acoustic flow). Returns the
    max norm over all interior states.
    """
    from .geometry import discrete_gradient, kinematic_rates, lie_derivatives

    if len(states) < 3:
        raise ContractError("need at least three consecutive states")
    ts = np.array([s.t for s in states])
    dts = np.diff(ts)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ContractError("states must be spaced uniformly in time")
    dt = dts[0]
    curls = []
    for st in states:
        kin = st.kinematics(grid)
        curls.append(lie_derivatives(st.v, kin, grid).curl)
    worst = 0.0
    for i in range(1, len(states) - 1):
        st = states[i]
        kin = st.kinematics(grid)
        Dv = discrete_gradient(st.v, grid)
        dA, _ = kinematic_rates(kin, Dv)
        g = np.einsum("sj...,ks...->jk...", dA, Dv)  # g[j, k] = dA^s_j v^k_{,s}
        rhs = np.stack([g[1, 2] - g[2, 1], g[2, 0] - g[0, 2], g[0, 1] - g[1, 0]])
        lhs = (curls[i + 1] - curls[i - 1]) / (2.0 * dt)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# --------------------------------------------------------------------------
# elliptic reconstruction of the flow map


def _identity_image(prob):
    """Discrete image of the identity map ``x`` under the elliptic operator."""
    from .degelliptic import apply_G

    g = prob.grid
    out = np.empty((3,) + g.shape)
    out[0] = prob.lam * np.broadcast_to(g.x1, g.shape)
    out[1] = prob.lam * np.broadcast_to(g.x2, g.shape)
    out[2] = apply_G(np.broadcast_to(g.x3, g.shape).copy(), prob)
    return out


def initial_G(wf, lam, grid):
    """Right-hand side for the undeformed map, in discrete form.

    Approximates ``-(1+alpha) d3 w delta_i3 + lambda x^i`` to the accuracy of
    the flux discretization; the tangential rows are exact.
    """
    from .degelliptic import EllipticProblem

    return _identity_image(EllipticProblem(wf, grid, lam))


def reconstruct_eta_from_G(G, wf, lam, grid, tol=1e-10, max_iter=5000):
    """Recover the flow map ``eta`` from ``G = [elliptic operator] eta``.

    The identity part of ``eta`` is not periodic; it is mapped analytically
    and only the periodic displacement goes through the solver.
    """
    from .degelliptic import EllipticProblem, solve

    prob = EllipticProblem(wf, grid, lam, tol, max_iter)
    G = grid.check(np.asarray(G, dtype=float), "G")
    disp = solve(G - _identity_image(prob), prob)
    return grid.coords() + disp


# --------------------------------------------------------------------------
# frozen-coefficient fixed-point iteration


@dataclass
class PicardTrace:
    defects: list = field(default_factory=list)
    adev: list = field(default_factory=list)
    jmin: list = field(default_factory=list)
    jmax: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    reason: str = "completed"
    breach: Optional[GuardrailBreach] = None
    dt: float = 0.0
    times: Optional[np.ndarray] = None
    final: Optional[list] = None  # displacement at every time level of the last iterate

    @property
    def reductions(self):
        d = self.defects
        return [d[i] / d[i + 1] if d[i + 1] > 0 else np.inf for i in range(len(d) - 1)]


def _defect(levels, u0, dt, wf, grid, affine):
    """``w^alpha``-weighted space-time norm of the discrete acoustic residual."""
    wa = wf.w ** wf.alpha
    total = 0.0
    for n in range(len(levels) - 1):
        acc = _accel_from_kin(kinematics_of(levels[n], grid, affine), wf, grid)
        if n == 0:
            r = 2.0 * (levels[1] - levels[0] - dt * u0) / dt ** 2 - acc
        else:
            r = (levels[n + 1] - 2.0 * levels[n] + levels[n - 1]) / dt ** 2 - acc
        total += dt * grid.pairing(wa * r, r)
    return float(np.sqrt(total))


def picard_run(config, iterations, initial=None, solve_tol=1e-13):
    """Fixed-point iteration with frozen coefficients over ``[0, T_end]``.

    Iterate ``nu + 1`` solves, level by level,

        w^a (eta^{n+1} - 2 eta^n + eta^{n-1}) / dt^2
          + L_nu^n [ d^{n+1}/4 + d^n/2 + d^{n-1}/4 ] = w^a a(eta_nu^n),

    where ``d = eta_{nu+1} - eta_nu``, ``a`` is the acoustic acceleration and
    ``L_nu^n`` is the elastic plus divergence operator frozen at ``eta_nu^n``.
    The frozen part is averaged implicitly in time, and the ``L`` terms vanish
    at the fixed point, which is therefore the leapfrog trajectory of
    :func:`simulate`. Iterate 0 streams freely: ``eta_0 = x + t u0``.
    """
    from .degelliptic import pcg
    from .operators import divergence_op, elastic, face_kinematics

    grid = config.make_grid()
    wf = config.weight_field(grid)
    guard = config.guardrails()
    start = initial if initial is not None else FlowState.identity(grid, config.initial_velocity(grid))
    u0, affine = start.v, start.affine
    steps, dt = step_count(config.T_end, config.dt)
    trace = PicardTrace(dt=dt, times=np.arange(steps + 1) * dt)
    wa = wf.w ** wf.alpha

    levels = [start.disp + (n * dt) * u0 for n in range(steps + 1)]

    def record(levs):
        try:
            ad, jl, jh = 0.0, np.inf, -np.inf
            for n, d in enumerate(levs):
                kin = kinematics_of(d, grid, affine)
                guard.check(kin, n * dt)
                ad, jl, jh = max(ad, kin.adev), min(jl, kin.J.min()), max(jh, kin.J.max())
        except GuardrailBreach as exc:
            trace.reason, trace.breach = "guardrail-breach", exc
            return False
        trace.adev.append(ad)
        trace.jmin.append(float(jl))
        trace.jmax.append(float(jh))
        trace.defects.append(_defect(levs, u0, dt, wf, grid, affine))
        return True

    if not record(levels):
        return trace
    Wp = np.pad(wf.W_face, [(0, 0), (0, 0), (1, 1)])
    stiff = (1.0 + 1.0 / wf.alpha) * (Wp[..., 1:] + Wp[..., :-1]) / grid.h3 ** 2
    diag = np.broadcast_to(wa / dt ** 2 + 0.5 * stiff, (3,) + grid.shape)

    for _ in range(iterations):
        old = levels
        new = [old[0], old[0] + dt * u0 + 0.5 * dt ** 2 * acceleration(start, wf, grid)]
        deltas = [np.zeros_like(old[0]), new[1] - old[1]]
        its = 0
        for n in range(1, steps):
            fk = face_kinematics(old[n], grid, affine)

            def L(d):
                return elastic(d, fk, wf, grid) + divergence_op(d, fk, wf, grid)

            acc = _accel_from_kin(kinematics_of(old[n], grid, affine), wf, grid)
            rhs = wa * (acc - (old[n + 1] - 2.0 * new[n] + new[n - 1]) / dt ** 2)
            rhs -= L(0.5 * deltas[n] + 0.25 * deltas[n - 1])
            res = pcg(lambda d: wa * d / dt ** 2 + 0.25 * L(d), rhs, diag, solve_tol, 500)
            its += res.iterations
            deltas.append(res.x)
            new.append(old[n + 1] + res.x)
        levels = new
        trace.linear_iterations.append(its)
        if not record(levels):
            break
    trace.final = levels
    return trace


# --------------------------------------------------------------------------
# distance between two solutions


@dataclass
class ZSeries:
    t: np.ndarray
    Z: np.ndarray
    C: Optional[float]  # None when Z(0) = 0

    @property
    def Z0(self):
        return float(self.Z[0])

    def bound_ratio(self):
        """``max_t Z(t) / (Z(0) e^(C t))``."""
        if self.C is None:
            return None
        return float(np.max(self.Z / (self.Z0 * np.exp(self.C * self.t))))


def distance_functional(a, b, wf, grid, N=2, rule="corrected"):
    """Weighted distance between two states, using ``J`` and ``A`` of ``a``."""
    from .geometry import discrete_gradient, eulerian_gradient
    from .weights import mixed_derivatives, multi_indices

    kin_a = a.kinematics(grid)
    kin_b = b.kinematics(grid)
    al = wf.alpha
    dv = a.v - b.v
    dd = a.disp - b.disp
    dJ = kin_a.J - kin_b.J
    dens = 0.5 * wf.w ** al * np.sum(dv * dv, axis=0)
    dens += al * wf.w ** (1.0 + al) * kin_a.J ** (-1.0 / al - 2.0) * dJ * dJ
    total = grid.integrate(dens, rule)
    if N > 1:
        idx = multi_indices(N - 1)
        ddv = mixed_derivatives(dv, grid, idx)
        ddd = mixed_derivatives(dd, grid, idx)
        Jw = kin_a.J ** (-1.0 / al)
        for key in idx:
            n = key[2]
            G = eulerian_gradient(discrete_gradient(ddd[key], grid), kin_a.A)
            total += 0.5 * grid.integrate(wf.w ** (al + n) * ddv[key] ** 2, rule)
            total += 0.5 * grid.integrate(wf.w ** (1.0 + al + n) * Jw * G ** 2, rule)
    return total


def fit_growth_rate(t, Z):
    """Least-squares ``C`` in ``log(Z/Z(0)) = C t`` (line through the origin)."""
    t = np.asarray(t, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if not Z[0] > 0:
        return None
    m = (t > 0) & (Z > 0)
    if not np.any(m):
        return 0.0
    y = np.log(Z[m] / Z[0])
    return float(np.sum(t[m] * y) / np.sum(t[m] ** 2))


def perturbation_distance(run_a, run_b, wf, grid, N=2, rule="corrected"):
    """``Z(t)`` between two runs sampled at the same times, plus the fitted rate."""
    if len(run_a) != len(run_b) or not run_a:
        raise ContractError("runs must have the same, nonzero number of samples")
    t = np.array([s.t for s in run_a])
    if not np.allclose(t, [s.t for s in run_b], rtol=0, atol=1e-12):
        raise ContractError("runs are sampled at different times")
    for s in list(run_a[:1]) + list(run_b[:1]):
        grid.check(s.disp, "disp")
    Z = np.array([distance_functional(a, b, wf, grid, N, rule) for a, b in zip(run_a, run_b)])
    if Z[0] == 0 and np.all(Z == 0):
        return ZSeries(t, Z, None)
    return ZSeries(t, Z, fit_growth_rate(t, Z))

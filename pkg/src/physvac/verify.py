"""Fast invariant suite behind the ``verify`` subcommand."""
import os
import tempfile
import time
from typing import Callable, NamedTuple

import numpy as np

from .convergence import smooth_test_map
from .degelliptic import EllipticProblem, apply_G, bilinear_form, solve, weighted_inner
from .dynamics import FlowState, acceleration, perturbation_distance, step_leapfrog
from .energies import initial_total_energy, total_energy
from .geometry import (
    Grid,
    compute_kinematics,
    discrete_gradient,
    kinematic_rates,
    kinematics_of,
    lie_derivatives,
    piola_divergence,
)
from .io import read_fields, write_fields
from .operators import elastic, face_kinematics
from .presets import initial_velocity
from .weights import build_weight, check_physical_vacuum, hardy_ratio, norm_X

__all__ = ["CheckResult", "run_verification", "CHECKS"]


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str
    seconds: float


def _setup(seed):
    rng = np.random.default_rng(seed)
    g = Grid(8, 8, 24)
    wf = build_weight("parabolic", 2.0, g)
    disp = smooth_test_map(g, 0.03) + 1e-3 * np.sin(2 * np.pi * (g.x1 + rng.random())) * g.x3
    return rng, g, wf, disp


def check_inverse(seed):
    _, g, _, disp = _setup(seed)
    kin = kinematics_of(disp, g)
    err = np.max(np.abs(np.einsum("kr...,rs...->ks...", kin.A, kin.Deta) - np.eye(3)[:, :, None, None, None]))
    return err <= 1e-12, f"max |A Deta - I| = {err:.2e}"


def check_curl_matrix(seed):
    rng, g, _, disp = _setup(seed)
    kin = kinematics_of(disp, g)
    lie = lie_derivatives(rng.standard_normal((3,) + g.shape), kin, g)
    anti = np.max(np.abs(lie.Curl + np.swapaxes(lie.Curl, 0, 1)))
    lhs = np.sum(lie.Curl ** 2, axis=(0, 1))
    rhs = 2 * np.sum(lie.curl ** 2, axis=0)
    rel = np.max(np.abs(lhs - rhs) / np.maximum(rhs, 1e-300))
    return anti == 0 and rel <= 1e-12, f"antisymmetry {anti:.1e}, |Curl|^2 vs 2|curl|^2 {rel:.1e}"


def check_piola_affine(seed):
    rng, g, _, _ = _setup(seed)
    M = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    kin = kinematics_of(g.zeros(3), g, M)
    res = np.max(np.abs(piola_divergence(kin, g)))
    return res == 0.0, f"affine residual {res:.1e}"


def check_identity_reduction(seed):
    rng, g, _, _ = _setup(seed)
    F = rng.standard_normal((3,) + g.shape)
    lie = lie_derivatives(F, kinematics_of(g.zeros(3), g), g)
    err = np.max(np.abs(lie.grad - discrete_gradient(F, g)))
    return err <= 1e-13, f"max deviation {err:.1e}"


def check_rates(seed):
    rng, g, _, disp = _setup(seed)
    kin = kinematics_of(disp, g)
    Dv = 0.1 * rng.standard_normal((3, 3) + g.shape)
    eps = 1e-6
    fd = (compute_kinematics(kin.Deta + eps * Dv).A - kin.A) / eps
    err = np.max(np.abs(fd - kinematic_rates(kin, Dv)[0]))
    return err <= 1e-5, f"finite-difference gap {err:.1e}"


def check_norms(seed):
    rng, g, wf, _ = _setup(seed)
    F = np.sin(2 * np.pi * g.x1) * g.x3 + 0 * g.x2
    c = rng.uniform(0.5, 3.0)
    hom = abs(norm_X(c * F, wf, 2, g) - c * norm_X(F, wf, 2, g)) / (c * norm_X(F, wf, 2, g))
    mono = all(norm_X(F, wf, b + 1, g) >= norm_X(F, wf, b, g) for b in range(3))
    return hom <= 1e-12 and mono, f"homogeneity {hom:.1e}, monotone in b: {mono}"


def check_hardy(seed):
    g = Grid(4, 4, 64)
    wf = build_weight("parabolic", 2.0, g)
    r = hardy_ratio(np.broadcast_to(g.x3 - 0.5, g.shape), wf, g)
    return abs(r - 2.5) <= 0.025, f"ratio {r:.6f} (closed form 2.5)"


def check_vacuum(seed):
    g = Grid(4, 4, 64)
    ok = [check_physical_vacuum(build_weight(p, 2.0, g), g).ok for p in ("parabolic", "sine")]
    flat = build_weight(np.ones(g.shape), 2.0, g)
    bad = check_physical_vacuum(flat, g)
    return all(ok) and not bad.ok, f"presets accepted: {ok}, w=1 rejected with C={bad.C:.1f}"


def check_elliptic(seed):
    rng, g, wf, _ = _setup(seed)
    prob = EllipticProblem(wf, g, 10.0, 1e-10)
    u, v = rng.standard_normal((2,) + g.shape)
    sym = abs(weighted_inner(apply_G(u, prob), v, prob) - weighted_inner(u, apply_G(v, prob), prob))
    coercive = all(bilinear_form(x, x, prob) > 0 for x in rng.standard_normal((20,) + g.shape))
    us = np.cos(2 * np.pi * g.x1) * np.sin(np.pi * g.x3) + 0 * g.x2
    back = solve(apply_G(us, prob), prob)
    rt = np.sqrt(weighted_inner(back - us, back - us, prob) / weighted_inner(us, us, prob))
    return sym <= 1e-10 and coercive and rt <= 1e-9, f"symmetry {sym:.1e}, coercive {coercive}, round trip {rt:.1e}"


def check_elastic(seed):
    rng, g, wf, disp = _setup(seed)
    fk = face_kinematics(disp, g)
    F, G = rng.standard_normal((2, 3) + g.shape)
    a = g.pairing(elastic(F, fk, wf, g), G)
    b = g.pairing(F, elastic(G, fk, wf, g))
    psd = g.pairing(elastic(F, fk, wf, g), F)
    return abs(a - b) <= 1e-10 * max(1.0, abs(a)) and psd >= -1e-10, f"symmetry {abs(a - b):.1e}, <LF,F> {psd:.2e}"


def check_energies(seed):
    _, g, wf, disp = _setup(seed)
    u0 = initial_velocity("irrotational-pulse", 0.1, g) + initial_velocity("tangential-shear", 0.1, g)
    st = FlowState(disp, u0)
    rep = total_energy(st, st.kinematics(g), wf, 2, g)
    nonneg = all(x >= 0 for tab in (rep.table_E, rep.table_B, rep.table_C, rep.table_D) for x in tab.values())
    split = abs(rep.TEN - rep.EN - rep.BN) <= 1e-12 * rep.TEN
    st0 = FlowState.identity(g, u0)
    a = total_energy(st0, st0.kinematics(g), wf, 2, g).TEN
    b = initial_total_energy(u0, wf, 2, g)
    agree = abs(a - b) / b
    return nonneg and split and agree <= 1e-12, f"nonnegative {nonneg}, TEN split {split}, initial-data gap {agree:.1e}"


def check_acceleration(seed):
    rng, g, wf, disp = _setup(seed)
    a = acceleration(FlowState(disp, g.zeros(3)), wf, g)
    b = acceleration(FlowState(disp, rng.standard_normal((3,) + g.shape)), wf, g)
    return np.array_equal(a, b), "velocity-independent" if np.array_equal(a, b) else "depends on v"


def check_reversibility(seed):
    _, g, wf, disp = _setup(seed)
    st = FlowState(disp, initial_velocity("tangential-shear", 0.01, g))
    dt = 1e-3
    fwd = step_leapfrog(st, wf, g, dt)
    back = step_leapfrog(fwd.with_(v=-fwd.v), wf, g, dt)
    err = np.max(np.abs(back.disp - st.disp))
    return err <= 1e-12, f"return error {err:.1e}"


def check_io(seed):
    rng, g, _, _ = _setup(seed)
    f = {"disp": rng.standard_normal((3,) + g.shape), "rho0": rng.random(g.shape)}
    with tempfile.TemporaryDirectory() as d:
        base = os.path.join(d, "f")
        write_fields(base, f, g)
        back = read_fields(base).fields
    ok = all(np.array_equal(f[k], back[k]) for k in f)
    return ok, "bit-identical" if ok else "mismatch"


def check_distance(seed):
    _, g, wf, disp = _setup(seed)
    st = FlowState(disp, initial_velocity("tangential-shear", 0.01, g))
    z = perturbation_distance([st, st], [st, st], wf, g)
    return bool(np.all(z.Z == 0)), "Z(run, run) = 0"


CHECKS: dict = {
    "kinematics inverse": check_inverse,
    "curl matrix": check_curl_matrix,
    "piola affine": check_piola_affine,
    "lie identity reduction": check_identity_reduction,
    "kinematic rates": check_rates,
    "norm homogeneity/monotonicity": check_norms,
    "hardy closed form": check_hardy,
    "physical vacuum check": check_vacuum,
    "elliptic symmetry/coercivity/round trip": check_elliptic,
    "elastic operator symmetry": check_elastic,
    "energy identities": check_energies,
    "acceleration v-independence": check_acceleration,
    "leapfrog reversibility": check_reversibility,
    "field dump round trip": check_io,
    "distance to self": check_distance,
}


def run_verification(seed=0, report: Callable = print):
    results = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        results.append(res)
        if report is not None:
            report(f"{'PASS' if res.ok else 'FAIL'}  {name}: {detail}")
    return results

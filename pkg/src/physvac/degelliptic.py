"""The degenerate elliptic operator ``-d1^2 - d2^2 - w^-alpha d3 w^(1+alpha) d3 + lambda``.

The normal part is discretized in flux form on x3-faces, with zero flux
through the two vacuum faces. Multiplying the operator by ``w^alpha`` gives a
matrix that is symmetric in the plain Euclidean pairing whenever ``w`` does
not vary tangentially; that is the form the conjugate-gradient solver works
with.
"""
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, ContractError, SolverFailure
from .geometry import second_partial
from .weights import WeightField, norm_X

__all__ = [
    "EllipticProblem",
    "apply_G",
    "solve",
    "pcg",
    "regularity_gain",
    "check_coercivity",
    "bilinear_form",
    "weighted_inner",
]


@dataclass
class EllipticProblem:
    wf: WeightField
    grid: object
    lam: float = 10.0
    tol: float = 1e-10
    max_iter: int = 5000
    _coercive: Optional[bool] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError("lambda", f"must be positive, got {self.lam}")
        if not 0 < self.tol <= 1e-4:
            raise ConfigurationError("tol", f"must lie in (0, 1e-4], got {self.tol}")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter", "must be at least 1")

    @property
    def symmetric(self):
        return self.wf.tangentially_constant


def normal_flux_divergence(u, W_face, h3):
    """``d3(W d3 u)`` with fluxes on interior faces and zero boundary flux."""
    flux = W_face * (u[..., 1:] - u[..., :-1]) / h3
    pad = [(0, 0)] * (flux.ndim - 1) + [(1, 1)]
    flux = np.pad(flux, pad)
    return (flux[..., 1:] - flux[..., :-1]) / h3


def _weighted_apply(u, prob):
    """``w^alpha * G u``: symmetric in the Euclidean pairing."""
    wf, g = prob.wf, prob.grid
    wa = wf.w ** wf.alpha
    tang = second_partial(u, 0, g) + second_partial(u, 1, g)
    return wa * (prob.lam * u - tang) - normal_flux_divergence(u, wf.W_face, g.h3)


def apply_G(u, prob):
    """Apply the operator componentwise to a scalar or vector field."""
    u = prob.grid.check(np.asarray(u, dtype=float))
    wf, g = prob.wf, prob.grid
    tang = second_partial(u, 0, g) + second_partial(u, 1, g)
    normal = normal_flux_divergence(u, wf.W_face, g.h3) / wf.w ** wf.alpha
    return prob.lam * u - tang - normal


def weighted_inner(f, g_, prob):
    """``<f, g>`` in L^2(w^alpha dx) with uniform cell weights."""
    wa = prob.wf.w ** prob.wf.alpha
    return prob.grid.pairing(wa * f, g_)


def bilinear_form(u, v, prob):
    """``B[u, v] = <G u, v>_{w^alpha}`` evaluated through the weighted matrix."""
    return prob.grid.pairing(_weighted_apply(u, prob), v)


def _diag(prob):
    wf, g = prob.wf, prob.grid
    wa = wf.w ** wf.alpha
    tang = 64.0 / (12.0 * g.h1 ** 2) + 64.0 / (12.0 * g.h2 ** 2)
    Wp = np.pad(wf.W_face, [(0, 0), (0, 0), (1, 1)])
    normal = 2.0 * (Wp[..., 1:] + Wp[..., :-1]) / g.h3 ** 2
    return wa * (prob.lam + tang) + normal


class SolveResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residuals: list


def pcg(apply: Callable, b, diag, tol, max_iter, x0=None, resid_norm=None):
    """Preconditioned conjugate gradients for a symmetric positive definite map.

    ``resid_norm(r)`` measures the residual (default: Euclidean); iteration
    stops once it falls below ``tol * resid_norm(b)``. Raises
    :class:`SolverFailure` after ``max_iter`` iterations.
    """
    if resid_norm is None:
        resid_norm = lambda r: float(np.sqrt(np.sum(r * r)))
    bnorm = resid_norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return SolveResult(np.zeros_like(b), 0, [0.0])
    r = b - apply(x) if x0 is not None else b.copy()
    history = [resid_norm(r) / bnorm]
    if history[-1] <= tol:
        return SolveResult(x, 0, history)
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    for it in range(1, max_iter + 1):
        Ap = apply(p)
        pAp = float(np.sum(p * Ap))
        if not pAp > 0:
            raise SolverFailure("operator is not positive definite", history[-1], it)
        step = rz / pAp
        x += step * p
        r -= step * Ap
        history.append(resid_norm(r) / bnorm)
        if history[-1] <= tol:
            return SolveResult(x, it, history)
        z = r / diag
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverFailure("conjugate gradients did not converge", history[-1], max_iter)


def check_coercivity(prob, samples=100, seed=0):
    """Sample ``B[v, v] > 0`` on random fields; raise if any sample fails."""
    if prob._coercive is None:
        rng = np.random.default_rng(seed)
        ok = True
        for _ in range(samples):
            v = rng.standard_normal(prob.grid.shape)
            if not bilinear_form(v, v, prob) > 0:
                ok = False
                break
        prob._coercive = ok
    if not prob._coercive:
        raise ConfigurationError(
            "lambda", f"bilinear form is not coercive at lambda={prob.lam}; raise lambda"
        )
    return True


def _solve_scalar(G, prob, x0, history):
    wf, g = prob.wf, prob.grid
    wa = wf.w ** wf.alpha
    if prob.symmetric:
        b = wa * G
        res = pcg(lambda u: _weighted_apply(u, prob), b, _diag(prob), prob.tol, prob.max_iter,
                  x0=x0, resid_norm=lambda r: float(np.sqrt(np.sum(r * r / wa))))
        history.append(res.residuals)
        return res.x
    from scipy.sparse.linalg import LinearOperator, bicgstab

    n = G.size
    op = LinearOperator((n, n), matvec=lambda u: apply_G(u.reshape(g.shape), prob).ravel())
    inv_diag = (wa / _diag(prob)).ravel()
    M = LinearOperator((n, n), matvec=lambda r: inv_diag * r)
    trace = []
    x, info = bicgstab(op, G.ravel(), x0=None if x0 is None else x0.ravel(), rtol=prob.tol,
                       atol=0.0, maxiter=prob.max_iter, M=M,
                       callback=lambda xk: trace.append(xk))
    r = G - apply_G(x.reshape(g.shape), prob)
    rel = float(np.sqrt(np.sum(wa * r * r) / np.sum(wa * G * G)))
    history.append([rel])
    if info != 0 or rel > prob.tol * 10:
        raise SolverFailure("bicgstab did not converge", rel, len(trace))
    return x.reshape(g.shape)


def solve(G, prob, x0=None, return_history=False):
    """Solve ``G u = G_rhs`` componentwise.

    Convergence is measured in the ``w^alpha``-weighted norm of the
    residual relative to the right-hand side.
    """
    G = prob.grid.check(np.asarray(G, dtype=float), "G")
    if not np.all(np.isfinite(G)):
        raise ContractError("right-hand side contains non-finite values")
    check_coercivity(prob)
    lead = G.shape[:-3]
    flatG = G.reshape((-1,) + prob.grid.shape)
    flat0 = None if x0 is None else np.asarray(x0, dtype=float).reshape(flatG.shape)
    history: list = []
    out = np.stack([
        _solve_scalar(flatG[c], prob, None if flat0 is None else flat0[c], history)
        for c in range(flatG.shape[0])
    ]).reshape(lead + prob.grid.shape)
    return (out, history) if return_history else out


class RegularityReport(NamedTuple):
    ratio: Optional[float]  # None when G vanishes


def regularity_gain(u, G, prob, k, max_order=4):
    """``norm_X(u, k + 2) / norm_X(G, k)``."""
    gnorm = norm_X(G, prob.wf, k, prob.grid, max_order=max_order)
    if gnorm == 0.0:
        return RegularityReport(None)
    return RegularityReport(norm_X(u, prob.wf, k + 2, prob.grid, max_order=max_order) / gnorm)

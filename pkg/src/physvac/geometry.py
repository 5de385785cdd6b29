"""Discrete calculus on the slab T^2 x (0, 1) and flow-map kinematics.

Layout conventions
------------------
* Scalar fields have shape ``(n1, n2, n3)``, vector fields ``(3, n1, n2, n3)``
  and tensor fields ``(3, 3, n1, n2, n3)``.
* For a gradient ``DF[i, j] = dF^i / dx_j`` (row = component, column =
  derivative direction), so ``Deta[i, j] = eta^i_{,j}``.
* ``A[k, i]`` stores ``A^k_i`` with ``A = inv(Deta)`` as a matrix, hence
  ``sum_r A[k, r] Deta[r, s] = delta_ks``.
* x1 and x2 are periodic with nodes at ``i * h``; x3 is cell-centered with
  nodes at ``(j + 1/2) * h3`` so that no node sits on the vacuum boundary.

Two families of operators live here. The *collocated* operators
(:func:`partial`, :func:`discrete_gradient`) act node to node. The *face*
operators (:func:`face_gradient`, :func:`face_divergence`) sample gradients at
the interior x3-faces ``x3 = (j + 1) h3`` and are exact transposes of each
other; the flux-form second-order operators are built from them.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ContractError, DegenerateMapError

__all__ = [
    "Grid",
    "Kinematics",
    "LieDerivatives",
    "partial",
    "second_partial",
    "discrete_gradient",
    "deformation_gradient",
    "compute_kinematics",
    "kinematics_of",
    "piola_divergence",
    "eulerian_gradient",
    "lie_derivatives",
    "kinematic_rates",
    "face_gradient",
    "face_divergence",
    "face_average",
    "face_deformation_gradient",
    "quadrature_weights_x3",
]


def quadrature_weights_x3(n3, rule="corrected"):
    """Relative x3 quadrature weights (multiply by h1*h2*h3).

    ``"midpoint"`` gives all ones. ``"corrected"`` adds endpoint corrections on
    the five outermost rows so that the rule integrates polynomials of degree
    <= 5 exactly on the cell-centered layout (all weights stay positive).
    Grids with fewer than 10 rows fall back to the midpoint rule.
    """
    w = np.ones(n3)
    if rule == "midpoint" or n3 < 10:
        return w
    if rule != "corrected":
        raise ContractError(f"unknown quadrature rule {rule!r}")
    w[:5] += _CORRECTION
    w[-5:] += _CORRECTION[::-1]
    return w


def _endpoint_correction(p=5):
    # sum_j c_j (j+1/2)^k = B_{k+1}(1/2)/(k+1) cancels the midpoint-rule
    # boundary error for x^k, k < p (Hurwitz-zeta regularization).
    b_half = {0: 1.0, 1: 0.0, 2: -1.0 / 12, 3: 0.0, 4: 7.0 / 240, 5: 0.0}
    V = np.array([[(j + 0.5) ** k for j in range(p)] for k in range(p)])
    rhs = np.array([b_half[k + 1] / (k + 1) for k in range(p)])
    return np.linalg.solve(V, rhs)


_CORRECTION = _endpoint_correction()


@dataclass(frozen=True)
class Grid:
    """Uniform grid on T^2 x (0, 1), periodic in x1 and x2."""

    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        for name in ("n1", "n2", "n3"):
            n = getattr(self, name)
            if int(n) != n or n < 4:
                raise ContractError(f"{name} must be an integer >= 4, got {n!r}")

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    @property
    def h1(self):
        return 1.0 / self.n1

    @property
    def h2(self):
        return 1.0 / self.n2

    @property
    def h3(self):
        return 1.0 / self.n3

    @property
    def spacing(self):
        return (self.h1, self.h2, self.h3)

    @property
    def cell_volume(self):
        return self.h1 * self.h2 * self.h3

    @cached_property
    def x1(self):
        return (np.arange(self.n1) * self.h1)[:, None, None]

    @cached_property
    def x2(self):
        return (np.arange(self.n2) * self.h2)[None, :, None]

    @cached_property
    def x3(self):
        return ((np.arange(self.n3) + 0.5) * self.h3)[None, None, :]

    @cached_property
    def x3_faces(self):
        """Interior x3-faces, between node j and j+1."""
        return (np.arange(1, self.n3) * self.h3)[None, None, :]

    def coords(self):
        """Full ``(3, n1, n2, n3)`` array of node coordinates."""
        return np.stack(np.broadcast_arrays(self.x1, self.x2, self.x3)).astype(float)

    def zeros(self, *lead):
        return np.zeros(tuple(lead) + self.shape)

    def check(self, F, name="field"):
        F = np.asarray(F)
        if F.shape[-3:] != self.shape:
            raise ContractError(f"{name} has shape {F.shape}, grid expects (..., {self.shape})")
        return F

    def weights(self, rule="corrected"):
        return (quadrature_weights_x3(self.n3, rule) * self.cell_volume)[None, None, :]

    def integrate(self, density, rule="corrected"):
        """Quadrature of ``density`` summed over any leading (component) axes."""
        density = self.check(density, "density")
        return float(np.sum(density * self.weights(rule)))

    def pairing(self, f, g):
        """Uniform-weight discrete L2 pairing used for operator adjointness."""
        return float(np.sum(f * g)) * self.cell_volume


# --------------------------------------------------------------------------
# collocated stencils


def _wrap(f, ax, k):
    n = f.shape[ax]
    idx = np.r_[n - k:n, 0:n, 0:k]
    return np.take(f, idx, axis=ax), n


def _shift(p, ax, lo, n):
    sl = [slice(None)] * p.ndim
    sl[ax] = slice(lo, lo + n)
    return p[tuple(sl)]


def _d_periodic(f, ax, h):
    p, n = _wrap(f, ax, 2)
    d1 = _shift(p, ax, 3, n) - _shift(p, ax, 1, n)
    d2 = _shift(p, ax, 4, n) - _shift(p, ax, 0, n)
    return (8.0 * d1 - d2) / (12.0 * h)


def _dd_periodic(f, ax, h):
    p, n = _wrap(f, ax, 2)
    s1 = _shift(p, ax, 3, n) + _shift(p, ax, 1, n) - 2.0 * f
    s2 = _shift(p, ax, 4, n) + _shift(p, ax, 0, n) - 2.0 * f
    return (16.0 * s1 - s2) / (12.0 * h * h)


def _d_normal2(f, h):
    out = np.empty_like(f, dtype=float)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    f0, f1, f2 = f[..., 0], f[..., 1], f[..., 2]
    out[..., 0] = (4.0 * (f1 - f0) - (f2 - f0)) / (2.0 * h)
    g0, g1, g2 = f[..., -1], f[..., -2], f[..., -3]
    out[..., -1] = -(4.0 * (g1 - g0) - (g2 - g0)) / (2.0 * h)
    return out


# one-sided 4th-order closures for the first two rows (five-point support)
_EDGE = np.array([[-25.0, 48.0, -36.0, 16.0, -3.0],
                  [-3.0, -10.0, 18.0, -6.0, 1.0]]) / 12.0


def _d_normal(f, h):
    if f.shape[-1] < 8:
        return _d_normal2(f, h)
    out = np.empty_like(f, dtype=float)
    out[..., 2:-2] = (8.0 * (f[..., 3:-1] - f[..., 1:-3]) - (f[..., 4:] - f[..., :-4])) / (12.0 * h)
    # difference form: constants give exactly zero
    lo = f[..., 1:5] - f[..., :1]
    hi = f[..., -2:-6:-1] - f[..., -1:]
    for r in (0, 1):
        out[..., r] = lo @ _EDGE[r, 1:] / h
        out[..., -1 - r] = -(hi @ _EDGE[r, 1:]) / h
    return out


def partial(F, k, grid):
    """Derivative along x_{k+1} (k = 0, 1, 2) acting on the trailing grid axes.

    4th-order central differences in every direction. In x3 the two rows
    next to each vacuum face use 4th-order one-sided stencils, so that
    derivatives of derived fields stay accurate up to the boundary. Grids
    with fewer than 8 normal cells fall back to 2nd order.
    """
    F = grid.check(F)
    if k == 0:
        return _d_periodic(F, F.ndim - 3, grid.h1)
    if k == 1:
        return _d_periodic(F, F.ndim - 2, grid.h2)
    if k == 2:
        return _d_normal(F, grid.h3)
    raise ContractError(f"direction must be 0, 1 or 2, got {k}")


def second_partial(F, k, grid):
    """4th-order compact second derivative along a periodic direction."""
    F = grid.check(F)
    if k not in (0, 1):
        raise ContractError("second_partial is defined for the periodic directions only")
    return _dd_periodic(F, F.ndim - 3 + k, (grid.h1, grid.h2)[k])


def discrete_gradient(F, grid):
    """Gradient of a scalar (-> vector) or vector (-> tensor) field.

    ``out[..., k, :, :, :]`` is the derivative along x_{k+1}; for a vector
    field this puts the component first: ``out[i, k] = dF^i/dx_k``.
    """
    F = grid.check(np.asarray(F, dtype=float))
    return np.stack([partial(F, k, grid) for k in range(3)], axis=F.ndim - 3)


def deformation_gradient(disp, grid, affine=None):
    """``D eta`` for ``eta = affine @ x + disp`` (affine defaults to identity)."""
    D = discrete_gradient(disp, grid)
    M = np.eye(3) if affine is None else np.asarray(affine, dtype=float)
    return D + M.reshape(3, 3, 1, 1, 1)


# --------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True)
class Kinematics:
    """Deformation tensor, its inverse, Jacobian and cofactor at each node."""

    Deta: np.ndarray
    A: np.ndarray
    J: np.ndarray
    a: np.ndarray

    @property
    def adev(self):
        """max over nodes of the entrywise max |A - I|."""
        eye = np.eye(3).reshape((3, 3) + (1,) * (self.A.ndim - 2))
        return float(np.max(np.abs(self.A - eye)))


def _adjugate(M):
    adj = np.empty_like(M)
    adj[0, 0] = M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1]
    adj[0, 1] = M[0, 2] * M[2, 1] - M[0, 1] * M[2, 2]
    adj[0, 2] = M[0, 1] * M[1, 2] - M[0, 2] * M[1, 1]
    adj[1, 0] = M[1, 2] * M[2, 0] - M[1, 0] * M[2, 2]
    adj[1, 1] = M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
    adj[1, 2] = M[0, 2] * M[1, 0] - M[0, 0] * M[1, 2]
    adj[2, 0] = M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]
    adj[2, 1] = M[0, 1] * M[2, 0] - M[0, 0] * M[2, 1]
    adj[2, 2] = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return adj


def compute_kinematics(Deta):
    """Closed-form 3x3 inverse, determinant and cofactor of ``Deta``.

    Works on any trailing spatial shape (nodes or faces). Raises
    :class:`DegenerateMapError` at the node with the smallest Jacobian when
    ``det(Deta) <= 0`` anywhere.
    """
    Deta = np.asarray(Deta, dtype=float)
    if Deta.shape[:2] != (3, 3):
        raise ContractError(f"Deta must have shape (3, 3, ...), got {Deta.shape}")
    adj = _adjugate(Deta)
    J = Deta[0, 0] * adj[0, 0] + Deta[0, 1] * adj[1, 0] + Deta[0, 2] * adj[2, 0]
    bad = ~np.isfinite(J) | (J <= 0.0)
    if np.any(bad):
        Jm = np.where(np.isfinite(J), J, -np.inf)
        idx = np.unravel_index(np.argmin(Jm), J.shape)
        raise DegenerateMapError(idx, J[idx])
    A = adj / J
    return Kinematics(Deta=Deta, A=A, J=J, a=J * A)


def kinematics_of(disp, grid, affine=None):
    return compute_kinematics(deformation_gradient(disp, grid, affine))


def piola_divergence(kin, grid):
    """``sum_k d_k a^k_i``: vanishes identically in the continuum."""
    a = grid.check(kin.a, "cofactor")
    return sum(partial(a[k], k, grid) for k in range(3))


class LieDerivatives(NamedTuple):
    grad: np.ndarray  # [D_eta F]^i_r
    div: np.ndarray
    curl: np.ndarray
    Curl: np.ndarray


def eulerian_gradient(DF, A):
    """``A^s_r dF/dx_s`` for any leading component axes of ``DF``.

    ``DF`` has the derivative direction on axis ``-4``.
    """
    return np.einsum("sr...,s...->r...", A, np.moveaxis(DF, -4, 0))


def lie_derivatives(F, kin, grid, DF=None):
    """Eulerian gradient, divergence, curl and curl matrix along the flow."""
    if DF is None:
        F = grid.check(F)
        if F.shape[:-3] != (3,):
            raise ContractError("lie_derivatives expects a vector field")
        DF = discrete_gradient(F, grid)
    g = np.einsum("sr...,is...->ir...", kin.A, DF)
    div = g[0, 0] + g[1, 1] + g[2, 2]
    curl = np.stack([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]])
    Curl = g - np.swapaxes(g, 0, 1)
    return LieDerivatives(g, div, curl, Curl)


def kinematic_rates(kin, Dv):
    """Time derivatives of ``A`` and ``J`` for velocity gradient ``Dv``."""
    AD = np.einsum("kr...,rs...->ks...", kin.A, Dv)
    dA = -np.einsum("ks...,si...->ki...", AD, kin.A)
    dJ = kin.J * np.einsum("sr...,rs...->...", kin.A, Dv)
    return dA, dJ


# --------------------------------------------------------------------------
# face (x3-staggered) operators


def face_average(F):
    """Average adjacent x3 rows onto the ``n3 - 1`` interior faces."""
    return 0.5 * (F[..., 1:] + F[..., :-1])


def face_gradient(F, grid):
    """Gradient sampled on interior x3-faces, shape ``(..., 3, n1, n2, n3-1)``.

    Tangential components average the nodal periodic derivatives of the two
    neighbouring rows; the normal component is the compact difference.
    """
    F = grid.check(np.asarray(F, dtype=float))
    comps = [
        face_average(partial(F, 0, grid)),
        face_average(partial(F, 1, grid)),
        (F[..., 1:] - F[..., :-1]) / grid.h3,
    ]
    return np.stack(comps, axis=F.ndim - 3)


def face_divergence(X, grid):
    """Nodal divergence of a face flux; boundary faces carry zero flux.

    Satisfies ``pairing(face_divergence(X), G) == -<X, face_gradient(G)>``
    exactly, i.e. ``-face_divergence`` is the transpose of ``face_gradient``.
    """
    X = np.asarray(X, dtype=float)
    ax = X.ndim - 4
    Xk = [np.take(X, k, axis=ax) for k in range(3)]
    pad = [(0, 0)] * (Xk[0].ndim - 1) + [(1, 1)]
    out = None
    for k in (0, 1):
        P = np.pad(Xk[k], pad)
        nodal = 0.5 * (P[..., 1:] + P[..., :-1])
        term = _d_periodic(nodal, nodal.ndim - 3 + k, grid.spacing[k])
        out = term if out is None else out + term
    P = np.pad(Xk[2], pad)
    return out + (P[..., 1:] - P[..., :-1]) / grid.h3


def face_deformation_gradient(disp, grid, affine=None):
    """``D eta`` on interior x3-faces for ``eta = affine @ x + disp``."""
    D = face_gradient(disp, grid)
    M = np.eye(3) if affine is None else np.asarray(affine, dtype=float)
    return D + M.reshape(3, 3, 1, 1, 1)

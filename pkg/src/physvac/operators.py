"""Frozen-coefficient weighted second-order operators on the flow map.

Each operator is ``-div`` of a flux evaluated on the interior x3-faces, with
coefficients built from a frozen deformation sampled on those faces. Since
:func:`~physvac.geometry.face_divergence` is minus the transpose of
:func:`~physvac.geometry.face_gradient`, the elastic and divergence operators
are symmetric positive semidefinite in the uniform pairing.
"""
import numpy as np

from .errors import ContractError
from .geometry import (
    Kinematics,
    compute_kinematics,
    face_average,
    face_deformation_gradient,
    face_divergence,
    face_gradient,
)

__all__ = ["face_kinematics", "linear_operator_apply", "elastic", "divergence_op", "curl_op"]


def face_kinematics(disp, grid, affine=None):
    """Kinematics of ``eta = affine @ x + disp`` sampled on interior x3-faces."""
    return compute_kinematics(face_deformation_gradient(disp, grid, affine))


def _on_faces(kin, grid):
    n = kin.J.shape[-1]
    if n == grid.n3 - 1:
        return kin
    if n == grid.n3:
        return compute_kinematics(face_average(kin.Deta))
    raise ContractError(f"frozen kinematics has {n} x3-rows; expected {grid.n3} or {grid.n3 - 1}")


def _coef(kin, wf):
    return wf.W_face * kin.J ** (-1.0 / wf.alpha)


def elastic(G, kin, wf, grid):
    """``-(W J^(-1/alpha) A^k_r A^s_r G^i_{,s})_{,k}``."""
    kin = _on_faces(kin, grid)
    c = _coef(kin, wf)
    DG = face_gradient(G, grid)  # DG[i, s]
    eul = np.einsum("sr...,is...->ir...", kin.A, DG)  # A^s_r G^i_{,s}
    flux = c * np.einsum("kr...,ir...->ik...", kin.A, eul)
    return -face_divergence(flux, grid)


def divergence_op(G, kin, wf, grid):
    """``-(1/alpha)(W J^(-1/alpha) A^k_i A^s_r G^r_{,s})_{,k}``."""
    kin = _on_faces(kin, grid)
    c = _coef(kin, wf) / wf.alpha
    DG = face_gradient(G, grid)
    div = np.einsum("sr...,rs...->...", kin.A, DG)
    flux = np.swapaxes(kin.A, 0, 1) * (c * div)  # flux[i, k] = A^k_i ...
    return -face_divergence(flux, grid)


def curl_op(H, kin, wf, grid, atol=1e-12):
    """``-(W J^(-1/alpha) A^k_r H^r_i)_{,k}`` for an antisymmetric tensor field ``H``."""
    H = grid.check(np.asarray(H, dtype=float), "H")
    if H.shape[:2] != (3, 3):
        raise ContractError("H must be a (3, 3, ...) tensor field")
    asym = np.max(np.abs(H + np.swapaxes(H, 0, 1)))
    if asym > atol * max(1.0, float(np.max(np.abs(H)))):
        raise ContractError(f"H is not antisymmetric (max |H + H^T| = {asym:.3e})")
    kin = _on_faces(kin, grid)
    c = _coef(kin, wf)
    Hf = face_average(H)
    flux = c * np.einsum("kr...,ri...->ik...", kin.A, Hf)
    return -face_divergence(flux, grid)


_OPS = {"elastic": elastic, "divergence": divergence_op, "curl": curl_op}


def linear_operator_apply(which, F, frozen: Kinematics, wf, grid):
    """Dispatch to the ``elastic``, ``divergence`` or ``curl`` operator."""
    try:
        op = _OPS[which]
    except KeyError:
        raise ContractError(f"unknown operator {which!r}; choose from {sorted(_OPS)}") from None
    return op(F, frozen, wf, grid)

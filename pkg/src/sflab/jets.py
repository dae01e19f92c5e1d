"""Batched 2-jets of parameterized surfaces.

A surface piece is a map from a planar parameter domain into R^3.  All
asymptotic laws in this package are read off first and second derivatives,
so every evaluation carries the full 2-jet: value, Jacobian and Hessian.
Jets are stored batched; a batch of parameter points with shape (..., 2)
produces value (..., 3), Jacobian (..., 3, 2) and Hessian (..., 3, 2, 2).

Pushing a jet through an affine map is exact.  Pushing through a general
smooth map g uses the second-order chain rule

    H'[i,a,b] = sum_jk D2g[i,j,k] J[j,a] J[k,b] + sum_j Dg[i,j] H[j,a,b].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

#: evaluation modes, in increasing order of cost
MODE_VALUE = "value"
MODE_JAC = "jac"
MODE_FULL = "full"


@dataclass(frozen=True)
class Jet2:
    """2-jet of a map R^2 -> R^3 on a batch of parameter points.

    ``jac`` and ``hess`` may be None for cheaper evaluation modes.
    """

    value: Array
    jac: Array | None = None
    hess: Array | None = None

    @property
    def planar(self) -> Array:
        """Planar part (x, y) of the values, shape (..., 2)."""
        return self.value[..., :2]

    @property
    def planar_complex(self) -> Array:
        """Planar part as complex numbers x + iy."""
        return self.value[..., 0] + 1j * self.value[..., 1]

    @property
    def height(self) -> Array:
        """Vertical coordinate t of the values."""
        return self.value[..., 2]

    @property
    def mode(self) -> str:
        if self.hess is not None:
            return MODE_FULL
        if self.jac is not None:
            return MODE_JAC
        return MODE_VALUE


def affine_jet(points: Array, origin: Array, basis: Array, mode: str = MODE_FULL) -> Jet2:
    """Jet of the affine chart p -> origin + basis @ p.

    ``origin`` has shape (3,), ``basis`` shape (3, 2).
    """
    points = np.asarray(points, dtype=float)
    value = origin + np.einsum("ij,...j->...i", basis, points)
    if mode == MODE_VALUE:
        return Jet2(value)
    jac = np.broadcast_to(basis, value.shape[:-1] + (3, 2)).copy()
    if mode == MODE_JAC:
        return Jet2(value, jac)
    hess = np.zeros(value.shape[:-1] + (3, 2, 2))
    return Jet2(value, jac, hess)


def push_linear(jet: Jet2, matrix: Array, offset: Array | None = None) -> Jet2:
    """Push a jet through the affine map v -> matrix @ v + offset."""
    value = np.einsum("ij,...j->...i", matrix, jet.value)
    if offset is not None:
        value = value + offset
    jac = None if jet.jac is None else np.einsum("ij,...ja->...ia", matrix, jet.jac)
    hess = None
    if jet.hess is not None:
        hess = np.einsum("ij,...jab->...iab", matrix, jet.hess)
    return Jet2(value, jac, hess)


def push_smooth(jet: Jet2, value: Array, dg: Array, d2g: Array) -> Jet2:
    """Push a jet through a smooth map given its derivatives at jet.value.

    ``value``: g(jet.value), shape (..., 3).
    ``dg``: Jacobian of g at jet.value, shape (..., 3, 3) or (3, 3).
    ``d2g``: Hessian of g, shape (..., 3, 3, 3) or (3, 3, 3); may be a
    constant array when g has constant second derivatives.
    """
    jac = None
    hess = None
    if jet.jac is not None:
        jac = np.einsum("...ij,...ja->...ia", np.broadcast_to(dg, jet.value.shape[:-1] + (3, 3)), jet.jac)
    if jet.hess is not None:
        d2 = np.broadcast_to(d2g, jet.value.shape[:-1] + (3, 3, 3))
        hess = np.einsum("...ijk,...ja,...kb->...iab", d2, jet.jac, jet.jac)
        hess = hess + np.einsum("...ij,...jab->...iab", np.broadcast_to(dg, jet.value.shape[:-1] + (3, 3)), jet.hess)
    return Jet2(value, jac, hess)


def planar_det(jet: Jet2) -> Array:
    """Determinant of the planar 2x2 block of the Jacobian.

    This is the fold function of the vertical projection restricted to the
    surface: it vanishes exactly on the folding curve.
    """
    j = jet.jac
    return j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]


def planar_det_gradient(jet: Jet2) -> Array:
    """Parameter gradient of planar_det, shape (..., 2)."""
    j = jet.jac
    h = jet.hess
    # dJ[i, a]/dsigma_b = hess[i, a, b]
    grad = np.stack(
        [
            h[..., 0, 0, b] * j[..., 1, 1]
            + j[..., 0, 0] * h[..., 1, 1, b]
            - h[..., 0, 1, b] * j[..., 1, 0]
            - j[..., 0, 1] * h[..., 1, 0, b]
            for b in range(2)
        ],
        axis=-1,
    )
    return grad


def plane_slope(jet: Jet2) -> Array:
    """Maximal absolute slope of the tangent plane over the base plane.

    For a tangent plane spanned by the Jacobian columns the slope of a
    tangent vector v is |v_t| / |v_planar|; the maximum over directions is
    the 2-norm of the row vector J_t @ inv(J_planar).  Points where the
    planar block is singular give infinite slope.
    """
    j = jet.jac
    a = j[..., 0, 0]
    b = j[..., 0, 1]
    c = j[..., 1, 0]
    d = j[..., 1, 1]
    det = a * d - b * c
    tx = j[..., 2, 0]
    ty = j[..., 2, 1]
    # row = (tx, ty) @ inv([[a, b], [c, d]]) * det
    row0 = tx * d - ty * c
    row1 = -tx * b + ty * a
    norm = np.hypot(row0, row1)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(det != 0.0, norm / np.abs(det), np.inf)
    return slope


def graph_over_base(jet: Jet2) -> tuple[Array, Array, Array]:
    """Gradient and Hessian of the height t = psi(x, y) over the base plane.

    Returns (psi_value, grad (..., 2), hess (..., 2, 2)).  Requires the
    planar block of the Jacobian to be invertible (no folds in the piece).
    """
    j = jet.jac
    h = jet.hess
    a = j[..., :2, :]
    bt = j[..., 2, :]
    a_inv = _inv2(a)
    grad = np.einsum("...a,...ab->...b", bt, a_inv)
    rhs = h[..., 2, :, :] - grad[..., 0][..., None, None] * h[..., 0, :, :] - grad[..., 1][..., None, None] * h[..., 1, :, :]
    hess = np.einsum("...ca,...cd,...db->...ab", a_inv, rhs, a_inv)
    return jet.height, grad, hess


def graph_over_vertical(jet: Jet2) -> tuple[Array, Array, Array]:
    """Gradient and Hessian of the graph x = phi(y, t).

    The tangency analysis reads the image surface of the transition map as
    a graph over the (y, t) plane.  Returns (phi_value, grad (..., 2) with
    components (d/dy, d/dt), hess (..., 2, 2) in the same ordering).
    """
    j = jet.jac
    h = jet.hess
    a = j[..., 1:3, :]
    bx = j[..., 0, :]
    a_inv = _inv2(a)
    grad = np.einsum("...a,...ab->...b", bx, a_inv)
    rhs = h[..., 0, :, :] - grad[..., 0][..., None, None] * h[..., 1, :, :] - grad[..., 1][..., None, None] * h[..., 2, :, :]
    hess = np.einsum("...ca,...cd,...db->...ab", a_inv, rhs, a_inv)
    return jet.value[..., 0], grad, hess


def _inv2(m: Array) -> Array:
    """Batched inverse of 2x2 matrices (last two axes)."""
    a = m[..., 0, 0]
    b = m[..., 0, 1]
    c = m[..., 1, 0]
    d = m[..., 1, 1]
    det = a * d - b * c
    inv = np.empty_like(m)
    inv[..., 0, 0] = d
    inv[..., 0, 1] = -b
    inv[..., 1, 0] = -c
    inv[..., 1, 1] = a
    return inv / det[..., None, None]

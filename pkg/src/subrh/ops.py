"""Discrete horizontal calculus on the twisted-periodic grid.

Centered second-order stencils for the frame derivatives

    X f = f_x + y f_z,    Y f = f_y,    T f = f_z

and the direct sub-Laplacian stencil

    L f = f_xx + f_yy + 2 y f_xz + y^2 f_zz

(the coordinate form of the horizontal Laplacian; the 4-point cross stencil
realizes f_xz). All kernels act on the last three axes, so a leading
component axis broadcasts through. The y-shift uses the twisted wrap from
module fields; x and z shifts are plain rolls.

L is symmetric and negative semidefinite for the plain l2 inner product (the
twisted boundary shift is a permutation, and the cross term pairs i and k
rolls symmetrically), with Gershgorin bound |lambda| <= 4*(1 + y^2 + 2y)/h^2
<= 16/h^2; dt_max = h^2/10 keeps explicit Euler inside the stability region
with margin.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fields import Grid, MapField, ScalarField


class StabilityError(Exception):
    """Requested explicit time step exceeds the stability bound."""


@dataclass
class OperatorReport:
    residual_max: float
    residual_l2: float
    order_estimate: float


def dt_max(h):
    """Largest explicit step accepted by linear_heat_step."""
    return h * h / 10.0


def _shift_y(a, g, s):
    """out[..., i, j, k] = a at (i, j+s, k) under the twisted wrap, s = +-1."""
    n = g.n
    out = np.empty_like(a)
    if s == 1:
        out[..., :, : n - 1, :] = a[..., :, 1:, :]
        slab = a[..., :, 0, :]
        out[..., :, n - 1, :] = slab[..., g._row, g._twist_up]
    elif s == -1:
        out[..., :, 1:, :] = a[..., :, : n - 1, :]
        slab = a[..., :, n - 1, :]
        out[..., :, 0, :] = slab[..., g._row, g._twist_dn]
    else:
        raise ValueError("shift must be +-1")
    return out


def _apply_X(a, g):
    inv2h = 0.5 / g.h
    dx = (np.roll(a, -1, axis=-3) - np.roll(a, 1, axis=-3)) * inv2h
    dz = (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) * inv2h
    return dx + g.y * dz


def _apply_Y(a, g):
    inv2h = 0.5 / g.h
    return (_shift_y(a, g, 1) - _shift_y(a, g, -1)) * inv2h


def _apply_T(a, g):
    inv2h = 0.5 / g.h
    return (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) * inv2h


def _lap(a, g):
    invh2 = 1.0 / (g.h * g.h)
    y = g.y
    xp = np.roll(a, -1, axis=-3)
    xm = np.roll(a, 1, axis=-3)
    zp = np.roll(a, -1, axis=-1)
    zm = np.roll(a, 1, axis=-1)
    yp = _shift_y(a, g, 1)
    ym = _shift_y(a, g, -1)
    cross = (
        np.roll(xp, -1, axis=-1)
        - np.roll(xp, 1, axis=-1)
        - np.roll(xm, -1, axis=-1)
        + np.roll(xm, 1, axis=-1)
    )
    out = (xp + xm + yp + ym - 4.0 * a) * invh2
    out += (y * y) * ((zp + zm - 2.0 * a) * invh2)
    out += (0.5 * y * invh2) * cross
    return out


def _heat_step(a, g, dt):
    return a + dt * _lap(a, g)


def _integrate(a, g):
    """h^3 times a deterministic compensated sum over all cells.

    numpy's pairwise row sums feed math.fsum, so the reduction order is fixed
    for a given N regardless of threading; repeated runs are bit identical.
    """
    rows = np.asarray(a, dtype=float).reshape(-1, g.n).sum(axis=1)
    return math.fsum(rows.tolist()) * g.h ** 3


def _norm_l2(a, g):
    return math.sqrt(max(_integrate(np.square(a), g), 0.0))


def _wrap_like(f, data):
    if isinstance(f, MapField):
        return MapField(f.grid, data)
    return ScalarField(f.grid, data)


def apply_X(f):
    """Centered X-derivative of a field (ScalarField or MapField)."""
    return _wrap_like(f, _apply_X(f.data, f.grid))


def apply_Y(f):
    """Centered Y-derivative; the boundary shift is the twisted wrap."""
    return _wrap_like(f, _apply_Y(f.data, f.grid))


def apply_T(f):
    """Centered Reeb (z) derivative."""
    return _wrap_like(f, _apply_T(f.data, f.grid))


def sub_laplacian(f):
    """Direct sub-Laplacian stencil (not the X*X + Y*Y composition)."""
    return _wrap_like(f, _lap(f.data, f.grid))


def horizontal_gradient(u):
    """(X u, Y u) componentwise."""
    return apply_X(u), apply_Y(u)


def integrate(f):
    """Integral over the fundamental domain (volume density is 1)."""
    return _integrate(f.data, f.grid)


def norm_l2(f):
    return _norm_l2(f.data, f.grid)


def norm_sup(f):
    return float(np.max(np.abs(f.data)))


def linear_heat_step(f, dt):
    """One explicit Euler step of the linear heat equation.

    Rejects dt above dt_max(h). Preserves the integral to roundoff: every
    stencil term telescopes exactly under the (twisted) periodic wrap.
    """
    g = f.grid
    if dt > dt_max(g.h) * (1.0 + 1e-12):
        raise StabilityError(
            f"dt={dt:g} exceeds stability bound {dt_max(g.h):g} for h={g.h:g}"
        )
    return _wrap_like(f, _heat_step(f.data, g, dt))

"""Second-order finite-difference vector calculus on collocated grids.

All first derivatives use central differences in the interior and one-sided
three-point stencils at the boundary, so the truncation order is uniformly
O(h^2).  Second derivatives use the standard three-point stencil inside and
the four-point one-sided stencil at the edges (also O(h^2), exact for
cubics).  Quadrature is the trapezoidal product rule, which matches the
operator accuracy.
"""

from __future__ import annotations

import numpy as np

from .fields import BoundaryField, Grid, ScalarField, VectorField, face_keys


def _deriv(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(values, h, axis=axis, edge_order=2)


def _second_deriv(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    u = np.moveaxis(values, axis, 0)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h**2
    out[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def derivative(s: ScalarField, axis: int) -> ScalarField:
    return ScalarField(s.grid, _deriv(s.values, s.grid.spacing[axis], axis))


def second_derivative(s: ScalarField, axis: int) -> ScalarField:
    return ScalarField(s.grid, _second_deriv(s.values, s.grid.spacing[axis], axis))


def gradient(s: ScalarField) -> VectorField:
    g = s.grid
    comps = [_deriv(s.values, g.spacing[ax], ax) for ax in range(g.ndim)]
    return VectorField(g, np.stack(comps, axis=-1))


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    out = np.zeros(g.shape)
    for ax in range(g.ndim):
        out += _deriv(v.values[..., ax], g.spacing[ax], ax)
    return ScalarField(g, out)


def curl(v: VectorField):
    """Curl of a 2D or 3D field.

    In 2D the curl has a single out-of-plane component, returned as a
    ScalarField; in 3D a VectorField.
    """
    g = v.grid
    h = g.spacing
    if g.ndim == 2:
        wz = _deriv(v.values[..., 1], h[0], 0) - _deriv(v.values[..., 0], h[1], 1)
        return ScalarField(g, wz)
    if g.ndim == 3:
        dv = {}
        for comp in range(3):
            for ax in range(3):
                if comp != ax:
                    dv[comp, ax] = _deriv(v.values[..., comp], h[ax], ax)
        wx = dv[2, 1] - dv[1, 2]
        wy = dv[0, 2] - dv[2, 0]
        wz = dv[1, 0] - dv[0, 1]
        return VectorField(g, np.stack([wx, wy, wz], axis=-1))
    raise ValueError(f"curl needs a 2D or 3D grid, got {g.ndim}D")


def laplacian(s: ScalarField) -> ScalarField:
    g = s.grid
    out = np.zeros(g.shape)
    for ax in range(g.ndim):
        out += _second_deriv(s.values, g.spacing[ax], ax)
    return ScalarField(g, out)


def dalembertian(s: ScalarField) -> ScalarField:
    """Wave operator on a space-time grid whose axis 0 is x^0 = c*t.

    Metric signature (+, -, ...): box = d^2/d(x^0)^2 - sum_i d^2/dx_i^2.
    """
    g = s.grid
    out = _second_deriv(s.values, g.spacing[0], 0)
    for ax in range(1, g.ndim):
        out -= _second_deriv(s.values, g.spacing[ax], ax)
    return ScalarField(g, out)


def inner_product(a, b) -> float:
    """Trapezoidal L2 inner product; vector fields are dotted pointwise."""
    if a.grid is not b.grid and a.grid != b.grid:
        raise ValueError("fields live on different grids")
    w = a.grid.volume_weights()
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        return float(np.sum(w * a.values * b.values))
    if isinstance(a, VectorField) and isinstance(b, VectorField):
        return float(np.sum(w * np.sum(a.values * b.values, axis=-1)))
    raise ValueError("inner_product needs two fields of the same kind")


def norm(a) -> float:
    return float(np.sqrt(max(inner_product(a, a), 0.0)))


def boundary_normal_component(v: VectorField) -> BoundaryField:
    """v . n on each boundary face (outward unit normals)."""
    g = v.grid
    faces = {}
    for axis, side in face_keys(g):
        idx = [slice(None)] * g.ndim
        idx[axis] = 0 if side == 0 else -1
        sign = -1.0 if side == 0 else 1.0
        faces[(axis, side)] = sign * v.values[tuple(idx)][..., axis]
    return BoundaryField(g, faces)

"""Iterative solvers for the scalar Neumann and gauge-fixed vector Poisson
problems on collocated grids.

The Neumann condition is folded into the Laplacian by ghost-point
elimination, which makes the operator symmetric under the trapezoidal
quadrature weights; conjugate gradients then apply directly to the weighted
system.  Red-black SOR on the unweighted equations is kept as an independent
cross-check.  The pure-Neumann problem is singular (constants); solutions
are gauged to zero quadrature mean and the right side is checked for the
discrete solvability condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import BoundaryField, Grid, ScalarField, VectorField, face_keys
from . import operators

_METHODS = {
    "conjugate-gradient": "cg",
    "cg": "cg",
    "successive-over-relaxation": "sor",
    "sor": "sor",
}


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 100_000
    method: str = "conjugate-gradient"
    sor_relaxation: float = 1.8

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.max_iterations > 0:
            raise ValueError("max_iterations must be positive")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.sor_relaxation < 2.0:
            raise ValueError("sor_relaxation must lie in (0, 2)")


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float
    converged: bool
    compatibility_defect: float = 0.0
    residual_history: list = field(default_factory=list)
    boundary_defect: float | None = None
    divergence_norm: float | None = None

    def as_dict(self) -> dict:
        d = {
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "compatibility_defect": self.compatibility_defect,
        }
        if self.boundary_defect is not None:
            d["boundary_defect"] = self.boundary_defect
        if self.divergence_norm is not None:
            d["divergence_norm"] = self.divergence_norm
        return d


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, report: SolveReport):
        super().__init__(message)
        self.report = report


class IncompatibleProblemError(ValueError):
    pass


# Face boundary conditions for the core solver: ("neumann", face_values)
# imposes the outward normal derivative, ("dirichlet",) pins the face to 0.
NEUMANN = "neumann"
DIRICHLET = "dirichlet"


class _Problem:
    def __init__(self, grid: Grid, face_bcs: dict):
        self.grid = grid
        self.face_bcs = face_bcs
        self.mask = np.ones(grid.shape, dtype=bool)
        for (axis, side), bc in face_bcs.items():
            if bc[0] == DIRICHLET:
                idx = [slice(None)] * grid.ndim
                idx[axis] = 0 if side == 0 else -1
                self.mask[tuple(idx)] = False
        self.all_neumann = all(bc[0] == NEUMANN for bc in face_bcs.values())
        self.weights = self._weights()
        self.diag = self._diagonal()

    def _weights(self) -> np.ndarray:
        w = np.ones(self.grid.shape)
        for ax, (h, n) in enumerate(zip(self.grid.spacing, self.grid.counts)):
            w1 = np.full(n, h)
            if self.face_bcs[(ax, 0)][0] == NEUMANN:
                w1[0] *= 0.5
            if self.face_bcs[(ax, 1)][0] == NEUMANN:
                w1[-1] *= 0.5
            shape = [1] * self.grid.ndim
            shape[ax] = n
            w = w * w1.reshape(shape)
        return w

    def _diagonal(self) -> np.ndarray:
        d = sum(2.0 / h**2 for h in self.grid.spacing)
        return np.full(self.grid.shape, d)

    def apply_lap(self, u: np.ndarray) -> np.ndarray:
        """Ghost-eliminated Laplacian; u must vanish on Dirichlet faces."""
        out = np.zeros_like(u)
        for ax, h in enumerate(self.grid.spacing):
            um = np.moveaxis(u, ax, 0)
            om = np.moveaxis(out, ax, 0)
            om[1:-1] += (um[2:] - 2.0 * um[1:-1] + um[:-2]) / h**2
            if self.face_bcs[(ax, 0)][0] == NEUMANN:
                om[0] += 2.0 * (um[1] - um[0]) / h**2
            if self.face_bcs[(ax, 1)][0] == NEUMANN:
                om[-1] += 2.0 * (um[-2] - um[-1]) / h**2
        out[~self.mask] = 0.0
        return out

    def bc_source(self) -> np.ndarray:
        """Right-side contribution of the inhomogeneous Neumann data."""
        bc = np.zeros(self.grid.shape)
        for (axis, side), spec in self.face_bcs.items():
            if spec[0] != NEUMANN:
                continue
            g = spec[1]
            h = self.grid.spacing[axis]
            idx = [slice(None)] * self.grid.ndim
            idx[axis] = 0 if side == 0 else -1
            bc[tuple(idx)] += 2.0 * g / h
        return bc

    def weighted_mean(self, u: np.ndarray) -> float:
        w = self.weights[self.mask]
        return float(np.sum(w * u[self.mask]) / np.sum(w))


def _residual_norm(prob: _Problem, u: np.ndarray, rhs: np.ndarray) -> float:
    r = rhs - prob.apply_lap(u)
    return float(np.linalg.norm(r[prob.mask]))


def _solve_cg(prob: _Problem, rhs: np.ndarray, cfg: SolverConfig):
    mask, w = prob.mask, prob.weights
    b = np.where(mask, -w * rhs, 0.0)
    diag_a = w * prob.diag
    rhs_norm = float(np.linalg.norm(rhs[mask]))
    target = cfg.tolerance * max(rhs_norm, 1.0)

    x = np.zeros(prob.grid.shape)
    r = b.copy()
    history = []

    def unscaled(rv):
        return float(np.linalg.norm((rv[mask] / w[mask])))

    res = unscaled(r)
    history.append(res)
    z = np.where(mask, r / diag_a, 0.0)
    p = z.copy()
    rz = float(np.sum(r * z))
    iterations = 0
    while res > target and iterations < cfg.max_iterations:
        lap_p = prob.apply_lap(p)
        ap = np.where(mask, -w * lap_p, 0.0)
        pap = float(np.sum(p * ap))
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = np.where(mask, r / diag_a, 0.0)
        rz_new = float(np.sum(r * z))
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new
        iterations += 1
        res = unscaled(r)
        history.append(res)
        if prob.all_neumann and iterations % 64 == 0:
            x -= prob.weighted_mean(x)
    res = _residual_norm(prob, x, rhs)
    return x, iterations, res, target, rhs_norm, history


def _solve_sor(prob: _Problem, rhs: np.ndarray, cfg: SolverConfig):
    mask = prob.mask
    rhs_norm = float(np.linalg.norm(rhs[mask]))
    target = cfg.tolerance * max(rhs_norm, 1.0)
    parity = np.indices(prob.grid.shape).sum(axis=0) % 2
    colors = [mask & (parity == 0), mask & (parity == 1)]
    diag_l = -prob.diag
    omega = cfg.sor_relaxation

    x = np.zeros(prob.grid.shape)
    history = []
    iterations = 0
    res = _residual_norm(prob, x, rhs)
    history.append(res)
    while res > target and iterations < cfg.max_iterations:
        for color in colors:
            r = rhs - prob.apply_lap(x)
            x[color] += omega * r[color] / diag_l[color]
        if prob.all_neumann:
            x -= prob.weighted_mean(x)
        iterations += 1
        res = _residual_norm(prob, x, rhs)
        history.append(res)
    return x, iterations, res, target, rhs_norm, history


def _solve_core(grid: Grid, rhs: np.ndarray, face_bcs: dict, cfg: SolverConfig,
                what: str) -> tuple[np.ndarray, SolveReport]:
    prob = _Problem(grid, face_bcs)
    rhs_eff = np.where(prob.mask, rhs - prob.bc_source(), 0.0)
    if prob.all_neumann:
        # Shift to the range of the singular operator; the shift size is the
        # compatibility defect, gated by the caller.
        defect = float(np.sum(prob.weights * rhs_eff))
        rhs_eff = np.where(prob.mask, rhs_eff - defect / np.sum(prob.weights), 0.0)
    solver = _METHODS[cfg.method]
    runner = _solve_cg if solver == "cg" else _solve_sor
    x, iterations, res, target, rhs_norm, history = runner(prob, rhs_eff, cfg)
    if prob.all_neumann:
        x -= prob.weighted_mean(x)
        x[~prob.mask] = 0.0
    residual_rel = res / max(rhs_norm, 1.0)
    report = SolveReport(
        method=cfg.method,
        iterations=iterations,
        residual=residual_rel,
        converged=res <= target * (1.0 + 1e-12),
        residual_history=history,
    )
    if not report.converged:
        raise ConvergenceError(
            f"{what}: no convergence in {iterations} iterations "
            f"(residual {res:.3e}, target {target:.3e})",
            report,
        )
    return x, report


def solve_scalar_neumann(source: ScalarField, neumann: BoundaryField,
                         cfg: SolverConfig | None = None,
                         compatibility_limit: float | None = None) -> tuple[ScalarField, SolveReport]:
    """Solve lap(phi) = source with d(phi)/dn given on the boundary.

    The data must satisfy the solvability condition (volume integral of the
    source equals the boundary flux); a defect beyond ``compatibility_limit``
    (default 10x the solver tolerance), relative to the data scale, rejects
    the problem.  Callers that build source and flux from one vector field
    may pass a larger limit: their data is consistent up to truncation and
    the measured defect is reported either way.  Smaller defects are
    absorbed by mean-shifting the source.  The returned phi has zero
    quadrature mean.
    """
    cfg = cfg or SolverConfig()
    if compatibility_limit is None:
        compatibility_limit = 10.0 * cfg.tolerance
    grid = source.grid
    face_bcs = {key: (NEUMANN, neumann.faces[key]) for key in face_keys(grid)}

    w = grid.volume_weights()
    source_integral = float(np.sum(w * source.values))
    flux_integral = neumann.integral()
    defect = source_integral - flux_integral
    scale = max(
        1.0,
        float(np.sum(w * np.abs(source.values))),
        sum(float(np.sum(neumann.face_weights(k) * np.abs(v))) for k, v in neumann.faces.items()),
    )
    rel_defect = abs(defect) / scale
    if rel_defect > compatibility_limit:
        raise IncompatibleProblemError(
            f"source/boundary data incompatible: defect {rel_defect:.3e} "
            f"exceeds limit {compatibility_limit:.1e}"
        )

    x, report = _solve_core(grid, source.values, face_bcs, cfg, "scalar Neumann solve")
    report.compatibility_defect = rel_defect
    return ScalarField(grid, x), report


def _component_bcs(grid: Grid, component: int) -> dict:
    """Mixed conditions for one vector-potential component: the component is
    pinned to zero on faces where it is tangential and has zero normal
    derivative on its own faces (compatible with a solenoidal potential)."""
    bcs = {}
    for axis, side in face_keys(grid):
        if axis == component:
            shape = tuple(n for i, n in enumerate(grid.counts) if i != axis)
            bcs[(axis, side)] = (NEUMANN, np.zeros(shape))
        else:
            bcs[(axis, side)] = (DIRICHLET,)
    return bcs


def _project_divergence_free(lam: VectorField, cfg: SolverConfig) -> tuple[VectorField, int]:
    """Gauge shift lam -> lam + grad(psi) with lap(psi) = -div(lam)."""
    grid = lam.grid
    div = operators.divergence(lam)
    face_bcs = {key: (DIRICHLET,) for key in face_keys(grid)}
    psi, report = _solve_core(grid, -div.values, face_bcs, cfg, "gauge projection solve")
    grad_psi = operators.gradient(ScalarField(grid, psi))
    return lam + grad_psi, report.iterations


def _tangential_defect(e: VectorField) -> float:
    """max |e x n| over the boundary faces (one-sided stencils feed e)."""
    grid = e.grid
    worst = 0.0
    for axis, side in face_keys(grid):
        idx = [slice(None)] * grid.ndim
        idx[axis] = 0 if side == 0 else -1
        face_vals = e.values[tuple(idx)]
        tangential_sq = np.sum(face_vals**2, axis=-1) - face_vals[..., axis] ** 2
        worst = max(worst, float(np.sqrt(np.max(np.maximum(tangential_sq, 0.0)))))
    return worst


def solve_vector_poisson(curl_source, target_curl_field=None,
                         cfg: SolverConfig | None = None):
    """Solve lap(lambda) = -curl_source for the solenoidal potential.

    3D: componentwise solves with mixed face conditions followed by one
    gauge-projection solve; returns (VectorField, SolveReport).  2D: the
    potential reduces to the single out-of-plane (stream) component, solved
    with the face value pinned to zero; takes/returns scalar fields.  The
    tangential curl mismatch against ``target_curl_field`` is measured on
    the faces and reported, not enforced.
    """
    cfg = cfg or SolverConfig()
    if isinstance(curl_source, ScalarField):
        grid = curl_source.grid
        if grid.ndim != 2:
            raise ValueError("scalar curl source is the 2D reduction")
        face_bcs = {key: (DIRICHLET,) for key in face_keys(grid)}
        x, report = _solve_core(grid, -curl_source.values, face_bcs, cfg, "stream function solve")
        stream = ScalarField(grid, x)
        if target_curl_field is not None:
            gs = operators.gradient(stream)
            recovered = VectorField.from_components([gs.component(1), -1.0 * gs.component(0)])
            report.boundary_defect = _tangential_defect(recovered - target_curl_field)
        return stream, report

    grid = curl_source.grid
    if grid.ndim != 3:
        raise ValueError("vector curl source needs a 3D grid")
    comps = []
    iterations = 0
    residual = 0.0
    history = []
    for i in range(3):
        x, rep = _solve_core(grid, -curl_source.values[..., i], _component_bcs(grid, i),
                             cfg, f"vector potential component {i}")
        comps.append(ScalarField(grid, x))
        iterations += rep.iterations
        residual = max(residual, rep.residual)
        history.append(rep.residual_history[-1])
    lam = VectorField.from_components(comps)
    lam, gauge_iters = _project_divergence_free(lam, cfg)
    iterations += gauge_iters

    report = SolveReport(
        method=cfg.method,
        iterations=iterations,
        residual=residual,
        converged=True,
        residual_history=history,
        divergence_norm=operators.divergence(lam).max_abs(),
    )
    if target_curl_field is not None:
        report.boundary_defect = _tangential_defect(operators.curl(lam) - target_curl_field)
    return lam, report

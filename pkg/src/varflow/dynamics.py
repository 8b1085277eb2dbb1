"""Rotating-flux closed forms, ensemble integration, and vorticity
diagnostics for momentum fields that are not pure gradients.

The rotating flux is the worked example threaded through the whole module:
free particles released with velocity omega x r.  Its flow map is linear
and invertible, the momentum field splits exactly into grad(Phi) - A, and
the auxiliary pair (A, Theta) satisfies both the generalized
Hamilton-Jacobi equation and a zero-Lorentz-force identity.  Every closed
form is hand-differentiated; finite-difference helpers cross-check them.

``theta_variant`` selects between the consistent potential (squared
denominator, derived from Theta = -K - dPhi/dt) and the "unsquared"
variant, which breaks the residual identities and is kept as a reference
defect the verifier must flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fields import Grid, ScalarField, VectorField
from . import operators as ops

CONSISTENT = "consistent"
UNSQUARED = "unsquared"
_VARIANTS = (CONSISTENT, UNSQUARED)


def _split(r):
    r = np.asarray(r, dtype=float)
    return r[..., 0], r[..., 1], r[..., 2]


def _stack(x, y, z):
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


@dataclass(frozen=True)
class RotorScenario:
    """Ensemble of free particles with initial velocity omega x r (omega
    along z).  All closed forms are total functions of (point, time)."""

    omega: float
    mass: float
    t0: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    def _denom(self, t):
        dt = np.asarray(t, dtype=float) - self.t0
        return dt, 1.0 + self.omega**2 * dt**2

    # -- kinematics ---------------------------------------------------

    def flow_map(self, r0, t):
        """Position at time t of the particle seeded at r0."""
        dt, _ = self._denom(t)
        x0, y0, z0 = _split(r0)
        w = self.omega
        return _stack(x0 - w * dt * y0, y0 + w * dt * x0, z0 + 0.0 * dt)

    def inverse_flow_map(self, r, t):
        """Seed position of the particle that sits at r at time t."""
        dt, d = self._denom(t)
        x, y, z = _split(r)
        w = self.omega
        return _stack((x + w * dt * y) / d, (y - w * dt * x) / d, z + 0.0 * dt)

    def momentum_field(self, r, t):
        """p(r, t) = m omega x r0(r, t); linear in r at every time."""
        r0 = self.inverse_flow_map(r, t)
        x0, y0, z0 = _split(r0)
        w, m = self.omega, self.mass
        return _stack(-m * w * y0, m * w * x0, 0.0 * z0)

    def velocity_field(self, r, t):
        return self.momentum_field(r, t) / self.mass

    # -- closed-form potentials ---------------------------------------

    def kinetic_energy(self, r, t):
        dt, d = self._denom(t)
        x, y, _ = _split(r)
        return 0.5 * self.mass * self.omega**2 * (x**2 + y**2) / d

    def momentum_potential(self, r, t):
        dt, d = self._denom(t)
        x, y, _ = _split(r)
        return 0.5 * self.mass * self.omega**2 * dt * (x**2 + y**2) / d

    def grad_momentum_potential(self, r, t):
        dt, d = self._denom(t)
        x, y, z = _split(r)
        c = self.mass * self.omega**2 * dt / d
        return _stack(c * x, c * y, 0.0 * z)

    def dphi_dt(self, r, t):
        dt, d = self._denom(t)
        x, y, _ = _split(r)
        w = self.omega
        return 0.5 * self.mass * w**2 * (x**2 + y**2) * (1.0 - w**2 * dt**2) / d**2

    def vector_potential(self, r, t):
        """A with p = grad(Phi) - A; divergence-free at all times."""
        dt, d = self._denom(t)
        x, y, z = _split(r)
        c = self.mass * self.omega / d
        return _stack(c * y, -c * x, 0.0 * z)

    def da_dt(self, r, t):
        dt, d = self._denom(t)
        x, y, z = _split(r)
        c = self.mass * self.omega * (-2.0 * self.omega**2 * dt) / d**2
        return _stack(c * y, -c * x, 0.0 * z)

    def curl_vector_potential(self, r, t):
        dt, d = self._denom(t)
        x, y, z = _split(r)
        return _stack(0.0 * x, 0.0 * y, -2.0 * self.mass * self.omega / d + 0.0 * z)

    def theta(self, r, t, variant: str = CONSISTENT):
        """Theta = -K - dPhi/dt.  The consistent evaluation carries a
        squared denominator; the unsquared variant is the reference defect
        detected by the residual checks."""
        _check_variant(variant)
        dt, d = self._denom(t)
        x, y, _ = _split(r)
        denom = d**2 if variant == CONSISTENT else d
        return -self.mass * self.omega**2 * (x**2 + y**2) / denom

    def grad_theta(self, r, t, variant: str = CONSISTENT):
        _check_variant(variant)
        dt, d = self._denom(t)
        x, y, z = _split(r)
        denom = d**2 if variant == CONSISTENT else d
        c = -2.0 * self.mass * self.omega**2 / denom
        return _stack(c * x, c * y, 0.0 * z)

    def dtheta_dt(self, r, t, variant: str = CONSISTENT):
        _check_variant(variant)
        dt, d = self._denom(t)
        x, y, _ = _split(r)
        w = self.omega
        power = 3 if variant == CONSISTENT else 2
        factor = 2.0 if variant == CONSISTENT else 1.0
        return factor * 2.0 * self.mass * w**4 * dt * (x**2 + y**2) / d**power

    # -- residual identities ------------------------------------------

    def hj_residual_at(self, r, t, variant: str = CONSISTENT):
        """H'(q, grad Phi) + dPhi/dt with H' = |grad Phi - A|^2/2m + Theta."""
        gp = self.grad_momentum_potential(r, t)
        a = self.vector_potential(r, t)
        k = np.sum((gp - a) ** 2, axis=-1) / (2.0 * self.mass)
        return k + self.theta(r, t, variant) + self.dphi_dt(r, t)

    def lorentz_residual_at(self, r, t, variant: str = CONSISTENT):
        """-grad(Theta) - dA/dt + v x curl(A) with v = p/m."""
        v = self.velocity_field(r, t)
        force = -self.grad_theta(r, t, variant) - self.da_dt(r, t)
        return force + np.cross(v, self.curl_vector_potential(r, t))

    def scalar_constraint_residual(self, r, t, variant: str = CONSISTENT):
        """dTheta/dt - div(A); reported, not enforced (div A = 0 here while
        dTheta/dt is generally nonzero)."""
        return self.dtheta_dt(r, t, variant) - 0.0

    # -- field sampling -------------------------------------------------

    def closed_form_fields(self, t: float, grid: Grid):
        """(K, Phi, A, Theta) sampled on a 2D or 3D grid at one time; on a
        planar grid the trailing zero component of A is dropped."""
        pts = _grid_points(grid)
        shape = grid.shape
        k = ScalarField(grid, self.kinetic_energy(pts, t).reshape(shape))
        phi = ScalarField(grid, self.momentum_potential(pts, t).reshape(shape))
        a = _vector_on(grid, self.vector_potential(pts, t))
        th = ScalarField(grid, self.theta(pts, t).reshape(shape))
        return k, phi, a, th

    def momentum_on_grid(self, t: float, grid: Grid) -> VectorField:
        pts = _grid_points(grid)
        return _vector_on(grid, self.momentum_field(pts, t))


def _check_variant(variant: str):
    if variant not in _VARIANTS:
        raise ValueError(f"theta variant must be one of {_VARIANTS}")


def _grid_points(grid: Grid) -> np.ndarray:
    pts = grid.points()
    if grid.ndim == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    elif grid.ndim != 3:
        raise ValueError("need a 2D or 3D spatial grid")
    return pts


def _vector_on(grid: Grid, values_3comp: np.ndarray) -> VectorField:
    vals = values_3comp.reshape(grid.shape + (3,))
    if grid.ndim == 2:
        vals = vals[..., :2]
    return VectorField(grid, vals)


def time_derivative_fd(fn, r, t, eps: float = 1e-6):
    """Central-difference cross-check for the hand-differentiated forms."""
    return (np.asarray(fn(r, t + eps)) - np.asarray(fn(r, t - eps))) / (2.0 * eps)


# ---------------------------------------------------------------------
# Hamiltonian ensembles
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianSpec:
    """H'(q, p) = |p - A|^2 / 2m + V + Theta with optional (A, Theta).

    Gradients may be supplied; missing ones fall back to central finite
    differences (step ``fd_step``).
    """

    mass: float
    potential: object = None            # V(q)
    grad_potential: object = None       # dV/dq
    vector_potential: object = None     # A(q, t)
    jac_vector_potential: object = None  # dA_i/dq_j (..., i, j)
    theta: object = None                # Theta(q, t)
    grad_theta: object = None
    fd_step: float = 1e-6

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    @classmethod
    def free(cls, mass: float = 1.0) -> "HamiltonianSpec":
        return cls(mass=mass)

    @classmethod
    def harmonic(cls, mass: float = 1.0, freq: float = 1.0) -> "HamiltonianSpec":
        k = mass * freq**2
        return cls(
            mass=mass,
            potential=lambda q: 0.5 * k * np.sum(q**2, axis=-1),
            grad_potential=lambda q: k * q,
        )

    @classmethod
    def from_rotor(cls, sc: RotorScenario, variant: str = CONSISTENT) -> "HamiltonianSpec":
        """The alternative Hamilton function of the rotating flux."""
        return cls(
            mass=sc.mass,
            vector_potential=lambda q, t: sc.vector_potential(q, t),
            jac_vector_potential=lambda q, t: _rotor_jac_a(sc, q, t),
            theta=lambda q, t: sc.theta(q, t, variant),
            grad_theta=lambda q, t: sc.grad_theta(q, t, variant),
        )

    # -- evaluations ---------------------------------------------------

    def a_at(self, q, t):
        if self.vector_potential is None:
            return np.zeros_like(q)
        return np.asarray(self.vector_potential(q, t))

    def hamiltonian(self, q, p, t):
        kin = np.sum((p - self.a_at(q, t)) ** 2, axis=-1) / (2.0 * self.mass)
        if self.potential is not None:
            kin = kin + self.potential(q)
        if self.theta is not None:
            kin = kin + self.theta(q, t)
        return kin

    def q_dot(self, q, p, t):
        return (p - self.a_at(q, t)) / self.mass

    def p_dot(self, q, p, t):
        out = np.zeros_like(q)
        if self.vector_potential is not None:
            jac = self._jac_a(q, t)  # jac[..., i, j] = dA_i/dq_j
            rel = (p - self.a_at(q, t)) / self.mass
            out = out + np.einsum("...i,...ij->...j", rel, jac)
        if self.potential is not None:
            out = out - self._grad(self.potential, q, t, self.grad_potential, time_dep=False)
        if self.theta is not None:
            out = out - self._grad(self.theta, q, t, self.grad_theta, time_dep=True)
        return out

    def _jac_a(self, q, t):
        if self.jac_vector_potential is not None:
            return np.asarray(self.jac_vector_potential(q, t))
        eps = self.fd_step
        cols = []
        for j in range(q.shape[-1]):
            dq = np.zeros_like(q)
            dq[..., j] = eps
            cols.append((self.a_at(q + dq, t) - self.a_at(q - dq, t)) / (2 * eps))
        return np.stack(cols, axis=-1)

    def _grad(self, fn, q, t, supplied, time_dep: bool):
        if supplied is not None:
            return np.asarray(supplied(q, t) if time_dep else supplied(q))
        eps = self.fd_step
        comps = []
        for j in range(q.shape[-1]):
            dq = np.zeros_like(q)
            dq[..., j] = eps
            hi = fn(q + dq, t) if time_dep else fn(q + dq)
            lo = fn(q - dq, t) if time_dep else fn(q - dq)
            comps.append((np.asarray(hi) - np.asarray(lo)) / (2 * eps))
        return np.stack(comps, axis=-1)


def _rotor_jac_a(sc: RotorScenario, q, t):
    dt = np.asarray(t, dtype=float) - sc.t0
    d = 1.0 + sc.omega**2 * dt**2
    c = sc.mass * sc.omega / d
    jac = np.zeros(q.shape + (q.shape[-1],))
    jac[..., 0, 1] = c       # dA_x/dy
    jac[..., 1, 0] = -c      # dA_y/dx
    return jac


@dataclass(frozen=True)
class Ensemble:
    """Particle ensemble state: positions, momenta, accumulated action."""

    q: np.ndarray
    p: np.ndarray
    action: np.ndarray
    time: float
    lattice_shape: tuple[int, ...] | None = None

    def __post_init__(self):
        for name in ("q", "p", "action"):
            a = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, a)
        if self.q.shape != self.p.shape or len(self.action) != len(self.q):
            raise ValueError("inconsistent ensemble arrays")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("non-finite ensemble state")

    def __len__(self) -> int:
        return len(self.q)


def rotor_lattice_ensemble(sc: RotorScenario, grid: Grid) -> Ensemble:
    """Seed particles on a planar (x, y) lattice with the rotor's initial
    momenta m omega x r at the reference time."""
    if grid.ndim != 2:
        raise ValueError("seed lattice must be 2D (x, y)")
    pts = _grid_points(grid)
    return Ensemble(q=pts, p=sc.momentum_field(pts, sc.t0), action=np.zeros(len(pts)),
                    time=sc.t0, lattice_shape=grid.shape)


def lattice_ensemble_from_action(grad_action_fn, grid: Grid, mass: float,
                                 time: float = 0.0) -> Ensemble:
    """Potential initial data p0 = grad(S0); vorticity-free by construction."""
    if grid.ndim != 2:
        raise ValueError("seed lattice must be 2D (x, y)")
    pts = _grid_points(grid)
    return Ensemble(q=pts, p=np.asarray(grad_action_fn(pts)), action=np.zeros(len(pts)),
                    time=time, lattice_shape=grid.shape)


def integrate_ensemble(e: Ensemble, ham: HamiltonianSpec, dt: float, steps: int) -> Ensemble:
    """Advance the ensemble with a symplectic one-step method.

    Separable case (no vector potential): velocity-Verlet.  With a vector
    potential: implicit midpoint, solved by fixed-point iteration.  The
    action integral of (p dq - H dt) is accumulated with midpoint values.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    q, p, s, t = e.q.copy(), e.p.copy(), e.action.copy(), e.time
    for _ in range(steps):
        if ham.vector_potential is None:
            q, p, ds = _verlet_step(q, p, t, ham, dt)
        else:
            q, p, ds = _midpoint_step(q, p, t, ham, dt)
        s += ds
        t += dt
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise FloatingPointError(f"non-finite ensemble state at t = {t}")
    return replace(e, q=q, p=p, action=s, time=t)


def _verlet_step(q, p, t, ham, dt):
    force = ham.p_dot(q, p, t)
    p_half = p + 0.5 * dt * force
    q_new = q + dt * p_half / ham.mass
    p_new = p_half + 0.5 * dt * ham.p_dot(q_new, p_half, t + dt)
    q_mid = 0.5 * (q + q_new)
    ds = np.sum(p_half * (q_new - q), axis=-1) - ham.hamiltonian(q_mid, p_half, t + 0.5 * dt) * dt
    return q_new, p_new, ds


def _midpoint_step(q, p, t, ham, dt, max_iter: int = 100, tol: float = 1e-13):
    t_mid = t + 0.5 * dt
    q_mid, p_mid = q.copy(), p.copy()
    for _ in range(max_iter):
        q_next = q + 0.5 * dt * ham.q_dot(q_mid, p_mid, t_mid)
        p_next = p + 0.5 * dt * ham.p_dot(q_mid, p_mid, t_mid)
        delta = max(np.max(np.abs(q_next - q_mid)), np.max(np.abs(p_next - p_mid)))
        q_mid, p_mid = q_next, p_next
        if delta < tol:
            break
    else:
        raise FloatingPointError("implicit midpoint iteration did not settle")
    q_new = 2.0 * q_mid - q
    p_new = 2.0 * p_mid - p
    ds = np.sum(p_mid * (q_new - q), axis=-1) - ham.hamiltonian(q_mid, p_mid, t_mid) * dt
    return q_new, p_new, ds


# ---------------------------------------------------------------------
# Lagrangian-mesh vorticity diagnostics
# ---------------------------------------------------------------------


@dataclass
class VorticityDiagnostics:
    vorticity: np.ndarray           # dp_y/dx - dp_x/dy at the particles
    positions: np.ndarray
    jacobian_det: np.ndarray
    truncated: bool                 # mesh folded over (det <= 0 somewhere)
    identity_residual_max: float | None = None

    def max_abs_vorticity(self) -> float:
        return float(np.max(np.abs(self.vorticity)))


def _mesh_derivatives(values: np.ndarray, shape: tuple[int, ...]):
    """d(values)/d(xi) along the two lattice axes; values (N, ...) ->
    list of two arrays with the lattice shape."""
    arr = values.reshape(shape + values.shape[1:])
    return [np.gradient(arr, axis=0, edge_order=2), np.gradient(arr, axis=1, edge_order=2)]


def vorticity_diagnostics(e: Ensemble, ham: HamiltonianSpec | None = None) -> VorticityDiagnostics:
    """Planar vorticity of the ensemble momentum field.

    Derivatives are taken on the seeded lattice (connectivity is tracked,
    not searched), then pushed to space with the inverse deformation
    gradient.  When the mesh folds over (Jacobian sign change, trajectory
    crossing) the diagnostics are marked truncated.  Supplying the
    Hamiltonian also evaluates the space-time identity
    dp_i/dt + dH/dx_i = sum_j qdot_j dp_j/dx_i as a residual.
    """
    if e.lattice_shape is None:
        raise ValueError("ensemble was not seeded on a lattice")
    shape = e.lattice_shape
    dq = _mesh_derivatives(e.q[:, :2], shape)      # [axis][n0, n1, 2]
    dp = _mesh_derivatives(e.p[:, :2], shape)

    jac = np.stack(dq, axis=-1)                    # jac[..., i, j] = dq_i/dxi_j
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    truncated = bool(np.min(det) <= 0.0)

    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1]
    inv[..., 0, 1] = -jac[..., 0, 1]
    inv[..., 1, 0] = -jac[..., 1, 0]
    inv[..., 1, 1] = jac[..., 0, 0]
    safe_det = np.where(det == 0.0, 1.0, det)
    inv = inv / safe_det[..., None, None]

    dp_dxi = np.stack(dp, axis=-1)                 # [..., comp, xi]
    dp_dx = np.einsum("...cx,...xj->...cj", dp_dxi, inv)
    vort = dp_dx[..., 1, 0] - dp_dx[..., 0, 1]

    identity_max = None
    if ham is not None:
        h_vals = ham.hamiltonian(e.q, e.p, e.time).reshape(shape)
        dh_dxi = np.stack([np.gradient(h_vals, axis=0, edge_order=2),
                           np.gradient(h_vals, axis=1, edge_order=2)], axis=-1)
        dh_dx = np.einsum("...x,...xj->...j", dh_dxi, inv)
        qdot = ham.q_dot(e.q, e.p, e.time)[:, :2].reshape(shape + (2,))
        pdot = ham.p_dot(e.q, e.p, e.time)[:, :2].reshape(shape + (2,))
        advect = np.einsum("...j,...ji->...i", qdot, dp_dx)
        residual = pdot + dh_dx - advect
        identity_max = float(np.max(np.abs(residual)))

    return VorticityDiagnostics(
        vorticity=vort,
        positions=e.q.copy(),
        jacobian_det=det,
        truncated=truncated,
        identity_residual_max=identity_max,
    )


def hj_residual(phi_series: list[ScalarField], times: list[float],
                ham: HamiltonianSpec) -> ScalarField:
    """Finite-difference residual H'(q, grad Phi) + dPhi/dt at the middle
    time level of a series of >= 3 sampled potentials."""
    if len(phi_series) < 3 or len(phi_series) != len(times):
        raise ValueError("need >= 3 time levels of Phi with matching times")
    mid = len(phi_series) // 2
    dt_lo = times[mid] - times[mid - 1]
    dt_hi = times[mid + 1] - times[mid]
    if not np.isclose(dt_lo, dt_hi):
        raise ValueError("time levels must be uniformly spaced")
    phi = phi_series[mid]
    grid = phi.grid
    dphi_dt = (phi_series[mid + 1].values - phi_series[mid - 1].values) / (dt_lo + dt_hi)
    grad_phi = ops.gradient(phi).values
    pts = _grid_points(grid)
    shape = grid.shape
    if grid.ndim == 2:
        grad3 = np.concatenate([grad_phi, np.zeros(shape + (1,))], axis=-1)
    else:
        grad3 = grad_phi
    h_vals = ham.hamiltonian(pts.reshape(shape + (3,)), grad3, times[mid])
    return ScalarField(grid, h_vals + dphi_dt)


def lorentz_residual(sc: RotorScenario, t: float, grid: Grid,
                     variant: str = CONSISTENT, derivatives: str = "analytic",
                     dt_fd: float = 1e-4) -> VectorField:
    """Zero-Lorentz-force residual sampled on a grid.

    ``derivatives="analytic"`` uses the hand-differentiated closed forms;
    ``"numeric"`` rebuilds grad(Theta) and curl(A) with the grid operators
    and dA/dt by central differences in time.
    """
    if grid.ndim != 3:
        raise ValueError("lorentz_residual samples on a 3D grid")
    pts = _grid_points(grid)
    shape = grid.shape
    if derivatives == "analytic":
        res = sc.lorentz_residual_at(pts, t, variant)
        return VectorField(grid, res.reshape(shape + (3,)))
    if derivatives != "numeric":
        raise ValueError("derivatives must be 'analytic' or 'numeric'")
    theta_f = ScalarField(grid, sc.theta(pts, t, variant).reshape(shape))
    a_now = VectorField(grid, sc.vector_potential(pts, t).reshape(shape + (3,)))
    a_hi = sc.vector_potential(pts, t + dt_fd).reshape(shape + (3,))
    a_lo = sc.vector_potential(pts, t - dt_fd).reshape(shape + (3,))
    da_dt = (a_hi - a_lo) / (2.0 * dt_fd)
    v = sc.velocity_field(pts, t).reshape(shape + (3,))
    res = (-ops.gradient(theta_f).values - da_dt
           + np.cross(v, ops.curl(a_now).values))
    return VectorField(grid, res)

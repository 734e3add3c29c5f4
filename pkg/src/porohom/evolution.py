"""Average-acceleration Newmark integration of damped second-order systems.

Both the homogenized equation on the plain box and the oscillating problem
on the perforated box reduce to

    M a + C(t) v + K d = F(t),

integrated with gamma = 1/2, beta = 1/4.  Every step records the discrete
energy ``E = v.Mv/2 + d.Kd/2``, the cumulative damping dissipation and the
cumulative work of the load.  With the dissipation increment

    dD_n = dt * v_{n+1/2} . (C_n v_n + C_{n+1} v_{n+1}) / 2

and work increment ``dW_n = dt * v_{n+1/2} . (F_n + F_{n+1}) / 2`` the scheme
satisfies ``E_n + D_n = E_0 + W_n`` exactly (up to solver tolerance).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigError, ModelError, SolverError
from .fem import Assembler, DofMap, SparseSystem, solve_spd
from .model import CoefficientModel, EffectiveScalars, ProblemData

__all__ = [
    "NewmarkConfig", "Trajectory", "newmark", "discrete_energy",
    "solve_macro", "solve_direct", "sampled_rho_min",
]


@dataclass(frozen=True)
class NewmarkConfig:
    dt: float
    t_final: float
    snapshot_stride: int = 1
    gamma: float = 0.5
    beta_newmark: float = 0.25
    tol: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError("time step dt must be positive")
        if not self.t_final > 0.0:
            raise ConfigError("final time must be positive")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.gamma != 0.5 or self.beta_newmark != 0.25:
            raise ConfigError("only average acceleration (gamma=1/2, beta=1/4) is supported")

    @property
    def n_steps(self) -> int:
        return int(np.floor(self.t_final / self.dt + 1e-9))


@dataclass
class Trajectory:
    """Snapshots of nodal displacement/velocity plus a per-step energy log."""

    times: np.ndarray
    displacement: np.ndarray  # (n_snapshots, n_vertices)
    velocity: np.ndarray
    step_times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray  # cumulative
    work: np.ndarray  # cumulative
    mesh: object = field(default=None, repr=False)
    dof_count: int = 0

    def balance_defect(self) -> np.ndarray:
        """``(E_n + D_n - E_0 - W_n)`` relative to the largest energy-like quantity."""
        scale = max(np.max(np.abs(self.energy)), np.max(np.abs(self.work)),
                    np.max(np.abs(self.dissipation)), 1e-300)
        return (self.energy + self.dissipation - self.energy[0] - self.work) / scale


def discrete_energy(d, v, mass, stiffness) -> float:
    """``E = v.Mv/2 + d.Kd/2``."""
    mass = mass.matrix if isinstance(mass, SparseSystem) else mass
    stiffness = stiffness.matrix if isinstance(stiffness, SparseSystem) else stiffness
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * float(v @ (mass @ v)) + 0.5 * float(d @ (stiffness @ d))


def _mat(m):
    if isinstance(m, SparseSystem):
        return m.matrix
    if sparse.issparse(m):
        return m.tocsr()
    return sparse.csr_matrix(np.atleast_2d(np.asarray(m, dtype=float)))


def newmark(mass, stiffness, damping, load, d0, v0, cfg: NewmarkConfig, expand=None):
    """Integrate ``M a + C(t) v + K d = F(t)`` from ``(d0, v0)`` to ``cfg.t_final``.

    Parameters
    ----------
    mass, stiffness : sparse matrix or SparseSystem
    damping : sparse matrix, SparseSystem or callable ``t -> matrix``
        Damping evaluated at the new time level of each step.
    load : callable ``t -> vector``
    expand : callable, optional
        Maps unknown vectors to the stored nodal representation.

    Returns
    -------
    Trajectory
    """
    m = _mat(mass)
    k = _mat(stiffness)
    damp = damping if callable(damping) else (lambda _t, c=_mat(damping): c)
    expand = (lambda u: u) if expand is None else expand
    dt, gam, bet = cfg.dt, cfg.gamma, cfg.beta_newmark
    n_steps = cfg.n_steps

    d = np.array(d0, dtype=float)
    v = np.array(v0, dtype=float)
    t = 0.0
    c = _mat(damp(t))
    f = np.asarray(load(t), dtype=float)
    a = solve_spd(SparseSystem(m, True), f - c @ v - k @ d, tol=cfg.tol)

    times, disp, vel = [0.0], [expand(d)], [expand(v)]
    energy = [discrete_energy(d, v, m, k)]
    diss, work = [0.0], [0.0]
    const_c = not callable(damping)
    system = (m + gam * dt * c + bet * dt * dt * k).tocsr() if const_c else None

    for step in range(1, n_steps + 1):
        t_new = step * dt
        c_new = c if const_c else _mat(damp(t_new))
        f_new = np.asarray(load(t_new), dtype=float)
        d_pred = d + dt * v + dt * dt * (0.5 - bet) * a
        v_pred = v + dt * (1.0 - gam) * a
        if not const_c:
            system = (m + gam * dt * c_new + bet * dt * dt * k).tocsr()
        rhs = f_new - c_new @ v_pred - k @ d_pred
        try:
            a_new = solve_spd(SparseSystem(system, True), rhs, tol=cfg.tol, x0=a)
        except SolverError as exc:
            raise type(exc)(f"step {step} (t={t_new:.6g}): {exc}") from exc
        d_new = d_pred + bet * dt * dt * a_new
        v_new = v_pred + gam * dt * a_new
        if not (np.all(np.isfinite(d_new)) and np.all(np.isfinite(v_new))):
            raise SolverError(f"non-finite state at step {step} (t={t_new:.6g})")

        v_half = 0.5 * (v + v_new)
        diss.append(diss[-1] + dt * float(v_half @ (0.5 * (c @ v + c_new @ v_new))))
        work.append(work[-1] + dt * float(v_half @ (0.5 * (f + f_new))))
        energy.append(discrete_energy(d_new, v_new, m, k))

        d, v, a, c, f = d_new, v_new, a_new, c_new, f_new
        if step % cfg.snapshot_stride == 0:
            times.append(t_new)
            disp.append(expand(d))
            vel.append(expand(v))

    return Trajectory(
        np.array(times), np.array(disp), np.array(vel), dt * np.arange(n_steps + 1),
        np.array(energy), np.array(diss), np.array(work), dof_count=len(d),
    )


def solve_macro(ahat, scalars: EffectiveScalars, data: ProblemData, mesh, cfg: NewmarkConfig) -> Trajectory:
    """Integrate the homogenized equation on the plain box mesh.

    Mass ``m_rho M``, damping ``m_beta M`` and stiffness ``K_Ah / |Z*|``,
    homogeneous Dirichlet data, ``d0 = u0`` and
    ``v0 = (m_sqrt_rho / m_rho) v0_data``.
    """
    ah = np.asarray(getattr(ahat, "matrix", ahat), dtype=float)
    if np.linalg.eigvalsh(0.5 * (ah + ah.T))[0] <= 0.0:
        raise ModelError("effective tensor is not positive definite")
    if not scalars.m_rho > 0.0:
        raise ModelError("M_{Z*}(rho) must be positive")
    dofmap = DofMap.dirichlet(mesh.n_vertices, mesh.dirichlet_vertices)
    asm = Assembler(mesh, dofmap)
    base_mass = asm.mass().matrix
    k = asm.stiffness(lambda x: np.broadcast_to(ah, x.shape[:-1] + ah.shape)).matrix / scalars.z_star_measure
    m = scalars.m_rho * base_mass
    c = scalars.m_beta * base_mass
    src = data.source
    if src.time_dependent():
        load = lambda t: asm.load(lambda x: src(x, t))
    else:
        f_const = asm.load(lambda x: src(x, 0.0))
        load = lambda t: f_const
    x = mesh.vertices
    d0 = dofmap.restrict(data.initial_displacement(x))
    v0 = (scalars.m_sqrt_rho / scalars.m_rho) * dofmap.restrict(data.initial_velocity(x))
    traj = newmark(m, k, c, load, d0, v0, cfg, expand=dofmap.expand)
    traj.mesh = mesh
    return traj


def sampled_rho_min(model: CoefficientModel, resolution=64) -> float:
    dim = model.dim
    ticks = np.arange(resolution + 1) / resolution
    z = np.stack([g.ravel() for g in np.meshgrid(*([ticks] * dim), indexing="ij")], axis=-1)
    return float(np.min(model.rho(z)))


def solve_direct(model: CoefficientModel, data: ProblemData, pmesh, cfg: NewmarkConfig,
                 rho_min: float = 1e-3) -> Trajectory:
    """Integrate the oscillating problem on a perforated mesh.

    Coefficients are ``rho(x/eps^2)``, ``A(x/eps, x/eps^2)`` and
    ``beta(x/eps, t/eps^2)``; the damping matrix is reassembled at every new
    time level when ``beta`` depends on time.  Hole boundaries carry the
    natural (zero conormal flux) condition; the box boundary is clamped.
    """
    eps = pmesh.epsilon
    if eps is None:
        raise ConfigError("solve_direct needs a perforated mesh with an epsilon")
    e2 = eps * eps
    if not rho_min > 0.0:
        raise ConfigError("rho_min must be positive")
    lowest = sampled_rho_min(model)
    if lowest < rho_min:
        raise ModelError(
            f"rho dips to {lowest:.3e} < rho_min={rho_min:.3e}: the direct solver needs rho bounded "
            "away from zero because the initial velocity v0/sqrt(rho) is undefined where rho vanishes")
    if cfg.dt > e2 / 20.0 * (1 + 1e-9):
        raise ConfigError(f"dt={cfg.dt:.4g} does not resolve beta(t/eps^2); need dt <= eps^2/20 = {e2 / 20:.4g}")

    dofmap = DofMap.dirichlet(pmesh.n_vertices, pmesh.dirichlet_vertices)
    asm = Assembler(pmesh, dofmap)
    rho = lambda x: model.rho(x / e2)
    m = asm.mass(rho).matrix
    k = asm.stiffness(lambda x: model.a_matrix(x / eps, x / e2)).matrix

    def beta_at(t):
        def fn(x):
            tau = np.full(x.shape[:-1] + (1,), t / e2)
            return model.beta(np.concatenate([x / eps, tau], axis=-1))
        return fn

    if model.beta_time_dependent():
        damping = lambda t: asm.mass(beta_at(t)).matrix
    else:
        damping = asm.mass(beta_at(0.0)).matrix
    src = data.source
    if src.time_dependent():
        load = lambda t: asm.load(lambda x: src(x, t))
    else:
        f_const = asm.load(lambda x: src(x, 0.0))
        load = lambda t: f_const
    x = pmesh.vertices
    d0 = dofmap.restrict(data.initial_displacement(x))
    v0 = dofmap.restrict(data.initial_velocity(x) / np.sqrt(rho(x)))
    traj = newmark(m, k, damping, load, d0, v0, cfg, expand=dofmap.expand)
    traj.mesh = pmesh
    return traj

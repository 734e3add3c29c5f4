"""Micro and meso corrector cell problems and the effective tensors.

The micro problem lives on the perforated cell ``Z*`` and is solved for a
fixed meso point ``y``; its corrector ``chi`` carries a rho-weighted zero
mean.  The meso problem lives on the full cell ``Y`` with the
micro-homogenized tensor ``At(y)``; its corrector ``theta`` has zero mean.

Tensor convention: column ``j`` of ``At`` is ``int A (e_j + grad chi_j)``,
so ``At_ij = int a_ij + a_ik d(chi_j)/dz_k``, and likewise for the macro
tensor.  For symmetric ``A`` both tensors are symmetric.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError
from .fem import Assembler, DofMap, quadrature_rule, solve_mean_constrained
from .mesh import CellMesh, interpolation_matrix
from .model import CoefficientModel

__all__ = [
    "MicroCorrector", "MesoCorrector", "EffectiveTensor", "MicroSolver",
    "solve_micro_cell", "meso_tensor_at", "solve_meso_cell", "macro_tensor",
    "verify_time_periodic_residual", "reconstruct_first_order", "voigt_tensor",
]


@dataclass(frozen=True)
class EffectiveTensor:
    matrix: np.ndarray
    kind: str  # "meso" or "macro"
    y: tuple | None = None

    def asymmetry(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m - m.T) / max(np.linalg.norm(m), 1e-300))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))[0])


@dataclass
class MicroCorrector:
    """Micro correctors ``chi_i`` at one meso point.

    ``chi`` holds nodal values on ``mesh`` with shape ``(N, n_vertices)``;
    ``dofs`` the same fields on the periodic unknowns.
    """

    y: tuple
    a_weights: np.ndarray
    mesh: CellMesh
    dofmap: DofMap
    chi: np.ndarray
    dofs: np.ndarray
    loads: np.ndarray
    solver_tol: float
    _assembler: Assembler = field(repr=False, default=None)

    def constraint_residuals(self):
        """``|int rho chi_i|`` relative to the L2 norm of ``chi_i``."""
        asm = self._assembler
        w = self.dofmap.weights
        out = []
        for i in range(len(self.dofs)):
            norm = np.sqrt(self.chi[i] @ (_full_mass(asm) @ self.chi[i]))
            out.append(abs(w @ self.dofs[i]) / norm if norm > 0 else abs(w @ self.dofs[i]))
        return out


@dataclass
class MesoCorrector:
    """Meso correctors ``theta_i`` on the full cell together with the ``At`` samples used."""

    mesh: CellMesh
    dofmap: DofMap
    theta: np.ndarray  # (N, n_vertices)
    dofs: np.ndarray
    quad: object
    atilde: np.ndarray  # (ne, nq, N, N) at element quadrature points
    sample_points: np.ndarray  # (ne, nq, N)
    _assembler: Assembler = field(repr=False, default=None)

    def constraint_residuals(self):
        asm = self._assembler
        w = self.dofmap.weights
        out = []
        for i in range(len(self.dofs)):
            norm = np.sqrt(self.theta[i] @ (_full_mass(asm) @ self.theta[i]))
            out.append(abs(w @ self.dofs[i]) / norm if norm > 0 else abs(w @ self.dofs[i]))
        return out


def _full_mass(asm):
    if not hasattr(asm, "_full_mass"):
        asm._full_mass = Assembler(asm.mesh, None, asm.quad).mass().matrix
    return asm._full_mass


class MicroSolver:
    """Reusable micro-cell machinery for one model and one ``Z*`` mesh.

    ``A(y, z)`` depends on ``y`` only through its term weights, so results
    are cached on the rounded weight vector.
    """

    def __init__(self, model: CoefficientModel, zmesh: CellMesh, tol=1e-10):
        self.model = model
        self.mesh = zmesh
        self.tol = tol
        dofmap = DofMap.periodic(zmesh)
        self.assembler = Assembler(zmesh, dofmap)
        w = self.assembler.load(model.rho, form="value")
        if not w.sum() > 0.0:
            raise SolverError("rho has non-positive integral over the perforated cell")
        self.dofmap = dofmap.with_weights(w)
        self.assembler.dofmap = self.dofmap
        self._cache = {}

    def a_field(self, weights):
        return lambda z: self.model.a_matrix.at_weights(weights, z)

    def solve(self, weights, y=None) -> MicroCorrector:
        weights = np.asarray(weights, dtype=float)
        key = tuple(np.round(weights, 13))
        hit = self._cache.get(key)
        if hit is not None:
            return MicroCorrector(tuple(np.atleast_1d(y)) if y is not None else hit.y, weights,
                                  hit.mesh, hit.dofmap, hit.chi, hit.dofs, hit.loads, hit.solver_tol,
                                  hit._assembler)
        asm = self.assembler
        afield = self.a_field(weights)
        k = asm.stiffness(afield)
        dim = self.mesh.dim
        dofs, loads = [], []
        for i in range(dim):
            rhs = -asm.load(lambda z, i=i: afield(z)[..., :, i], form="gradient")
            try:
                u = solve_mean_constrained(k, rhs, self.dofmap.weights, tol=self.tol)
            except SolverError as exc:
                raise type(exc)(f"micro solve failed at y={y}: {exc}") from exc
            dofs.append(u)
            loads.append(rhs)
        dofs = np.array(dofs)
        chi = self.dofmap.expand(dofs)
        out = MicroCorrector(tuple(np.atleast_1d(y)) if y is not None else None, weights, self.mesh,
                             self.dofmap, chi, dofs, np.array(loads), self.tol, asm)
        self._cache[key] = out
        return out

    def tensor(self, corrector: MicroCorrector) -> np.ndarray:
        asm = self.assembler
        abar = asm.element_coefficient(self.a_field(corrector.a_weights))
        grad = asm.element_gradients(corrector.chi)  # (N, ne, N): grad[j, e, k] = d chi_j / dz_k
        g = np.transpose(grad, (1, 2, 0))  # g[e, k, j]
        eye = np.eye(self.mesh.dim)
        return np.einsum("e,eik,ekj->ij", asm.volumes, abar, eye + g)


def solve_micro_cell(y, model: CoefficientModel, zmesh: CellMesh, tol=1e-10) -> MicroCorrector:
    """Solve the micro cell problem at meso point ``y``.

    Each ``chi_i`` solves ``int A(y,z)(grad chi_i + e_i) . grad phi = 0``
    over ``Z*`` for all periodic ``phi``, with ``int rho chi_i = 0``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    solver = MicroSolver(model, zmesh, tol)
    return solver.solve(model.a_matrix.y_weights(y), y=tuple(y))


def meso_tensor_at(y, model: CoefficientModel, chi: MicroCorrector) -> EffectiveTensor:
    """``At(y) = int_{Z*} A(y,z)(I + grad chi)`` by element quadrature."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    weights = model.a_matrix.y_weights(y)
    asm = chi._assembler or Assembler(chi.mesh, chi.dofmap)
    abar = asm.element_coefficient(lambda z: model.a_matrix.at_weights(weights, z))
    grad = asm.element_gradients(chi.chi)
    g = np.transpose(grad, (1, 2, 0))
    m = np.einsum("e,eik,ekj->ij", asm.volumes, abar, np.eye(len(y)) + g)
    return EffectiveTensor(m, "meso", tuple(y))


def voigt_tensor(y, model: CoefficientModel, zmesh: CellMesh) -> np.ndarray:
    """Arithmetic-mean bound ``int_{Z*} A(y, z) dz``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    asm = Assembler(zmesh)
    weights = model.a_matrix.y_weights(y)
    abar = asm.element_coefficient(lambda z: model.a_matrix.at_weights(weights, z))
    return np.einsum("e,eij->ij", asm.volumes, abar)


def _atilde_samples(model, micro: MicroSolver, points, workers=1):
    """``At`` at an array of meso points, one micro solve per distinct weight vector."""
    flat = points.reshape(-1, points.shape[-1])
    weights = model.a_matrix.y_weights(flat)
    dim = flat.shape[-1]
    if model.a_matrix.separable:
        unit = micro.solve(np.ones(1))
        base = micro.tensor(unit)
        out = weights[:, 0, None, None] * base
        return out.reshape(points.shape[:-1] + (dim, dim))
    keys, inverse = np.unique(np.round(weights, 13), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    first = np.array([np.nonzero(inverse == k)[0][0] for k in range(len(keys))])

    def one(k):
        w = weights[first[k]]
        return micro.tensor(micro.solve(w, y=tuple(flat[first[k]])))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tensors = list(pool.map(one, range(len(keys))))
    else:
        tensors = [one(k) for k in range(len(keys))]
    out = np.array(tensors)[inverse]
    return out.reshape(points.shape[:-1] + (dim, dim))


def solve_meso_cell(model: CoefficientModel, ymesh: CellMesh, zmesh: CellMesh,
                    y_quadrature=None, tol=1e-10, workers=1, micro: MicroSolver | None = None):
    """Solve the meso cell problem.

    ``At`` is sampled at the quadrature points of ``y_quadrature`` (centroid
    rule by default) with one micro solve per distinct value of the
    y-dependent weights of ``A``; separable ``A`` needs a single micro solve.

    Returns ``(MesoCorrector, samples)`` where ``samples`` is a list of
    ``(y, At(y))`` pairs at the quadrature points, in element order.
    """
    quad = quadrature_rule(ymesh.dim, 1) if y_quadrature is None else y_quadrature
    micro = MicroSolver(model, zmesh, tol) if micro is None else micro
    dofmap = DofMap.periodic(ymesh)
    asm = Assembler(ymesh, dofmap, quad)
    dofmap = dofmap.with_weights(asm.load(lambda y: np.ones(y.shape[:-1])))
    asm.dofmap = dofmap
    atilde = _atilde_samples(model, micro, asm.qpoints, workers)
    k = asm.stiffness(lambda _: atilde)
    dofs = []
    for i in range(ymesh.dim):
        rhs = -asm.load(lambda _, i=i: atilde[..., :, i], form="gradient")
        try:
            dofs.append(solve_mean_constrained(k, rhs, dofmap.weights, tol=tol))
        except SolverError as exc:
            raise type(exc)(f"meso solve failed: {exc}") from exc
    dofs = np.array(dofs)
    meso = MesoCorrector(ymesh, dofmap, dofmap.expand(dofs), dofs, quad, atilde, asm.qpoints, asm)
    samples = [(tuple(p), a) for p, a in zip(asm.qpoints.reshape(-1, ymesh.dim),
                                             atilde.reshape(-1, ymesh.dim, ymesh.dim))]
    return meso, samples


def macro_tensor(meso: MesoCorrector) -> EffectiveTensor:
    """``Ah = int_Y At (I + grad theta)`` with the quadrature used for the meso solve."""
    asm = meso._assembler or Assembler(meso.mesh, meso.dofmap, meso.quad)
    abar = np.einsum("q,eqij->eij", asm.qweights, meso.atilde)
    grad = asm.element_gradients(meso.theta)
    g = np.transpose(grad, (1, 2, 0))
    m = np.einsum("e,eik,ekj->ij", asm.volumes, abar, np.eye(meso.mesh.dim) + g)
    return EffectiveTensor(m, "macro")


def verify_time_periodic_residual(chi: MicroCorrector, model: CoefficientModel, n_frequencies: int):
    """Weak residual of the time-periodic micro problem, one value per tau-mode.

    The corrector and its load are tau-independent, so their Fourier
    coefficients vanish for ``k != 0``; mode ``k`` of the residual is
    ``(K - (2 pi k)^2 M_rho) chi_k - F_k``.  Returned values are the largest
    over the corrector components, relative to the load norm (absolute when
    the load vanishes).
    """
    if n_frequencies < 0:
        raise ValueError("n_frequencies must be >= 0")
    asm = chi._assembler or Assembler(chi.mesh, chi.dofmap)
    k = asm.stiffness(lambda z: model.a_matrix.at_weights(chi.a_weights, z)).matrix
    m_rho = asm.mass(model.rho).matrix
    n_modes = n_frequencies + 1
    worst = np.zeros(n_modes)
    for i in range(len(chi.dofs)):
        coeffs = np.zeros((n_modes, chi.dofmap.ndof))
        loads = np.zeros((n_modes, chi.dofmap.ndof))
        coeffs[0] = chi.dofs[i]
        loads[0] = chi.loads[i]
        scale = np.linalg.norm(chi.loads[i])
        scale = scale if scale > 0 else 1.0
        for mode in range(n_modes):
            r = k @ coeffs[mode] - (2 * np.pi * mode) ** 2 * (m_rho @ coeffs[mode]) - loads[mode]
            worst[mode] = max(worst[mode], np.linalg.norm(r) / scale)
    return worst.tolist()


def reconstruct_first_order(u0, macro_mesh, theta: MesoCorrector, epsilon: float):
    """Nodal two-scale approximation ``u0 + eps * theta(x/eps) . grad u0``.

    ``grad u0`` at a vertex is the volume-weighted average of the element
    gradients around it.
    """
    u0 = np.asarray(u0, dtype=float)
    if epsilon == 0.0:
        return u0.copy()
    asm = Assembler(macro_mesh)
    grads = asm.element_gradients(u0)  # (ne, N)
    nn = macro_mesh.simplices.shape[1]
    nv = macro_mesh.n_vertices
    dim = macro_mesh.dim
    acc = np.zeros((nv, dim))
    wsum = np.zeros(nv)
    for j in range(nn):
        np.add.at(acc, macro_mesh.simplices[:, j], asm.volumes[:, None] * grads)
        np.add.at(wsum, macro_mesh.simplices[:, j], asm.volumes)
    g = acc / wsum[:, None]
    interp = interpolation_matrix(theta.mesh, macro_mesh.vertices / epsilon, periodic=True)
    th = np.stack([interp @ theta.theta[i] for i in range(dim)], axis=1)
    return u0 + epsilon * np.einsum("vi,vi->v", th, g)

"""P1 simplex assembly, constraint handling and symmetric linear solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import CompatibilityError, FemError, NonConvergenceError, SolverError

__all__ = [
    "QuadratureRule", "quadrature_rule", "DofMap", "SparseSystem", "Assembler",
    "assemble_stiffness", "assemble_mass", "assemble_load", "solve_spd",
    "solve_mean_constrained", "dump_coo", "FREE", "DIRICHLET", "PERIODIC",
]

FREE, DIRICHLET, PERIODIC = 0, 1, 2


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference simplex in barycentric coordinates.

    Weights sum to the reference volume ``1/N!``.
    """

    points: np.ndarray  # (nq, N+1)
    weights: np.ndarray  # (nq,)
    order: int

    @property
    def dim(self):
        return self.points.shape[1] - 1

    @property
    def reference_volume(self):
        return 1.0 / float(np.prod(np.arange(1, self.dim + 1)))


def _sym_points(*orbits):
    pts, wts = [], []
    for bary, w in orbits:
        for p in sorted(set(_perms(bary))):
            pts.append(p)
            wts.append(w)
    return np.array(pts, dtype=float), np.array(wts, dtype=float)


def _perms(t):
    from itertools import permutations
    return permutations(t)


def quadrature_rule(dim: int, order: int = 2) -> QuadratureRule:
    """Symmetric rules exact to the given polynomial order (1, 2 or 4 in 2-D; 1, 2 in 3-D)."""
    if dim == 2:
        ref = 0.5
        if order <= 1:
            pts, w = _sym_points(((1 / 3, 1 / 3, 1 / 3), 1.0))
            order = 1
        elif order == 2:
            pts, w = _sym_points(((2 / 3, 1 / 6, 1 / 6), 1 / 3))
        elif order <= 4:
            a, b = 0.445948490915965, 0.091576213509771
            pts, w = _sym_points(((1 - 2 * a, a, a), 0.223381589678011),
                                 ((1 - 2 * b, b, b), 0.109951743655322))
            order = 4
        else:
            raise ValueError(f"no triangle rule of order {order}")
    elif dim == 3:
        ref = 1.0 / 6.0
        if order <= 1:
            pts, w = _sym_points(((0.25,) * 4, 1.0))
            order = 1
        elif order == 2:
            a, b = 0.5854101966249685, 0.1381966011250105
            pts, w = _sym_points(((a, b, b, b), 0.25))
        else:
            raise ValueError(f"no tetrahedron rule of order {order}")
    else:
        raise ValueError(f"unsupported dimension {dim}")
    return QuadratureRule(pts, w * ref, order)


# ---------------------------------------------------------------------------
# degrees of freedom


@dataclass(frozen=True)
class DofMap:
    """Vertex-to-unknown map after constraint application.

    ``vertex_to_dof[v] == -1`` marks an eliminated Dirichlet vertex.
    Periodic slave vertices share the unknown of their master.
    ``weights`` optionally holds a mean-constraint vector on the unknowns.
    """

    vertex_to_dof: np.ndarray
    kind: np.ndarray
    ndof: int
    weights: np.ndarray | None = None

    @classmethod
    def free(cls, n_vertices):
        return cls(np.arange(n_vertices), np.full(n_vertices, FREE, dtype=np.int8), n_vertices)

    @classmethod
    def dirichlet(cls, n_vertices, fixed):
        kind = np.full(n_vertices, FREE, dtype=np.int8)
        kind[np.asarray(fixed, dtype=int)] = DIRICHLET
        v2d = -np.ones(n_vertices, dtype=int)
        free = kind == FREE
        v2d[free] = np.arange(int(free.sum()))
        return cls(v2d, kind, int(free.sum()))

    @classmethod
    def periodic(cls, mesh):
        """Identify periodic images of a :class:`CellMesh` with their masters."""
        master = np.asarray(mesh.master)
        # close chains so every vertex points to a vertex that is its own master
        while True:
            nxt = master[master]
            if np.array_equal(nxt, master):
                break
            master = nxt
        roots = np.unique(master)
        root_id = -np.ones(len(master), dtype=int)
        root_id[roots] = np.arange(len(roots))
        v2d = root_id[master]
        kind = np.where(master == np.arange(len(master)), FREE, PERIODIC).astype(np.int8)
        return cls(v2d, kind, len(roots))

    def with_weights(self, weights):
        return DofMap(self.vertex_to_dof, self.kind, self.ndof, np.asarray(weights, dtype=float))

    @property
    def prolongation(self):
        """Sparse ``(n_vertices, ndof)`` matrix expanding unknowns to vertices."""
        keep = self.vertex_to_dof >= 0
        rows = np.nonzero(keep)[0]
        return sparse.csr_matrix((np.ones(rows.size), (rows, self.vertex_to_dof[keep])),
                                 shape=(len(self.vertex_to_dof), self.ndof))

    def expand(self, u):
        """Nodal values from unknowns (zero at eliminated vertices)."""
        u = np.asarray(u)
        out = np.zeros(u.shape[:-1] + (len(self.vertex_to_dof),))
        keep = self.vertex_to_dof >= 0
        out[..., keep] = u[..., self.vertex_to_dof[keep]]
        return out

    def restrict(self, nodal):
        """Unknowns from nodal values (value of any representative vertex)."""
        nodal = np.asarray(nodal, dtype=float)
        out = np.zeros(nodal.shape[:-1] + (self.ndof,))
        keep = self.vertex_to_dof >= 0
        out[..., self.vertex_to_dof[keep]] = nodal[..., keep]
        return out


@dataclass(frozen=True)
class SparseSystem:
    matrix: sparse.csr_matrix
    spd: bool = False

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def asymmetry(self) -> float:
        """``max|K - K^T| / max|K|``."""
        diff = abs(self.matrix - self.matrix.T)
        scale = abs(self.matrix).max() if self.matrix.nnz else 0.0
        return float(diff.max() / scale) if scale > 0 else 0.0

    def __matmul__(self, x):
        return self.matrix @ x


def dump_coo(system, path):
    """Write a matrix as ``row col value`` lines (1-based) for debugging."""
    m = system.matrix.tocoo() if isinstance(system, SparseSystem) else sparse.coo_matrix(system)
    with open(path, "w") as fh:
        fh.write(f"% {m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(m.row, m.col, m.data):
            fh.write(f"{i + 1} {j + 1} {v:.17e}\n")


# ---------------------------------------------------------------------------
# assembly


class Assembler:
    """Element geometry and quadrature data for repeated assembly on one mesh."""

    def __init__(self, mesh, dofmap: DofMap | None = None, quad: QuadratureRule | None = None):
        self.mesh = mesh
        self.dofmap = DofMap.free(mesh.n_vertices) if dofmap is None else dofmap
        self.quad = quadrature_rule(mesh.dim, 2) if quad is None else quad
        v = mesh.vertices[mesh.simplices]
        jac = np.swapaxes(v[:, 1:, :] - v[:, :1, :], 1, 2)  # columns v_i - v_0
        det = np.linalg.det(jac)
        fact = float(np.prod(np.arange(1, mesh.dim + 1)))
        self.volumes = np.abs(det) / fact
        inv = np.linalg.inv(jac)
        grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)
        self.grads = grads  # (ne, N+1, N)
        self.qweights = self.quad.weights / self.quad.reference_volume  # sum to one
        self.qpoints = np.einsum("qi,eid->eqd", self.quad.points, v)  # (ne, nq, N)
        dofs = self.dofmap.vertex_to_dof[mesh.simplices]
        nn = dofs.shape[1]
        r = np.repeat(dofs, nn, axis=1)
        c = np.tile(dofs, (1, nn))
        keep = (r >= 0) & (c >= 0)
        self._rows, self._cols, self._keep = r[keep], c[keep], keep
        vk = dofs >= 0
        self._vrows, self._vkeep = dofs[vk], vk

    def _sample(self, fn, what):
        vals = np.asarray(fn(self.qpoints), dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            elem = int(np.nonzero(bad.reshape(len(vals), -1).any(axis=1))[0][0])
            raise FemError(f"non-finite {what} sample in element {elem}")
        return vals

    def _matrix(self, local, spd):
        n = self.dofmap.ndof
        m = sparse.coo_matrix((local.reshape(len(local), -1)[self._keep], (self._rows, self._cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        return SparseSystem(m, spd)

    def element_coefficient(self, field):
        """Quadrature average of a matrix (or scalar) field on each element."""
        dim = self.mesh.dim
        if field is None:
            return np.broadcast_to(np.eye(dim), (self.mesh.n_elements, dim, dim))
        vals = self._sample(field, "coefficient")
        if vals.ndim == 2:
            vals = vals[..., None, None] * np.eye(dim)
        return np.einsum("q,eqij->eij", self.qweights, vals)

    def stiffness(self, field=None, spd=False):
        abar = self.element_coefficient(field)
        local = np.einsum("e,eid,edc,ejc->eij", self.volumes, self.grads, abar, self.grads)
        return self._matrix(local, spd)

    def mass(self, weight=None, spd=False):
        lam = self.quad.points
        if weight is None:
            w = np.ones((self.mesh.n_elements, len(lam)))
        else:
            w = self._sample(weight, "weight")
            if w.ndim != 2:
                raise FemError("mass weight must be scalar-valued")
        local = np.einsum("e,q,eq,qi,qj->eij", self.volumes, self.qweights, w, lam, lam)
        return self._matrix(local, spd)

    def load(self, fn=None, form="value"):
        """``F_i = int g phi_i`` (``form="value"``) or ``int G . grad phi_i`` (``"gradient"``)."""
        n = self.dofmap.ndof
        if fn is None:
            return np.zeros(n)
        vals = self._sample(fn, "load")
        if form == "value":
            if vals.ndim != 2:
                raise FemError("value-form load must be scalar-valued")
            local = np.einsum("e,q,eq,qi->ei", self.volumes, self.qweights, vals, self.quad.points)
        elif form == "gradient":
            gbar = np.einsum("q,eqd->ed", self.qweights, vals)
            local = np.einsum("e,ed,eid->ei", self.volumes, gbar, self.grads)
        else:
            raise ValueError(f"unknown load form {form!r}")
        return np.bincount(self._vrows, weights=local[self._vkeep], minlength=n)

    def element_gradients(self, nodal):
        """Constant gradient of a nodal P1 field on each element, shape ``(..., ne, N)``."""
        nodal = np.asarray(nodal)
        return np.einsum("...ei,eid->...ed", nodal[..., self.mesh.simplices], self.grads)


def assemble_stiffness(mesh, dofmap=None, field=None, quad=None, spd=False) -> SparseSystem:
    """``K_ij = sum_T int_T A grad phi_j . grad phi_i`` with A the element quadrature average."""
    return Assembler(mesh, dofmap, quad).stiffness(field, spd)


def assemble_mass(mesh, dofmap=None, weight=None, quad=None, spd=False) -> SparseSystem:
    return Assembler(mesh, dofmap, quad).mass(weight, spd)


def assemble_load(mesh, dofmap=None, field=None, quad=None, form="value"):
    return Assembler(mesh, dofmap, quad).load(field, form)


# ---------------------------------------------------------------------------
# solvers


def _pcg(a, b, tol, max_iterations, x0=None):
    """Jacobi-preconditioned CG; returns ``(x, iterations, relative_residual)``."""
    diag = a.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("SPD-flagged system has a non-positive diagonal entry")
    dinv = 1.0 / diag
    if not np.all(np.isfinite(b)):
        raise SolverError("non-finite right-hand side")
    bnorm = np.linalg.norm(b)
    n = len(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - a @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= max_iterations:
            raise NonConvergenceError(
                f"CG hit the iteration cap ({max_iterations}) at relative residual {res:.3e}", res, it)
        ap = a @ p
        curv = p @ ap
        if curv <= 0.0:
            raise SolverError(f"matrix is not positive definite (p.Ap = {curv:.3e} at iteration {it})")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    # guard against drift of the recursive residual
    true_res = np.linalg.norm(b - a @ x) / bnorm
    if true_res > 10 * tol and true_res > 1e-15 * np.sqrt(n):
        raise NonConvergenceError(f"CG residual drifted to {true_res:.3e}", true_res, it)
    return x, it, res


def solve_spd(system: SparseSystem, rhs, tol=1e-10, max_iterations=None, x0=None):
    """Solve an SPD-flagged system by Jacobi-preconditioned conjugate gradients.

    Raises :class:`NonConvergenceError` (carrying the final residual) when
    ``max_iterations`` is reached and :class:`SolverError` for systems that
    are not flagged or turn out indefinite.
    """
    if not system.spd:
        raise SolverError("solve_spd requires an SPD-flagged system")
    rhs = np.asarray(rhs, dtype=float)
    if max_iterations is None:
        max_iterations = max(10 * system.dimension, 100)
    x, _, _ = _pcg(system.matrix, rhs, tol, max_iterations, x0)
    return x


def solve_mean_constrained(system: SparseSystem, rhs, weights, tol=1e-10):
    """Solve ``K u = rhs`` subject to ``w . u = 0`` for ``K`` with constant kernel.

    The bordered system ``[[K, w], [w^T, 0]] [u, lam] = [rhs, 0]`` is solved
    by sparse LU.  The right-hand side must be orthogonal to constants.
    """
    rhs = np.asarray(rhs, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = system.dimension
    if abs(w.sum()) == 0.0:
        raise SolverError("constraint weights are orthogonal to constants")
    scale = np.abs(rhs).sum()
    if scale == 0.0:
        return np.zeros(n)
    k = system.matrix
    floor = 1e-12 * (abs(k).max() if k.nnz else 1.0)
    if abs(rhs.sum()) > 1e-8 * scale + floor:
        raise CompatibilityError(
            f"right-hand side has a constant component ({rhs.sum():.3e}); Neumann data incompatible")
    # scale the border to the matrix so pivots are balanced
    s = abs(k).max() / max(np.abs(w).max(), 1e-300)
    big = sparse.bmat([[k, sparse.csr_matrix(s * w[:, None])],
                       [sparse.csr_matrix(s * w[None, :]), None]], format="csc")
    rhs_big = np.concatenate([rhs, [0.0]])
    lu = spla.splu(big)
    sol = lu.solve(rhs_big)
    res = big @ sol - rhs_big
    if np.linalg.norm(res) > tol * np.linalg.norm(rhs_big):
        sol -= lu.solve(res)
        res = big @ sol - rhs_big
        if np.linalg.norm(res) > tol * np.linalg.norm(rhs_big):
            rel = np.linalg.norm(res) / np.linalg.norm(rhs_big)
            raise NonConvergenceError(f"saddle solve residual {rel:.3e} above {tol:.1e}", rel, 1)
    return sol[:n]

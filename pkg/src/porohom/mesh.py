"""Structured simplex meshes of the unit cell and of perforated boxes.

Meshes start from a uniform lattice split into simplices: alternating
diagonals in 2-D, the Kuhn (Freudenthal) subdivision in 3-D.
Holes are carved by dropping every simplex whose centroid lies strictly
inside a hole; vertices left on the cut are then projected onto the hole
boundary.  The resulting hole boundary is polygonal with O(h) geometric
error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import MeshError
from .model import HoleSpec

__all__ = [
    "SimplexMesh", "CellMesh", "PerforatedMesh", "build_cell_mesh",
    "build_perforated_mesh", "build_box_mesh", "mesh_measure",
    "interpolation_matrix", "simplex_volumes", "boundary_facets",
]

DEFAULT_MAX_VERTICES = 2_000_000


def _freeze(*arrays):
    for a in arrays:
        if isinstance(a, np.ndarray):
            a.setflags(write=False)


@dataclass
class SimplexMesh:
    vertices: np.ndarray  # (nv, N)
    simplices: np.ndarray  # (ne, N+1), positively oriented

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.simplices)

    def volumes(self):
        return simplex_volumes(self.vertices, self.simplices)


@dataclass
class CellMesh(SimplexMesh):
    """Triangulation of the unit cell minus an optional hole.

    ``master[v]`` is the vertex that ``v`` is identified with under
    periodicity (``master[v] == v`` for interior vertices).
    ``periodic_pairs[axis]`` holds ``(low, high)`` index arrays of vertices
    facing each other across the cell along ``axis``.
    """

    hole: HoleSpec = None
    h: float = 0.0
    master: np.ndarray = None
    periodic_pairs: dict = field(default_factory=dict)
    hole_boundary: np.ndarray = None  # facets (m, N) on the hole boundary
    element_quality: float = float("nan")  # smallest interior angle, degrees

    def pair(self, axis, v):
        """Image of vertex ``v`` under the periodic shift along ``axis``."""
        low, high = self.periodic_pairs[axis]
        hit = np.nonzero(low == v)[0]
        if hit.size:
            return int(high[hit[0]])
        hit = np.nonzero(high == v)[0]
        if hit.size:
            return int(low[hit[0]])
        raise KeyError(f"vertex {v} is not on a face normal to axis {axis}")


@dataclass
class PerforatedMesh(SimplexMesh):
    """Triangulation of a box with tiny holes of size epsilon**2.

    ``epsilon`` is ``None`` for plain macro meshes.  Boundary facets are
    split into Dirichlet facets (on the box boundary) and Neumann facets (on
    hole boundaries); ``neumann_normals`` point out of the material.
    """

    domain: np.ndarray = None
    epsilon: float | None = None
    hole: HoleSpec = None
    h: float = 0.0
    hole_cells: np.ndarray = None  # (n_holes, N) integer cell indices k
    dirichlet_vertices: np.ndarray = None  # sorted vertex indices on the box boundary
    dirichlet_facets: np.ndarray = None
    neumann_facets: np.ndarray = None
    neumann_normals: np.ndarray = None
    element_quality: float = float("nan")

    @property
    def n_holes(self):
        return 0 if self.hole_cells is None else len(self.hole_cells)


# ---------------------------------------------------------------------------
# geometry helpers


def simplex_volumes(vertices, simplices):
    """Signed volumes of simplices."""
    v = vertices[simplices]
    edges = v[:, 1:, :] - v[:, :1, :]
    n = vertices.shape[1]
    fact = float(np.prod(np.arange(1, n + 1)))
    if len(simplices) == 0:
        return np.zeros(0)
    return np.linalg.det(edges) / fact


def mesh_measure(mesh) -> float:
    """Total area/volume of a mesh; 0 for an empty mesh."""
    if mesh is None or mesh.n_elements == 0:
        return 0.0
    return float(np.sum(np.abs(mesh.volumes())))


def boundary_facets(simplices):
    """Facets (sorted vertex tuples) belonging to exactly one simplex.

    Returns ``(facets, owner, opposite)``: the facet rows, the owning simplex
    and the vertex of that simplex not on the facet.
    """
    ne, nn = simplices.shape
    if ne == 0:
        return np.zeros((0, nn - 1), dtype=int), np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    facets, owner, opposite = [], [], []
    for drop in range(nn):
        keep = [i for i in range(nn) if i != drop]
        facets.append(np.sort(simplices[:, keep], axis=1))
        owner.append(np.arange(ne))
        opposite.append(simplices[:, drop])
    facets = np.vstack(facets)
    owner = np.concatenate(owner)
    opposite = np.concatenate(opposite)
    _, inv, counts = np.unique(facets, axis=0, return_inverse=True, return_counts=True)
    once = counts[inv.ravel()] == 1
    order = np.lexsort(facets[once].T[::-1])
    return facets[once][order], owner[once][order], opposite[once][order]


def _facet_normals(vertices, facets, opposite):
    p = vertices[facets]
    dim = vertices.shape[1]
    if dim == 2:
        t = p[:, 1] - p[:, 0]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    elif dim == 3:
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    else:
        raise NotImplementedError("facet normals only for N = 2, 3")
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    inward = np.einsum("ij,ij->i", n, vertices[opposite] - p[:, 0]) > 0
    n[inward] *= -1.0
    return n


def _min_angle(vertices, simplices):
    """Smallest interior angle (degrees) over all triangles spanned by simplex vertices."""
    if len(simplices) == 0:
        return float("nan")
    nn = simplices.shape[1]
    best = np.inf
    for i in range(nn):
        for j in range(nn):
            for k in range(j + 1, nn):
                if i in (j, k):
                    continue
                a = vertices[simplices[:, j]] - vertices[simplices[:, i]]
                b = vertices[simplices[:, k]] - vertices[simplices[:, i]]
                cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
                best = min(best, float(np.degrees(np.arccos(np.clip(cos, -1, 1))).min()))
    return best


def _kuhn_lattice(lower, upper, counts):
    """Split a box lattice into ``prod(counts) * N!`` positively oriented simplices."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    counts = np.asarray(counts, dtype=int)
    dim = len(counts)
    shape = tuple(counts + 1)
    idx = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(c + 1) for c in counts], indexing="ij")], axis=-1)
    vertices = lower + idx * ((upper - lower) / counts)
    cubes = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")], axis=-1)
    if dim == 2:
        # alternate the diagonal in a checkerboard so that, for even counts,
        # the lattice is invariant under reflections about the mid-lines
        i, j = cubes[:, 0], cubes[:, 1]
        v00 = np.ravel_multi_index((i, j), shape)
        v10 = np.ravel_multi_index((i + 1, j), shape)
        v01 = np.ravel_multi_index((i, j + 1), shape)
        v11 = np.ravel_multi_index((i + 1, j + 1), shape)
        even = ((i + j) % 2 == 0)[:, None]
        first = np.where(even, np.stack([v00, v10, v11], axis=1), np.stack([v00, v10, v01], axis=1))
        second = np.where(even, np.stack([v00, v11, v01], axis=1), np.stack([v10, v11, v01], axis=1))
        simplices = np.stack([first, second], axis=1).reshape(-1, 3)
        return vertices, simplices, idx
    eye = np.eye(dim, dtype=int)
    blocks = []
    for perm in permutations(range(dim)):
        path = [cubes]
        cur = cubes
        for axis in perm:
            cur = cur + eye[axis]
            path.append(cur)
        blocks.append(np.stack([np.ravel_multi_index(p.T, shape) for p in path], axis=1))
    # interleave so the simplices of one cube are contiguous
    simplices = np.stack(blocks, axis=1).reshape(-1, dim + 1)
    vol = simplex_volumes(vertices, simplices)
    flip = vol < 0
    simplices[flip, 0], simplices[flip, 1] = simplices[flip, 1].copy(), simplices[flip, 0].copy()
    return vertices, simplices, idx


def _perforate(vertices, simplices, scale, k_lo, k_hi, hole: HoleSpec, min_ratio=0.2):
    """Remove simplices inside holes ``scale*(k + hole)`` and snap the cut.

    Kept simplices that collapse below ``min_ratio`` of the lattice volume
    after snapping are absorbed into the hole and the cut is snapped again.
    Returns new vertices, simplices, the map old->new vertex index (-1 for
    dropped vertices), and the number of removed simplices.
    """
    nv = len(vertices)
    if hole.empty:
        return vertices.copy(), simplices.copy(), np.arange(nv), 0
    cent = vertices[simplices].mean(axis=1) / scale
    k = np.floor(cent).astype(int)
    in_box = np.all((k >= k_lo) & (k <= k_hi), axis=1)
    removed = in_box & hole.contains(cent - k)
    ref = np.median(np.abs(simplex_volumes(vertices, simplices)))
    for _ in range(100):
        kept = simplices[~removed]
        used = np.zeros(nv, dtype=bool)
        used[kept.ravel()] = True
        on_cut = np.zeros(nv, dtype=bool)
        on_cut[simplices[removed].ravel()] = True
        on_cut &= used
        vert_k = np.zeros((nv, vertices.shape[1]), dtype=int)
        rem_s = simplices[removed]
        rem_k = k[removed]
        for j in range(rem_s.shape[1]):
            vert_k[rem_s[:, j]] = rem_k
        new_vertices = vertices.copy()
        cut = np.nonzero(on_cut)[0]
        if cut.size:
            local = vertices[cut] / scale - vert_k[cut]
            new_vertices[cut] = scale * (vert_k[cut] + hole.project(local))
        vol = simplex_volumes(new_vertices, simplices)
        bad = ~removed & (vol < min_ratio * ref) & on_cut[simplices].any(axis=1)
        if not bad.any():
            break
        removed |= bad
    remap = -np.ones(nv, dtype=int)
    remap[used] = np.arange(int(used.sum()))
    return new_vertices[used], remap[kept], remap, int(removed.sum())


def _gap_factor(dim):
    # bound on centroid-to-vertex distance of a Kuhn simplex, in units of h
    return np.sqrt(dim) * dim / (dim + 1)


# ---------------------------------------------------------------------------
# builders


def build_cell_mesh(hole: HoleSpec, h: float, dim: int | None = None) -> CellMesh:
    """Periodic triangulation of the unit cell ``Z`` minus ``hole``.

    Parameters
    ----------
    hole : HoleSpec
        Reference hole; ``HoleSpec("none", ...)`` gives the full cell.
    h : float
        Target lattice spacing, ``0 < h <= 1/4``.  The lattice uses
        ``ceil(1/h)`` intervals per axis.
    dim : int, optional
        Spatial dimension; defaults to the dimension of ``hole.center``.
    """
    dim = hole.dim if dim is None else dim
    if not 0.0 < h <= 0.25 + 1e-12:
        raise MeshError(f"cell mesh spacing must satisfy 0 < h <= 1/4, got h={h}")
    n = int(np.ceil(1.0 / h - 1e-9))
    hh = 1.0 / n
    if not hole.empty:
        if hole.dim != dim:
            raise MeshError("hole dimension does not match mesh dimension")
        gap = hole.gap()
        need = gap / _gap_factor(dim)
        if gap <= 0.0:
            raise MeshError(f"hole touches the cell boundary (gap {gap:.3e})")
        if hh > need:
            raise MeshError(f"hole-to-boundary gap {gap:.4g} cannot be meshed at h={h:.4g}; "
                            f"requires h <= {need:.4g}")
    vertices, simplices, idx = _kuhn_lattice(np.zeros(dim), np.ones(dim), [n] * dim)
    shape = (n + 1,) * dim
    master_full = np.ravel_multi_index((idx % n).T, shape)
    vertices, simplices, remap, n_removed = _perforate(vertices, simplices, 1.0, 0, 0, hole)
    if not hole.empty and n_removed == 0:
        raise MeshError(f"hole of size {hole.size:.4g} is not resolved at h={h:.4g}")
    used = remap >= 0
    master = remap[master_full[used]]
    idx = idx[used]
    pairs = {}
    for axis in range(dim):
        low = np.nonzero(idx[:, axis] == 0)[0]
        target = idx[low].copy()
        target[:, axis] = n
        lookup = {tuple(r): i for i, r in enumerate(map(tuple, idx))}
        high = np.array([lookup[tuple(t)] for t in target], dtype=int)
        pairs[axis] = (low, high)
    facets, _, _ = boundary_facets(simplices)
    on_outer = np.zeros(len(facets), dtype=bool)
    for axis in range(dim):
        x = vertices[facets][..., axis]
        on_outer |= np.all(np.abs(x) < 1e-12, axis=1) | np.all(np.abs(x - 1.0) < 1e-12, axis=1)
    mesh = CellMesh(vertices, simplices, hole=hole, h=hh, master=master, periodic_pairs=pairs,
                    hole_boundary=facets[~on_outer], element_quality=_min_angle(vertices, simplices))
    if np.any(mesh.volumes() <= 0.0):
        raise MeshError("snapping produced a degenerate element; refine h")
    _freeze(mesh.vertices, mesh.simplices, mesh.master, mesh.hole_boundary)
    return mesh


def _hole_cell_range(domain, scale, hole: HoleSpec):
    """Inclusive integer range of cells ``k`` with ``scale*(k + hole)`` inside the open box."""
    lo, hi = hole.bbox()
    k_lo = np.floor(domain[:, 0] / scale - lo).astype(int) - 1
    k_hi = np.ceil(domain[:, 1] / scale - hi).astype(int) + 1
    tol = 1e-12
    while True:
        grow = False
        for a in range(len(domain)):
            if scale * (k_lo[a] + lo[a]) <= domain[a, 0] + tol * scale:
                k_lo[a] += 1
                grow = True
            if scale * (k_hi[a] + hi[a]) >= domain[a, 1] - tol * scale:
                k_hi[a] -= 1
                grow = True
        if not grow:
            break
    return k_lo, k_hi


def build_perforated_mesh(domain, epsilon: float, hole: HoleSpec, h: float,
                          max_vertices: int = DEFAULT_MAX_VERTICES) -> PerforatedMesh:
    """Mesh of ``Omega`` minus the holes ``eps^2 (k + hole)`` lying inside ``Omega``.

    ``h`` must resolve the micro period (``h <= eps^2 / 8``) and divide the
    box side lengths.
    """
    domain = np.asarray(domain, dtype=float)
    dim = len(domain)
    if not 0.0 < epsilon < 1.0:
        raise MeshError(f"epsilon must lie in (0, 1), got {epsilon}")
    scale = epsilon ** 2
    if h > scale / 8.0 * (1 + 1e-9):
        raise MeshError(f"h={h:.4g} does not resolve the micro period: need h <= eps^2/8 = {scale / 8:.4g}")
    if not hole.empty and hole.gap() * scale < _gap_factor(dim) * h * (1 - 1e-9):
        raise MeshError("hole-to-cell gap cannot be meshed at this h")
    mesh = _box_lattice(domain, h, max_vertices)
    vertices, simplices = mesh
    if hole.empty:
        cells = np.zeros((0, dim), dtype=int)
        new_v, new_s = vertices, simplices
    else:
        k_lo, k_hi = _hole_cell_range(domain, scale, hole)
        if np.any(k_hi < k_lo):
            cells = np.zeros((0, dim), dtype=int)
            new_v, new_s = vertices, simplices
        else:
            grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(k_lo, k_hi)], indexing="ij")
            cells = np.stack([g.ravel() for g in grids], axis=-1)
            new_v, new_s, _, n_removed = _perforate(vertices, simplices, scale, k_lo, k_hi, hole)
            if n_removed == 0:
                raise MeshError("holes are not resolved by the mesh")
    return _finish_box_mesh(new_v, new_s, domain, epsilon, hole, h, cells)


def build_box_mesh(domain, h: float, max_vertices: int = DEFAULT_MAX_VERTICES) -> PerforatedMesh:
    """Plain (unperforated) lattice mesh of a box."""
    domain = np.asarray(domain, dtype=float)
    vertices, simplices = _box_lattice(domain, h, max_vertices)
    dim = len(domain)
    return _finish_box_mesh(vertices, simplices, domain, None,
                            HoleSpec("none", (0.5,) * dim, 0.0), h, np.zeros((0, dim), dtype=int))


def _box_lattice(domain, h, max_vertices):
    lengths = domain[:, 1] - domain[:, 0]
    counts = lengths / h
    if np.any(np.abs(counts - np.round(counts)) > 1e-6 * np.maximum(counts, 1.0)):
        raise MeshError(f"box side lengths {lengths.tolist()} are not integer multiples of h={h:.6g}")
    counts = np.round(counts).astype(int)
    if np.any(counts < 1):
        raise MeshError("h larger than the box")
    estimate = int(np.prod(counts + 1))
    if estimate > max_vertices:
        raise MeshError(f"estimated {estimate} vertices exceeds the cap of {max_vertices}")
    vertices, simplices, _ = _kuhn_lattice(domain[:, 0], domain[:, 1], counts)
    return vertices, simplices


def _finish_box_mesh(vertices, simplices, domain, epsilon, hole, h, cells):
    dim = len(domain)
    facets, _, opposite = boundary_facets(simplices)
    tol = 1e-10 * float(np.max(domain[:, 1] - domain[:, 0]))
    on_box_v = np.zeros(len(vertices), dtype=bool)
    for a in range(dim):
        on_box_v |= (np.abs(vertices[:, a] - domain[a, 0]) < tol) | (np.abs(vertices[:, a] - domain[a, 1]) < tol)
    on_box_f = np.zeros(len(facets), dtype=bool)
    for a in range(dim):
        x = vertices[facets][..., a]
        on_box_f |= np.all(np.abs(x - domain[a, 0]) < tol, axis=1) | np.all(np.abs(x - domain[a, 1]) < tol, axis=1)
    normals = _facet_normals(vertices, facets, opposite) if len(facets) and dim in (2, 3) else np.zeros((0, dim))
    mesh = PerforatedMesh(
        vertices, simplices, domain=domain, epsilon=epsilon, hole=hole, h=h, hole_cells=cells,
        dirichlet_vertices=np.nonzero(on_box_v)[0], dirichlet_facets=facets[on_box_f],
        neumann_facets=facets[~on_box_f], neumann_normals=normals[~on_box_f],
        element_quality=_min_angle(vertices, simplices),
    )
    if np.any(mesh.volumes() <= 0.0):
        raise MeshError("snapping produced a degenerate element; refine h")
    _freeze(mesh.vertices, mesh.simplices, mesh.dirichlet_vertices, mesh.neumann_facets)
    return mesh


# ---------------------------------------------------------------------------
# P1 point evaluation


def interpolation_matrix(mesh: SimplexMesh, points, periodic: bool = False):
    """Sparse matrix mapping nodal P1 values on ``mesh`` to values at ``points``.

    With ``periodic=True`` points are wrapped into the unit cell first.
    Points outside the mesh (e.g. inside a hole) are evaluated by
    extrapolation from the closest simplex.
    """
    pts = np.asarray(points, dtype=float)
    if periodic:
        pts = np.mod(pts, 1.0)
    dim = mesh.dim
    v = mesh.vertices[mesh.simplices]
    jac = np.swapaxes(v[:, 1:, :] - v[:, :1, :], 1, 2)
    inv = np.linalg.inv(jac)
    tree = cKDTree(v.mean(axis=1))
    n = len(pts)
    best_elem = np.full(n, -1)
    best_lam = np.zeros((n, dim + 1))
    best_score = np.full(n, -np.inf)
    todo = np.arange(n)
    for k in (8, 32, 128):
        if todo.size == 0:
            break
        k = min(k, mesh.n_elements)
        _, cand = tree.query(pts[todo], k=k)
        cand = cand.reshape(len(todo), -1)
        for c in range(cand.shape[1]):
            e = cand[:, c]
            lam_rest = np.einsum("pij,pj->pi", inv[e], pts[todo] - v[e, 0])
            lam = np.concatenate([1.0 - lam_rest.sum(axis=1, keepdims=True), lam_rest], axis=1)
            score = lam.min(axis=1)
            better = score > best_score[todo]
            best_score[todo[better]] = score[better]
            best_elem[todo[better]] = e[better]
            best_lam[todo[better]] = lam[better]
        todo = todo[best_score[todo] < -1e-10]
    rows = np.repeat(np.arange(n), dim + 1)
    cols = mesh.simplices[best_elem].ravel()
    return sparse.csr_matrix((best_lam.ravel(), (rows, cols)), shape=(n, mesh.n_vertices))

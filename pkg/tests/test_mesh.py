from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from porohom.errors import MeshError
from porohom.mesh import (SimplexMesh, boundary_facets, build_box_mesh, build_cell_mesh,
                          build_perforated_mesh, interpolation_matrix, mesh_measure)
from porohom.model import HoleSpec

UNIT = [[0, 1], [0, 1]]


def facet_counts(simplices):
    c = Counter()
    for s in simplices:
        for f in combinations(sorted(s), len(s) - 1):
            c[f] += 1
    return c


def test_plain_cell_quarter(no_hole):
    m = build_cell_mesh(no_hole, 0.25)
    assert m.n_elements == 32
    assert mesh_measure(m) == 1.0
    assert abs(m.element_quality - 45.0) < 1e-9


def test_disk_cell_area(disk):
    m = build_cell_mesh(disk, 1 / 64)
    assert abs(mesh_measure(m) - (1 - np.pi / 16)) < 1e-3
    assert np.all(m.volumes() > 0)


def test_disk_cell_rejects_coarse(disk):
    with pytest.raises(MeshError, match="h"):
        build_cell_mesh(disk, 0.5)


def test_gap_rejection_reports_required_h():
    hole = HoleSpec("disk", (0.5, 0.5), 0.47)
    with pytest.raises(MeshError, match="requires h <="):
        build_cell_mesh(hole, 1 / 16)


def test_disk_area_refinement(disk):
    exact = 1 - np.pi / 16
    errs = [abs(mesh_measure(build_cell_mesh(disk, h)) - exact) for h in (1 / 16, 1 / 32, 1 / 64)]
    # first order or better: halving h at least halves the error
    assert errs[1] <= 0.5 * errs[0] and errs[2] <= 0.5 * errs[1]


@pytest.mark.parametrize("hole", [HoleSpec("none", (0.5, 0.5), 0.0), HoleSpec("disk", (0.5, 0.5), 0.25),
                                  HoleSpec("square", (0.4, 0.55), 0.2)])
def test_cell_mesh_conforming_and_periodic(hole):
    m = build_cell_mesh(hole, 1 / 16)
    assert np.all(m.volumes() > 0)
    counts = facet_counts(m.simplices)
    assert max(counts.values()) == 2
    for axis, (low, high) in m.periodic_pairs.items():
        d = m.vertices[high] - m.vertices[low]
        expected = np.zeros(2)
        expected[axis] = 1.0
        assert np.max(np.abs(d - expected)) < 1e-12
        for v in low:
            assert m.pair(axis, m.pair(axis, v)) == v
    # facets used once are either on the outer faces or on the hole boundary
    once = [f for f, c in counts.items() if c == 1]
    assert len(once) == sum(len(p[0]) - 1 for p in m.periodic_pairs.values()) * 2 + len(m.hole_boundary)


def test_hole_boundary_snapped(disk):
    m = build_cell_mesh(disk, 1 / 32)
    pts = m.vertices[np.unique(m.hole_boundary)]
    np.testing.assert_allclose(np.linalg.norm(pts - 0.5, axis=1), 0.25, atol=1e-12)


def test_cell_mesh_3d():
    m = build_cell_mesh(HoleSpec("disk", (0.5, 0.5, 0.5), 0.25), 1 / 8)
    assert m.dim == 3 and np.all(m.volumes() > 0)
    assert abs(mesh_measure(m) - (1 - 4 / 3 * np.pi / 64)) < 0.02


def test_perforated_counts(disk):
    m = build_perforated_mesh(UNIT, 0.5, disk, 1 / 32)
    assert m.n_holes == 16
    m3 = build_perforated_mesh(UNIT, 1 / 3, disk, 1 / 72)
    assert m3.n_holes == 81
    # every hole removes eps^4 times what the cell mesh at h/eps^2 removes
    cell_hole = 1.0 - mesh_measure(build_cell_mesh(disk, 1 / 8))
    assert abs(mesh_measure(m3) - (1 - 81 * cell_hole / 81)) < 1e-12
    assert abs(mesh_measure(m3) - (1 - np.pi / 16)) < 1e-2


def test_perforated_no_hole(no_hole):
    m = build_perforated_mesh(UNIT, 0.5, no_hole, 1 / 32)
    assert m.n_holes == 0 and abs(mesh_measure(m) - 1.0) < 1e-14
    assert len(m.neumann_facets) == 0


def test_perforated_omits_cut_holes():
    hole = HoleSpec("disk", (0.5, 0.5), 0.25)
    m = build_perforated_mesh([[0, 1.125], [0, 1]], 0.5, hole, 1 / 32)
    # cells of side 1/4 fitting in (0, 1.125): k = 0..3 along x only
    assert m.n_holes == 16
    assert np.all(m.hole_cells >= 0) and np.all(m.hole_cells <= 3)


def test_perforated_markers(disk):
    m = build_perforated_mesh(UNIT, 0.5, disk, 1 / 32)
    facets, _, _ = boundary_facets(m.simplices)
    assert len(facets) == len(m.dirichlet_facets) + len(m.neumann_facets)
    marked = {tuple(sorted(f)) for f in m.dirichlet_facets} | {tuple(sorted(f)) for f in m.neumann_facets}
    assert len(marked) == len(facets)
    # hole facets lie on circles of radius eps^2 r around the hole centres
    mid = m.vertices[m.neumann_facets].mean(axis=1)
    centres = (np.floor(mid / 0.25) + 0.5) * 0.25
    r = np.linalg.norm(mid - centres, axis=1)
    assert np.all(r < 0.0625 + 1e-12) and np.all(r > 0.0625 * 0.95)
    # normals point into the hole (outward from the material)
    assert np.all(np.einsum("ij,ij->i", m.neumann_normals, centres - mid) > 0)


def test_perforated_preconditions(disk):
    with pytest.raises(MeshError, match="eps"):
        build_perforated_mesh(UNIT, 0.5, disk, 1 / 16)
    with pytest.raises(MeshError, match="estimated|vertices"):
        build_perforated_mesh(UNIT, 0.5, disk, 1 / 32, max_vertices=100)
    with pytest.raises(MeshError):
        build_perforated_mesh(UNIT, 1.2, disk, 1 / 32)


def test_measure_ratio_tends_to_z_star(disk):
    ratios = [mesh_measure(build_perforated_mesh(UNIT, e, disk, e * e / 8)) for e in (0.5, 1 / 3, 0.25)]
    z_mesh = mesh_measure(build_cell_mesh(disk, 1 / 8))
    np.testing.assert_allclose(ratios, z_mesh, atol=1e-12)
    assert all(abs(r - (1 - np.pi / 16)) < 1e-2 for r in ratios)


def test_empty_mesh_measure():
    m = SimplexMesh(np.zeros((0, 2)), np.zeros((0, 3), dtype=int))
    assert mesh_measure(m) == 0.0


def test_box_mesh_measure():
    m = build_box_mesh([[0, 2], [-1, 1]], 0.25)
    assert abs(mesh_measure(m) - 4.0) < 1e-13
    assert m.epsilon is None


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_interpolation_exact_for_linear(a, b, c):
    m = build_box_mesh(UNIT, 0.125)
    pts = np.random.default_rng(1).random((40, 2))
    f = lambda x: a * x[:, 0] + b * x[:, 1] + c
    np.testing.assert_allclose(interpolation_matrix(m, pts) @ f(m.vertices), f(pts), atol=1e-12)


def test_periodic_interpolation(no_hole):
    m = build_cell_mesh(no_hole, 1 / 8)
    vals = np.sin(2 * np.pi * m.vertices[:, 0])
    p = np.array([[0.3, 0.2]])
    a = interpolation_matrix(m, p) @ vals
    b = interpolation_matrix(m, p + [2.0, -1.0], periodic=True) @ vals
    assert abs(a[0] - b[0]) < 1e-14

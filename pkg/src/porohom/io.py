"""CSV and legacy-VTK writers."""
from __future__ import annotations

import os

import numpy as np

_VTK_CELL = {2: 5, 3: 10}  # triangle, tetrahedron


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.12e" % float(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def write_energy_csv(path, traj):
    rows = zip(traj.step_times, traj.energy, traj.dissipation, traj.work)
    write_csv(path, ["t", "E", "D", "W"], rows)


def write_vtk(path, mesh, point_data=None, title="porohom"):
    """Legacy ASCII UNSTRUCTURED_GRID with optional scalar/vector point data."""
    pts = np.asarray(mesh.vertices, dtype=float)
    cells = np.asarray(mesh.simplices, dtype=int)
    dim = pts.shape[1]
    if dim == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    nn = cells.shape[1]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(pts)} double\n")
        np.savetxt(fh, pts, fmt="%.12e")
        fh.write(f"CELLS {len(cells)} {len(cells) * (nn + 1)}\n")
        np.savetxt(fh, np.hstack([np.full((len(cells), 1), nn), cells]), fmt="%d")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        np.savetxt(fh, np.full(len(cells), _VTK_CELL[dim]), fmt="%d")
        if point_data:
            fh.write(f"POINT_DATA {len(pts)}\n")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                if values.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    np.savetxt(fh, values, fmt="%.12e")
                else:
                    if values.shape[1] == 2:
                        values = np.hstack([values, np.zeros((len(values), 1))])
                    fh.write(f"VECTORS {name} double\n")
                    np.savetxt(fh, values, fmt="%.12e")


def write_vtk_series(directory, stem, traj, stride=1):
    """One VTK file per stored snapshot; returns the written paths."""
    paths = []
    for i in range(0, len(traj.times), stride):
        p = os.path.join(directory, f"{stem}_{i:04d}.vtk")
        write_vtk(p, traj.mesh, {"u": traj.displacement[i], "v": traj.velocity[i]},
                  title=f"{stem} t={traj.times[i]:.12e}")
        paths.append(p)
    return paths

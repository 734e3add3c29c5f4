import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from porohom import io
from porohom.errors import ConfigError
from porohom.evolution import Trajectory
from porohom.harness import (ConvergenceReport, ConvergenceRow, RunConfig, compute_direct, compute_macro,
                             l2_spacetime_error, run_cell, run_compare)
from porohom.mesh import build_box_mesh, build_perforated_mesh
from porohom.model import HoleSpec

from conftest import fixture_config, identity_block, laminate_block

MESH = build_box_mesh([[0, 1], [0, 1]], 1 / 8)


def traj(values, times, mesh=MESH):
    values = np.asarray(values, dtype=float)
    z = np.zeros(len(times))
    return Trajectory(np.asarray(times, dtype=float), values, np.zeros_like(values), z, z, z, z, mesh,
                      mesh.n_vertices)


def const_traj(c, n=5, mesh=MESH):
    return traj(np.full((n, mesh.n_vertices), c), np.linspace(0, 1, n), mesh)


def test_l2_identical_is_zero():
    t = traj(np.random.default_rng(0).random((4, MESH.n_vertices)), [0, 0.1, 0.2, 0.3])
    assert l2_spacetime_error(t, t) == 0.0


def test_l2_constants():
    assert abs(l2_spacetime_error(const_traj(0.9), const_traj(1.0)) - 0.1) < 1e-14


def test_l2_interpolates_between_meshes():
    pm = build_perforated_mesh([[0, 1], [0, 1]], 0.5, HoleSpec("disk", (0.5, 0.5), 0.25), 1 / 32)
    lin = lambda m: np.tile(1 + m.vertices[:, 0] + 2 * m.vertices[:, 1], (3, 1))
    a = traj(lin(pm), [0, 0.5, 1], pm)
    b = traj(lin(MESH), [0, 0.5, 1])
    # P1 interpolation is exact for linear fields
    assert l2_spacetime_error(a, b) < 1e-13


def test_l2_rejects_mismatched_grids():
    with pytest.raises(ValueError, match="time grids"):
        l2_spacetime_error(const_traj(1.0, 5), const_traj(1.0, 4))
    with pytest.raises(ValueError):
        l2_spacetime_error(traj(np.ones((2, MESH.n_vertices)), [0, 0.5]),
                           traj(np.ones((2, MESH.n_vertices)), [0, 0.6]))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.1, 5), b=st.floats(0.1, 5), stride=st.integers(1, 4))
def test_l2_stride_invariant_for_static_fields(a, b, stride):
    times = np.linspace(0, 1, 13)
    rng = np.random.default_rng(int(a * 1000))
    ua = np.tile(a * rng.random(MESH.n_vertices), (13, 1))
    ub = np.tile(b * np.ones(MESH.n_vertices), (13, 1))
    full = l2_spacetime_error(traj(ua, times), traj(ub, times))
    sub = l2_spacetime_error(traj(ua[::stride], times[::stride]), traj(ub[::stride], times[::stride]))
    assert abs(full - sub) <= 1e-12 * max(full, 1.0)
    assert full >= 0 and np.isfinite(full)


def test_coinciding_equation_metric(tmp_path):
    raw = fixture_config(identity_block(), T=0.2, h_macro=1 / 16, dt=0.0125)
    cfg = RunConfig.from_dict(raw)
    err = l2_spacetime_error(compute_direct(cfg, 0.5), compute_macro(cfg))
    assert err <= 1e-2


def test_config_validation():
    good = fixture_config(identity_block())
    RunConfig.from_dict(good)
    bad = fixture_config(identity_block(), epsilons=(0.25, 0.5))
    with pytest.raises(ConfigError, match="decreasing"):
        RunConfig.from_dict(bad)
    with pytest.raises(ConfigError, match="\\(0, 1\\)"):
        RunConfig.from_dict(fixture_config(identity_block(), epsilons=(1.5,)))
    with pytest.raises(ConfigError, match="family"):
        RunConfig.from_dict(fixture_config(identity_block(rho={"family": "spline"})))
    with pytest.raises(ConfigError, match="formats"):
        RunConfig.from_dict(fixture_config(identity_block(), formats=("hdf5",)))
    with pytest.raises(ConfigError, match="discretization"):
        RunConfig.from_dict(fixture_config(identity_block(), bogus=1))
    with pytest.raises(ConfigError):
        RunConfig.from_dict([1, 2])


def test_cell_identity(tmp_path):
    cfg = RunConfig.from_dict(fixture_config(identity_block(), formats=("csv", "vtk")))
    res = run_cell(cfg, str(tmp_path))
    np.testing.assert_allclose(res.ahat.matrix, np.eye(2), atol=1e-12)
    header, rows = io.read_csv(tmp_path / "tensors.csv")
    assert header == ["y1", "y2", "a11", "a12", "a21", "a22"]
    assert rows[-1][:2] == ["nan", "nan"]
    assert (tmp_path / "chi.vtk").exists() and (tmp_path / "theta.vtk").exists()
    header, rows = io.read_csv(tmp_path / "scalars.csv")
    assert float(rows[0][header.index("m_rho")]) == 1.0


def test_cell_laminate(tmp_path):
    cfg = RunConfig.from_dict(fixture_config(laminate_block(), h_cell=1 / 64))
    res = run_cell(cfg, str(tmp_path))
    np.testing.assert_allclose(np.diag(res.ahat.matrix), [2.56, 6.25], rtol=1e-9)
    _, rows = io.read_csv(tmp_path / "tensors.csv")
    final = [float(v) for v in rows[-1][2:]]
    np.testing.assert_allclose(final, [2.56, 0, 0, 6.25], atol=1e-9)


def test_cell_rejects_invalid_model(tmp_path):
    cfg = RunConfig.from_dict(fixture_config(identity_block(beta=0.1)))
    with pytest.raises(ConfigError, match="A2"):
        run_cell(cfg, str(tmp_path))


def test_compare_single_epsilon(tmp_path):
    cfg = RunConfig.from_dict(fixture_config(identity_block()))
    report = run_compare(cfg, str(tmp_path))
    assert len(report.rows) == 1 and report.verdict == "PASS"
    assert report.rows[0].error <= 1e-10
    header, rows = io.read_csv(tmp_path / "report.csv")
    assert header[0] == "epsilon" and len(rows) == 1
    dat = (tmp_path / "report.dat").read_text().splitlines()
    assert dat[0].startswith("#") and len(dat[1].split()) == 4


def test_compare_empty_epsilons(tmp_path):
    cfg = RunConfig.from_dict(fixture_config(identity_block(), epsilons=()))
    with pytest.raises(ConfigError, match="epsilon"):
        run_compare(cfg, str(tmp_path))


def test_compare_failure_rows(tmp_path):
    # dt = 0.0125 resolves eps = 1/2 (eps^2/20 = 0.0125) but not eps = 0.4
    cfg = RunConfig.from_dict(fixture_config(identity_block(), epsilons=(0.5, 0.4)))
    report = run_compare(cfg, str(tmp_path))
    assert report.rows[0].status == "ok"
    assert report.rows[1].status.startswith("failed") and "dt" in report.rows[1].status
    assert report.verdict == "FAIL"
    _, rows = io.read_csv(tmp_path / "report.csv")
    assert len(rows) == 2 and rows[1][-1].startswith("failed")


def test_report_verdict():
    row = lambda e: ConvergenceRow(0.5, 0.1, 0.1, 1, 1, e, 0.0)
    assert ConvergenceReport([row(0.3), row(0.2), row(0.1)]).verdict == "PASS"
    assert ConvergenceReport([row(0.3), row(0.3)]).verdict == "FAIL"
    assert ConvergenceReport([row(0.3), row(float("nan"))]).verdict == "FAIL"
    assert ConvergenceReport([]).verdict == "FAIL"


def test_reports_bit_identical(tmp_path):
    raw = fixture_config(laminate_block(), hole={"family": "disk", "params": {"radius": 0.25}},
                         epsilons=(0.5, 1 / 3), dt=0.005, T=0.04, h_macro=1 / 16)
    cfg = RunConfig.from_dict(raw)
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    run_compare(cfg, str(outs[0]))
    run_compare(cfg, str(outs[1]))
    run_compare(cfg, str(outs[2]), workers=2)
    for name in ("report.csv", "report.dat", "energy_macro.csv"):
        first = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == first for o in outs[1:]), name


def test_vtk_writer(tmp_path):
    path = tmp_path / "m.vtk"
    io.write_vtk(path, MESH, {"u": np.arange(MESH.n_vertices), "g": np.ones((MESH.n_vertices, 2))})
    text = path.read_text()
    assert f"POINTS {MESH.n_vertices} double" in text
    assert f"CELL_TYPES {MESH.n_elements}" in text
    assert "SCALARS u double 1" in text and "VECTORS g double" in text
    lines = text.splitlines()
    i = lines.index(f"CELL_TYPES {MESH.n_elements}")
    assert set(lines[i + 1:i + 1 + MESH.n_elements]) == {"5"}

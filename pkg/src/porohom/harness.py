"""Run configuration, error metrics and the cell/macro/direct/compare drivers."""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import ConfigError, MeshError, PorohomError
from .evolution import NewmarkConfig, Trajectory, solve_direct, solve_macro
from .fem import Assembler
from .mesh import build_box_mesh, build_cell_mesh, build_perforated_mesh, interpolation_matrix
from .model import (CoefficientModel, EffectiveScalars, HoleSpec, ProblemData,
                    compute_effective_scalars, make_hole, validate_model)
from .multiscale import (EffectiveTensor, MicroSolver, macro_tensor, solve_meso_cell,
                         verify_time_periodic_residual)

log = logging.getLogger("porohom")

__all__ = [
    "Discretization", "RunConfig", "CellResult", "ConvergenceRow", "ConvergenceReport",
    "l2_spacetime_error", "run_cell", "run_macro", "run_direct", "run_compare",
]


@dataclass(frozen=True)
class Discretization:
    h_cell: float = 1.0 / 32
    h_meso: float | None = None
    h_macro: float = 1.0 / 32
    dt: float = 1.0 / 320
    epsilons: tuple = ()
    cells_per_period: int = 8
    rho_min: float = 1e-3
    quadrature_resolution: int = 128
    sample_count: int = 1024
    solver_tol: float = 1e-10
    snapshot_stride: int = 1
    max_vertices: int = 2_000_000

    def __post_init__(self):
        eps = list(self.epsilons)
        if any(not 0.0 < e < 1.0 for e in eps):
            raise ConfigError(f"epsilon values must lie in (0, 1): {eps}")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"epsilon list must be strictly decreasing: {eps}")
        if self.cells_per_period < 8:
            raise ConfigError("cells_per_period must be >= 8 (h <= eps^2/8)")
        for name in ("h_cell", "h_macro", "dt", "rho_min", "solver_tol"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")

    def h_direct(self, eps):
        return eps * eps / self.cells_per_period


@dataclass(frozen=True)
class RunConfig:
    model: CoefficientModel
    hole: HoleSpec
    problem: ProblemData
    disc: Discretization
    out_dir: str = "out"
    formats: tuple = ("csv", "vtk")
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dim(self):
        return self.model.dim

    def newmark(self) -> NewmarkConfig:
        return NewmarkConfig(self.disc.dt, self.problem.final_time, self.disc.snapshot_stride,
                             tol=self.disc.solver_tol)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        problem_block = raw.get("problem", {})
        model_block = raw.get("model", {})
        dim = int(model_block.get("dim", len(problem_block.get("domain", [[0, 1], [0, 1]]))))
        model = CoefficientModel.from_config(model_block, dim)
        hole = make_hole(model_block.get("hole"), dim)
        problem = ProblemData.from_config(problem_block)
        if problem.dim != dim:
            raise ConfigError("problem domain dimension differs from model dimension")
        d = dict(raw.get("discretization", {}))
        if "epsilons" in d:
            d["epsilons"] = tuple(float(e) for e in d["epsilons"])
        try:
            disc = Discretization(**d)
        except TypeError as exc:
            raise ConfigError(f"invalid discretization block: {exc}") from exc
        out = raw.get("output", {})
        formats = tuple(out.get("formats", ("csv", "vtk")))
        unknown = set(formats) - {"csv", "vtk"}
        if unknown:
            raise ConfigError(f"unknown output formats {sorted(unknown)}")
        return cls(model, hole, problem, disc, out.get("directory", "out"), formats, raw)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        return cls.from_dict(raw)


# ---------------------------------------------------------------------------
# error metric


def l2_spacetime_error(direct: Trajectory, macro: Trajectory, time_tol=1e-12) -> float:
    """Relative L2(Omega_eps x (0,T)) distance between the direct and macro fields.

    The macro field is interpolated (P1 point evaluation) at the direct mesh
    vertices; space integrals use the P1 mass matrix of the direct mesh and
    time integrals the trapezoid rule over the snapshots.
    """
    if direct.times.shape != macro.times.shape or np.max(np.abs(direct.times - macro.times), initial=0.0) > time_tol:
        raise ValueError("direct and macro trajectories have different time grids")
    mass = Assembler(direct.mesh).mass().matrix
    if macro.mesh is direct.mesh:
        u0 = macro.displacement
    else:
        interp = interpolation_matrix(macro.mesh, direct.mesh.vertices)
        u0 = (interp @ macro.displacement.T).T
    diff = direct.displacement - u0
    num = np.einsum("ni,ni->n", diff, (mass @ diff.T).T)
    den = np.einsum("ni,ni->n", u0, (mass @ u0.T).T)
    if len(direct.times) == 1:
        num_t, den_t = num[0], den[0]
    else:
        num_t = np.trapezoid(num, direct.times)
        den_t = np.trapezoid(den, direct.times)
    if den_t == 0.0:
        return 0.0 if num_t == 0.0 else float("inf")
    return float(np.sqrt(max(num_t, 0.0) / den_t))


# ---------------------------------------------------------------------------
# cell problems


@dataclass
class CellResult:
    scalars: EffectiveScalars
    ahat: EffectiveTensor
    samples: list
    meso: object
    micro: object
    residuals: list
    mesh_z_measure: float


def _require_valid(cfg: RunConfig):
    report = validate_model(cfg.model, cfg.hole, cfg.disc.sample_count)
    if not report.ok:
        raise ConfigError(f"model violates assumptions:\n{report}")


def compute_cell(cfg: RunConfig, workers=1) -> CellResult:
    _require_valid(cfg)
    d = cfg.disc
    scalars = compute_effective_scalars(cfg.model, cfg.hole, d.quadrature_resolution)
    zmesh = build_cell_mesh(cfg.hole, d.h_cell, cfg.dim)
    ymesh = build_cell_mesh(HoleSpec("none", (0.5,) * cfg.dim, 0.0), d.h_meso or d.h_cell, cfg.dim)
    micro = MicroSolver(cfg.model, zmesh, d.solver_tol)
    meso, samples = solve_meso_cell(cfg.model, ymesh, zmesh, tol=d.solver_tol, workers=workers, micro=micro)
    ahat = macro_tensor(meso)
    first_y = np.asarray(samples[0][0])
    chi = micro.solve(cfg.model.a_matrix.y_weights(first_y), y=tuple(first_y))
    residuals = verify_time_periodic_residual(chi, cfg.model, 2)
    return CellResult(scalars, ahat, samples, meso, chi, residuals, float(np.sum(zmesh.volumes())))


def run_cell(cfg: RunConfig, out_dir=None, workers=1) -> CellResult:
    """Effective scalars and tensors; writes ``tensors.csv`` and ``scalars.csv``."""
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    res = compute_cell(cfg, workers)
    dim = cfg.dim
    header = [f"y{i + 1}" for i in range(dim)] + [f"a{i + 1}{j + 1}" for i in range(dim) for j in range(dim)]
    rows = [list(y) + list(np.asarray(a).ravel()) for y, a in res.samples]
    rows.append(["nan"] * dim + list(res.ahat.matrix.ravel()))
    io.write_csv(os.path.join(out_dir, "tensors.csv"), header, rows)
    s = res.scalars
    io.write_csv(os.path.join(out_dir, "scalars.csv"),
                 ["z_star_measure", "m_rho", "m_sqrt_rho", "m_beta", "z_star_mesh_measure"],
                 [[s.z_star_measure, s.m_rho, s.m_sqrt_rho, s.m_beta, res.mesh_z_measure]])
    if "vtk" in cfg.formats:
        io.write_vtk(os.path.join(out_dir, "chi.vtk"), res.micro.mesh,
                     {f"chi{i + 1}": res.micro.chi[i] for i in range(dim)}, title="micro corrector")
        io.write_vtk(os.path.join(out_dir, "theta.vtk"), res.meso.mesh,
                     {f"theta{i + 1}": res.meso.theta[i] for i in range(dim)}, title="meso corrector")
    log.info("Ahat = %s", res.ahat.matrix.tolist())
    return res


# ---------------------------------------------------------------------------
# evolution drivers


def compute_macro(cfg: RunConfig, cell: CellResult | None = None) -> Trajectory:
    cell = compute_cell(cfg) if cell is None else cell
    mesh = build_box_mesh(cfg.problem.domain, cfg.disc.h_macro, cfg.disc.max_vertices)
    return solve_macro(cell.ahat, cell.scalars, cfg.problem, mesh, cfg.newmark())


def run_macro(cfg: RunConfig, out_dir=None, cell=None) -> Trajectory:
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    traj = compute_macro(cfg, cell)
    if "csv" in cfg.formats:
        io.write_energy_csv(os.path.join(out_dir, "energy.csv"), traj)
    if "vtk" in cfg.formats:
        io.write_vtk_series(out_dir, "macro", traj)
    return traj


def compute_direct(cfg: RunConfig, eps: float) -> Trajectory:
    _require_valid(cfg)
    d = cfg.disc
    mesh = build_perforated_mesh(cfg.problem.domain, eps, cfg.hole, d.h_direct(eps), d.max_vertices)
    return solve_direct(cfg.model, cfg.problem, mesh, cfg.newmark(), d.rho_min)


def _eps_tag(eps):
    return f"{eps:.6g}".replace(".", "p")


def run_direct(cfg: RunConfig, eps: float, out_dir=None) -> Trajectory:
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    traj = compute_direct(cfg, eps)
    tag = _eps_tag(eps)
    if "csv" in cfg.formats:
        io.write_energy_csv(os.path.join(out_dir, f"energy_eps{tag}.csv"), traj)
    if "vtk" in cfg.formats:
        io.write_vtk_series(out_dir, f"direct_eps{tag}", traj)
    return traj


# ---------------------------------------------------------------------------
# convergence study


@dataclass
class ConvergenceRow:
    epsilon: float
    h: float
    dt: float
    dofs_direct: int
    dofs_macro: int
    error: float
    wall_time: float
    status: str = "ok"
    balance_defect: float = float("nan")


@dataclass
class ConvergenceReport:
    rows: list

    @property
    def errors(self):
        return [r.error for r in self.rows]

    @property
    def verdict(self) -> str:
        if not self.rows or any(r.status != "ok" or not np.isfinite(r.error) for r in self.rows):
            return "FAIL"
        e = self.errors
        return "PASS" if all(b < a for a, b in zip(e, e[1:])) else "FAIL"


def _direct_job(raw, eps):
    """Worker entry point: rebuild the config from its raw dict and run one epsilon."""
    return _direct_local(RunConfig.from_dict(raw), eps)


def run_compare(cfg: RunConfig, out_dir=None, workers=1) -> ConvergenceReport:
    """One macro run plus one direct run per epsilon; writes ``report.csv``/``report.dat``.

    ``report.csv`` and ``report.dat`` are deterministic; wall-clock times go
    to ``timing.csv``.
    """
    out_dir = out_dir or cfg.out_dir
    eps_list = list(cfg.disc.epsilons)
    if not eps_list:
        raise ConfigError("compare needs a non-empty epsilon list")
    os.makedirs(out_dir, exist_ok=True)
    macro = compute_macro(cfg)
    if "csv" in cfg.formats:
        io.write_energy_csv(os.path.join(out_dir, "energy_macro.csv"), macro)

    if workers > 1 and len(eps_list) > 1 and cfg.raw:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_direct_job, [cfg.raw] * len(eps_list), eps_list))
    else:
        results = [_direct_local(cfg, e) for e in eps_list]

    rows = []
    for eps, traj, status, wall in results:
        h = cfg.disc.h_direct(eps)
        if traj is None:
            rows.append(ConvergenceRow(eps, h, cfg.disc.dt, 0, macro.dof_count, float("nan"), wall, status))
            continue
        err = l2_spacetime_error(traj, macro)
        defect = float(np.max(traj.balance_defect()))
        rows.append(ConvergenceRow(eps, h, cfg.disc.dt, traj.dof_count, macro.dof_count, err, wall,
                                   status, defect))
        if "csv" in cfg.formats:
            io.write_energy_csv(os.path.join(out_dir, f"energy_eps{_eps_tag(eps)}.csv"), traj)
    report = ConvergenceReport(rows)
    io.write_csv(os.path.join(out_dir, "report.csv"),
                 ["epsilon", "h", "dt", "dofs_direct", "dofs_macro", "error", "balance_defect", "status"],
                 [[r.epsilon, r.h, r.dt, r.dofs_direct, r.dofs_macro, r.error, r.balance_defect, r.status]
                  for r in rows])
    with open(os.path.join(out_dir, "report.dat"), "w") as fh:
        fh.write(f"# epsilon h dt error   verdict={report.verdict}\n")
        for r in rows:
            fh.write(" ".join(io.fmt(v) for v in (r.epsilon, r.h, r.dt, r.error)) + "\n")
    io.write_csv(os.path.join(out_dir, "timing.csv"), ["epsilon", "wall_time"],
                 [[r.epsilon, r.wall_time] for r in rows])
    return report


def _direct_local(cfg, eps):
    t0 = time.perf_counter()
    try:
        traj = compute_direct(cfg, eps)
    except PorohomError as exc:
        return eps, None, f"failed: {exc}".replace(",", ";").replace("\n", " "), time.perf_counter() - t0
    return eps, traj, "ok", time.perf_counter() - t0

"""Drivers for the convergence, GMRES and pressure-drop studies.

Every driver takes an :class:`ExperimentConfig`, returns a list of row
dictionaries and, when ``out`` is given, writes them as a CSV table.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from ..interface import CoupledProblem, NewtonResult, newton_solve
from ..mesh import build_rectangle_mesh
from ..timegrid import uniform_grid
from .config import ExperimentConfig, steps_in_T
from .manufactured import manufactured_case1
from .norms import ReferenceSolution, fluid_errors, porous_errors
from .pressure_drop import pressure_drop_case

log = logging.getLogger(__name__)

ERROR_COLUMNS = ("u_f_L2", "u_f_H1", "u_f_H1semi", "p_f_L2", "u_p_L2", "u_p_Hdiv", "p_p_L2")
CSV_COLUMNS = (("test_case", "grid_type", "h", "dt_f", "dt_p", "r_f", "r_p", "precond")
               + ERROR_COLUMNS + tuple(f"order_{c}" for c in ERROR_COLUMNS)
               + ("newton_iterations", "gmres_iterations", "gmres_converged", "interface_flux",
                  "wall_seconds"))


@dataclass
class RunOutput:
    problem: CoupledProblem
    result: NewtonResult
    errors: dict
    wall: float
    exact: object = None


def _meshes(cfg: ExperimentConfig, n: int):
    f, p = cfg.fluid_domain, cfg.porous_domain
    nx = max(1, round((f[1] - f[0]) * n))
    mesh_f = build_rectangle_mesh(f, nx, max(1, round((f[3] - f[2]) * n)), "fluid", "bottom")
    mesh_p = build_rectangle_mesh(p, nx, max(1, round((p[3] - p[2]) * n)), "porous", "top")
    return mesh_f, mesh_p


def with_exponent(cfg: ExperimentConfig, r: float) -> ExperimentConfig:
    return dataclasses.replace(cfg, fluid=dataclasses.replace(cfg.fluid, r=r),
                               porous=dataclasses.replace(cfg.porous, r=r))


def problem_data(cfg: ExperimentConfig):
    """``(exact, data)`` for the configured test case (``exact`` is None for case 2)."""
    if cfg.test_case == 1:
        return manufactured_case1(
            r_f=cfg.fluid.r, r_p=cfg.porous.r, nu_inf=cfg.fluid.nu_inf, nu_0=cfg.fluid.nu_0,
            K=cfg.fluid.K, kappa=cfg.kappa, S_p=cfg.S_p, eta=cfg.eta, alpha_bjs=cfg.alpha_bjs)
    data = pressure_drop_case(cfg.fluid, cfg.porous, kappa=cfg.kappa, S_p=cfg.S_p,
                              alpha_bjs=cfg.alpha_bjs, eta=cfg.eta,
                              discontinuous=cfg.discontinuous)
    return None, data


def build_problem(cfg: ExperimentConfig, n: int, dt_f: float, dt_p: float):
    exact, data = problem_data(cfg)
    mesh_f, mesh_p = _meshes(cfg, n)
    grid_f = uniform_grid(cfg.T, steps_in_T(cfg.T, dt_f, "dt_f"))
    grid_p = uniform_grid(cfg.T, steps_in_T(cfg.T, dt_p, "dt_p"))
    return CoupledProblem(mesh_f, mesh_p, data, grid_f, grid_p, cfg.inner,
                          parallel=cfg.parallel, multiplier_grid=cfg.multiplier_grid), exact


def solve(cfg: ExperimentConfig, n: int, dt_f: float, dt_p: float, precond=None,
          exact=None, dump_dir=None) -> RunOutput:
    """Build, solve (timing only the Newton loop) and measure errors at ``T``.

    ``exact`` overrides the closed-form solution (used for reference runs).
    """
    outer = cfg.outer if precond is None else dataclasses.replace(cfg.outer,
                                                                 precondition=precond)
    problem, closed_form = build_problem(cfg, n, dt_f, dt_p)
    exact = exact if exact is not None else closed_form
    start = time.perf_counter()
    result = newton_solve(problem, config=outer, dump_dir=dump_dir)
    wall = time.perf_counter() - start
    errors = {}
    if exact is not None:
        errors.update(fluid_errors(problem.asm_f, result.final.stokes.final, exact, cfg.T))
        errors.update(porous_errors(problem.asm_p, result.final.darcy.final, exact, cfg.T))
    log.info("n=%d dt_f=%g dt_p=%g r=(%g, %g): %s", n, dt_f, dt_p, cfg.fluid.r, cfg.porous.r,
             " ".join(f"{k}={v:.3e}" for k, v in errors.items()))
    return RunOutput(problem, result, errors, wall, exact)


def _row(cfg, grid_type, n, dt_f, dt_p, run: RunOutput, precond) -> dict:
    row = {"test_case": cfg.test_case, "grid_type": grid_type, "h": 1.0 / n,
           "dt_f": dt_f, "dt_p": dt_p, "r_f": cfg.fluid.r, "r_p": cfg.porous.r,
           "precond": "on" if precond else "off",
           "newton_iterations": len(run.result.iterations),
           "gmres_iterations": ";".join(str(c) for c in run.result.gmres_counts),
           "wall_seconds": round(run.wall, 3)}
    row.update(run.errors)
    return row


def add_orders(rows: list, group_keys) -> list:
    """Fill ``order_<col> = log2(e_prev / e)`` between consecutive rows of a group."""
    last = {}
    for row in rows:
        key = tuple(row.get(k) for k in group_keys)
        prev = last.get(key)
        for c in ERROR_COLUMNS:
            if prev is not None and c in row and c in prev and row[c] > 0 and prev[c] > 0:
                row[f"order_{c}"] = math.log2(prev[c] / row[c])
        last[key] = row
    return rows


def write_csv(rows: list, path) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _format(k, v) for k, v in row.items()})


def _format(key, value):
    if isinstance(value, float) and key not in _PLAIN:
        return f"{value:.6e}"
    return value


_PLAIN = ("h", "dt_f", "dt_p", "r_f", "r_p", "wall_seconds")


def _finish(rows, out, name):
    if out is not None:
        path = os.path.join(out, name)
        write_csv(rows, path)
        log.info("wrote %s", path)
    return rows


def run_single(cfg: ExperimentConfig, out=None) -> list:
    """One solve with the configured resolution(s) and time steps."""
    rows = []
    for n in cfg.resolutions:
        dump = os.path.join(out, f"vtk_h{n}") if (out and cfg.vtk) else None
        run = solve(cfg, n, cfg.dt_f, cfg.dt_p, dump_dir=dump)
        if out is not None:
            os.makedirs(out, exist_ok=True)
            run.result.write_history_csv(os.path.join(out, f"gmres_history_h{n}.csv"))
        rows.append(_row(cfg, _grid_type(cfg.dt_f, cfg.dt_p), n, cfg.dt_f, cfg.dt_p, run,
                         cfg.outer.precondition))
        run.result.final.release()
    return _finish(add_orders(rows, ("r_f",)), out, "single.csv")


def _grid_type(dt_f, dt_p):
    return "conforming" if abs(dt_f - dt_p) <= 1e-14 else "nonconforming"


def run_convergence_space(cfg: ExperimentConfig, out=None) -> list:
    """Errors at ``T`` for every resolution and viscosity exponent."""
    rows = []
    for r in cfg.r_values:
        c = with_exponent(cfg, r)
        for n in cfg.resolutions:
            run = solve(c, n, c.dt_f, c.dt_p)
            rows.append(_row(c, _grid_type(c.dt_f, c.dt_p), n, c.dt_f, c.dt_p, run,
                             c.outer.precondition))
            run.result.final.release()
    return _finish(add_orders(rows, ("r_f",)), out, "convergence_space.csv")


def time_study_grids(dt_coarse: float):
    """The three grid pairs ``(label, dt_f, dt_p)`` for one coarse step."""
    fine = dt_coarse / 2
    return [("coarse-conforming", dt_coarse, dt_coarse),
            ("fine-conforming", fine, fine),
            ("nonconforming", dt_coarse, fine)]


def run_convergence_time(cfg: ExperimentConfig, out=None) -> list:
    """Coarse conforming, fine conforming and nonconforming grids for every
    coarse step, on the first configured resolution; includes wall-clock."""
    n = cfg.resolutions[0]
    rows = []
    for r in cfg.r_values:
        c = with_exponent(cfg, r)
        for dtc in c.dt_coarse:
            for label, dt_f, dt_p in time_study_grids(dtc):
                run = solve(c, n, dt_f, dt_p)
                rows.append(_row(c, label, n, dt_f, dt_p, run, c.outer.precondition))
                run.result.final.release()
    return _finish(add_orders(rows, ("r_f", "grid_type")), out, "convergence_time.csv")


def run_gmres_count_study(cfg: ExperimentConfig, out=None, tol: float = 1e-10) -> list:
    """GMRES iterations of the first Newton step, with and without preconditioner."""
    outer = dataclasses.replace(cfg.outer, gmres_tol=tol, newton_maxit=1)
    rows = []
    for r in cfg.r_values:
        c = dataclasses.replace(with_exponent(cfg, r), outer=outer)
        for precond in (False, True):
            for n in c.resolutions:
                run = solve(c, n, c.dt_f, c.dt_p, precond=precond)
                row = _row(c, _grid_type(c.dt_f, c.dt_p), n, c.dt_f, c.dt_p, run, precond)
                row["gmres_converged"] = run.result.iterations[0].gmres_converged
                rows.append(row)
                run.result.final.release()
    return _finish(rows, out, "gmres_study.csv")


def reference_solution(cfg: ExperimentConfig, n: int | None = None) -> ReferenceSolution:
    """Final state of a conforming run with ``cfg.reference_dt`` as a reference field."""
    n = n or cfg.reference_resolution
    run = solve(cfg, n, cfg.reference_dt, cfg.reference_dt)
    ref = ReferenceSolution(run.problem.asm_f, run.result.final.stokes.final.copy(),
                            run.problem.asm_p, run.result.final.darcy.final.copy())
    run.result.final.release()
    return ref


def run_testcase2(cfg: ExperimentConfig, out=None, include_discontinuous: bool = True) -> list:
    """Self-convergence in time against a fine-step reference, the grid
    comparison, and (optionally) the discontinuous-parameter comparison.

    All runs use the first configured resolution; the reference uses the same
    mesh so that only the time discretization error is measured.
    """
    n = cfg.resolutions[0]
    rows = []
    ref = reference_solution(cfg, n)
    for dt_f in cfg.dt_f_sweep:
        run = solve(cfg, n, dt_f, 2 * dt_f, exact=ref)
        rows.append(_row(cfg, "nonconforming-sweep", n, dt_f, 2 * dt_f, run,
                         cfg.outer.precondition))
        _dump_final(cfg, run, out, f"tc2_dtf{dt_f:g}")
        run.result.final.release()
    add_orders(rows, ("grid_type",))
    rows += _comparison(cfg, n, cfg.dt_compare, ref, "")
    if include_discontinuous:
        dcfg = dataclasses.replace(cfg, discontinuous=True)
        dref = reference_solution(dcfg, n)
        rows += _comparison(dcfg, n, 2 * cfg.dt_compare, dref, "discontinuous-")
    return _finish(rows, out, "testcase2.csv")


def _comparison(cfg, n, dt_coarse, ref, prefix):
    rows = []
    fine = dt_coarse / 2
    for label, dt_f, dt_p in [("coarse-conforming", dt_coarse, dt_coarse),
                              ("nonconforming", fine, dt_coarse),
                              ("fine-conforming", fine, fine)]:
        run = solve(cfg, n, dt_f, dt_p, exact=ref)
        row = _row(cfg, prefix + label, n, dt_f, dt_p, run, cfg.outer.precondition)
        row["interface_flux"] = float(np.sum(run.problem.stokes.flux(run.result.final.stokes.final)))
        rows.append(row)
        run.result.final.release()
    return rows


def _dump_final(cfg, run: RunOutput, out, tag):
    if out is None or not cfg.vtk:
        return
    from ..subdomain import write_state_vtk
    os.makedirs(out, exist_ok=True)
    write_state_vtk(run.problem.asm_f, run.result.final.stokes.final,
                    os.path.join(out, f"{tag}_stokes.vtk"))
    write_state_vtk(run.problem.asm_p, run.result.final.darcy.final,
                    os.path.join(out, f"{tag}_darcy.vtk"))


def run_experiment(cfg: ExperimentConfig, out=None) -> list:
    """Dispatch on ``cfg.experiment``."""
    drivers = {"single": run_single, "convergence-space": run_convergence_space,
               "convergence-time": run_convergence_time, "gmres-study": run_gmres_count_study,
               "testcase2": run_testcase2}
    return drivers[cfg.experiment](cfg, out)


def interface_defect(result: NewtonResult) -> np.ndarray:
    """Per-slab weak defect of normal-velocity continuity at the final iterate."""
    return np.abs(result.final.residual.values)


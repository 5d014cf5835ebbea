"""Space-time interface problem for the Lagrange multiplier ``lambda``.

``lambda`` is piecewise constant on the fluid time grid with continuous P1
values on the interface.  The residual operator ``Psi`` collects, per fluid
slab, the time integral of the interface normal-velocity mismatch tested
against the multiplier basis; the porous contribution is averaged onto the
fluid grid.
"""
from __future__ import annotations

import csv
import ctypes
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import TaylorHoodAssembler
from .krylov import gmres
from .mesh import Mesh, build_interface_map
from .subdomain import (DarcySubproblem, InnerOptions, ProblemData, StokesSubproblem,
                        SubdomainTrajectory, write_state_vtk)
from .timegrid import PiecewiseConstantTimeField, TimeGrid, project

log = logging.getLogger(__name__)


@dataclass
class OuterConfig:
    newton_maxit: int = 1
    newton_tol: float = 1e-8
    gmres_tol: float = 1e-7
    gmres_maxit: int = 100
    precondition: bool = False

    def __post_init__(self):
        if min(self.newton_tol, self.gmres_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.newton_maxit, self.gmres_maxit) < 1:
            raise ValueError("iteration caps must be at least 1")


class CoupledProblem:
    """Two subdomain problems on matching interface meshes and their own time
    grids.  ``parallel=True`` runs the two subdomain solves of every residual
    or Jacobian application on two threads.

    ``multiplier_grid`` selects the time grid of ``lambda`` and of the
    continuity equation: ``"fluid"`` (the standard choice) or ``"porous"``, in
    which case the Stokes side receives the projection of ``lambda`` and the
    fluid flux is averaged onto the porous grid.
    """

    def __init__(self, mesh_f: Mesh, mesh_p: Mesh, data: ProblemData,
                 grid_f: TimeGrid, grid_p: TimeGrid, inner: InnerOptions | None = None,
                 quad_order: int = 4, parallel: bool = False, multiplier_grid: str = "fluid"):
        if abs(grid_f.T - grid_p.T) > 1e-12 * grid_f.T:
            raise ValueError("the two time grids must share the final time")
        self.interface_map = build_interface_map(mesh_f, mesh_p)
        self.data = data
        self.asm_f = TaylorHoodAssembler(mesh_f, quad_order)
        self.asm_p = TaylorHoodAssembler(mesh_p, quad_order)
        self.stokes = StokesSubproblem(self.asm_f, data, inner)
        self.darcy = DarcySubproblem(self.asm_p, data, inner)
        self.grid_f, self.grid_p = grid_f, grid_p
        if multiplier_grid not in ("fluid", "porous"):
            raise ValueError(f"multiplier_grid must be 'fluid' or 'porous', got {multiplier_grid!r}")
        self.multiplier_grid = multiplier_grid
        self.grid_lambda = grid_f if multiplier_grid == "fluid" else grid_p
        if (multiplier_grid == "fluid" and self.stokes.closed
                and _splits_porous_slab(grid_f, grid_p)):
            # per-slab constants are invisible to a closed fluid box, and the
            # porous side only sees their average over its coarser slab
            raise ValueError("a closed fluid domain needs every fluid breakpoint to be a "
                             "porous breakpoint; the interface problem is singular otherwise")
        self.parallel = parallel
        self._pool = ThreadPoolExecutor(max_workers=2) if parallel else None

    @property
    def n_multiplier(self) -> int:
        return self.asm_f.dofs.n_multiplier

    @property
    def interface_mass(self):
        return self.asm_f.interface_mass

    def zero_field(self) -> PiecewiseConstantTimeField:
        return PiecewiseConstantTimeField.zeros(self.grid_lambda, self.n_multiplier)

    def field_norm(self, h: PiecewiseConstantTimeField) -> float:
        """Time-weighted interface L2 norm."""
        M = self.interface_mass
        return float(np.sqrt(sum(dt * v @ (M @ v) for dt, v in zip(h.grid.steps, h.values))))

    def _both(self, f_fluid, f_porous):
        if self._pool is None:
            return f_fluid(), f_porous()
        a = self._pool.submit(f_fluid)
        b = self._pool.submit(f_porous)
        return a.result(), b.result()

    def _collect(self, fluid_flux, porous_flux) -> PiecewiseConstantTimeField:
        g = self.grid_lambda
        f = project(PiecewiseConstantTimeField(self.grid_f, np.asarray(fluid_flux)), g)
        p = project(PiecewiseConstantTimeField(self.grid_p, np.asarray(porous_flux)), g)
        return PiecewiseConstantTimeField(g, g.steps[:, None] * (f.values + p.values))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def _splits_porous_slab(grid_f: TimeGrid, grid_p: TimeGrid) -> bool:
    tol = 1e-12 * grid_f.T
    bp = grid_p.breakpoints
    inner = grid_f.breakpoints[1:-1]
    return bool(np.any(np.min(np.abs(inner[:, None] - bp[None, :]), axis=1, initial=np.inf) > tol))


@dataclass
class BaseState:
    """Linearization point: ``lambda`` and both subdomain trajectories."""

    lam: PiecewiseConstantTimeField
    stokes: SubdomainTrajectory
    darcy: SubdomainTrajectory
    residual: PiecewiseConstantTimeField
    problem: CoupledProblem
    _const_response: np.ndarray | None = None

    def release(self):
        self.stokes.release()
        self.darcy.release()
        _trim_heap()


def _trim_heap():
    # SuperLU frees its factors in many differently sized blocks; without an
    # explicit trim glibc keeps them and the next Newton step grows the heap.
    try:
        ctypes.CDLL("libc.so.6").malloc_trim(0)
    except (OSError, AttributeError):
        pass


def evaluate_Psi(problem: CoupledProblem, lam: PiecewiseConstantTimeField) -> BaseState:
    """Residual ``Psi(lambda)`` per fluid slab and the subdomain trajectories."""
    if lam.grid != problem.grid_lambda:
        raise ValueError(f"lambda must live on the {problem.multiplier_grid} time grid")
    lam_f = project(lam, problem.grid_f)
    lam_p = project(lam, problem.grid_p)
    stokes, darcy = problem._both(
        lambda: problem.stokes.solve_trajectory(problem.grid_f, lam_f),
        lambda: problem.darcy.solve_trajectory(problem.grid_p, lam_p))
    res = problem._collect([problem.stokes.flux(x) for x in stokes.states],
                           [problem.darcy.flux(x) for x in darcy.states])
    return BaseState(lam, stokes, darcy, res, problem)


def apply_Psi_prime(base: BaseState, h: PiecewiseConstantTimeField) -> PiecewiseConstantTimeField:
    """Directional derivative ``Psi'(lambda) h`` by solving both linearized
    trajectories (the porous one driven by the projection of ``h``)."""
    pb = base.problem
    h_f = project(h, pb.grid_f)
    h_p = project(h, pb.grid_p)
    wf, wp = pb._both(lambda: pb.stokes.solve_linearized(base.stokes, h_f),
                      lambda: pb.darcy.solve_linearized(base.darcy, h_p))
    return pb._collect([pb.stokes.flux(x) for x in wf.states],
                       [pb.darcy.flux(x) for x in wp.states])


def apply_preconditioner(base: BaseState, residual: PiecewiseConstantTimeField
                         ) -> PiecewiseConstantTimeField:
    """Approximate ``Psi'^{-1}`` by the inverse of the linearized Stokes part.

    Each dual slab is turned into nodal normal-velocity data, the Stokes
    problem with that normal velocity is solved and its normal stress
    returned.  If the fluid domain is closed the Stokes part annihilates
    slab-wise constants; those components are then scaled by the diagonal of
    the full operator's response to a constant field.
    """
    pb = base.problem
    if pb.multiplier_grid != "fluid":
        raise NotImplementedError("the preconditioner needs lambda on the fluid time grid")
    M = pb.interface_mass
    steps = pb.grid_f.steps
    g = spla.splu(M.tocsc()).solve((residual.values / steps[:, None]).T).T
    mu = pb.stokes.solve_normal_dirichlet(base.stokes, PiecewiseConstantTimeField(pb.grid_f, g))
    if pb.stokes.closed:
        if base._const_response is None:
            ones = PiecewiseConstantTimeField.constant(pb.grid_f, np.ones(pb.n_multiplier))
            base._const_response = apply_Psi_prime(base, ones).values.sum(axis=1)
        s = base._const_response
        c = residual.values.sum(axis=1) / np.where(s != 0.0, s, 1.0)
        mu = PiecewiseConstantTimeField(pb.grid_f, mu.values + c[:, None])
    return mu


@dataclass
class NewtonIteration:
    k: int
    psi_norm: float
    h_norm: float
    gmres_iterations: int
    gmres_converged: bool
    gmres_history: list


@dataclass
class NewtonResult:
    lam: PiecewiseConstantTimeField
    final: BaseState
    iterations: list = field(default_factory=list)
    converged: bool = False
    initial_residual_norm: float = 0.0

    @property
    def gmres_counts(self):
        return [it.gmres_iterations for it in self.iterations]

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["newton_iteration", "gmres_iteration", "relative_residual"])
            for it in self.iterations:
                for j, r in enumerate(it.gmres_history):
                    w.writerow([it.k, j, f"{r:.10e}"])


def newton_solve(problem: CoupledProblem, lam0: PiecewiseConstantTimeField | None = None,
                 config: OuterConfig | None = None, dump_dir=None) -> NewtonResult:
    """Nested Newton-GMRES iteration on ``Psi(lambda) = 0``.

    Stops when the time-weighted interface L2 norm of the update is below
    ``config.newton_tol`` or after ``config.newton_maxit`` iterations; the
    returned ``final`` state is evaluated at the last iterate.
    """
    config = config or OuterConfig()
    lam = problem.zero_field() if lam0 is None else lam0.copy()
    base = evaluate_Psi(problem, lam)
    result = NewtonResult(lam=lam, final=base,
                          initial_residual_norm=float(np.linalg.norm(base.residual.values)))
    grid = problem.grid_lambda
    for k in range(config.newton_maxit):
        psi_norm = float(np.linalg.norm(base.residual.values))
        if psi_norm == 0.0:
            result.converged = True
            result.iterations.append(NewtonIteration(k, 0.0, 0.0, 0, True, [0.0]))
            log.info("newton %d |Psi|=0", k)
            break

        def matvec(v, base=base):
            return apply_Psi_prime(base, PiecewiseConstantTimeField.from_flat(grid, v)).ravel()

        precond = None
        if config.precondition:
            def precond(v, base=base):
                return apply_preconditioner(
                    base, PiecewiseConstantTimeField.from_flat(grid, v)).ravel()

        sol = gmres(matvec, -base.residual.ravel(), tol=config.gmres_tol,
                    maxit=config.gmres_maxit, precond=precond)
        h = PiecewiseConstantTimeField.from_flat(grid, sol.x)
        h_norm = problem.field_norm(h)
        result.iterations.append(NewtonIteration(k, psi_norm, h_norm, sol.iterations,
                                                 sol.converged, sol.history))
        log.info("newton %d |Psi|=%.3e |h|=%.3e gmres=%d", k, psi_norm, h_norm, sol.iterations)
        if not sol.converged:
            log.warning("GMRES stopped at maxit=%d (relative residual %.2e)",
                        config.gmres_maxit, sol.relative_residual)
        lam = lam + h
        base.release()
        base = evaluate_Psi(problem, lam)
        if h_norm <= config.newton_tol:
            result.converged = True
            break
    result.lam = lam
    result.final = base
    if dump_dir is not None:
        write_trajectory_vtk(base.stokes, dump_dir)
        write_trajectory_vtk(base.darcy, dump_dir)
    return result


def write_trajectory_vtk(traj: SubdomainTrajectory, dump_dir) -> None:
    os.makedirs(dump_dir, exist_ok=True)
    for m, x in enumerate(traj.states):
        write_state_vtk(traj.problem.asm, x,
                        os.path.join(dump_dir, f"{traj.problem.name}_{m + 1:04d}.vtk"))

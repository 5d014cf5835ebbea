"""Global-in-time solvers for the Stokes and Darcy subproblems.

Each subproblem is marched with backward Euler over its own time grid and is
driven by piecewise-constant-in-time interface data.  Nonlinear steps are
solved by damped Newton; the Jacobians at the converged states are kept on
the trajectory so that the linearized (Newton-correction) problems reuse
them.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import (Factorization, SingularSystemError, TaylorHoodAssembler,
                       assemble_darcy_system, assemble_stokes_system, as_function)
from .timegrid import PiecewiseConstantTimeField, TimeGrid
from .viscosity import CrossModelParams

log = logging.getLogger(__name__)


class InnerSolverError(RuntimeError):
    def __init__(self, subdomain, step, residual):
        super().__init__(f"{subdomain}: Newton did not converge at step {step} "
                         f"(residual {residual:.3e})")
        self.step = step
        self.residual = residual


@dataclass
class ProblemData:
    """Physical parameters, sources and boundary/initial data.

    All functions take ``(x, y, t)`` (arrays) and may be replaced by
    constants.  Vector functions return a pair ``(fx, fy)``.
    """

    fluid: CrossModelParams = field(default_factory=CrossModelParams)
    porous: CrossModelParams = field(default_factory=CrossModelParams)
    kappa: float = 1.0
    S_p: float = 1.0
    c_bjs: float = 1.0
    eta: float = 0.0
    body_force: object = None
    mass_source: object = None
    sink_source: object = None
    momentum_source: object = None
    # added to lambda in the Stokes normal-stress datum (manufactured solutions)
    interface_stress_jump: object = None
    fluid_velocity_bc: object = None
    porous_velocity_bc: object = None
    # side -> prescribed pressure (normal stress) entering as a natural condition
    fluid_pressure_sides: dict = field(default_factory=dict)
    porous_pressure_sides: dict = field(default_factory=dict)
    u_f0: object = None
    p_p0: object = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        for name in ("S_p", "c_bjs", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class InnerOptions:
    tol: float = 1e-10
    maxit: int = 20
    residual_tol: float = 1e-9
    max_halvings: int = 5


class StepOperator:
    """Linearized step matrix at a converged state, factorized on demand."""

    def __init__(self, system, dt, quasi_definite=False):
        self.matrix = system.matrix
        self.free = system.free
        self.dt = dt
        self.quasi_definite = quasi_definite
        self._factor = None
        self._bordered = None

    @property
    def factor(self) -> Factorization:
        if self._factor is None:
            self._factor = Factorization(self.matrix, self.free, self.quasi_definite)
        return self._factor

    def release(self):
        self._factor = None
        self._bordered = None


@dataclass
class SubdomainTrajectory:
    """States ``states[m]`` (full ``[u, p]`` vectors) on the intervals of
    ``grid``, with the initial state and, for base trajectories, the step
    operators of the Newton linearization."""

    grid: TimeGrid
    states: list
    initial: np.ndarray
    problem: object = None
    operators: list | None = None
    inner_iterations: list = field(default_factory=list)

    def velocity(self, m):
        return self.states[m][:self.problem.asm.dofs.n_velocity]

    def pressure(self, m):
        return self.states[m][self.problem.asm.dofs.n_velocity:]

    @property
    def final(self):
        return self.states[-1]

    def release(self):
        for op in self.operators or ():
            op.release()


class _Subproblem:
    name = "subdomain"

    def __init__(self, asm: TaylorHoodAssembler, data: ProblemData, inner: InnerOptions | None):
        self.asm = asm
        self.data = data
        self.inner = inner or InnerOptions()
        self._linear_factors = {}

    # step matrices are symmetric quasi-definite (see Factorization)
    quasi_definite = False

    @property
    def params(self) -> CrossModelParams:
        raise NotImplementedError

    def flux(self, x) -> np.ndarray:
        """Interface dual vector ``int (u . n) zeta_i``."""
        return self.asm.interface_coupling @ x[:self.asm.dofs.n_velocity]

    def _factorize(self, system, dt):
        if not self.params.is_linear:
            return Factorization(system.matrix, system.free, self.quasi_definite)
        fac = self._linear_factors.get(dt)
        if fac is None:
            fac = self._linear_factors[dt] = Factorization(system.matrix, system.free,
                                                           self.quasi_definite)
        return fac

    def _newton_step(self, m, x_prev, t, dt, lam):
        opts = self.inner
        x = x_prev.copy()
        system = self.step_system(x, x_prev, t, dt, lam)
        x[~system.free] = system.values[~system.free]
        scale = max(1.0, np.linalg.norm(system.rhs[system.free]))
        res = np.linalg.norm(system.residual(x))
        its = 0
        converged = False
        while its < opts.maxit:
            if res <= opts.residual_tol * scale:
                converged = True
                break
            x_new = self._factorize(system, dt).solve(system.rhs, system.values)
            delta = x_new - x
            alpha = 1.0
            for _ in range(opts.max_halvings + 1):
                x_try = x + alpha * delta
                sys_try = self.step_system(x_try, x_prev, t, dt, lam)
                res_try = np.linalg.norm(sys_try.residual(x_try))
                if res_try < res or res_try <= opts.residual_tol * scale:
                    break
                alpha *= 0.5
            its += 1
            x, system, res = x_try, sys_try, res_try
            if np.linalg.norm(alpha * delta) <= opts.tol * max(np.linalg.norm(x), 1e-300):
                converged = True
                break
        if not converged:
            raise InnerSolverError(self.name, m, res)
        return x, system, its

    def solve_trajectory(self, grid: TimeGrid, lam: PiecewiseConstantTimeField,
                         dump_dir=None) -> SubdomainTrajectory:
        if lam.grid != grid:
            raise ValueError(f"{self.name}: interface data lives on another time grid")
        x = self.initial_state()
        traj = SubdomainTrajectory(grid=grid, states=[], initial=x.copy(), problem=self,
                                   operators=[])
        t_k = grid.breakpoints
        for m in range(grid.n):
            dt = t_k[m + 1] - t_k[m]
            x, system, its = self._newton_step(m, x, t_k[m + 1], dt, lam.values[m])
            traj.states.append(x)
            traj.inner_iterations.append(its)
            prev = traj.operators[-1] if traj.operators else None
            if self.params.is_linear and prev is not None and prev.dt == dt:
                traj.operators.append(prev)
            else:
                op = StepOperator(system, dt, self.quasi_definite)
                if self.params.is_linear and dt in self._linear_factors:
                    op._factor = self._linear_factors[dt]
                traj.operators.append(op)
            if dump_dir is not None:
                write_state_vtk(self.asm, x, os.path.join(dump_dir, f"{self.name}_{m + 1:04d}.vtk"))
        return traj

    def solve_linearized(self, base: SubdomainTrajectory,
                         h: PiecewiseConstantTimeField) -> SubdomainTrajectory:
        if h.grid != base.grid:
            raise ValueError(f"{self.name}: correction lives on another time grid")
        w = np.zeros(self.asm.dofs.n_total)
        traj = SubdomainTrajectory(grid=base.grid, states=[], initial=w.copy(), problem=self)
        for m, op in enumerate(base.operators):
            w = op.factor.solve(self.linear_rhs(w, h.values[m], op.dt))
            traj.states.append(w)
        return traj


class StokesSubproblem(_Subproblem):
    """Stokes flow with the Neumann interface datum ``lambda``."""

    name = "stokes"

    @property
    def params(self):
        return self.data.fluid

    @property
    def closed(self) -> bool:
        """True when the interface is the only natural boundary (pressure is
        then fixed by lambda alone and the normal-velocity problem is singular)."""
        return not self.data.fluid_pressure_sides

    def initial_state(self):
        d = self.asm.dofs
        u0 = self.asm.interpolate_velocity(self.data.u_f0, 0.0)
        return np.concatenate([u0, np.zeros(d.n_pressure)])

    def step_system(self, x_lin, x_prev, t, dt, lam):
        d = self.data
        return assemble_stokes_system(
            self.asm, d.fluid, d.c_bjs, dt, x_prev, lam, t, u_lin=x_lin,
            body_force=d.body_force, mass_source=d.mass_source,
            stress_jump=d.interface_stress_jump, dirichlet_velocity=d.fluid_velocity_bc,
            pressure_sides=d.fluid_pressure_sides)

    def linear_rhs(self, w_prev, h, dt):
        asm = self.asm
        nv = asm.dofs.n_velocity
        rhs = np.zeros(asm.dofs.n_total)
        rhs[:nv] = asm.velocity_mass @ w_prev[:nv] / dt - asm.interface_coupling.T @ h
        return rhs

    def _bordered_factor(self, op: StepOperator):
        """Factor of the linearized step with the interface normal velocity
        imposed through a multiplier ``mu``; bordered by ``(M_gamma 1)^T mu = 0``
        when the fluid domain is closed."""
        if op._bordered is not None:
            return op._bordered
        asm = self.asm
        free = op.free
        nf = int(free.sum())
        C = asm.interface_coupling
        Cf = sp.hstack([C, sp.csr_matrix((C.shape[0], asm.dofs.n_pressure))]).tocsr()[:, free]
        K = op.matrix[free][:, free]
        blocks = [[K, Cf.T], [Cf, None]]
        if self.closed:
            z = sp.csr_matrix(asm.interface_mass @ np.ones(C.shape[0]))
            blocks = [[K, Cf.T, None], [Cf, None, z.T], [None, z, None]]
        big = sp.bmat(blocks, format="csc")
        op._bordered = (Factorization(big, np.ones(big.shape[0], dtype=bool)), nf)
        return op._bordered

    def solve_normal_dirichlet(self, base: SubdomainTrajectory,
                               g: PiecewiseConstantTimeField) -> PiecewiseConstantTimeField:
        """Apply the inverse of the linearized Stokes Neumann-to-normal-velocity
        map: impose ``w . n = g`` (weakly, nodal P1 data per slab) and return
        the interface multiplier ``mu`` (the normal stress) per slab."""
        asm = self.asm
        ng = asm.dofs.n_multiplier
        Mg = asm.interface_mass
        w = np.zeros(asm.dofs.n_total)
        out = np.zeros((base.grid.n, ng))
        for m, op in enumerate(base.operators):
            fac, nf = self._bordered_factor(op)
            rhs = np.zeros(fac.lu.shape[0])
            full = self.linear_rhs(w, np.zeros(ng), op.dt)
            rhs[:nf] = full[op.free]
            rhs[nf:nf + ng] = Mg @ g.values[m]
            sol = fac.solve_free(rhs)
            w = np.zeros(asm.dofs.n_total)
            w[op.free] = sol[:nf]
            out[m] = sol[nf:nf + ng]
        return PiecewiseConstantTimeField(base.grid, out)


class DarcySubproblem(_Subproblem):
    """Mixed Darcy flow with the Dirichlet interface datum ``p = lambda``."""

    name = "darcy"

    @property
    def quasi_definite(self) -> bool:
        return self.data.S_p > 0

    @property
    def params(self):
        return self.data.porous

    def initial_state(self):
        d = self.asm.dofs
        p0 = self.asm.interpolate_pressure(self.data.p_p0, 0.0)
        return np.concatenate([np.zeros(d.n_velocity), p0])

    def step_system(self, x_lin, x_prev, t, dt, lam):
        d = self.data
        nv = self.asm.dofs.n_velocity
        return assemble_darcy_system(
            self.asm, d.porous, d.kappa, d.S_p, d.eta, dt, x_prev[nv:], lam, t,
            u_lin=x_lin, sink_source=d.sink_source, momentum_source=d.momentum_source,
            flux_velocity=d.porous_velocity_bc, pressure_sides=d.porous_pressure_sides)

    def linear_rhs(self, w_prev, h, dt):
        asm = self.asm
        nv = asm.dofs.n_velocity
        rhs = np.zeros(asm.dofs.n_total)
        rhs[:nv] = -(asm.interface_coupling.T @ h)
        rhs[nv:] = -(self.data.S_p / dt) * (asm.pressure_mass @ w_prev[nv:])
        return rhs


def solve_stokes_trajectory(problem: StokesSubproblem, lam, dump_dir=None):
    return problem.solve_trajectory(lam.grid, lam, dump_dir=dump_dir)


def solve_darcy_trajectory(problem: DarcySubproblem, lam_p, dump_dir=None):
    return problem.solve_trajectory(lam_p.grid, lam_p, dump_dir=dump_dir)


def solve_linearized_stokes_trajectory(base: SubdomainTrajectory, h_field):
    return base.problem.solve_linearized(base, h_field)


def solve_linearized_darcy_trajectory(base: SubdomainTrajectory, h_field_p):
    return base.problem.solve_linearized(base, h_field_p)


def solve_stokes_normal_dirichlet_trajectory(base: SubdomainTrajectory, g):
    return base.problem.solve_normal_dirichlet(base, g)


def write_state_vtk(asm: TaylorHoodAssembler, x, path) -> None:
    d = asm.dofs
    nv = asm.mesh.n_vertices
    u = np.column_stack([x[:nv], x[d.n_nodes:d.n_nodes + nv]])
    asm.mesh.to_vtk(path, {"velocity": u, "pressure": x[d.n_velocity:]})

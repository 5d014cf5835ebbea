"""Taylor-Hood (P2 velocity / P1 pressure) assembly on a structured mesh.

Velocity coefficient vectors are blocked by component: entry
``c * n_nodes + k`` is component ``c`` at quadratic node ``k`` (vertices first,
then edge midpoints).  A full step unknown is ``[velocity, pressure]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import SIDE_NORMALS, Mesh
from .quadrature import (line_rule, p1_basis, p1_line_basis, p2_basis,
                         p2_line_basis, triangle_rule)
from .viscosity import CrossModelParams, nu, nu_prime_coeff


class SingularSystemError(RuntimeError):
    """Raised when a sparse system is structurally or numerically singular."""


def as_function(f, ncomp=1):
    """Wrap constants and ``None`` as callables of ``(x, y, t)``."""
    if f is None:
        f = 0.0
    if callable(f):
        return f
    c = np.asarray(f, dtype=float)

    def const(x, y, t):
        shape = np.broadcast(x, y).shape
        if ncomp == 1:
            return np.full(shape, float(c))
        return tuple(np.full(shape, float(ci)) for ci in np.broadcast_to(c, (ncomp,)))

    return const


def _vec(f, x, y, t):
    fx, fy = f(x, y, t)
    return (np.broadcast_to(fx, np.broadcast(x, y).shape),
            np.broadcast_to(fy, np.broadcast(x, y).shape))


class DofMap:
    """Degree-of-freedom numbering of the Taylor-Hood pair and the interface
    multiplier space (continuous P1 on the interface vertices)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nv, ne = mesh.n_vertices, mesh.n_edges
        self.n_nodes = nv + ne
        self.n_velocity = 2 * self.n_nodes
        self.n_pressure = nv
        self.n_total = self.n_velocity + self.n_pressure
        self.element_nodes = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
        self.element_velocity_dofs = np.hstack(
            [self.element_nodes, self.element_nodes + self.n_nodes])
        mid = mesh.vertices[mesh.edges].mean(axis=1)
        self.node_coords = np.vstack([mesh.vertices, mid])

        if mesh.interface_side is not None:
            self.interface_vertices = mesh.side_vertices(mesh.interface_side)
            self.interface_edge_nodes = self.side_edge_nodes(mesh.interface_side)
        else:
            self.interface_vertices = np.zeros(0, dtype=int)
            self.interface_edge_nodes = np.zeros((0, 3), dtype=int)
        self.n_multiplier = len(self.interface_vertices)
        pos = {int(v): i for i, v in enumerate(self.interface_vertices)}
        self.interface_edge_multipliers = np.array(
            [[pos[int(a)], pos[int(b)]] for a, b, _ in self.interface_edge_nodes],
            dtype=int).reshape(-1, 2)

    def side_edge_nodes(self, side: str) -> np.ndarray:
        """(n, 3) array of (start vertex, end vertex, midpoint node) per edge,
        ordered by arc length along the side."""
        mesh = self.mesh
        e = mesh.side_edges(side)
        ab = mesh.edges[e].copy()
        axis = 0 if side in ("bottom", "top") else 1
        swap = mesh.vertices[ab[:, 0], axis] > mesh.vertices[ab[:, 1], axis]
        ab[swap] = ab[swap][:, ::-1]
        return np.column_stack([ab, mesh.n_vertices + e])

    def side_nodes(self, side: str) -> np.ndarray:
        return np.unique(self.side_edge_nodes(side))

    def velocity_dofs(self, nodes, comp=None) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=int)
        if comp is None:
            return np.concatenate([nodes, nodes + self.n_nodes])
        return nodes + comp * self.n_nodes

    def pressure_slice(self) -> slice:
        return slice(self.n_velocity, self.n_total)


class _Pattern:
    """Sparsity pattern with a precomputed COO -> CSR scatter map."""

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        key = rows * shape[1] + cols
        uniq, self.inverse = np.unique(key, return_inverse=True)
        self.inverse = self.inverse.ravel()
        self.indices = (uniq % shape[1]).astype(np.int32)
        counts = np.bincount(uniq // shape[1], minlength=shape[0])
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.shape = shape
        self.nnz = len(uniq)

    def matrix(self, values) -> sp.csr_matrix:
        data = np.bincount(self.inverse, weights=np.asarray(values).ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


class _ElementGeometry:
    def __init__(self, mesh: Mesh, order: int):
        pts, w = triangle_rule(order)
        self.points, self.weights = pts, w
        self.phi, dphi_ref = p2_basis(pts)
        self.psi, _ = p1_basis(pts)
        p = mesh.vertices[mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0], inv[:, 1, 1] = jac[:, 1, 1] / det, jac[:, 0, 0] / det
        inv[:, 0, 1], inv[:, 1, 0] = -jac[:, 0, 1] / det, -jac[:, 1, 0] / det
        self.qw = np.abs(det)[:, None] * w[None, :]
        # grad phi = J^{-T} grad_ref phi
        self.dphi = np.einsum("eji,qkj->eqki", inv, dphi_ref)
        self.xq = np.einsum("eij,qj->eqi", jac, pts) + p[:, 0][:, None, :]
        nt, nq = self.qw.shape
        zero = np.zeros((nt, nq, 6))
        dx, dy = self.dphi[..., 0], self.dphi[..., 1]
        self.Dxx = np.concatenate([dx, zero], axis=2)
        self.Dyy = np.concatenate([zero, dy], axis=2)
        self.Dxy = 0.5 * np.concatenate([dy, dx], axis=2)
        self.div = self.Dxx + self.Dyy


class TaylorHoodAssembler:
    """Element loops (vectorized over elements) for one subdomain mesh.

    ``quad_order`` is the polynomial exactness of the rule used for matrices
    and nonlinear forms; ``load_order`` the one used for source terms.
    """

    def __init__(self, mesh: Mesh, quad_order: int = 4, load_order: int = 6):
        self.mesh = mesh
        self.dofs = DofMap(mesh)
        self.quad_order = quad_order
        self.geo = _ElementGeometry(mesh, quad_order)
        self.load_geo = self.geo if load_order == quad_order else _ElementGeometry(mesh, load_order)
        d = self.dofs
        ev = d.element_velocity_dofs
        tri = mesh.triangles
        self._vv = _Pattern(np.repeat(ev, 12, axis=1), np.tile(ev, (1, 12)),
                            (d.n_velocity, d.n_velocity))
        self._pv = _Pattern(np.repeat(tri, 12, axis=1), np.tile(ev, (1, 3)),
                            (d.n_pressure, d.n_velocity))
        self._pp = _Pattern(np.repeat(tri, 3, axis=1), np.tile(tri, (1, 3)),
                            (d.n_pressure, d.n_pressure))
        g = self.geo
        self._stiff = (np.einsum("eqi,eqj->eqij", g.Dxx, g.Dxx)
                       + np.einsum("eqi,eqj->eqij", g.Dyy, g.Dyy)
                       + 2.0 * np.einsum("eqi,eqj->eqij", g.Dxy, g.Dxy))

    # ---------------------------------------------------------------- scatter
    def _scatter_velocity(self, local):
        return np.bincount(self.dofs.element_velocity_dofs.ravel(), weights=local.ravel(),
                           minlength=self.dofs.n_velocity)

    def _scatter_pressure(self, local):
        return np.bincount(self.mesh.triangles.ravel(), weights=local.ravel(),
                           minlength=self.dofs.n_pressure)

    # ------------------------------------------------------ constant matrices
    @cached_property
    def velocity_mass(self) -> sp.csr_matrix:
        g = self.geo
        m = np.einsum("eq,qa,qb->eab", g.qw, g.phi, g.phi)
        loc = np.zeros((len(m), 12, 12))
        loc[:, :6, :6] = m
        loc[:, 6:, 6:] = m
        return self._vv.matrix(loc)

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        """``B[q, v] = (psi_q, div v)``."""
        g = self.geo
        return self._pv.matrix(np.einsum("eq,qa,eqk->eak", g.qw, g.psi, g.div))

    @cached_property
    def pressure_mass(self) -> sp.csr_matrix:
        g = self.geo
        return self._pp.matrix(np.einsum("eq,qa,qb->eab", g.qw, g.psi, g.psi))

    @cached_property
    def grad_div(self) -> sp.csr_matrix:
        g = self.geo
        return self._vv.matrix(np.einsum("eq,eqi,eqj->eij", g.qw, g.div, g.div))

    # ---------------------------------------------------- interface operators
    def _edge_data(self, edge_nodes):
        s, w = line_rule(3)
        x = self.dofs.node_coords
        a, b = x[edge_nodes[:, 0]], x[edge_nodes[:, 1]]
        length = np.linalg.norm(b - a, axis=1)
        pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        return s, w, length, pts, (b - a) / length[:, None]

    @cached_property
    def interface_normal(self) -> np.ndarray:
        return SIDE_NORMALS[self.mesh.interface_side]

    @cached_property
    def interface_coupling(self) -> sp.csr_matrix:
        """``C[i, v] = integral over the interface of zeta_i (v . n)`` with the
        outward normal of this subdomain; shape (n_multiplier, n_velocity)."""
        d = self.dofs
        if self.mesh.interface_side is None:
            return sp.csr_matrix((d.n_multiplier, d.n_velocity))
        en = d.interface_edge_nodes
        s, w, length, _, _ = self._edge_data(en)
        loc = np.einsum("q,qi,qk->ik", w, p1_line_basis(s), p2_line_basis(s))
        n = self.interface_normal
        rows, cols, vals = [], [], []
        for c in range(2):
            if n[c] == 0.0:
                continue
            rows.append(np.repeat(d.interface_edge_multipliers, 3, axis=1))
            cols.append(np.tile(en + c * d.n_nodes, (1, 2)))
            vals.append(n[c] * length[:, None] * loc.reshape(1, -1))
        return sp.csr_matrix((np.concatenate(vals).ravel(),
                              (np.concatenate(rows).ravel(), np.concatenate(cols).ravel())),
                             shape=(d.n_multiplier, d.n_velocity))

    @cached_property
    def interface_tangential_mass(self) -> sp.csr_matrix:
        """``(u . t, v . t)`` on the interface."""
        d = self.dofs
        en = d.interface_edge_nodes
        s, w, length, _, tang = self._edge_data(en)
        loc = np.einsum("q,qi,qk->ik", w, p2_line_basis(s), p2_line_basis(s))
        rows, cols, vals = [], [], []
        for c in range(2):
            for e in range(2):
                tt = tang[:, c] * tang[:, e]
                if not np.any(tt):
                    continue
                rows.append(np.repeat(en + c * d.n_nodes, 3, axis=1))
                cols.append(np.tile(en + e * d.n_nodes, (1, 3)))
                vals.append((tt * length)[:, None] * loc.reshape(1, -1))
        if not vals:
            return sp.csr_matrix((d.n_velocity, d.n_velocity))
        return sp.csr_matrix((np.concatenate(vals).ravel(),
                              (np.concatenate(rows).ravel(), np.concatenate(cols).ravel())),
                             shape=(d.n_velocity, d.n_velocity))

    @cached_property
    def interface_mass(self) -> sp.csr_matrix:
        return interface_mass_matrix(self)

    def side_normal_load(self, side: str, g, t: float) -> np.ndarray:
        """Velocity load ``-(g, v . n)`` over ``side`` for a scalar datum g."""
        d = self.dofs
        en = d.side_edge_nodes(side)
        s, w, length, pts, _ = self._edge_data(en)
        gv = np.broadcast_to(as_function(g)(pts[..., 0], pts[..., 1], t), pts.shape[:2])
        loc = np.einsum("eq,q,qk->ek", gv, w, p2_line_basis(s)) * length[:, None]
        n = SIDE_NORMALS[side]
        out = np.zeros(d.n_velocity)
        for c in range(2):
            if n[c] != 0.0:
                np.add.at(out, en + c * d.n_nodes, -n[c] * loc)
        return out

    # ---------------------------------------------------------------- loads
    def vector_load(self, f, t: float) -> np.ndarray:
        """``(f, v)`` for a vector function ``f(x, y, t) -> (fx, fy)``."""
        g = self.load_geo
        fx, fy = _vec(as_function(f, 2), g.xq[..., 0], g.xq[..., 1], t)
        loc = np.concatenate([np.einsum("eq,eq,qa->ea", g.qw, fx, g.phi),
                              np.einsum("eq,eq,qa->ea", g.qw, fy, g.phi)], axis=1)
        return self._scatter_velocity(loc)

    def scalar_load(self, f, t: float) -> np.ndarray:
        """``(f, q)`` against the pressure basis."""
        g = self.load_geo
        fv = np.broadcast_to(as_function(f)(g.xq[..., 0], g.xq[..., 1], t), g.qw.shape)
        return self._scatter_pressure(np.einsum("eq,eq,qa->ea", g.qw, fv, g.psi))

    # ----------------------------------------------------- nonlinear forms
    def strain_at_quadrature(self, u):
        g = self.geo
        ue = u[self.dofs.element_velocity_dofs]
        return (np.einsum("eqk,ek->eq", g.Dxx, ue), np.einsum("eqk,ek->eq", g.Dyy, ue),
                np.einsum("eqk,ek->eq", g.Dxy, ue))

    def stokes_viscous(self, u, params: CrossModelParams, newton: bool = True):
        """Return ``(N(u), J)`` with ``N(u)_i = (nu(|D u|) D u, D phi_i)`` and
        ``J`` its Gateaux derivative (Picard matrix if ``newton`` is False)."""
        g = self.geo
        exx, eyy, exy = self.strain_at_quadrature(u)
        dmag = np.sqrt(exx ** 2 + eyy ** 2 + 2.0 * exy ** 2)
        wnu = g.qw * nu(dmag, params)
        s = exx[..., None] * g.Dxx + eyy[..., None] * g.Dyy + 2.0 * exy[..., None] * g.Dxy
        vec = self._scatter_velocity(np.einsum("eq,eqk->ek", wnu, s))
        loc = np.einsum("eq,eqij->eij", wnu, self._stiff)
        if newton and not params.is_linear:
            c = g.qw * nu_prime_coeff(dmag, params)
            loc += np.einsum("eq,eqi,eqj->eij", c, s, s)
        return vec, self._vv.matrix(loc)

    def velocity_at_quadrature(self, u):
        g = self.geo
        ue = u[self.dofs.element_velocity_dofs]
        return ue[:, :6] @ g.phi.T, ue[:, 6:] @ g.phi.T

    def darcy_viscous(self, u, params: CrossModelParams, kappa: float, newton: bool = True):
        """Return ``(N(u), J)`` for ``(nu_eff(|u|) u / kappa, v)``."""
        g = self.geo
        ux, uy = self.velocity_at_quadrature(u)
        mag = np.sqrt(ux ** 2 + uy ** 2)
        wnu = g.qw * nu(mag, params) / kappa
        s = np.concatenate([ux[..., None] * g.phi[None], uy[..., None] * g.phi[None]], axis=2)
        vec = self._scatter_velocity(np.einsum("eq,eqk->ek", wnu, s))
        m = np.einsum("eq,qa,qb->eab", wnu, g.phi, g.phi)
        loc = np.zeros((len(m), 12, 12))
        loc[:, :6, :6] = m
        loc[:, 6:, 6:] = m
        if newton and not params.is_linear:
            c = g.qw * nu_prime_coeff(mag, params) / kappa
            loc += np.einsum("eq,eqi,eqj->eij", c, s, s)
        return vec, self._vv.matrix(loc)

    # ------------------------------------------------------ interpolation
    def interpolate_velocity(self, f, t: float) -> np.ndarray:
        x = self.dofs.node_coords
        fx, fy = _vec(as_function(f, 2), x[:, 0], x[:, 1], t)
        return np.concatenate([fx, fy]).astype(float)

    def interpolate_pressure(self, f, t: float) -> np.ndarray:
        x = self.mesh.vertices
        return np.broadcast_to(as_function(f)(x[:, 0], x[:, 1], t), (len(x),)).astype(float)

    def interpolate_multiplier(self, f, t: float) -> np.ndarray:
        x = self.mesh.vertices[self.dofs.interface_vertices]
        return np.broadcast_to(as_function(f)(x[:, 0], x[:, 1], t), (len(x),)).astype(float)


# ---------------------------------------------------------------- systems
@dataclass
class SparseSystem:
    """Full-size system with essential dofs flagged.

    ``values`` holds the prescribed values on non-free dofs (entries on free
    dofs are ignored)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    values: np.ndarray

    def residual(self, x) -> np.ndarray:
        """Free-row residual ``(A x - b)[free]``."""
        return (self.matrix @ x - self.rhs)[self.free]


PIVOT_TOL = 1e-13


class Factorization:
    """Sparse LU of the free-free block, reusable for many right-hand sides.

    ``quasi_definite=True`` declares the block symmetric with a positive
    definite leading and a negative definite trailing block (mixed Darcy with
    storage).  Such matrices factor stably in any symmetric order, so the
    minimum-degree symmetric mode without pivoting is used; it needs about a
    third of the fill of the default column ordering.
    """

    def __init__(self, matrix, free, quasi_definite: bool = False):
        self.free = np.asarray(free, dtype=bool)
        A = sp.csr_matrix(matrix)
        rows = A[self.free]
        Aff = rows[:, self.free].tocsc()
        self.AfD = rows[:, ~self.free].tocsr() if np.any(~self.free) else None
        opts = {}
        if quasi_definite:
            opts = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                        options=dict(SymmetricMode=True))
        try:
            self.lu = spla.splu(Aff, **opts)
        except RuntimeError as exc:
            raise SingularSystemError(f"structurally or exactly singular: {exc}") from None
        udiag = np.abs(self.lu.U.diagonal())
        if udiag.size and udiag.min() <= PIVOT_TOL * udiag.max():
            raise SingularSystemError(
                f"numerically singular: pivot ratio {udiag.min() / udiag.max():.2e}")

    def solve_free(self, b_free) -> np.ndarray:
        return self.lu.solve(np.asarray(b_free, dtype=float))

    def solve(self, rhs, values=None) -> np.ndarray:
        """Solve with full-size ``rhs``; non-free entries are set to ``values``."""
        n = len(self.free)
        x = np.zeros(n) if values is None else np.array(values, dtype=float)
        b = np.asarray(rhs, dtype=float)[self.free]
        if values is not None and self.AfD is not None:
            b = b - self.AfD @ x[~self.free]
        x[self.free] = self.lu.solve(b)
        return x


def solve_sparse(system: SparseSystem, check: bool = True) -> np.ndarray:
    """Direct solve of ``system``; raises SingularSystemError on singularity or
    if the residual exceeds ``1e-10 (|A| |x| + |b|)``."""
    fac = Factorization(system.matrix, system.free)
    x = fac.solve(system.rhs, system.values)
    if check:
        free = system.free
        A = sp.csr_matrix(system.matrix)[free]
        b = system.rhs[free]
        res = np.linalg.norm(A @ x - b)
        bound = 1e-10 * (spla.norm(A[:, free]) * np.linalg.norm(x[free]) + np.linalg.norm(b))
        if res > bound:
            raise SingularSystemError(f"residual {res:.3e} exceeds {bound:.3e}")
    return x


def interface_mass_matrix(asm: TaylorHoodAssembler) -> sp.csr_matrix:
    """P1 mass matrix on the interface multiplier dofs."""
    d = asm.dofs
    x = asm.mesh.vertices
    rows = d.interface_edge_multipliers
    a, b = x[d.interface_edge_nodes[:, 0]], x[d.interface_edge_nodes[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    loc = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    vals = length[:, None, None] * loc[None]
    return sp.csr_matrix((vals.ravel(), (np.repeat(rows, 2, axis=1).ravel(),
                                         np.tile(rows, (1, 2)).ravel())),
                         shape=(d.n_multiplier, d.n_multiplier))


def interface_trace_residual(asm_f: TaylorHoodAssembler, asm_p: TaylorHoodAssembler,
                             u_f, u_p) -> np.ndarray:
    """Multiplier-space dual vector ``int (u_f . n_f) zeta_i + int (u_p . n_p) zeta_i``."""
    return asm_f.interface_coupling @ u_f[:asm_f.dofs.n_velocity] \
        + asm_p.interface_coupling @ u_p[:asm_p.dofs.n_velocity]


# ------------------------------------------------------ step assemblies
def _velocity_essential(asm, sides, comps):
    d = asm.dofs
    dofs = [d.velocity_dofs(d.side_nodes(s), c) for s in sides for c in comps(s)]
    return np.unique(np.concatenate(dofs)) if dofs else np.zeros(0, dtype=int)


def stokes_essential_dofs(asm, dirichlet_sides):
    return _velocity_essential(asm, dirichlet_sides, lambda s: (0, 1))


def darcy_essential_dofs(asm, noflux_sides):
    return _velocity_essential(asm, noflux_sides,
                               lambda s: (0,) if s in ("left", "right") else (1,))


def _system(asm, matrix, rhs, essential, values):
    free = np.ones(asm.dofs.n_total, dtype=bool)
    free[essential] = False
    vals = np.zeros(asm.dofs.n_total)
    if values is not None:
        vals[essential] = values[essential]
    return SparseSystem(sp.csr_matrix(matrix), rhs, free, vals)


def assemble_stokes_system(asm: TaylorHoodAssembler, params: CrossModelParams, c_bjs: float,
                           dt: float, u_prev, lambda_slab, t: float, *, u_lin=None,
                           body_force=None, mass_source=None, stress_jump=None,
                           dirichlet_sides=None, dirichlet_velocity=None,
                           pressure_sides=None) -> SparseSystem:
    """Backward-Euler step system for the (nonlinear) Stokes subproblem.

    With ``u_lin`` the viscous term is Newton-linearized about ``u_lin``
    (the system is then ``J(u_lin) x = b + (J - A)(u_lin) u_lin``); without it
    the viscosity is frozen at ``u_prev``.  The interface carries the Neumann
    datum ``lambda_slab`` (nodal P1 values), plus ``stress_jump`` if given.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = asm.dofs
    pressure_sides = pressure_sides or {}
    if dirichlet_sides is None:
        dirichlet_sides = [s for s in asm.mesh.exterior_sides() if s not in pressure_sides]
    u_prev = np.asarray(u_prev, dtype=float)[:d.n_velocity]
    state = u_prev if u_lin is None else np.asarray(u_lin, dtype=float)[:d.n_velocity]
    Nvec, J = asm.stokes_viscous(state, params, newton=u_lin is not None)
    A = asm.velocity_mass / dt + J + c_bjs * asm.interface_tangential_mass
    B = asm.divergence
    K = sp.bmat([[A, -B.T], [-B, None]], format="csr")

    rhs_u = asm.velocity_mass @ u_prev / dt + asm.vector_load(body_force, t)
    rhs_u -= asm.interface_coupling.T @ np.asarray(lambda_slab, dtype=float)
    if stress_jump is not None:
        rhs_u += asm.side_normal_load(asm.mesh.interface_side, stress_jump, t)
    for side, pval in pressure_sides.items():
        rhs_u += asm.side_normal_load(side, pval, t)
    if u_lin is not None and not params.is_linear:
        rhs_u += J @ state - Nvec
    rhs_p = -asm.scalar_load(mass_source, t)

    essential = stokes_essential_dofs(asm, dirichlet_sides)
    values = None
    if dirichlet_velocity is not None:
        values = np.concatenate([asm.interpolate_velocity(dirichlet_velocity, t),
                                 np.zeros(d.n_pressure)])
    return _system(asm, K, np.concatenate([rhs_u, rhs_p]), essential, values)


def assemble_darcy_system(asm: TaylorHoodAssembler, params: CrossModelParams, kappa: float,
                          S_p: float, eta_stab: float, dt: float, p_prev, lambda_slab,
                          t: float, *, u_lin=None, u_visc=None, sink_source=None,
                          momentum_source=None, noflux_sides=None, flux_velocity=None,
                          pressure_sides=None) -> SparseSystem:
    """Backward-Euler step system for the mixed (nonlinear) Darcy subproblem.

    The interface Dirichlet datum ``p = lambda_slab`` enters as the natural
    load ``-<lambda, v . n>``; ``noflux_sides`` carry the essential condition
    ``u . n = flux_velocity . n`` (zero by default).  Without ``u_lin`` the
    viscosity is frozen at ``u_visc`` (zero velocity if absent).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    d = asm.dofs
    pressure_sides = pressure_sides or {}
    if noflux_sides is None:
        noflux_sides = [s for s in asm.mesh.exterior_sides() if s not in pressure_sides]
    if u_lin is not None:
        state = np.asarray(u_lin, dtype=float)[:d.n_velocity]
    elif u_visc is not None:
        state = np.asarray(u_visc, dtype=float)[:d.n_velocity]
    else:
        state = np.zeros(d.n_velocity)
    Nvec, J = asm.darcy_viscous(state, params, kappa, newton=u_lin is not None)
    A = J + eta_stab * asm.grad_div if eta_stab else J
    B = asm.divergence
    Mp = asm.pressure_mass
    K = sp.bmat([[A, -B.T], [-B, -(S_p / dt) * Mp]], format="csr")

    rhs_u = asm.vector_load(momentum_source, t) \
        - asm.interface_coupling.T @ np.asarray(lambda_slab, dtype=float)
    for side, pval in pressure_sides.items():
        rhs_u += asm.side_normal_load(side, pval, t)
    if u_lin is not None and not params.is_linear:
        rhs_u += J @ state - Nvec
    p_prev = np.asarray(p_prev, dtype=float)
    rhs_p = -asm.scalar_load(sink_source, t) - (S_p / dt) * (Mp @ p_prev)

    essential = darcy_essential_dofs(asm, noflux_sides)
    values = None
    if flux_velocity is not None:
        values = np.concatenate([asm.interpolate_velocity(flux_velocity, t),
                                 np.zeros(d.n_pressure)])
    return _system(asm, K, np.concatenate([rhs_u, rhs_p]), essential, values)

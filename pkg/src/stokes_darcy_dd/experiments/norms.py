"""Error norms of finite-element fields against closed-form or reference fields."""
from __future__ import annotations

import numpy as np

from ..assembly import TaylorHoodAssembler


def _fe_values(asm: TaylorHoodAssembler, x, geo):
    d = asm.dofs
    ue = x[:d.n_velocity][d.element_velocity_dofs]
    ux, uy = ue[:, :6] @ geo.phi.T, ue[:, 6:] @ geo.phi.T
    grad = np.stack([np.einsum("ea,eqak->eqk", ue[:, :6], geo.dphi),
                     np.einsum("ea,eqak->eqk", ue[:, 6:], geo.dphi)], axis=2)  # (e,q,comp,dir)
    p = x[d.n_velocity:][asm.mesh.triangles] @ geo.psi.T
    return ux, uy, grad, p


def _l2(qw, *sq):
    return float(np.sqrt(np.sum(qw * sum(sq))))


def fluid_errors(asm: TaylorHoodAssembler, x, exact, t: float) -> dict:
    geo = asm.load_geo
    xq, yq = geo.xq[..., 0], geo.xq[..., 1]
    ux, uy, grad, p = _fe_values(asm, x, geo)
    ex, ey = exact.u_f(xq, yq, t)
    (gxx, gxy), (gyx, gyy) = exact.grad_u_f(xq, yq, t)
    l2 = _l2(geo.qw, (ux - ex) ** 2, (uy - ey) ** 2)
    semi = _l2(geo.qw, (grad[..., 0, 0] - gxx) ** 2, (grad[..., 0, 1] - gxy) ** 2,
               (grad[..., 1, 0] - gyx) ** 2, (grad[..., 1, 1] - gyy) ** 2)
    return {"u_f_L2": l2, "u_f_H1semi": semi, "u_f_H1": float(np.hypot(l2, semi)),
            "p_f_L2": _l2(geo.qw, (p - exact.p_f(xq, yq, t)) ** 2)}


def porous_errors(asm: TaylorHoodAssembler, x, exact, t: float) -> dict:
    geo = asm.load_geo
    xq, yq = geo.xq[..., 0], geo.xq[..., 1]
    ux, uy, grad, p = _fe_values(asm, x, geo)
    ex, ey = exact.u_p(xq, yq, t)
    l2 = _l2(geo.qw, (ux - ex) ** 2, (uy - ey) ** 2)
    div = _l2(geo.qw, (grad[..., 0, 0] + grad[..., 1, 1] - exact.div_u_p(xq, yq, t)) ** 2)
    return {"u_p_L2": l2, "u_p_Hdiv": float(np.hypot(l2, div)),
            "p_p_L2": _l2(geo.qw, (p - exact.p_p(xq, yq, t)) ** 2)}


def error_norms(trajectory, exact, t_eval: float) -> dict:
    """Errors of the trajectory state at the grid breakpoint ``t_eval``."""
    bp = trajectory.grid.breakpoints
    k = int(np.argmin(np.abs(bp - t_eval)))
    if abs(bp[k] - t_eval) > 1e-12 * max(1.0, bp[-1]) or k == 0 and not len(trajectory.states):
        raise ValueError(f"t_eval={t_eval} is not a breakpoint of the trajectory grid")
    x = trajectory.initial if k == 0 else trajectory.states[k - 1]
    asm = trajectory.problem.asm
    if trajectory.problem.name == "stokes":
        return fluid_errors(asm, x, exact, t_eval)
    return porous_errors(asm, x, exact, t_eval)


class _FieldAsExact:
    """Wrap finite-element states (of a finer reference) as 'exact' closures.

    Evaluation points must lie in the reference mesh; points are located on
    the structured reference grid directly.
    """

    def __init__(self, asm: TaylorHoodAssembler, x, kind: str):
        self.asm, self.x, self.kind = asm, x, kind

    def _locate(self, xq, yq):
        mesh = self.asm.mesh
        x0, x1, y0, y1 = mesh.bounds
        nx, ny = mesh.shape
        hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
        s = np.clip((xq - x0) / hx, 0, nx * (1 - 1e-14))
        r = np.clip((yq - y0) / hy, 0, ny * (1 - 1e-14))
        i, j = np.floor(s).astype(int), np.floor(r).astype(int)
        fs, fr = s - i, r - j
        upper = fr > fs
        cell = j * nx + i
        tri = 2 * cell + upper
        # lower triangle (v00, v10, v11) maps (xi, eta) to (xi + eta, eta),
        # upper triangle (v00, v11, v01) maps it to (xi, xi + eta)
        xi = np.where(upper, fs, fs - fr)
        eta = np.where(upper, fr - fs, fr)
        return tri, xi, eta

    def _eval(self, xq, yq):
        from ..quadrature import p1_basis, p2_basis
        xq, yq = np.broadcast_arrays(np.asarray(xq, float), np.asarray(yq, float))
        shape = xq.shape
        tri, xi, eta = self._locate(xq.ravel(), yq.ravel())
        pts = np.column_stack([xi, eta])
        phi, dref = p2_basis(pts)
        psi, _ = p1_basis(pts)
        d = self.asm.dofs
        ue = self.x[:d.n_velocity][d.element_velocity_dofs[tri]]
        ux = np.sum(ue[:, :6] * phi, axis=1)
        uy = np.sum(ue[:, 6:] * phi, axis=1)
        p = np.sum(self.x[d.n_velocity:][self.asm.mesh.triangles[tri]] * psi, axis=1)
        verts = self.asm.mesh.vertices[self.asm.mesh.triangles[tri]]
        jac = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=2)
        inv = np.linalg.inv(jac)
        dphi = np.einsum("eji,ekj->eki", inv, dref)
        gx = np.einsum("ea,eak->ek", ue[:, :6], dphi)
        gy = np.einsum("ea,eak->ek", ue[:, 6:], dphi)
        r = lambda a: a.reshape(shape)
        return r(ux), r(uy), (r(gx[:, 0]), r(gx[:, 1])), (r(gy[:, 0]), r(gy[:, 1])), r(p)

    def u(self, x, y, t):
        ux, uy, *_ = self._eval(x, y)
        return ux, uy

    def grad(self, x, y, t):
        _, _, gx, gy, _ = self._eval(x, y)
        return gx, gy

    def div(self, x, y, t):
        _, _, gx, gy, _ = self._eval(x, y)
        return gx[0] + gy[1]

    def p(self, x, y, t):
        return self._eval(x, y)[-1]


class ReferenceSolution:
    """Final-time reference states exposed through the ExactSolution interface."""

    def __init__(self, asm_f, x_f, asm_p, x_p):
        self.fluid = _FieldAsExact(asm_f, x_f, "fluid")
        self.porous = _FieldAsExact(asm_p, x_p, "porous")
        self.u_f, self.grad_u_f, self.p_f = self.fluid.u, self.fluid.grad, self.fluid.p
        self.u_p, self.div_u_p, self.p_p = self.porous.u, self.porous.div, self.porous.p

"""Closed-form solution of the first test case and the sources it implies.

The fluid velocity of this solution is not divergence free and the porous
velocity does not satisfy the plain momentum law, so a mass source, a Darcy
momentum source and an interface normal-stress jump are derived alongside the
usual body force and sink.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from ..subdomain import ProblemData
from ..viscosity import CrossModelParams

X, Y, T = sp.symbols("x y t", real=True)
E = sp.E

FLUID_DOMAIN = (0.0, 1.0, 1.0, 2.0)
POROUS_DOMAIN = (0.0, 1.0, 0.0, 1.0)
INTERFACE_Y = 1.0


def exact_expressions():
    s = 1 + T ** 2
    u_f = sp.Matrix([(Y - 1) ** 2 * X ** 3 * s, -sp.cos(Y) * E * s])
    p_f = (sp.cos(Y) * sp.exp(Y) + Y ** 2 - 2 * Y + 1) * s
    u_p = sp.Matrix([-X * (sp.sin(Y) * E + 2 * (Y - 1)) * s, (-sp.cos(Y) * E + (Y - 1) ** 2) * s])
    p_p = (-sp.sin(Y) * E + sp.cos(X) * sp.exp(Y) + Y ** 2 - 2 * Y + 1) * s
    return u_f, p_f, u_p, p_p


def _cross(d, prm: CrossModelParams):
    if prm.r == 2.0:
        return sp.Float(prm.nu_inf + (prm.nu_0 - prm.nu_inf) / (1 + prm.K))
    return prm.nu_inf + (prm.nu_0 - prm.nu_inf) / (1 + prm.K * d ** sp.nsimplify(2 - prm.r))


def _strain(u):
    g = u.jacobian([X, Y])
    return (g + g.T) / 2


def derived_sources(fluid: CrossModelParams, porous: CrossModelParams, kappa: float, S_p: float):
    """Symbolic sources making the closed-form fields an exact solution."""
    u_f, p_f, u_p, p_p = exact_expressions()
    D = _strain(u_f)
    dmag = sp.sqrt(sum(D[i, j] ** 2 for i in range(2) for j in range(2)))
    stress = _cross(dmag, fluid) * D
    div_stress = sp.Matrix([sp.diff(stress[i, 0], X) + sp.diff(stress[i, 1], Y) for i in range(2)])
    grad_pf = sp.Matrix([sp.diff(p_f, X), sp.diff(p_f, Y)])
    f_f = sp.diff(u_f, T) - div_stress + grad_pf
    g_f = sp.diff(u_f[0], X) + sp.diff(u_f[1], Y)

    umag = sp.sqrt(u_p[0] ** 2 + u_p[1] ** 2)
    grad_pp = sp.Matrix([sp.diff(p_p, X), sp.diff(p_p, Y)])
    g_p = _cross(umag, porous) / kappa * u_p + grad_pp
    f_p = S_p * sp.diff(p_p, T) + sp.diff(u_p[0], X) + sp.diff(u_p[1], Y)

    # fluid normal stress -n.(nu D - p I).n with n = (0, -1), minus the porous pressure
    normal_stress = -_cross(dmag, fluid) * D[1, 1] + p_f
    jump = (normal_stress - p_p).subs(Y, INTERFACE_Y)
    return dict(f_f=f_f, g_f=g_f, f_p=f_p, g_p=g_p, jump=jump)


def _scalar(expr):
    f = sp.lambdify((X, Y, T), expr, "numpy")

    def wrapped(x, y, t):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(f(x, y, t), dtype=float), np.broadcast(x, y).shape)

    return wrapped


def _vector(expr):
    fx, fy = _scalar(expr[0]), _scalar(expr[1])
    return lambda x, y, t: (fx(x, y, t), fy(x, y, t))


def _gradient(expr):
    return _vector(sp.Matrix([sp.diff(expr, X), sp.diff(expr, Y)]))


@dataclass
class ExactSolution:
    u_f: object
    p_f: object
    u_p: object
    p_p: object
    grad_u_f: object  # (x, y, t) -> ((dux/dx, dux/dy), (duy/dx, duy/dy))
    div_u_p: object


def manufactured_case1(r_f: float = 2.0, r_p: float = 2.0, nu_inf: float = 0.5,
                       nu_0: float = 1.5, K: float = 1.0, kappa: float = 1.0,
                       S_p: float = 1.0, eta: float = 10.0, alpha_bjs: float = 1.0):
    """Exact closures and the matching ProblemData for the first test case."""
    fluid = CrossModelParams(nu_inf=nu_inf, nu_0=nu_0, K=K, r=r_f)
    porous = CrossModelParams(nu_inf=nu_inf, nu_0=nu_0, K=K, r=r_p)
    u_f, p_f, u_p, p_p = exact_expressions()
    src = derived_sources(fluid, porous, kappa, S_p)
    uf, up = _vector(u_f), _vector(u_p)
    gx, gy = _gradient(u_f[0]), _gradient(u_f[1])
    exact = ExactSolution(
        u_f=uf, p_f=_scalar(p_f), u_p=up, p_p=_scalar(p_p),
        grad_u_f=lambda x, y, t: (gx(x, y, t), gy(x, y, t)),
        div_u_p=_scalar(sp.diff(u_p[0], X) + sp.diff(u_p[1], Y)))
    data = ProblemData(
        fluid=fluid, porous=porous, kappa=kappa, S_p=S_p,
        c_bjs=alpha_bjs / np.sqrt(kappa), eta=eta,
        body_force=_vector(src["f_f"]), mass_source=_scalar(src["g_f"]),
        sink_source=_scalar(src["f_p"]), momentum_source=_vector(src["g_p"]),
        interface_stress_jump=_scalar(src["jump"]),
        fluid_velocity_bc=uf, porous_velocity_bc=up,
        u_f0=uf, p_p0=_scalar(p_p))
    return exact, data


def exact_lambda(exact: ExactSolution, xs, grid):
    """Interface trace of the porous pressure sampled at the end of each slab."""
    xs = np.asarray(xs, dtype=float)
    return np.array([exact.p_p(xs, np.full_like(xs, INTERFACE_Y), t)
                     for t in grid.breakpoints[1:]])

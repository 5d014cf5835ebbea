"""Second test case: flow through the stacked squares driven by a pressure drop."""
from __future__ import annotations

from ..subdomain import ProblemData
from ..viscosity import CrossModelParams

P_IN = 1.0
P_OUT = 0.0


def pressure_drop_case(fluid: CrossModelParams | None = None,
                       porous: CrossModelParams | None = None, kappa: float = 1.0,
                       S_p: float = 1.0, alpha_bjs: float = 1.0, eta: float = 0.0,
                       discontinuous: bool = False) -> ProblemData:
    """Inflow pressure on top of the fluid box, outflow pressure on the bottom
    of the porous box, walls elsewhere, fluid at rest and ``p_p = P_OUT`` at
    ``t = 0``.  ``discontinuous`` swaps in the jumping parameter set."""
    if discontinuous:
        fluid = CrossModelParams(nu_inf=0.5, nu_0=1.0, K=1.0, r=1.35)
        porous = CrossModelParams(nu_inf=1.0, nu_0=10.0, K=0.001, r=1.35)
    fluid = fluid or CrossModelParams(nu_inf=1.0, nu_0=10.0, K=1.0, r=1.35)
    porous = porous or CrossModelParams(nu_inf=1.0, nu_0=10.0, K=1.0, r=1.35)
    return ProblemData(
        fluid=fluid, porous=porous, kappa=kappa, S_p=S_p,
        c_bjs=alpha_bjs / kappa ** 0.5, eta=eta,
        fluid_pressure_sides={"top": P_IN}, porous_pressure_sides={"bottom": P_OUT},
        u_f0=0.0, p_p0=P_OUT)

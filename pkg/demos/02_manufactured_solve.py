"""One coupled solve of the first test case on nonconforming time grids.

The porous step is half the fluid step.  The outer solver is Newton on the
space-time interface problem for the pressure multiplier lambda, with GMRES
for each Newton correction; every GMRES iteration solves a linearized Stokes
and a linearized Darcy problem over the whole time interval.
"""
import dataclasses
import logging

from stokes_darcy_dd import OuterConfig
from stokes_darcy_dd.experiments.config import defaults
from stokes_darcy_dd.experiments.drivers import interface_defect, solve

logging.basicConfig(level=logging.INFO, format="%(message)s")

cfg = defaults(1)                        # T = 0.01, dt_f = 0.002, dt_p = 0.001
cfg = dataclasses.replace(cfg, fluid=cfg.fluid.replace(r=1.5), porous=cfg.porous.replace(r=1.5),
                          outer=OuterConfig(newton_maxit=6, newton_tol=1e-8))

run = solve(cfg, 8, cfg.dt_f, cfg.dt_p)  # h = 1/8
print("\nNewton iterations:", len(run.result.iterations), "converged:", run.result.converged)
print("GMRES iterations per Newton step:", run.result.gmres_counts)
for k, v in run.errors.items():
    print(f"  {k:11s} {v:.3e}")

# the weak normal-velocity defect per fluid slab after convergence
print("max interface defect:", interface_defect(run.result).max())

# relative GMRES residual history of the first Newton step
hist = run.result.iterations[0].gmres_history
print("GMRES residuals (every 5th):", " ".join(f"{r:.1e}" for r in hist[::5]))

"""GMRES iteration counts with and without the Stokes-based preconditioner.

The preconditioner solves the linearized Stokes problem with prescribed
normal velocity and returns its normal stress.  On this problem it does not
pay off: the Stokes part of the interface operator has the opposite
differential order to the Darcy part, so inverting only the Stokes part
leaves a badly scaled preconditioned operator, and the counts grow faster
than without it.
"""
import dataclasses

from stokes_darcy_dd.experiments.config import defaults
from stokes_darcy_dd.experiments.drivers import run_gmres_count_study

cfg = dataclasses.replace(defaults(1), resolutions=(4, 8, 16), r_values=(2.0,))
rows = run_gmres_count_study(cfg, tol=1e-10)
print(f"{'h':>8} {'precond':>8} {'GMRES':>6} {'converged':>10}")
for r in rows:
    print(f"{r['h']:8.4f} {r['precond']:>8} {r['gmres_iterations']:>6} {str(r['gmres_converged']):>10}")

"""Flow driven by a pressure drop through a fluid box sitting on a porous box.

Pressure 1 on top of the fluid, 0 at the bottom of the porous medium, walls
on the sides.  The fluid is advanced with half the porous step.  The final
fields are written as legacy VTK files for ParaView.
"""
import dataclasses
import os

import numpy as np

from stokes_darcy_dd.experiments.config import defaults
from stokes_darcy_dd.experiments.drivers import solve
from stokes_darcy_dd.subdomain import write_state_vtk

cfg = defaults(2)                                   # T = 1, r = 1.35, nu in [1, 10]
run = solve(cfg, 8, 0.125, 0.25)
final = run.result.final
print("Newton steps:", len(run.result.iterations), "GMRES:", run.result.gmres_counts)

# net flux through the interface at the final time (positive: downwards into the porous box)
flux = np.sum(run.problem.stokes.flux(final.stokes.final))
print(f"interface flux from fluid to porous medium: {flux:.4f}")

asm_f = run.problem.asm_f
nv = asm_f.mesh.n_vertices
uy = final.stokes.final[asm_f.dofs.n_nodes:asm_f.dofs.n_nodes + nv]
print(f"vertical fluid velocity range: [{uy.min():.4f}, {uy.max():.4f}]")

os.makedirs("demo_output", exist_ok=True)
write_state_vtk(asm_f, final.stokes.final, "demo_output/pressure_drop_fluid.vtk")
write_state_vtk(run.problem.asm_p, final.darcy.final, "demo_output/pressure_drop_porous.vtk")
print("wrote demo_output/pressure_drop_{fluid,porous}.vtk")

# the same with the discontinuous parameter set (low porous permeability)
dcfg = dataclasses.replace(cfg, discontinuous=True)
drun = solve(dcfg, 8, 0.125, 0.25)
print(f"discontinuous parameters, interface flux: "
      f"{np.sum(drun.problem.stokes.flux(drun.result.final.stokes.final)):.4f}")

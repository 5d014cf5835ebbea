"""Moving interface data between two time grids.

The fluid and porous subproblems march on their own time grids.  Interface
data is piecewise constant in time, so passing it across is an L2 projection:
each target slab receives the overlap-weighted average of the source slabs.
"""
import numpy as np

from stokes_darcy_dd import PiecewiseConstantTimeField, TimeGrid, project, uniform_grid

coarse = uniform_grid(1.0, 4)                      # slabs of length 0.25
shifted = TimeGrid([0.0, 0.1, 0.45, 0.8, 1.0])     # unrelated breakpoints

# two interface values per slab, think of them as nodal values on the interface
f = PiecewiseConstantTimeField(coarse, [[1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 1.0]])
g = project(f, shifted)
print("values on the shifted grid:\n", g.values)

# the slab [0.1, 0.45] overlaps [0, 0.25] by 0.15 and [0.25, 0.5] by 0.2
print("by hand, first component of slab 2:", (0.15 * 1.0 + 0.2 * 2.0) / 0.35)

# projection keeps time integrals and reproduces constants
print("integrals before/after:", f.integral(), g.integral())
ones = PiecewiseConstantTimeField.constant(coarse, [1.0, 1.0])
print("constants survive:", np.allclose(project(ones, shifted).values, 1.0))

# refining and coming back is the identity when the fine grid nests the coarse one
fine = uniform_grid(1.0, 8)
print("round trip exact:", np.allclose(project(project(f, fine), coarse).values, f.values))

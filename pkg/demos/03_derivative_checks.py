"""Checking the interface Jacobian against the nonlinear residual.

For linear viscosities (r = 2) the residual Psi is affine in lambda, so
Psi(lambda + h) - Psi(lambda) equals the Jacobian action exactly.  For a
shear-thinning fluid the remainder is quadratic in the step: halving the
step divides it by about four.
"""
import numpy as np

from stokes_darcy_dd import PiecewiseConstantTimeField, apply_Psi_prime, evaluate_Psi
from stokes_darcy_dd.experiments.config import defaults
from stokes_darcy_dd.experiments.drivers import build_problem, with_exponent

rng = np.random.default_rng(0)


def small_problem(r, n):
    """First test case, T = 0.01, dt_f = 0.002, dt_p = 0.001, h = 1/n."""
    cfg = with_exponent(defaults(1), r)
    return build_problem(cfg, n, cfg.dt_f, cfg.dt_p)


def random_field(pb):
    return PiecewiseConstantTimeField(pb.grid_f, rng.normal(size=(pb.grid_f.n, pb.n_multiplier)))


pb, _ = small_problem(r=2.0, n=8)
lam, h = random_field(pb), random_field(pb)
base = evaluate_Psi(pb, lam)
jh = apply_Psi_prime(base, h)
gap = evaluate_Psi(pb, lam + h).residual - base.residual - jh
print("r = 2:   |Psi(l+h) - Psi(l) - J h| / |J h| =",
      np.linalg.norm(gap.values) / np.linalg.norm(jh.values))

pb, _ = small_problem(r=1.5, n=8)
base = evaluate_Psi(pb, lam)
jh = apply_Psi_prime(base, h)
prev = None
for eps in (1e-2, 5e-3, 2.5e-3, 1.25e-3):
    rem = np.linalg.norm((evaluate_Psi(pb, lam + h * eps).residual - base.residual - jh * eps).values)
    print(f"r = 1.5: eps = {eps:.2e}  remainder {rem:.3e}" + (f"  ratio {prev / rem:.3f}" if prev else ""))
    prev = rem

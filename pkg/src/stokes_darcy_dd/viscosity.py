"""Cross-model shear-thinning viscosity and its Newton coefficient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CrossModelParams:
    """Parameters of ``nu(d) = nu_inf + (nu_0 - nu_inf) / (1 + K d**(2 - r))``."""

    nu_inf: float = 0.5
    nu_0: float = 1.5
    K: float = 1.0
    r: float = 2.0
    eps_reg: float = 1e-8

    def __post_init__(self):
        if not self.nu_inf > 0:
            raise ValueError("nu_inf must be positive")
        if self.nu_0 < self.nu_inf:
            raise ValueError("nu_0 must be >= nu_inf")
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.r > 1:
            raise ValueError("r must exceed 1")
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be nonnegative")

    @property
    def is_linear(self) -> bool:
        return self.r == 2.0

    def replace(self, **kw) -> "CrossModelParams":
        d = dict(nu_inf=self.nu_inf, nu_0=self.nu_0, K=self.K, r=self.r, eps_reg=self.eps_reg)
        d.update(kw)
        return CrossModelParams(**d)


def _power(d, e):
    # d**0 == 1 also at d == 0
    if e == 0:
        return np.ones_like(d)
    return d ** e


def nu(d, params: CrossModelParams):
    """Viscosity at shear-rate magnitude ``d >= 0``."""
    d = np.asarray(d, dtype=float)
    p = params
    return p.nu_inf + (p.nu_0 - p.nu_inf) / (1.0 + p.K * _power(d, 2.0 - p.r))


def nu_prime_coeff(d, params: CrossModelParams):
    """``nu'(d) / d``, the scalar multiplying ``D(u) (D(u) : D(w))`` in the
    Gateaux derivative of ``nu(|D(u)|) D(u)``.

    The argument is clamped from below by ``eps_reg``; for ``r = 2`` the result
    is identically zero.
    """
    d = np.asarray(d, dtype=float)
    p = params
    if p.r == 2.0:
        return np.zeros_like(d)
    dt = np.maximum(d, p.eps_reg)
    return ((p.r - 2.0) * (p.nu_0 - p.nu_inf) * p.K
            / ((1.0 + p.K * dt ** (2.0 - p.r)) ** 2 * dt ** p.r))

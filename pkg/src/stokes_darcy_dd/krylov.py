"""Matrix-free GMRES (no restart, modified Gram-Schmidt, right preconditioning)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def relative_residual(self) -> float:
        return self.history[-1] if self.history else 0.0


def gmres(matvec, rhs, tol: float = 1e-7, maxit: int = 100, precond=None) -> GMRESResult:
    """Solve ``A x = rhs`` for the linear map ``matvec``.

    With ``precond`` the iteration runs on ``A P y = rhs``, ``x = P y``, so the
    monitored quantity is the true relative residual ``|rhs - A x| / |rhs|``.
    ``history[k]`` is that residual after ``k`` iterations.  On exhaustion of
    ``maxit`` the best iterate is returned with ``converged=False``.
    """
    b = np.asarray(rhs, dtype=float)
    n = b.size
    beta = np.linalg.norm(b)
    if beta == 0.0:
        return GMRESResult(np.zeros(n), 0, True, [0.0])
    P = precond if precond is not None else (lambda v: v)
    maxit = min(maxit, n) if n > 0 else 0

    V = np.zeros((maxit + 1, n))
    H = np.zeros((maxit + 1, maxit))
    cs, sn = np.zeros(maxit), np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    V[0] = b / beta
    history = [1.0]
    k = 0
    converged = False
    while k < maxit:
        w = np.asarray(matvec(P(V[k])), dtype=float)
        for i in range(k + 1):
            H[i, k] = V[i] @ w
            w = w - H[i, k] * V[i]
        H[k + 1, k] = np.linalg.norm(w)
        breakdown = H[k + 1, k] <= 1e-14 * np.abs(H[:k + 1, k]).max(initial=1.0)
        if not breakdown:
            V[k + 1] = w / H[k + 1, k]
        for i in range(k):
            hi = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = hi
        denom = np.hypot(H[k, k], H[k + 1, k])
        cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        k += 1
        history.append(abs(g[k]) / beta)
        if history[-1] < tol or breakdown:
            converged = True
            break
    y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
    x = P(V[:k].T @ y) if k else np.zeros(n)
    return GMRESResult(np.asarray(x, dtype=float), k, converged, history)

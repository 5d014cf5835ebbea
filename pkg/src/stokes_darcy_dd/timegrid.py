"""Time partitions, piecewise-constant-in-time interface fields and the L2
projection between two (possibly nonconforming) partitions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Breakpoints ``0 = t_0 < t_1 < ... < t_M = T``."""

    breakpoints: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("a time grid needs at least two breakpoints")
        if t[0] != 0.0:
            raise ValueError("time grids start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", t)

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return (isinstance(other, TimeGrid) and len(other.breakpoints) == len(self.breakpoints)
                and np.array_equal(other.breakpoints, self.breakpoints))

    def __hash__(self):
        return hash(self.breakpoints.tobytes())


def uniform_grid(T: float, n: int) -> TimeGrid:
    if not T > 0:
        raise ValueError("T must be positive")
    if int(n) != n or n < 1:
        raise ValueError("need at least one interval")
    n = int(n)
    return TimeGrid(np.arange(n + 1) * (T / n))


@dataclass(eq=False)
class PiecewiseConstantTimeField:
    """One coefficient vector per interval of ``grid``: ``values[m]`` is the
    value on ``(t_m, t_{m+1}]``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n:
            raise ValueError(f"{v.shape[0]} slabs for a grid of {self.grid.n} intervals")
        self.values = v

    @classmethod
    def zeros(cls, grid: TimeGrid, size: int):
        return cls(grid, np.zeros((grid.n, size)))

    @classmethod
    def constant(cls, grid: TimeGrid, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.n, 1)))

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def ravel(self) -> np.ndarray:
        return self.values.ravel().copy()

    @classmethod
    def from_flat(cls, grid: TimeGrid, flat):
        return cls(grid, np.asarray(flat, dtype=float).reshape(grid.n, -1))

    def integral(self) -> np.ndarray:
        return self.grid.steps @ self.values

    def copy(self):
        return PiecewiseConstantTimeField(self.grid, self.values.copy())

    def __add__(self, other):
        _check_same(self, other)
        return PiecewiseConstantTimeField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return PiecewiseConstantTimeField(self.grid, self.values - other.values)

    def __mul__(self, alpha):
        return PiecewiseConstantTimeField(self.grid, alpha * self.values)

    __rmul__ = __mul__


def _check_same(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different time grids")


def project(source: PiecewiseConstantTimeField, target: TimeGrid,
            rtol: float = 1e-12) -> PiecewiseConstantTimeField:
    """L2 projection of a piecewise-constant field onto ``target``.

    Each target value is the overlap-weighted average of the source values,
    computed in one sweep over the merged breakpoints.
    """
    sg = source.grid.breakpoints
    tg = target.breakpoints
    T = sg[-1]
    tol = rtol * T
    if abs(tg[-1] - T) > tol:
        raise ValueError(f"horizons differ: {T} vs {tg[-1]}")
    if source.grid == target:
        return source.copy()
    out = np.zeros((len(tg) - 1, source.size))
    i = j = 0
    left = 0.0
    M, N = len(sg) - 1, len(tg) - 1
    while i < M and j < N:
        si, tj = sg[i + 1], tg[j + 1]
        if abs(si - tj) <= tol:
            right = tj
            out[j] += (right - left) * source.values[i]
            i += 1
            j += 1
        elif si < tj:
            right = si
            out[j] += (right - left) * source.values[i]
            i += 1
        else:
            right = tj
            out[j] += (right - left) * source.values[i]
            j += 1
        left = right
    out /= np.diff(tg)[:, None]
    return PiecewiseConstantTimeField(target, out)

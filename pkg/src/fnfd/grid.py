"""Uniform meshes, difference operators and grid-function utilities.

Indexing is zero-based: a grid with ``J`` points has nodes ``x[0] == a`` through
``x[J - 1] == b``; the scheme's interior equations live at ``1 .. J - 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "make_grid",
    "second_difference",
    "forward_difference",
    "backward_difference",
    "second_differences",
    "linf_error",
    "piecewise_constant_eval",
]


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of ``[a, b]`` with ``J`` nodes."""

    a: float
    b: float
    J: int
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise ValueError(f"grid needs finite a < b, got a={self.a}, b={self.b}")
        if int(self.J) != self.J or self.J < 4:
            raise ValueError(f"grid needs an integer J >= 4, got J={self.J}")
        object.__setattr__(self, "J", int(self.J))
        h = (self.b - self.a) / (self.J - 1)
        # a + j*h rather than a running sum; the last node is pinned to b.
        x = self.a + np.arange(self.J) * h
        x[-1] = self.b
        x.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_spacing(cls, a: float, b: float, h: float) -> "Grid":
        """Grid whose spacing is ``h`` (``(b - a) / h`` must be an integer)."""
        n = (b - a) / h
        J = int(round(n)) + 1
        if abs(n - (J - 1)) > 1e-9 * max(1.0, n):
            raise ValueError(f"h={h} does not divide [{a}, {b}] into whole cells")
        return cls(a, b, J)

    @property
    def interior(self) -> slice:
        return slice(1, self.J - 1)

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def sample(self, f: Callable) -> "GridFunction":
        """Nodal sampling of a vectorised function of ``x``."""
        return GridFunction(self, np.broadcast_to(f(self.x), self.x.shape))


@dataclass(frozen=True)
class GridFunction:
    """Real values attached to the nodes of a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.J,):
            raise ValueError(f"expected {self.grid.J} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.grid.J

    def __getitem__(self, j):
        return self.values[j]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


def make_grid(a: float, b: float, J: int) -> Grid:
    return Grid(a, b, J)


def _check_index(j: int, lo: int, hi: int, what: str):
    if not lo <= j <= hi:
        raise IndexError(f"{what} needs {lo} <= j <= {hi}, got j={j}")


def second_difference(V: GridFunction, j: int) -> float:
    """Three-point second difference at interior node ``j``."""
    _check_index(j, 1, V.grid.J - 2, "second difference")
    v = V.values
    return (v[j + 1] - 2.0 * v[j] + v[j - 1]) / V.grid.h**2


def forward_difference(V: GridFunction, j: int) -> float:
    _check_index(j, 0, V.grid.J - 2, "forward difference")
    v = V.values
    return (v[j + 1] - v[j]) / V.grid.h


def backward_difference(V: GridFunction, j: int) -> float:
    _check_index(j, 1, V.grid.J - 1, "backward difference")
    v = V.values
    return (v[j] - v[j - 1]) / V.grid.h


def second_differences(values: np.ndarray, h: float) -> np.ndarray:
    """Vectorised second differences at all interior nodes (length ``J - 2``)."""
    v = np.asarray(values, dtype=float)
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2


def linf_error(U: GridFunction, exact: Callable) -> float:
    """Nodal max-norm error against a vectorised reference ``exact(x)``."""
    ref = np.broadcast_to(exact(U.grid.x), U.grid.x.shape)
    return float(np.max(np.abs(U.values - ref)))


def piecewise_constant_eval(U: GridFunction, x):
    """Evaluate the piecewise-constant extension of ``U``.

    Node ``j`` owns the half-open cell ``(x_j - h/2, x_j + h/2]``; the left
    endpoint ``a`` is assigned to the first node. Accepts scalars or arrays.
    """
    g = U.grid
    xa = np.asarray(x, dtype=float)
    if np.any(xa < g.a) or np.any(xa > g.b) or not np.all(np.isfinite(xa)):
        raise ValueError(f"evaluation point outside [{g.a}, {g.b}]")
    # Cell j covers (x_j - h/2, x_j + h/2]: j = ceil((x - a)/h - 1/2).
    t = (xa - g.a) / g.h - 0.5
    # Snap rounding noise at cell faces so x_j + h/2 stays in cell j.
    r = np.round(t)
    t = np.where(np.abs(t - r) <= 1e-10 * np.maximum(1.0, np.abs(t)), r, t)
    j = np.ceil(t).astype(int)
    j = np.clip(j, 0, g.J - 1)
    out = U.values[j]
    return float(out) if out.ndim == 0 else out

"""Benchmark two-point problems ``F(u_xx, u, x) = 0`` with Dirichlet data.

Every ``F`` here is vectorised: it accepts broadcastable arrays ``(p, v, x)``
for the second-derivative slot, the value slot and the position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Box",
    "Problem",
    "bellman_min_finite",
    "example1",
    "example2",
    "example3",
    "example4",
    "example5",
    "poisson",
    "PROBLEMS",
    "get_problem",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling box over ``(p, v, x)``."""

    p: tuple[float, float]
    v: tuple[float, float]
    x: tuple[float, float]

    def sample(self, n: int, rng: np.random.Generator):
        return tuple(rng.uniform(lo, hi, n) for lo, hi in (self.p, self.v, self.x))


@dataclass(frozen=True)
class Problem:
    name: str
    a: float
    b: float
    F: Callable
    u_a: float
    u_b: float
    exact: Optional[Callable] = None
    alternate_exact: Optional[Callable] = None
    gamma_hint: Optional[float] = None
    monotone_in_p: bool = False
    uses_value: bool = False
    box: Optional[Box] = None
    description: str = ""

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"{self.name}: domain needs a < b")
        for ref in (self.exact, self.alternate_exact):
            if ref is None:
                continue
            if abs(ref(self.a) - self.u_a) > 1e-12 or abs(ref(self.b) - self.u_b) > 1e-12:
                raise ValueError(f"{self.name}: reference solution violates boundary data")

    @property
    def domain(self) -> tuple[float, float]:
        return (self.a, self.b)

    def reference(self, which: str = "exact") -> Callable:
        ref = {"exact": self.exact, "alternate": self.alternate_exact}.get(which)
        if ref is None:
            raise ValueError(f"{self.name} has no '{which}' reference solution")
        return ref


def bellman_min_finite(coeffs, p, source):
    """Minimise ``-A * p - source`` over a finite list of coefficients ``A``.

    Returns ``(value, index)``; ties go to the smallest index. ``p`` and
    ``source`` may be arrays, in which case both outputs are arrays.
    """
    A = np.asarray(coeffs, dtype=float)
    if A.ndim != 1 or A.size == 0:
        raise ValueError("need a nonempty list of coefficients")
    p = np.asarray(p, dtype=float)
    vals = -A.reshape((-1,) + (1,) * p.ndim) * p - np.asarray(source, dtype=float)
    idx = np.argmin(vals, axis=0)
    best = np.take_along_axis(vals, idx[None, ...], axis=0)[0]
    if best.ndim == 0:
        return float(best), int(idx)
    return best, idx


def example1() -> Problem:
    return Problem(
        name="example1",
        a=-1.0,
        b=1.0,
        F=lambda p, v, x: -(p**3) + x**3,
        u_a=-1.0 / 6.0,
        u_b=1.0 / 6.0,
        exact=lambda x: x**3 / 6.0,
        monotone_in_p=True,
        box=Box(p=(-1.0, 1.0), v=(-1.0 / 6.0, 1.0 / 6.0), x=(-1.0, 1.0)),
        description="-u_xx^3 + x^3 = 0 on (-1, 1), u = x^3/6",
    )


def example2() -> Problem:
    # Not monotone in p globally: the operator is elliptic only for p >= 0.
    return Problem(
        name="example2",
        a=0.0,
        b=1.0,
        F=lambda p, v, x: -(p**2) + 1.0 + 0.0 * x,
        u_a=0.0,
        u_b=0.5,
        exact=lambda x: 0.5 * x**2,
        alternate_exact=lambda x: -0.5 * x**2 + x,
        box=Box(p=(0.5, 1.5), v=(0.0, 0.5), x=(0.0, 1.0)),
        description="-u_xx^2 + 1 = 0 on (0, 1); convex u+ = x^2/2, concave u- = x - x^2/2",
    )


def _source3(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 12.0 * x**2, -24.0 * x**2)


def example3() -> Problem:
    return Problem(
        name="example3",
        a=-1.0,
        b=1.0,
        F=lambda p, v, x: bellman_min_finite((1.0, 2.0), p, _source3(x))[0] + 0.0 * v,
        u_a=-1.0,
        u_b=1.0,
        exact=lambda x: x * np.abs(x) ** 3,
        gamma_hint=2.0,
        monotone_in_p=True,
        box=Box(p=(-12.0, 12.0), v=(-1.0, 1.0), x=(-1.0, 1.0)),
        description="min over A in {1, 2} of -A u_xx - S(x) = 0 on (-1, 1), u = x|x|^3",
    )


def _bellman4(p, v, x):
    p, v, x = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in (p, v, x)))
    # Quadratic in theta: convex for v > 0 (clamped vertex), else an endpoint wins.
    vpos = np.where(v > 0, v, 1.0)
    theta = np.where(v > 0, np.clip(p / (2.0 * vpos), -1.0, 1.0), np.where(p >= 0, 1.0, -1.0))
    return -theta * p + theta**2 * v + x**-2.0


def example4() -> Problem:
    return Problem(
        name="example4",
        a=2.0,
        b=4.0,
        F=_bellman4,
        u_a=4.0,
        u_b=16.0,
        exact=lambda x: x**2,
        monotone_in_p=True,
        uses_value=True,
        box=Box(p=(1.0, 3.0), v=(3.0, 17.0), x=(2.0, 4.0)),
        description="inf over |theta| <= 1 of -theta u_xx + theta^2 u + x^-2 = 0 on (2, 4), u = x^2",
    )


def example5() -> Problem:
    return Problem(
        name="example5",
        a=-1.0,
        b=1.0,
        F=lambda p, v, x: -(p**3) + 8.0 * np.sign(x),
        u_a=-1.0,
        u_b=1.0,
        exact=lambda x: x * np.abs(x),
        monotone_in_p=True,
        box=Box(p=(-2.0, 2.0), v=(-1.0, 1.0), x=(-1.0, 1.0)),
        description="-u_xx^3 + 8 sign(x) = 0 on (-1, 1), u = x|x|",
    )


def poisson() -> Problem:
    """Linear reference problem with dF/dp = -1, i.e. gamma = 1."""
    return Problem(
        name="poisson",
        a=0.0,
        b=1.0,
        F=lambda p, v, x: -p - np.pi**2 * np.sin(np.pi * x),
        u_a=0.0,
        u_b=0.0,
        exact=lambda x: np.sin(np.pi * x),
        gamma_hint=1.0,
        monotone_in_p=True,
        box=Box(p=(-10.0, 10.0), v=(-1.0, 1.0), x=(0.0, 1.0)),
        description="-u_xx - pi^2 sin(pi x) = 0 on (0, 1), u = sin(pi x)",
    )


PROBLEMS: dict[str, Callable[[], Problem]] = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "example5": example5,
    "poisson": poisson,
}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None

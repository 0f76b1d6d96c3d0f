"""Discrete residual of the scheme and its banded finite-difference Jacobian.

The unknowns are the interior values ``U[1:-1]``; ``U[0] = u_a`` and
``U[-1] = u_b`` stay pinned. Interior equation ``i`` (node ``i + 1``) reads

    Fhat(d2U[i], d2U[i + 1], d2U[i + 2], U[i + 1], x[i + 1]) = 0

where ``d2U`` holds second differences at every node, the two end entries
coming from the ghost policy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid, GridFunction, second_differences
from .operators import (
    ENDPOINTS,
    SAMPLED,
    GodunovExt,
    GodunovExtr,
    LaxFriedrichs,
    OperatorEvaluationError,
    OperatorKind,
)
from .problems import Problem

__all__ = [
    "GhostPolicy",
    "SchemeConfig",
    "DiscreteSystem",
    "BandMatrix",
    "ghost_second_differences",
    "residual",
    "jacobian_fd",
]


class GhostPolicy(str, enum.Enum):
    """How the second differences at the two boundary nodes are closed.

    ``LINEAR_EXTRAPOLATION`` uses ghost values ``U_0 = 2 U_1 - U_2`` (and the
    mirror image on the right), which makes both end second differences zero.
    ``SECOND_DIFF_CONSTANT`` copies the adjacent interior second difference.
    """

    LINEAR_EXTRAPOLATION = "linear-extrapolation"
    SECOND_DIFF_CONSTANT = "second-diff-constant"


@dataclass(frozen=True)
class SchemeConfig:
    kind: OperatorKind
    ghost: GhostPolicy = GhostPolicy.LINEAR_EXTRAPOLATION

    def __post_init__(self):
        object.__setattr__(self, "ghost", GhostPolicy(self.ghost))

    @property
    def is_lax_friedrichs(self) -> bool:
        return isinstance(self.kind, LaxFriedrichs)

    def describe(self) -> str:
        return f"{self.kind.name}, ghost={self.ghost.value}"


def ghost_second_differences(U, ghost: GhostPolicy | str = GhostPolicy.LINEAR_EXTRAPOLATION,
                             h: float | None = None) -> np.ndarray:
    """Second differences at all ``J`` nodes, ends closed by ``ghost``."""
    if isinstance(U, GridFunction):
        values, h = U.values, U.grid.h
    else:
        values = np.asarray(U, dtype=float)
        if h is None:
            raise ValueError("h is required when U is a bare array")
    ghost = GhostPolicy(ghost)
    d2 = np.empty(len(values))
    d2[1:-1] = second_differences(values, h)
    if ghost is GhostPolicy.SECOND_DIFF_CONSTANT:
        d2[0], d2[-1] = d2[1], d2[-2]
    else:
        # (U_0 - 2U_1 + U_2)/h^2 with U_0 = 2U_1 - U_2 vanishes identically.
        d2[0] = d2[-1] = 0.0
    return d2


@dataclass(frozen=True)
class DiscreteSystem:
    grid: Grid
    problem: Problem
    config: SchemeConfig
    operator: OperatorKind = field(init=False)

    def __post_init__(self):
        g, pb = self.grid, self.problem
        if abs(g.a - pb.a) > 1e-12 or abs(g.b - pb.b) > 1e-12:
            raise ValueError(f"grid [{g.a}, {g.b}] does not match problem domain {pb.domain}")
        op = self.config.kind
        if isinstance(op, (GodunovExt, GodunovExtr)) and op.strategy is None:
            op = replace(op, strategy=ENDPOINTS if pb.monotone_in_p else SAMPLED)
        object.__setattr__(self, "operator", op)

    @property
    def n(self) -> int:
        return self.grid.J - 2

    @property
    def extremum_strategy(self) -> str | None:
        return str(self.operator.strategy) if hasattr(self.operator, "strategy") else None

    def full(self, interior) -> np.ndarray:
        """Interior unknowns padded with the pinned boundary values."""
        out = np.empty(self.grid.J)
        out[0], out[-1] = self.problem.u_a, self.problem.u_b
        out[1:-1] = interior
        return out

    def pin(self, U) -> np.ndarray:
        """Copy of ``U`` with the boundary entries overwritten by the data."""
        out = np.array(U, dtype=float)
        out[0], out[-1] = self.problem.u_a, self.problem.u_b
        return out

    def residual_full(self, U) -> np.ndarray:
        """Residual of a full-length grid vector (boundary entries taken as given)."""
        d2 = ghost_second_differences(U, self.config.ghost, self.grid.h)
        Ui = np.asarray(U, dtype=float)[1:-1]
        x = self.grid.x[1:-1]
        try:
            r = self.operator(self.problem.F, d2[:-2], d2[1:-1], d2[2:], Ui, x)
        except OperatorEvaluationError as exc:
            j = _locate(exc, x)
            raise OperatorEvaluationError(f"{exc} (interior node j={j})", exc.where) from exc
        return np.asarray(r, dtype=float)

    def residual_interior(self, Ui) -> np.ndarray:
        return self.residual_full(self.full(Ui))


def _locate(exc, x):
    if exc.where is None:
        return None
    return int(np.argmin(np.abs(x - exc.where[2]))) + 1


def residual(U, sys: DiscreteSystem) -> np.ndarray:
    """Scheme residual at the ``J - 2`` interior nodes.

    The boundary entries of ``U`` must already equal the Dirichlet data.
    """
    values = U.values if isinstance(U, GridFunction) else np.asarray(U, dtype=float)
    if len(values) != sys.grid.J:
        raise ValueError(f"expected {sys.grid.J} values, got {len(values)}")
    pb = sys.problem
    if values[0] != pb.u_a or values[-1] != pb.u_b:
        raise ValueError("U must satisfy the boundary data (U[0] = u_a, U[-1] = u_b)")
    return sys.residual_full(values)


@dataclass(frozen=True)
class BandMatrix:
    """Square band matrix in diagonal-ordered storage.

    ``data[u + i - j, j] == A[i, j]`` for ``-l <= j - i <= u``; the layout used
    by LAPACK's ``*gbsv`` without the extra pivot rows.
    """

    data: np.ndarray
    lower: int
    upper: int

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_dense(cls, A, lower: int, upper: int) -> "BandMatrix":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        data = np.zeros((lower + upper + 1, n))
        for i in range(n):
            for j in range(max(0, i - lower), min(n, i + upper + 1)):
                data[upper + i - j, j] = A[i, j]
        return cls(data, lower, upper)

    def to_dense(self) -> np.ndarray:
        n = self.n
        A = np.zeros((n, n))
        for k in range(-self.lower, self.upper + 1):
            row = self.upper - k
            if k >= 0:
                A[np.arange(n - k), np.arange(k, n)] = self.data[row, k:]
            else:
                A[np.arange(-k, n), np.arange(n + k)] = self.data[row, : n + k]
        return A

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        y = np.zeros(n)
        for k in range(-self.lower, self.upper + 1):
            row = self.upper - k
            if k >= 0:
                y[: n - k] += self.data[row, k:] * x[k:]
            else:
                y[-k:] += self.data[row, : n + k] * x[: n + k]
        return y


def jacobian_fd(U, sys: DiscreteSystem, fd_step: float = 1e-6) -> BandMatrix:
    """Central finite-difference Jacobian w.r.t. the interior unknowns.

    Residual row ``i`` only sees unknowns ``i - 2 .. i + 2``, so columns are
    perturbed five at a time (every fifth unknown together).
    """
    values = U.values if isinstance(U, GridFunction) else np.asarray(U, dtype=float)
    if len(values) == sys.n:
        values = sys.full(values)
    Ui = values[1:-1]
    n = sys.n
    bw = 2
    step = fd_step * (1.0 + np.abs(Ui))
    data = np.zeros((2 * bw + 1, n))
    rows = np.arange(n)
    for color in range(2 * bw + 1):
        cols = np.arange(color, n, 2 * bw + 1)
        e = np.zeros(n)
        e[cols] = step[cols]
        up = sys.residual_interior(Ui + e)
        dn = sys.residual_interior(Ui - e)
        if not (np.all(np.isfinite(up)) and np.all(np.isfinite(dn))):
            raise OperatorEvaluationError("non-finite residual while differencing the Jacobian")
        diff = up - dn
        # Each row sees at most one perturbed column of this colour.
        owner = np.full(n, -1)
        for c in cols:
            owner[max(0, c - bw): c + bw + 1] = c
        mask = owner >= 0
        r, c = rows[mask], owner[mask]
        data[bw + r - c, c] = diff[mask] / (2.0 * step[c])
    return BandMatrix(data, bw, bw)

"""Root finding for the discrete scheme.

``newton_solve``
    Damped Newton on the interior unknowns with a banded finite-difference
    Jacobian, banded LU and Armijo backtracking on ``0.5 * ||r||_2**2``.
``mrho_solve``
    The monotone fixed-point iteration ``d2(U_new) = d2(U) + rho * G(U)`` for
    Lax-Friedrichs schemes, one tridiagonal solve per sweep.

Neither raises on non-convergence; the outcome is in :class:`SolveReport`.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .assembly import BandMatrix, DiscreteSystem, jacobian_fd
from .grid import GridFunction
from .operators import (
    LaxFriedrichs,
    LFWeights,
    OperatorEvaluationError,
    check_ellipticity,
)
from .problems import Box

__all__ = [
    "SingularMatrixError",
    "ConfigurationError",
    "Status",
    "SolveReport",
    "NewtonOptions",
    "FixedPointOptions",
    "RhoWindow",
    "tridiagonal_solve",
    "banded_lu_solve",
    "newton_solve",
    "rho_window",
    "contraction_factor",
    "mrho_map",
    "mrho_solve",
    "estimate_gamma",
    "nonexpansiveness_probe",
    "ProbeReport",
]

HISTORY_CAP = 10_000


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class ConfigurationError(ValueError):
    pass


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    LINE_SEARCH_FAILED = "LineSearchFailed"
    SINGULAR_LINEAR_SOLVE = "SingularLinearSolve"
    NON_FINITE_RESIDUAL = "NonFiniteResidual"
    STALLED = "Stalled"

    def __str__(self):
        return self.value


@dataclass
class SolveReport:
    status: Status
    iterations: int
    residual_norm: float
    step_norm: float
    history: list
    solver: str
    config: str
    message: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 200
    res_tol: float = 1e-10
    step_tol: float = 1e-12
    backtrack: float = 0.5
    min_step: float = 2.0**-20
    armijo_c: float = 1e-4
    fd_step: float = 1e-6

    def __post_init__(self):
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        for name in ("max_iters", "res_tol", "step_tol", "min_step", "armijo_c", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FixedPointOptions:
    rho: Union[float, str] = "auto"
    max_iters: int = 100_000
    tol: float = 1e-12
    res_tol: float = 1e-10

    def __post_init__(self):
        if self.rho != "auto" and not (isinstance(self.rho, (int, float)) and self.rho > 0):
            raise ValueError(f"rho must be positive or 'auto', got {self.rho!r}")


# --- linear algebra ----------------------------------------------------------


def tridiagonal_solve(lower, diag, upper, rhs, pivot_tol: float = 1e-14) -> np.ndarray:
    """Thomas algorithm for a tridiagonal system without pivoting.

    ``lower`` and ``upper`` are the sub- and super-diagonals (length ``n - 1``).
    """
    b = np.array(diag, dtype=float)
    d = np.array(rhs, dtype=float)
    a = np.asarray(lower, dtype=float)
    c = np.asarray(upper, dtype=float)
    n = len(b)
    if len(a) != n - 1 or len(c) != n - 1 or len(d) != n:
        raise ValueError("tridiagonal_solve: inconsistent diagonal lengths")
    scale = max(np.max(np.abs(b)), np.max(np.abs(a), initial=0.0), np.max(np.abs(c), initial=0.0))
    thresh = pivot_tol * (scale or 1.0)
    if abs(b[0]) <= thresh:
        raise SingularMatrixError("zero pivot at row 0")
    for k in range(1, n):
        m = a[k - 1] / b[k - 1]
        b[k] -= m * c[k - 1]
        d[k] -= m * d[k - 1]
        if abs(b[k]) <= thresh:
            raise SingularMatrixError(f"zero pivot at row {k}")
    x = d
    x[-1] /= b[-1]
    for k in range(n - 2, -1, -1):
        x[k] = (d[k] - c[k] * x[k + 1]) / b[k]
    return x


def banded_lu_solve(A: BandMatrix, rhs, pivot_tol: float = 1e-14) -> np.ndarray:
    """Solve ``A x = rhs`` by banded LU with partial pivoting.

    Pivoting can widen the upper band to ``lower + upper``; the work array has
    room for that fill-in, as in LAPACK ``gbtrf``.
    """
    l, u, n = A.lower, A.upper, A.n
    b = np.array(rhs, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
    m = l + u
    # ab[m + i - j, j] holds entry (i, j).
    ab = np.zeros((2 * l + u + 1, n))
    ab[l:, :] = A.data
    scale = float(np.max(np.abs(A.data), initial=0.0)) or 1.0
    thresh = pivot_tol * scale

    for k in range(n):
        rlast = min(n - 1, k + l)
        rows = np.arange(k, rlast + 1)
        col_k = ab[m + rows - k, k]
        p = k + int(np.argmax(np.abs(col_k)))
        if abs(ab[m + p - k, k]) <= thresh:
            raise SingularMatrixError(f"pivot below {thresh:.3g} in column {k}")
        cols = np.arange(k, min(n - 1, k + m) + 1)
        if p != k:
            rk, rp = m + k - cols, m + p - cols
            tmp = ab[rk, cols].copy()
            ab[rk, cols] = ab[rp, cols]
            ab[rp, cols] = tmp
            b[k], b[p] = b[p], b[k]
        if rlast > k:
            below = np.arange(k + 1, rlast + 1)
            f = ab[m + below - k, k] / ab[m, k]
            ab[m + below[:, None] - cols[None, :], cols[None, :]] -= f[:, None] * ab[m + k - cols, cols][None, :]
            b[below] -= f * b[k]

    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        js = np.arange(i + 1, min(n - 1, i + m) + 1)
        x[i] = (b[i] - ab[m + i - js, js] @ x[js]) / ab[m, i]
    return x


# --- Newton ------------------------------------------------------------------


def _as_values(U0, sys: DiscreteSystem) -> np.ndarray:
    values = U0.values if isinstance(U0, GridFunction) else np.asarray(U0, dtype=float)
    if values.shape != (sys.grid.J,):
        raise ValueError(f"initial guess must have {sys.grid.J} values, got {values.shape}")
    return sys.pin(values)


def _safe_residual(sys, Ui):
    try:
        r = sys.residual_interior(Ui)
    except OperatorEvaluationError:
        return None
    return r if np.all(np.isfinite(r)) else None


def newton_solve(sys: DiscreteSystem, U0, opts: NewtonOptions = NewtonOptions()):
    """Damped Newton; returns ``(GridFunction, SolveReport)``."""
    U = _as_values(U0, sys)
    Ui = U[1:-1].copy()
    history = deque(maxlen=HISTORY_CAP)
    echo = sys.config.describe()
    extras = {"extremum_strategy": sys.extremum_strategy} if sys.extremum_strategy else {}

    def report(status, k, rnorm, snorm, msg=""):
        rep = SolveReport(status, k, rnorm, snorm, list(history), "newton", echo, msg, dict(extras))
        vals = sys.full(Ui)
        return GridFunction(sys.grid, vals) if np.all(np.isfinite(vals)) else None, rep

    r = _safe_residual(sys, Ui)
    if r is None:
        return report(Status.NON_FINITE_RESIDUAL, 0, math.inf, 0.0, "residual of the initial guess is not finite")
    snorm = 0.0
    for k in range(opts.max_iters + 1):
        rnorm = float(np.max(np.abs(r)))
        history.append(rnorm)
        if rnorm <= opts.res_tol:
            return report(Status.CONVERGED, k, rnorm, snorm)
        if k == opts.max_iters:
            break
        try:
            Jm = jacobian_fd(Ui, sys, opts.fd_step)
            d = banded_lu_solve(Jm, -r)
        except SingularMatrixError as exc:
            return report(Status.SINGULAR_LINEAR_SOLVE, k, rnorm, snorm, str(exc))
        except OperatorEvaluationError as exc:
            return report(Status.NON_FINITE_RESIDUAL, k, rnorm, snorm, str(exc))

        f0 = 0.5 * float(r @ r)
        slope = -2.0 * f0  # grad(f) . d = r^T J d = -||r||^2
        t = 1.0
        while True:
            trial = Ui + t * d
            rt = _safe_residual(sys, trial)
            if rt is not None and 0.5 * float(rt @ rt) <= f0 + opts.armijo_c * t * slope:
                break
            t *= opts.backtrack
            if t < opts.min_step:
                return report(Status.LINE_SEARCH_FAILED, k, rnorm, snorm,
                              "no sufficient decrease down to the minimum step fraction")
        snorm = float(t * np.max(np.abs(d)))
        Ui, r = trial, rt
        if snorm <= opts.step_tol * (1.0 + float(np.max(np.abs(Ui)))):
            rnorm = float(np.max(np.abs(r)))
            if rnorm <= opts.res_tol:
                history.append(rnorm)
                return report(Status.CONVERGED, k + 1, rnorm, snorm)
            history.append(rnorm)
            return report(Status.STALLED, k + 1, rnorm, snorm, "step below step_tol with residual above res_tol")
    return report(Status.MAX_ITERS, opts.max_iters, float(np.max(np.abs(r))), snorm)


# --- the M_rho fixed-point iteration ------------------------------------------


@dataclass(frozen=True)
class RhoWindow:
    rho_monotone_max: float
    rho_contraction_min: Optional[float]
    feasible: bool
    gmonotone: bool

    def auto(self) -> float:
        if self.feasible:
            return 0.5 * (self.rho_contraction_min + self.rho_monotone_max)
        return 0.9 * self.rho_monotone_max


def rho_window(gamma: float, w: LFWeights, slope_max: Optional[float] = None) -> RhoWindow:
    """Admissible relaxation parameters for the M_rho iteration.

    ``gamma`` brackets the slope, ``-gamma <= dF/dp <= -1/gamma``. The sweep
    is order preserving when ``rho * (2 alpha + beta2 |dF/dp|) < 1``, so the
    upper bound uses the largest slope magnitude (``slope_max``, default
    ``gamma``). Contraction by 1/2 additionally needs
    ``beta1 + beta3 < 1/gamma**2`` and ``rho >= 1 / (2 (1/gamma - (beta1 + beta3) gamma))``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    slope = gamma if slope_max is None else slope_max
    denom = 2.0 * w.alpha + w.beta2 * slope
    upper = 1.0 / denom if denom > 0 else math.inf
    s = w.beta1 + w.beta3
    lower = None
    if s < 1.0 / gamma**2:
        lower = 0.5 / (1.0 / gamma - s * gamma)
    gmono = w.alpha > max(w.beta1, w.beta3) * slope
    feasible = lower is not None and lower < upper and gmono
    return RhoWindow(upper, lower, feasible, gmono)


def contraction_factor(rho: float, gamma: float, w: LFWeights) -> float:
    """Max-norm Lipschitz bound ``1 + rho ((beta1 + beta3) gamma - 1/gamma)``."""
    return 1.0 + rho * ((w.beta1 + w.beta3) * gamma - 1.0 / gamma)


def _require_lf(sys: DiscreteSystem) -> LFWeights:
    if not isinstance(sys.operator, LaxFriedrichs):
        raise ConfigurationError("the M_rho iteration requires a Lax-Friedrichs operator")
    return sys.operator.weights


def _mrho_step(sys: DiscreteSystem, U: np.ndarray, rho: float):
    """One sweep on a full grid vector; boundary values are carried over."""
    h2 = sys.grid.h**2
    G = sys.residual_full(U)
    d2 = (U[2:] - 2.0 * U[1:-1] + U[:-2]) / h2
    # The second-difference matrix is negative definite; solve with its
    # negation (2 on the diagonal, -1 off it) and flip the right-hand side.
    rhs = -h2 * (d2 + rho * G)
    rhs[0] += U[0]
    rhs[-1] += U[-1]
    n = len(rhs)
    off = -np.ones(n - 1)
    out = np.empty_like(U)
    out[0], out[-1] = U[0], U[-1]
    out[1:-1] = tridiagonal_solve(off, 2.0 * np.ones(n), off, rhs)
    return out, G


def mrho_map(sys: DiscreteSystem, U, rho: float) -> np.ndarray:
    """Apply the M_rho sweep to a full grid vector."""
    _require_lf(sys)
    values = U.values if isinstance(U, GridFunction) else np.asarray(U, dtype=float)
    return _mrho_step(sys, values, rho)[0]


def estimate_gamma(sys: DiscreteSystem, box: Optional[Box] = None, n_samples: int = 2000):
    """``(gamma, slope_max, source)`` from the problem hint or a sampled estimate."""
    pb = sys.problem
    if pb.gamma_hint is not None and box is None:
        return pb.gamma_hint, pb.gamma_hint, "problem hint"
    box = box or pb.box
    if box is None:
        raise ConfigurationError(f"{pb.name}: no gamma given and no sampling box declared")
    rep = check_ellipticity(pb.F, box, n_samples)
    if not rep.passed:
        raise ConfigurationError(f"{pb.name}: F is not elliptic on the sampling box")
    bounds = rep.bounds
    gamma = bounds.gamma if bounds is not None else rep.gamma_hat
    return gamma, rep.gamma_hat, "sampled estimate"


def mrho_solve(sys: DiscreteSystem, U0, opts: FixedPointOptions = FixedPointOptions(),
               gamma: Optional[float] = None):
    """Iterate the M_rho map to a fixed point; returns ``(GridFunction, SolveReport)``."""
    w = _require_lf(sys)
    if gamma is None:
        gamma, slope_max, gamma_source = estimate_gamma(sys)
    else:
        slope_max, gamma_source = gamma, "user supplied"
    window = rho_window(gamma, w, slope_max)
    rho = window.auto() if opts.rho == "auto" else float(opts.rho)
    if not math.isfinite(rho) or rho <= 0:
        raise ConfigurationError(f"no usable rho (window {window})")

    U = _as_values(U0, sys)
    history = deque(maxlen=HISTORY_CAP)
    extras = dict(rho=rho, gamma=gamma, gamma_source=gamma_source, window=window)
    echo = sys.config.describe()
    diff = math.inf

    def report(status, k, rnorm, msg=""):
        return GridFunction(sys.grid, U), SolveReport(status, k, rnorm, diff, list(history), "mrho",
                                                      echo, msg, extras)

    for k in range(opts.max_iters + 1):
        try:
            new, G = _mrho_step(sys, U, rho)
        except OperatorEvaluationError as exc:
            return report(Status.NON_FINITE_RESIDUAL, k, math.inf, str(exc))
        rnorm = float(np.max(np.abs(G)))
        history.append(rnorm)
        if not (math.isfinite(rnorm) and np.all(np.isfinite(new))):
            return report(Status.NON_FINITE_RESIDUAL, k, rnorm, "iteration produced non-finite values")
        if rnorm <= opts.res_tol:
            return report(Status.CONVERGED, k, rnorm)
        if k == opts.max_iters:
            return report(Status.MAX_ITERS, k, rnorm)
        diff = float(np.max(np.abs(new - U)))
        U = new
        if diff <= opts.tol:
            # Increments have stopped moving but the residual is still large.
            r_now = float(np.max(np.abs(sys.residual_full(U))))
            history.append(r_now)
            if r_now <= opts.res_tol:
                return report(Status.CONVERGED, k + 1, r_now)
            return report(Status.STALLED, k + 1, r_now, "successive difference below tol")
    raise AssertionError("unreachable")


@dataclass
class ProbeReport:
    max_ratio: float
    shift_defect: float
    trials: int
    rho: float


def _sample_admissible(sys: DiscreteSystem, box: Box, rng) -> np.ndarray:
    """Grid vector with the boundary data and interior second differences in ``box.p``."""
    n = sys.n
    W = rng.uniform(box.p[0], box.p[1], n)
    rhs = -sys.grid.h**2 * W
    rhs[0] += sys.problem.u_a
    rhs[-1] += sys.problem.u_b
    off = -np.ones(n - 1)
    return sys.full(tridiagonal_solve(off, 2.0 * np.ones(n), off, rhs))


def nonexpansiveness_probe(sys: DiscreteSystem, rho: float, trials: int = 200,
                           box: Optional[Box] = None, shift: float = 1.0, seed=0) -> ProbeReport:
    """Sampled max-norm Lipschitz ratio of M_rho and its shift-commutation defect.

    Pairs share the boundary data and have interior second differences drawn
    from ``box.p`` (default: the problem's declared box).
    """
    _require_lf(sys)
    box = box or sys.problem.box
    rng = np.random.default_rng(seed)
    worst = 0.0
    shift_defect = 0.0
    for _ in range(trials):
        U = _sample_admissible(sys, box, rng)
        V = _sample_admissible(sys, box, rng)
        MU = mrho_map(sys, U, rho)
        MV = mrho_map(sys, V, rho)
        denom = float(np.max(np.abs(U - V)))
        if denom > 0:
            worst = max(worst, float(np.max(np.abs(MU - MV))) / denom)
        shifted = mrho_map(sys, U + shift, rho)
        shift_defect = max(shift_defect, float(np.max(np.abs(shifted - MU - shift))))
    return ProbeReport(worst, shift_defect, trials, rho)

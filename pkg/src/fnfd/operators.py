"""Numerical operators ``Fhat(p1, p2, p3, v, x)`` and sampled property checks.

``p1, p2, p3`` are the second differences at ``j - 1, j, j + 1``. Two families
are provided:

* Lax-Friedrichs-like: ``F(b1 p1 + b2 p2 + b3 p3, v, x) + alpha (p1 - 2 p2 + p3)``
  where the last term is the numerical moment (an ``h**2``-scaled fourth
  difference of ``U``).
* Godunov-like: a case-dependent extremum of ``p -> F(p, v, x)`` over the
  interval spanned by the three second differences (``ext`` and ``extr``).

All operators evaluate elementwise on broadcastable arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Union

import numpy as np

from .problems import Box

__all__ = [
    "OperatorEvaluationError",
    "LFWeights",
    "LaxFriedrichs",
    "GodunovExt",
    "GodunovExtr",
    "OperatorKind",
    "ExtremumStrategy",
    "EllipticityBounds",
    "lf_apply",
    "numerical_moment",
    "interval_extremum",
    "godunov_ext",
    "godunov_extr",
    "make_operator",
    "alpha_lower_bound",
    "check_consistency",
    "check_gmonotonicity",
    "check_ellipticity",
    "ConsistencyReport",
    "GMonotonicityReport",
    "EllipticityReport",
]

_PRESET_BETAS = {
    "lf1": (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    "lf2": (0.0, 1.0, 0.0),
    "lf3": (0.25, 0.5, 0.25),
}


class OperatorEvaluationError(ArithmeticError):
    """``F`` produced a non-finite value; ``where`` holds the offending inputs."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


def _checked(values, p, v, x, what="F"):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        args = tuple(float(np.broadcast_to(t, values.shape).ravel()[i]) for t in (p, v, x))
        raise OperatorEvaluationError(f"non-finite {what} at (p, v, x) = {args}", where=args)
    return values


@dataclass(frozen=True)
class LFWeights:
    """Averaging weights ``beta`` and moment coefficient ``alpha``.

    ``alpha`` may be any real number; negative values select the concave
    branch in sign-indefinite problems.
    """

    beta1: float
    beta2: float
    beta3: float
    alpha: float = 1.0

    def __post_init__(self):
        betas = (self.beta1, self.beta2, self.beta3)
        if any(b < 0 or not np.isfinite(b) for b in betas):
            raise ValueError(f"weights must be finite and nonnegative, got {betas}")
        if abs(sum(betas) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got sum {sum(betas)!r}")
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    @classmethod
    def preset(cls, name: str, alpha: float = 1.0) -> "LFWeights":
        try:
            return cls(*_PRESET_BETAS[name], alpha=alpha)
        except KeyError:
            raise ValueError(f"unknown weight preset {name!r}") from None

    @property
    def betas(self) -> tuple[float, float, float]:
        return (self.beta1, self.beta2, self.beta3)


@dataclass(frozen=True)
class EllipticityBounds:
    """``gamma`` with ``-gamma <= dF/dp <= -1/gamma < 0``."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class ExtremumStrategy:
    """How ``interval_extremum`` searches ``[lo, hi]``.

    ``"endpoints"`` compares ``F(lo)`` and ``F(hi)`` only and is exact when
    ``F`` is monotone in ``p``; ``"sampled"`` scans ``n + 1`` equispaced points
    and then refines around the best one by golden-section search.
    """

    kind: Literal["endpoints", "sampled"] = "sampled"
    n: int = 256
    refine_iters: int = 60

    def __post_init__(self):
        if self.kind not in ("endpoints", "sampled"):
            raise ValueError(f"unknown extremum strategy {self.kind!r}")
        if self.n < 2:
            raise ValueError("sampled strategy needs n >= 2")

    def __str__(self):
        return "endpoints" if self.kind == "endpoints" else f"sampled({self.n})+golden"


ENDPOINTS = ExtremumStrategy("endpoints")
SAMPLED = ExtremumStrategy("sampled", 256)


def numerical_moment(p1, p2, p3):
    return np.asarray(p1) - 2.0 * np.asarray(p2) + np.asarray(p3)


def lf_apply(w: LFWeights, F: Callable, p1, p2, p3, v, x):
    """Lax-Friedrichs-like operator: weighted-mean ``F`` plus numerical moment."""
    pbar = w.beta1 * np.asarray(p1) + w.beta2 * np.asarray(p2) + w.beta3 * np.asarray(p3)
    val = _checked(F(pbar, v, x), pbar, v, x)
    out = val + w.alpha * numerical_moment(p1, p2, p3)
    return float(out) if np.ndim(out) == 0 else out


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def interval_extremum(F: Callable, v, x, lo, hi, mode, strategy: ExtremumStrategy = SAMPLED):
    """Minimum or maximum of ``p -> F(p, v, x)`` over ``[lo, hi]``.

    ``mode`` is ``"min"``/``"max"`` or a boolean array that is True where the
    minimum is wanted. All array arguments broadcast together.
    """
    if isinstance(mode, str):
        if mode not in ("min", "max"):
            raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
        mode = mode == "min"
    lo, hi, v, x, is_min = np.broadcast_arrays(
        np.asarray(lo, float), np.asarray(hi, float), np.asarray(v, float),
        np.asarray(x, float), np.asarray(mode, bool),
    )
    if np.any(lo > hi):
        raise ValueError("interval_extremum needs lo <= hi")
    shape = lo.shape
    lo, hi, v, x, is_min = (t.ravel() for t in (lo, hi, v, x, is_min))
    sgn = np.where(is_min, 1.0, -1.0)

    if strategy.kind == "endpoints":
        flo = _checked(F(lo, v, x), lo, v, x)
        fhi = _checked(F(hi, v, x), hi, v, x)
        best = np.where(is_min, np.minimum(flo, fhi), np.maximum(flo, fhi))
        return _shape(best, shape)

    t = np.linspace(0.0, 1.0, strategy.n + 1)
    width = hi - lo
    pts = lo[:, None] + width[:, None] * t[None, :]
    pts[:, -1] = hi
    vals = _checked(F(pts, v[:, None], x[:, None]), pts, v[:, None], x[:, None])
    s = sgn[:, None] * vals
    k = np.argmin(s, axis=1)
    rows = np.arange(len(lo))
    best = s[rows, k]

    if strategy.refine_iters > 0 and np.any(width > 0):
        # Golden-section on the bracket around the best sample.
        a = pts[rows, np.maximum(k - 1, 0)]
        b = pts[rows, np.minimum(k + 1, strategy.n)]
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc = sgn * _checked(F(c, v, x), c, v, x)
        fd = sgn * _checked(F(d, v, x), d, v, x)
        for _ in range(strategy.refine_iters):
            left = fc < fd
            a, b = np.where(left, a, c), np.where(left, d, b)
            # The surviving interior point is reused; only one new evaluation.
            newp = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
            fnew = sgn * _checked(F(newp, v, x), newp, v, x)
            c, d = np.where(left, newp, d), np.where(left, c, newp)
            fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        best = np.minimum(best, np.minimum(fc, fd))

    return _shape(sgn * best, shape)


def _shape(values, shape):
    values = values.reshape(shape)
    return float(values) if values.ndim == 0 else values


def _godunov_cases(p1, p2, p3, variant: str):
    p1, p2, p3 = np.broadcast_arrays(*(np.asarray(p, float) for p in (p1, p2, p3)))
    top = p2 >= np.maximum(p1, p3)
    bottom = ~top & (p2 <= np.minimum(p1, p3))
    rising = ~top & ~bottom & (p1 < p2)  # p1 < p2 < p3
    # remaining: p3 < p2 < p1
    lo = np.where(top, np.minimum(p1, p3), p2)
    hi = np.where(top, p2, np.maximum(p1, p3))
    is_min = top.copy()
    middle = ~top & ~bottom
    if variant == "ext":
        lo = np.where(middle, np.where(rising, p1, p3), lo)
        hi = np.where(middle, p2, hi)
        is_min = is_min | middle
    elif variant == "extr":
        lo = np.where(middle, p2, lo)
        hi = np.where(middle, np.where(rising, p3, p1), hi)
    else:
        raise ValueError(f"unknown Godunov variant {variant!r}")
    return lo, hi, is_min


def godunov_ext(F: Callable, p1, p2, p3, v, x, strategy: ExtremumStrategy = SAMPLED):
    lo, hi, is_min = _godunov_cases(p1, p2, p3, "ext")
    return interval_extremum(F, v, x, lo, hi, is_min, strategy)


def godunov_extr(F: Callable, p1, p2, p3, v, x, strategy: ExtremumStrategy = SAMPLED):
    lo, hi, is_min = _godunov_cases(p1, p2, p3, "extr")
    return interval_extremum(F, v, x, lo, hi, is_min, strategy)


@dataclass(frozen=True)
class LaxFriedrichs:
    weights: LFWeights

    @property
    def name(self) -> str:
        for key, betas in _PRESET_BETAS.items():
            if np.allclose(betas, self.weights.betas, rtol=0, atol=1e-15):
                return f"{key}(alpha={self.weights.alpha:g})"
        return "lf(beta=({:g},{:g},{:g}), alpha={:g})".format(*self.weights.betas, self.weights.alpha)

    def __call__(self, F, p1, p2, p3, v, x):
        return lf_apply(self.weights, F, p1, p2, p3, v, x)


@dataclass(frozen=True)
class GodunovExt:
    """``strategy=None`` means sampled search unless a problem declares monotonicity."""

    strategy: Optional[ExtremumStrategy] = None
    name = "godunov-ext"

    def __call__(self, F, p1, p2, p3, v, x):
        return godunov_ext(F, p1, p2, p3, v, x, self.strategy or SAMPLED)


@dataclass(frozen=True)
class GodunovExtr:
    strategy: Optional[ExtremumStrategy] = None
    name = "godunov-extr"

    def __call__(self, F, p1, p2, p3, v, x):
        return godunov_extr(F, p1, p2, p3, v, x, self.strategy or SAMPLED)


OperatorKind = Union[LaxFriedrichs, GodunovExt, GodunovExtr]

SCHEMES = ("lf1", "lf2", "lf3", "godunov-ext", "godunov-extr")


def make_operator(scheme: str, alpha: float = 1.5, betas=None,
                  strategy: Optional[ExtremumStrategy] = None) -> OperatorKind:
    """Build an operator from a scheme name (``lf1``..``lf3``, ``godunov-ext(r)``)."""
    if betas is not None:
        if not scheme.startswith("lf"):
            raise ValueError("custom weights only apply to Lax-Friedrichs schemes")
        return LaxFriedrichs(LFWeights(*betas, alpha=alpha))
    if scheme in _PRESET_BETAS:
        return LaxFriedrichs(LFWeights.preset(scheme, alpha))
    if scheme == "godunov-ext":
        return GodunovExt(strategy)
    if scheme == "godunov-extr":
        return GodunovExtr(strategy)
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def alpha_lower_bound(w: LFWeights, gamma: float) -> float:
    """Moment coefficient above which ``F_beta`` is g-monotone."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return max(w.beta1, w.beta3) * gamma


# --- sampled verifiers -------------------------------------------------------


@dataclass
class ConsistencyReport:
    passed: bool
    max_defect: float
    max_scaled_defect: float
    n_samples: int
    tol: float


@dataclass
class GMonotonicityReport:
    passed: bool
    min_d1: float
    max_d2: float
    min_d3: float
    n_samples: int
    n_violations: int
    worst: list = field(default_factory=list)


@dataclass
class EllipticityReport:
    passed: bool
    max_dFdp: float
    gamma_hat: float
    gamma_low: float
    n_samples: int

    @property
    def bounds(self) -> Optional[EllipticityBounds]:
        """Smallest gamma satisfying both sides of the ellipticity bracket, if any."""
        if not self.passed or self.gamma_low <= 0:
            return None
        return EllipticityBounds(max(self.gamma_hat, 1.0 / self.gamma_low))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def check_consistency(op: OperatorKind, F: Callable, box: Box, n_samples: int = 1000,
                      tol: float = 1e-12, seed=0) -> ConsistencyReport:
    """Compare ``Fhat(p, p, p, v, x)`` with ``F(p, v, x)`` on random samples."""
    p, v, x = box.sample(n_samples, _rng(seed))
    ref = np.asarray(F(p, v, x), dtype=float)
    got = np.asarray(op(F, p, p, p, v, x), dtype=float)
    defect = np.abs(got - ref)
    scaled = defect / (1.0 + np.abs(ref))
    return ConsistencyReport(
        passed=bool(np.all(scaled <= tol)),
        max_defect=float(defect.max()),
        max_scaled_defect=float(scaled.max()),
        n_samples=n_samples,
        tol=tol,
    )


def _fd_step(p, fd_step):
    return fd_step * (1.0 + np.abs(p))


def check_gmonotonicity(op: OperatorKind, F: Callable, box: Box, n_samples: int = 1000,
                        fd_step: float = 1e-5, tol: float = 1e-8, seed=0,
                        keep_worst: int = 5) -> GMonotonicityReport:
    """Probe the sign pattern ``(+, -, +)`` of the partials of ``Fhat``.

    Each of ``p1, p2, p3`` is drawn independently from the box's p-range and
    differentiated by central differences.
    """
    rng = _rng(seed)
    lo, hi = box.p
    ps = [rng.uniform(lo, hi, n_samples) for _ in range(3)]
    _, v, x = box.sample(n_samples, rng)
    derivs = []
    for k in range(3):
        step = _fd_step(ps[k], fd_step)
        up = list(ps)
        dn = list(ps)
        up[k] = ps[k] + step
        dn[k] = ps[k] - step
        fu = np.asarray(op(F, *up, v, x), dtype=float)
        fl = np.asarray(op(F, *dn, v, x), dtype=float)
        derivs.append((fu - fl) / (2.0 * step))
    d1, d2, d3 = derivs
    scale = 1.0 + np.abs(d1) + np.abs(d2) + np.abs(d3)
    thresh = tol * scale
    viol = (d1 < -thresh) | (d2 > thresh) | (d3 < -thresh)
    # Severity of each sample's worst sign violation, for the report.
    severity = np.maximum.reduce([-d1 - thresh, d2 - thresh, -d3 - thresh])
    worst_idx = np.argsort(-severity)[: min(keep_worst, int(viol.sum()))]
    worst = [
        dict(p1=float(ps[0][i]), p2=float(ps[1][i]), p3=float(ps[2][i]), v=float(v[i]),
             x=float(x[i]), d1=float(d1[i]), d2=float(d2[i]), d3=float(d3[i]))
        for i in worst_idx
    ]
    return GMonotonicityReport(
        passed=not bool(viol.any()),
        min_d1=float(d1.min()),
        max_d2=float(d2.max()),
        min_d3=float(d3.min()),
        n_samples=n_samples,
        n_violations=int(viol.sum()),
        worst=worst,
    )


def check_ellipticity(F: Callable, box: Box, n_samples: int = 1000, fd_step: float = 1e-5,
                      tol: float = 1e-8, seed=0) -> EllipticityReport:
    """Sampled check that ``F`` is nonincreasing in ``p``.

    Also reports ``gamma_hat = max(-dF/dp)`` and ``gamma_low = min(-dF/dp)``.
    """
    p, v, x = box.sample(n_samples, _rng(seed))
    step = _fd_step(p, fd_step)
    dF = (np.asarray(F(p + step, v, x), float) - np.asarray(F(p - step, v, x), float)) / (2.0 * step)
    return EllipticityReport(
        passed=bool(np.all(dF <= tol * (1.0 + np.abs(dF)))),
        max_dFdp=float(dF.max()),
        gamma_hat=float((-dF).max()),
        gamma_low=float((-dF).min()),
        n_samples=n_samples,
    )

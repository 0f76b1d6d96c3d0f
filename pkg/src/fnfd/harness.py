"""Mesh-refinement studies: initial guesses, error/order rows and their output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .assembly import DiscreteSystem, GhostPolicy, SchemeConfig
from .grid import Grid, GridFunction, linf_error
from .operators import make_operator
from .problems import Problem, get_problem
from .solvers import FixedPointOptions, NewtonOptions, mrho_solve, newton_solve

__all__ = [
    "LinearInterpolant",
    "CoarseSolveInterpolate",
    "CustomFunction",
    "CUSTOM_GUESSES",
    "CoarseSolveError",
    "StudyConfig",
    "ConvergenceRow",
    "make_grid_for",
    "halvings",
    "build_initial_guess",
    "observed_order",
    "run_study",
    "emit_csv",
    "read_csv",
    "emit_table",
    "emit_plot_data",
    "PRESETS",
    "preset_config",
]

CSV_HEADER = ("h", "linf_error", "order", "status", "iterations")


@dataclass(frozen=True)
class LinearInterpolant:
    def describe(self):
        return "linear"


@dataclass(frozen=True)
class CoarseSolveInterpolate:
    """Solve on a coarse mesh first and interpolate the result.

    ``interpolation="cubic"`` (not-a-knot spline) keeps the second
    differences of the guess close to the coarse curvature. A piecewise
    linear guess has zero second difference at every new midpoint, which
    makes the Newton Jacobian singular for stencils such as ``F(p) = 1 - p**2``.
    """

    coarse_h: float
    coarse_config: SchemeConfig
    interpolation: str = "cubic"

    def __post_init__(self):
        if self.interpolation not in ("cubic", "linear"):
            raise ValueError(f"interpolation must be 'cubic' or 'linear', got {self.interpolation!r}")

    def describe(self):
        return f"coarse:{self.coarse_h:g} ({self.coarse_config.describe()}, {self.interpolation})"


@dataclass(frozen=True)
class CustomFunction:
    f: Callable
    name: str = "custom"

    def describe(self):
        return f"custom:{self.name}"


InitialGuess = Union[LinearInterpolant, CoarseSolveInterpolate, CustomFunction]

CUSTOM_GUESSES: dict[str, Callable] = {
    "example4-cubic": lambda x: 3.0 / 14.0 * x**3 + 16.0 / 7.0,
}


class CoarseSolveError(RuntimeError):
    def __init__(self, report):
        super().__init__(f"coarse solve did not converge ({report.status})")
        self.report = report


def make_grid_for(problem: Problem, h: float, mesh: str = "spacing") -> Grid:
    """Grid for a nominal ``h``.

    ``mesh="spacing"``: ``h`` is the node spacing. ``mesh="normalized"``: ``h`` is
    ``1 / (J - 1)`` whatever the domain length; the table presets use this
    labelling.
    """
    if mesh == "spacing":
        return Grid.from_spacing(problem.a, problem.b, h)
    if mesh == "normalized":
        n = 1.0 / h
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"normalized mesh needs 1/h integral, got h={h}")
        return Grid(problem.a, problem.b, int(round(n)) + 1)
    raise ValueError(f"unknown mesh convention {mesh!r}")


def halvings(h0: float, n: int) -> list[float]:
    """``[h0, h0/2, ..., h0/2**n]``."""
    return [h0 / 2**k for k in range(n + 1)]


def _solve(system, U0, solver, newton_opts, fp_opts, gamma):
    if solver == "newton":
        return newton_solve(system, U0, newton_opts)
    if solver == "mrho":
        return mrho_solve(system, U0, fp_opts, gamma)
    raise ValueError(f"unknown solver {solver!r}")


def build_initial_guess(g: InitialGuess, grid: Grid, problem: Problem, mesh: str = "spacing",
                        newton_opts: NewtonOptions = NewtonOptions()) -> GridFunction:
    if isinstance(g, LinearInterpolant):
        slope = (problem.u_b - problem.u_a) / (problem.b - problem.a)
        return GridFunction(grid, problem.u_a + slope * (grid.x - problem.a))
    if isinstance(g, CustomFunction):
        return grid.sample(g.f)
    if isinstance(g, CoarseSolveInterpolate):
        coarse = make_grid_for(problem, g.coarse_h, mesh)
        if coarse.h < grid.h * (1 - 1e-12):
            raise ValueError("coarse mesh must not be finer than the target mesh")
        system = DiscreteSystem(coarse, problem, g.coarse_config)
        Uc, rep = newton_solve(system, build_initial_guess(LinearInterpolant(), coarse, problem), newton_opts)
        if not rep.converged:
            raise CoarseSolveError(rep)
        if g.interpolation == "linear":
            values = np.interp(grid.x, coarse.x, Uc.values)
        else:
            values = CubicSpline(coarse.x, Uc.values)(grid.x)
        values[0], values[-1] = problem.u_a, problem.u_b
        return GridFunction(grid, values)
    raise TypeError(f"unsupported initial guess {g!r}")


def observed_order(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> Optional[float]:
    """``log(e_coarse / e_fine) / log(h_coarse / h_fine)``; None when undefined."""
    if not (h_coarse > h_fine > 0):
        raise ValueError("observed_order needs h_coarse > h_fine > 0")
    if not (e_coarse > 0 and e_fine > 0 and math.isfinite(e_coarse) and math.isfinite(e_fine)):
        return None
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


@dataclass
class ConvergenceRow:
    h: float
    linf_error: float
    order: Optional[float]
    status: str
    iterations: int


@dataclass
class StudyConfig:
    problem: str
    scheme: SchemeConfig
    hs: Sequence[float]
    solver: str = "newton"
    reference: str = "exact"
    guess: InitialGuess = field(default_factory=LinearInterpolant)
    mesh: str = "spacing"
    newton_options: NewtonOptions = field(default_factory=NewtonOptions)
    fixed_point_options: FixedPointOptions = field(default_factory=FixedPointOptions)
    gamma: Optional[float] = None

    def __post_init__(self):
        hs = list(self.hs)
        if not hs or any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("h list must be nonempty and strictly decreasing")
        if self.reference not in ("exact", "alternate"):
            raise ValueError("reference must be 'exact' or 'alternate'")
        self.hs = hs
        get_problem(self.problem).reference(self.reference)


def run_study(cfg: StudyConfig, keep_solutions: bool = False):
    """One row per mesh; failed rows stay in the output with their status.

    With ``keep_solutions`` the computed grid functions are returned as a
    second list.
    """
    problem = get_problem(cfg.problem)
    ref = problem.reference(cfg.reference)
    rows: list[ConvergenceRow] = []
    solutions = []
    for h in cfg.hs:
        grid = make_grid_for(problem, h, cfg.mesh)
        system = DiscreteSystem(grid, problem, cfg.scheme)
        try:
            U0 = build_initial_guess(cfg.guess, grid, problem, cfg.mesh, cfg.newton_options)
        except CoarseSolveError as exc:
            rows.append(ConvergenceRow(h, math.nan, None, f"CoarseSolveFailed({exc.report.status})", 0))
            solutions.append(None)
            continue
        U, rep = _solve(system, U0, cfg.solver, cfg.newton_options, cfg.fixed_point_options, cfg.gamma)
        err = linf_error(U, ref) if U is not None else math.nan
        order = None
        if rows:
            prev = rows[-1]
            order = observed_order(prev.linf_error, err, prev.h, h)
        rows.append(ConvergenceRow(h, err, order, str(rep.status), rep.iterations))
        solutions.append(U)
    return (rows, solutions) if keep_solutions else rows


def _fmt17(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.17g}"


def _open_for_write(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(rows: Sequence[ConvergenceRow], path=None) -> str:
    """CSV text with header ``h,linf_error,order,status,iterations``.

    Floats carry 17 significant digits so :func:`read_csv` restores them
    exactly. Written to ``path`` when given.
    """
    if not rows:
        raise ValueError("no rows to emit")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt17(r.h), _fmt17(r.linf_error), _fmt17(r.order), r.status, r.iterations])
    text = buf.getvalue()
    if path is not None:
        with _open_for_write(path) as fh:
            fh.write(text)
    return text


def read_csv(source) -> list[ConvergenceRow]:
    """Parse :func:`emit_csv` output from a path or a text stream."""
    fh = open(source, newline="") if not hasattr(source, "read") else source
    try:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [
            ConvergenceRow(
                h=float(rec["h"]),
                linf_error=float(rec["linf_error"]),
                order=float(rec["order"]) if rec["order"] else None,
                status=rec["status"],
                iterations=int(rec["iterations"]),
            )
            for rec in reader
        ]
    finally:
        if fh is not source:
            fh.close()


def emit_table(rows: Sequence[ConvergenceRow], title: str = "") -> str:
    if not rows:
        raise ValueError("no rows to emit")
    head = ("h", "Linf error", "order", "status", "iters")
    body = [
        (f"{r.h:.4e}", f"{r.linf_error:.2e}", "" if r.order is None else f"{r.order:.2f}", r.status,
         str(r.iterations))
        for r in rows
    ]
    widths = [max(len(head[k]), *(len(b[k]) for b in body)) for k in range(len(head))]
    line = lambda cells: "  ".join(c.rjust(wd) for c, wd in zip(cells, widths)).rstrip()
    out = [title] if title else []
    out += [line(head), line(["-" * wd for wd in widths])]
    out += [line(b) for b in body]
    return "\n".join(out) + "\n"


def emit_plot_data(U: GridFunction, grid: Grid, exact: Optional[Callable], path) -> None:
    """Whitespace-separated ``x value`` blocks: computed, then exact.

    Blocks are separated by two blank lines (gnuplot ``index`` convention).
    """
    lines = ["# computed"]
    lines += [f"{x:.17g} {v:.17g}" for x, v in zip(grid.x, U.values)]
    if exact is not None:
        ref = np.broadcast_to(exact(grid.x), grid.x.shape)
        lines += ["", "", "# exact"]
        lines += [f"{x:.17g} {v:.17g}" for x, v in zip(grid.x, ref)]
    with _open_for_write(path) as fh:
        fh.write("\n".join(lines) + "\n")


# --- named table sweeps --------------------------------------------------------


def _scheme(name, alpha=0.0, ghost=GhostPolicy.LINEAR_EXTRAPOLATION):
    return SchemeConfig(make_operator(name, alpha), ghost)


def _coarse(alpha):
    return CoarseSolveInterpolate(0.1, _scheme("lf1", alpha))


_H5 = halvings(0.1, 4)
_H3 = halvings(0.1, 2)
_H4 = halvings(0.1, 3)

PRESETS: dict[str, dict] = {
    "table1": dict(problem="example1", scheme=("lf1", 1.5), hs=_H5),
    "table1-godunov": dict(problem="example1", scheme=("godunov-ext", 0.0), hs=_H5),
    "table2": dict(problem="example1", scheme=("lf1", 1.5), hs=_H5, guess=_coarse(1.5)),
    "table2-godunov": dict(problem="example1", scheme=("godunov-ext", 0.0), hs=_H5, guess=_coarse(1.5)),
    "table3-alpha1": dict(problem="example2", scheme=("lf1", 1.0), hs=_H3),
    "table3-alpha-1": dict(problem="example2", scheme=("lf1", -1.0), hs=_H3, reference="alternate"),
    "table3-godunov": dict(problem="example2", scheme=("godunov-ext", 0.0), hs=_H3),
    "table4-alpha6": dict(problem="example2", scheme=("lf2", 6.0), hs=_H3),
    "table4-alpha0.05": dict(problem="example2", scheme=("lf2", 0.05), hs=_H3),
    "table4-alpha0": dict(problem="example2", scheme=("lf2", 0.0), hs=_H3),
    "table5-lf1": dict(problem="example2", scheme=("lf1", 1.0), hs=_H4, guess=_coarse(1.0)),
    "table5-godunov": dict(problem="example2", scheme=("godunov-ext", 0.0), hs=_H4, guess=_coarse(1.0)),
    "table5-fd3": dict(problem="example2", scheme=("lf2", 0.0), hs=_H4, guess=_coarse(1.0)),
    "table6-lf1": dict(problem="example2", scheme=("lf1", -1.0), hs=_H4, guess=_coarse(-1.0),
                       reference="alternate"),
    "table6-godunov": dict(problem="example2", scheme=("godunov-ext", 0.0), hs=_H4, guess=_coarse(-1.0),
                           reference="alternate"),
    "table6-fd3": dict(problem="example2", scheme=("lf2", 0.0), hs=_H4, guess=_coarse(-1.0),
                       reference="alternate"),
    "table7-lf1": dict(problem="example3", scheme=("lf1", 1.0), hs=halvings(0.1, 5)),
    "table7-godunov": dict(problem="example3", scheme=("godunov-ext", 0.0), hs=halvings(0.1, 5)),
    "table8-lf1": dict(problem="example4", scheme=("lf1", 0.5), hs=_H3),
    "table8-godunov": dict(problem="example4", scheme=("godunov-ext", 0.0), hs=_H3),
    "table9-lf1": dict(problem="example4", scheme=("lf1", 0.5), hs=_H5,
                       guess=CustomFunction(CUSTOM_GUESSES["example4-cubic"], "example4-cubic")),
    "table9-godunov": dict(problem="example4", scheme=("godunov-ext", 0.0), hs=_H5,
                           guess=CustomFunction(CUSTOM_GUESSES["example4-cubic"], "example4-cubic")),
    "table10-lf1": dict(problem="example5", scheme=("lf1", 1.5), hs=_H5),
    "table10-godunov": dict(problem="example5", scheme=("godunov-ext", 0.0), hs=_H5),
    "table11-lf1": dict(problem="example5", scheme=("lf1", 1.5), hs=_H5, guess=_coarse(1.5)),
    "table11-godunov": dict(problem="example5", scheme=("godunov-ext", 0.0), hs=_H5, guess=_coarse(1.5)),
}


def preset_config(name: str, mesh: str = "normalized", ghost=GhostPolicy.LINEAR_EXTRAPOLATION) -> StudyConfig:
    """StudyConfig for a named table sweep (normalized mesh by default)."""
    try:
        entry = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    scheme, alpha = entry.pop("scheme")
    return StudyConfig(scheme=_scheme(scheme, alpha, ghost), mesh=mesh, **entry)

"""Command-line front end: ``fnfd {solve,study,verify} ...``.

Exit codes: 0 success, 1 solver non-convergence (or a failed property in
``verify``), 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from .assembly import DiscreteSystem, GhostPolicy, SchemeConfig
from .grid import linf_error
from .harness import (
    CUSTOM_GUESSES,
    PRESETS,
    CoarseSolveError,
    CoarseSolveInterpolate,
    ConvergenceRow,
    CustomFunction,
    LinearInterpolant,
    StudyConfig,
    build_initial_guess,
    emit_csv,
    emit_plot_data,
    emit_table,
    halvings,
    make_grid_for,
    preset_config,
    run_study,
)
from .operators import (
    SCHEMES,
    LaxFriedrichs,
    alpha_lower_bound,
    check_consistency,
    check_ellipticity,
    check_gmonotonicity,
    make_operator,
)
from .problems import PROBLEMS, get_problem
from .solvers import ConfigurationError, FixedPointOptions, NewtonOptions, mrho_solve, newton_solve

EXIT_OK, EXIT_NONCONVERGED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    subcommand: str
    problem: str
    scheme: str = "lf1"
    alpha: float = 1.5
    betas: Optional[tuple[float, float, float]] = None
    ghost: GhostPolicy = GhostPolicy.LINEAR_EXTRAPOLATION
    solver: str = "newton"
    rho: object = "auto"
    gamma: Optional[float] = None
    guess: str = "linear"
    coarse_scheme: str = "lf1"
    coarse_alpha: Optional[float] = None
    hs: tuple[float, ...] = (0.1,)
    reference: str = "exact"
    mesh: str = "spacing"
    out: Optional[str] = None
    format: str = "table"
    preset: Optional[str] = None
    max_iters: Optional[int] = None
    samples: int = 1000

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(make_operator(self.scheme, self.alpha, self.betas), self.ghost)

    def initial_guess(self):
        if self.guess == "linear":
            return LinearInterpolant()
        kind, _, arg = self.guess.partition(":")
        if kind == "coarse":
            calpha = self.coarse_alpha
            if calpha is None:
                calpha = self.alpha if self.scheme.startswith("lf") else 1.5
            return CoarseSolveInterpolate(float(arg), SchemeConfig(make_operator(self.coarse_scheme, calpha),
                                                                  self.ghost))
        return CustomFunction(CUSTOM_GUESSES[arg], arg)

    def newton_options(self) -> NewtonOptions:
        return NewtonOptions() if self.max_iters is None else NewtonOptions(max_iters=self.max_iters)

    def fixed_point_options(self) -> FixedPointOptions:
        kw = {"rho": self.rho}
        if self.max_iters is not None:
            kw["max_iters"] = self.max_iters
        return FixedPointOptions(**kw)

    def study_config(self) -> StudyConfig:
        if self.preset is not None:
            return preset_config(self.preset, mesh=self.mesh, ghost=self.ghost)
        return StudyConfig(
            problem=self.problem,
            scheme=self.scheme_config(),
            hs=list(self.hs),
            solver=self.solver,
            reference=self.reference,
            guess=self.initial_guess(),
            mesh=self.mesh,
            newton_options=self.newton_options(),
            fixed_point_options=self.fixed_point_options(),
            gamma=self.gamma,
        )


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _rho(text):
    return text if text == "auto" else _positive_float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key=value file mirroring the long flags")
    common.add_argument("--preset", choices=sorted(PRESETS), help="named table sweep (study only)")
    common.add_argument("--problem", choices=sorted(PROBLEMS))
    common.add_argument("--scheme", choices=SCHEMES, default="lf1")
    common.add_argument("--alpha", type=float, default=1.5, help="numerical moment coefficient")
    common.add_argument("--betas", type=float, nargs=3, metavar=("B1", "B2", "B3"),
                        help="custom Lax-Friedrichs weights")
    common.add_argument("--ghost", choices=[g.value for g in GhostPolicy],
                        default=GhostPolicy.LINEAR_EXTRAPOLATION.value)
    common.add_argument("--solver", choices=("newton", "mrho"), default="newton")
    common.add_argument("--rho", type=_rho, help="M_rho relaxation parameter or 'auto' (mrho only)")
    common.add_argument("--gamma", type=_positive_float, help="ellipticity constant for mrho")
    common.add_argument("--guess", default="linear", help="linear | coarse:<h> | custom:<name>")
    common.add_argument("--coarse-scheme", choices=SCHEMES[:3], default="lf1")
    common.add_argument("--coarse-alpha", type=float)
    common.add_argument("--h", type=_positive_float, nargs="+", default=[0.1],
                        help="mesh size, or a decreasing list of them")
    common.add_argument("--halvings", type=int, default=None, help="refine --h this many times")
    common.add_argument("--reference", choices=("exact", "alternate"), default="exact")
    common.add_argument("--mesh", choices=("spacing", "normalized"), default=None,
                        help="'spacing': h is the node spacing; 'normalized': J - 1 = 1/h")
    common.add_argument("--max-iters", type=int)
    common.add_argument("--samples", type=int, default=1000, help="sample count for verify")
    common.add_argument("--out", help="output path prefix")
    common.add_argument("--format", choices=("table", "csv"), default="table")

    parser = argparse.ArgumentParser(prog="fnfd", description="Finite-difference solvers for "
                                     "1-D fully nonlinear elliptic boundary value problems.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("solve", parents=[common], help="solve on one mesh")
    sub.add_parser("study", parents=[common], help="mesh-refinement study")
    sub.add_parser("verify", parents=[common], help="sampled operator property checks")
    return parser


def read_config_file(path: str) -> list[str]:
    """Turn ``key = value`` lines into long-flag arguments."""
    args: list[str] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{lineno}: expected key=value")
            args.append("--" + key.strip().replace("_", "-"))
            args.extend(shlex.split(value))
    return args


def parse_args(argv: Sequence[str]) -> CliConfig:
    """Validated :class:`CliConfig`; raises ``SystemExit(2)`` on usage errors."""
    parser = build_parser()
    argv = list(argv)
    ns = parser.parse_args(argv)
    if ns.config:
        try:
            extra = read_config_file(ns.config)
        except UsageError as exc:
            parser.error(str(exc))
        # Explicit flags come last so they override the file.
        k = argv.index(ns.subcommand) + 1
        ns = parser.parse_args([*argv[:k], *extra, *argv[k:]])

    def fail(msg):
        parser.error(msg)

    if ns.preset is not None:
        if ns.subcommand != "study":
            fail("--preset applies to the study subcommand only")
        return CliConfig(subcommand="study", problem=PRESETS[ns.preset]["problem"], preset=ns.preset,
                         ghost=GhostPolicy(ns.ghost), mesh=ns.mesh or "normalized", out=ns.out, format=ns.format)
    if ns.problem is None:
        fail("the following arguments are required: --problem")
    if ns.betas is not None:
        if not ns.scheme.startswith("lf"):
            fail("--betas requires a Lax-Friedrichs scheme (lf1, lf2, lf3)")
        if any(b < 0 for b in ns.betas) or abs(sum(ns.betas) - 1.0) > 1e-12:
            fail(f"--betas must be nonnegative and sum to 1, got {ns.betas}")
    if ns.rho is not None and ns.solver != "mrho":
        fail("--rho only applies with --solver mrho")
    if ns.solver == "mrho" and not ns.scheme.startswith("lf"):
        fail("--solver mrho requires a Lax-Friedrichs scheme (lf1, lf2, lf3)")
    guess = ns.guess
    kind, _, arg = guess.partition(":")
    if kind == "coarse":
        try:
            _positive_float(arg)
        except (ValueError, argparse.ArgumentTypeError):
            fail(f"--guess coarse:<h> needs a positive h, got {guess!r}")
    elif kind == "custom":
        if arg not in CUSTOM_GUESSES:
            fail(f"--guess custom:<name> must name one of {sorted(CUSTOM_GUESSES)}, got {arg!r}")
    elif guess != "linear":
        fail(f"--guess must be linear, coarse:<h> or custom:<name>, got {guess!r}")
    hs = list(ns.h)
    if ns.halvings is not None:
        if len(hs) != 1 or ns.halvings < 0:
            fail("--halvings needs a single --h and a nonnegative count")
        hs = halvings(hs[0], ns.halvings)
    if any(b >= a for a, b in zip(hs, hs[1:])):
        fail("--h values must be strictly decreasing")
    if ns.subcommand == "solve" and len(hs) != 1:
        fail("solve takes a single --h")
    if ns.reference == "alternate" and get_problem(ns.problem).alternate_exact is None:
        fail(f"--reference alternate: {ns.problem} has no alternate solution")
    if ns.max_iters is not None and ns.max_iters < 1:
        fail("--max-iters must be at least 1")
    return CliConfig(
        subcommand=ns.subcommand,
        problem=ns.problem,
        scheme=ns.scheme,
        alpha=ns.alpha,
        betas=tuple(ns.betas) if ns.betas else None,
        ghost=GhostPolicy(ns.ghost),
        solver=ns.solver,
        rho=ns.rho if ns.rho is not None else "auto",
        gamma=ns.gamma,
        guess=guess,
        coarse_scheme=ns.coarse_scheme,
        coarse_alpha=ns.coarse_alpha,
        hs=tuple(hs),
        reference=ns.reference,
        mesh=ns.mesh or "spacing",
        out=ns.out,
        format=ns.format,
        max_iters=ns.max_iters,
        samples=ns.samples,
    )


def _emit_rows(rows, cfg: CliConfig, title: str, out) -> None:
    text = emit_csv(rows) if cfg.format == "csv" else emit_table(rows, title)
    out.write(text)
    if cfg.out:
        emit_csv(rows, f"{cfg.out}.csv")


def _run_solve(cfg: CliConfig, out) -> int:
    problem = get_problem(cfg.problem)
    h = cfg.hs[0]
    grid = make_grid_for(problem, h, cfg.mesh)
    system = DiscreteSystem(grid, problem, cfg.scheme_config())
    try:
        U0 = build_initial_guess(cfg.initial_guess(), grid, problem, cfg.mesh, cfg.newton_options())
    except CoarseSolveError as exc:
        out.write(f"status: CoarseSolveFailed ({exc.report.status})\n")
        return EXIT_NONCONVERGED
    if cfg.solver == "mrho":
        U, rep = mrho_solve(system, U0, cfg.fixed_point_options(), cfg.gamma)
    else:
        U, rep = newton_solve(system, U0, cfg.newton_options())
    ref = problem.reference(cfg.reference)
    err = linf_error(U, ref)
    title = f"{problem.name}: {rep.config}, solver={rep.solver}, J={grid.J}"
    _emit_rows([ConvergenceRow(h, err, None, str(rep.status), rep.iterations)], cfg, title, out)
    out.write(f"status: {rep.status}  residual: {rep.residual_norm:.3e}")
    if "rho" in rep.extras:
        out.write(f"  rho: {rep.extras['rho']:.6g}")
    out.write("\n")
    if rep.message:
        out.write(f"note: {rep.message}\n")
    if cfg.out:
        emit_plot_data(U, grid, ref, f"{cfg.out}.dat")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def _run_study(cfg: CliConfig, out) -> int:
    study = cfg.study_config()
    rows = run_study(study)
    name = cfg.preset or cfg.problem
    title = f"{name}: {study.scheme.describe()}, solver={study.solver}, guess={study.guess.describe()}, " \
            f"mesh={study.mesh}"
    _emit_rows(rows, cfg, title, out)
    return EXIT_OK


def _run_verify(cfg: CliConfig, out) -> int:
    problem = get_problem(cfg.problem)
    if problem.box is None:
        raise ConfigurationError(f"{problem.name} declares no sampling box")
    op = make_operator(cfg.scheme, cfg.alpha, cfg.betas)
    n = cfg.samples
    cons = check_consistency(op, problem.F, problem.box, n)
    mono = check_gmonotonicity(op, problem.F, problem.box, n)
    ell = check_ellipticity(problem.F, problem.box, n)
    box = problem.box
    out.write(f"{problem.name}: {op.name} on p in {box.p}, v in {box.v}, x in {box.x} ({n} samples)\n")
    out.write(f"consistency      {'PASS' if cons.passed else 'FAIL'}  max scaled defect "
              f"{cons.max_defect:.2e}\n")
    out.write(f"g-monotonicity   {'PASS' if mono.passed else 'FAIL'}  {mono.n_violations} violations\n")
    out.write(f"ellipticity      {'PASS' if ell.passed else 'FAIL'}  sampled gamma {ell.gamma_hat:.4g}\n")
    if isinstance(op, LaxFriedrichs) and ell.passed:
        out.write(f"alpha lower bound for g-monotonicity: {alpha_lower_bound(op.weights, ell.gamma_hat):.4g}\n")
    return EXIT_OK if (cons.passed and mono.passed and ell.passed) else EXIT_NONCONVERGED


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except OSError as exc:
        print(f"fnfd: cannot read config file: {exc}", file=sys.stderr)
        return EXIT_IO
    runner = {"solve": _run_solve, "study": _run_study, "verify": _run_verify}[cfg.subcommand]
    try:
        return runner(cfg, out)
    except OSError as exc:
        print(f"fnfd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, ValueError) as exc:
        print(f"fnfd: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

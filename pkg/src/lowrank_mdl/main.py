#!/usr/bin/env python
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lowrank_mdl import __version__
from lowrank_mdl.errors import ConsistencyError, ConvergenceError, LowRankMDLError, PipelineError
from lowrank_mdl.selector import LowRankSelector, SelectionReport
from lowrank_mdl.tools.bits_tool import BitAllocation, QuantizationGrid
from lowrank_mdl.tools.codelength_tool import refine_quantization
from lowrank_mdl.tools.frames_tool import FrameStackManifest, load_frame_stack, load_matrix_csv, save_matrix_csv
from lowrank_mdl.tools.numerics_tool import DataMatrix
from lowrank_mdl.tools.report_tool import DecompositionRecord, SolverRecord, export_artifacts
from lowrank_mdl.tools.rpca_tool import LambdaSchedule, rpca_alm
from lowrank_mdl.tools.settings_tool import Settings, load_settings

# Codes de sortie
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


#################################################
####       Conversion des arguments          ####
#################################################

def _positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not np.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be a positive number")
    return value


def _delta_e(text: str):
    return "auto" if text == "auto" else _positive(text)


def parse_lambdas(text: str) -> LambdaSchedule:
    """``lo:hi:count`` (geometric) or ``a,b,c``, as sparse weights lambda_E."""
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            lo, hi, count = _positive(lo), _positive(hi), int(count)
            if count < 1 or hi < lo or (count > 1 and hi == lo):
                raise argparse.ArgumentTypeError(f"invalid lambda range {text!r}")
            weights = [lo] if count == 1 else list(np.geomspace(lo, hi, count))
        else:
            weights = [_positive(part) for part in text.split(",") if part.strip()]
        if not weights:
            raise argparse.ArgumentTypeError("empty lambda list")
        return LambdaSchedule.from_sparse_weights(weights)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid lambda list {text!r}: {e}")


def _sig(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.6g}"


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    common.add_argument("--config", type=Path, help="YAML file merged over the packaged defaults")

    parser = _Parser(prog="lowrank-mdl",
                     description="Pick the low-rank model of a data matrix with the shortest description.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    select_cmd = commands.add_parser("select", parents=[common], help="sweep the path and select a model")
    select_cmd.add_argument("--input", required=True, type=Path, help="folder of PGM frames or a CSV matrix")
    select_cmd.add_argument("--out", type=Path, help="folder for report.json, curve.csv and frame dumps")
    select_cmd.add_argument("--lambdas", type=parse_lambdas, help="lo:hi:count or a comma list of lambda_E")
    select_cmd.add_argument("--u-coder", choices=["auto", "predictive", "spherical"])
    select_cmd.add_argument("--v-coder", choices=["predictive", "spherical"])
    select_cmd.add_argument("--family", choices=["rpca", "pca"])
    select_cmd.add_argument("--delta-e", type=_delta_e, help="'auto' or the step of the error grid")
    select_cmd.add_argument("--tol", type=_positive)
    select_cmd.add_argument("--max-iter", type=int)
    select_cmd.add_argument("--workers", type=int)

    decompose_cmd = commands.add_parser("decompose", parents=[common], help="solve a single lambda")
    decompose_cmd.add_argument("--input", required=True, type=Path)
    decompose_cmd.add_argument("--lambda", dest="lam", type=_positive,
                               help="lambda_E (default 1/sqrt(max(m, n)))")
    decompose_cmd.add_argument("--out", required=True, type=Path, help="folder for A.csv, E.csv, decomposition.json")
    decompose_cmd.add_argument("--tol", type=_positive)
    decompose_cmd.add_argument("--max-iter", type=int)

    codelength_cmd = commands.add_parser("codelength", parents=[common], help="score a given (A, E) pair")
    codelength_cmd.add_argument("--input", required=True, type=Path)
    codelength_cmd.add_argument("--low-rank", required=True, type=Path, help="A as CSV")
    codelength_cmd.add_argument("--error", required=True, type=Path, help="E as CSV")
    codelength_cmd.add_argument("--u-coder", choices=["auto", "predictive", "spherical"])
    codelength_cmd.add_argument("--v-coder", choices=["predictive", "spherical"])
    codelength_cmd.add_argument("--delta-e", type=_delta_e)
    return parser


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _settings(args) -> Settings:
    settings = load_settings(args.config)
    return settings.with_overrides({
        "solver": {"tol": getattr(args, "tol", None), "max_iter": getattr(args, "max_iter", None)},
        "coders": {"u_mode": getattr(args, "u_coder", None), "v_mode": getattr(args, "v_coder", None),
                   "family": getattr(args, "family", None)},
        "quantization": {"delta_e": getattr(args, "delta_e", None)},
        "runtime": {"workers": getattr(args, "workers", None)},
    })


def load_input(path: Path) -> Tuple[DataMatrix, Optional[FrameStackManifest]]:
    """A folder is a frame stack, a file is a CSV matrix."""
    if path.is_dir():
        return load_frame_stack(path)
    return load_matrix_csv(path), None


#################################################
####               Commandes                 ####
#################################################

def print_report(report: SelectionReport) -> None:
    print(f"{'#':>3} {'kind':<6} {'lambda_E':>12} {'rank':>5} {'L(U)':>12} {'L(S)':>12} "
          f"{'L(V)':>12} {'L(E)':>12} {'total':>12}")
    for i, c in enumerate(report.candidates):
        marker = "*" if i == report.best_index else " "
        if not c.ok:
            print(f"{i:>3} {c.kind:<6} {_sig(c.lambda_sparse):>12} {'-':>5} failed: {c.failure}")
            continue
        a = c.allocation
        print(f"{i:>3} {c.kind:<6} {_sig(c.lambda_sparse):>12} {c.rank:>5} {_sig(a.l_u.bits):>12} "
              f"{_sig(a.l_sigma.bits):>12} {_sig(a.l_v.bits):>12} {_sig(a.l_e.bits):>12} "
              f"{_sig(a.total.bits):>12}{marker}")
    best = report.best
    print(f"selected: {best.kind} candidate, rank {best.rank}, {_sig(best.total_bits)} bits")


def print_allocation(allocation: BitAllocation, grid: QuantizationGrid, rank: int) -> None:
    print(f"rank: {rank}")
    print(f"delta_u: {_sig(grid.delta_u)}  delta_v: {_sig(grid.delta_v)}  delta_e: {_sig(grid.delta_e)}")
    for name, value in allocation.as_row().items():
        print(f"{name}: {_sig(value)}")


def run_select(args) -> int:
    settings = _settings(args)
    data, manifest = load_input(args.input)
    report = LowRankSelector(settings).select_model(data, schedule=args.lambdas)
    print_report(report)
    if args.out is not None:
        export_artifacts(report, manifest, args.out, settings.export.foreground_offset)
    return EXIT_OK


def run_decompose(args) -> int:
    settings = _settings(args)
    data, _ = load_input(args.input)
    lam = args.lam if args.lam is not None else 1.0 / np.sqrt(max(data.shape))
    result = rpca_alm(data, 1.0 / lam, config=settings.solver)
    args.out.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(result.A, args.out / "A.csv")
    save_matrix_csv(result.E, args.out / "E.csv")
    record = DecompositionRecord(
        data_shape=data.shape, lambda_sparse=lam, lambda_nuclear=1.0 / lam, rank=result.rank(),
        solver=SolverRecord(iterations=result.iterations, residual=result.residual, mu=result.mu),
    )
    (args.out / "decomposition.json").write_text(record.model_dump_json(indent=2), encoding="utf-8")
    print(f"lambda_E: {_sig(lam)}  lambda: {_sig(1.0 / lam)}  rank: {record.rank}  "
          f"iterations: {result.iterations}  residual: {_sig(result.residual)}")
    return EXIT_OK


def run_codelength(args) -> int:
    settings = _settings(args)
    data, _ = load_input(args.input)
    A = load_matrix_csv(args.low_rank).entries
    E = load_matrix_csv(args.error).entries
    if A.shape != data.shape or E.shape != data.shape:
        raise ConsistencyError(f"A {A.shape} and E {E.shape} must both match X {data.shape}")
    # écart relatif, à la tolérance du solveur
    gap = float(np.linalg.norm(data.entries - A - E))
    if gap > settings.solver.tol * max(float(np.linalg.norm(data.entries)), 1.0):
        raise ConsistencyError(f"losslessness violation: ||X - A - E||_F = {gap:.3g}")
    selector = LowRankSelector(settings)
    q = settings.quantization
    refined = refine_quantization(data, A, selector.start_grid(data), u_mode=settings.coders.u_mode,
                                  v_mode=settings.coders.v_mode, rank_tol=q.rank_tol,
                                  max_halvings=q.max_halvings)
    print_allocation(refined.allocation, refined.grid, refined.quantized.k)
    return EXIT_OK


COMMANDS = {"select": run_select, "decompose": run_decompose, "codelength": run_codelength}

ACTIONS = {"select": "selecting the model", "decompose": "decomposing the data",
           "codelength": "computing the codelength"}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    _configure_logging(args)

    try:
        return COMMANDS[args.command](args)
    except (ConvergenceError, PipelineError) as e:
        code = EXIT_SOLVER
        message = str(e)
    except (LowRankMDLError, OSError, ValueError) as e:
        code = EXIT_DATA
        message = str(e)
    print(f"An error occurred while {ACTIONS[args.command]}: {message}", file=sys.stderr)
    return code


def _entry(prefix: List[str]) -> None:
    sys.exit(cli_main(prefix + sys.argv[1:]))


def run():
    """
    Run the lowrank-mdl command line.
    """
    _entry([])


def select():
    """
    Shortcut for ``lowrank-mdl select``.
    """
    _entry(["select"])


def decompose():
    """
    Shortcut for ``lowrank-mdl decompose``.
    """
    _entry(["decompose"])


def codelength():
    """
    Shortcut for ``lowrank-mdl codelength``.
    """
    _entry(["codelength"])


if __name__ == "__main__":
    run()

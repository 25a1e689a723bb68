"""
narrowforge command line
========================

Compile functions into deep narrow networks and measure their grid error.

Every subcommand prints a JSON report on stdout. Exit codes:
    0  report within the requested tolerance
    1  report outside the tolerance
    2  bad input or a failed compile

Usage:
    python cli.py compile-pwl pwl.json -o net.json
    python cli.py compile-acf acf.json --box 0:1,0:1 --tol 1e-3 -o net.json
    python cli.py compile-inn prog.json --box 0:1,0:1 --tol 1e-2
    python cli.py compile-sct --spec sct.json --slices 8 --box 0:1,0:1 --tol 1e-2
    python cli.py compile-pipeline target.json --activation relu --box 0:1 --tol 1e-2
    python cli.py verify net.json --oracle oracle.json --box 0:1 --grid 33
    python cli.py bound --n 2 --m 3 --activation relu
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from config import configure_logging, get_config
from core.errors import NarrowForgeError
from core.intervals import Box
from core.network import Network
from core.serializer import (
    AcfDoc, DiffeoTargetDoc, InnProgramDoc, OracleDoc, PwlDoc, SctDoc, dump_json,
    load_document, load_network, save_network,
)
from compilers.coupling_compiler import AcfSpec, compile_acf, evaluate_acf
from compilers.expressions import ExpressionOracle, VectorExpressionOracle
from compilers.inn_compiler import InnProgram, compile_inn, evaluate_inn_program
from compilers.pipeline import DiffeoTarget, compile_pipeline, min_width_bound, parse_activation_class
from compilers.pwl_compiler import PwlFunction, compile_increasing_pwl, eval_pwl
from compilers.sct_compiler import compile_sct_with_report
from handlers.grid_runner import sup_deviation
from handlers.stage_tracker import StageTracker
from verify.verifier import VERIFY_PRESETS, VerifyReport, grid_res_for, sup_error

logger = logging.getLogger("narrowforge.cli")

Oracle = Callable[[np.ndarray], np.ndarray]


def parse_box(text: str) -> Box:
    """'lo:hi,lo:hi,...' -> Box."""
    try:
        pairs = [tuple(float(v) for v in part.split(':')) for part in text.split(',')]
    except ValueError as e:
        raise ValueError(f"bad --box '{text}': {e}") from e
    if any(len(p) != 2 for p in pairs):
        raise ValueError(f"bad --box '{text}': expected lo:hi for every axis")
    return Box.from_intervals(pairs)


def _pwl_box(f: PwlFunction) -> Box:
    if not f.breakpoints:
        return Box.from_intervals([(f.anchor[0] - 1.0, f.anchor[0] + 1.0)])
    return Box.from_intervals([(f.breakpoints[0] - 1.0, f.breakpoints[-1] + 1.0)])


def _pwl_oracle(f: PwlFunction) -> Oracle:
    return lambda points: eval_pwl(f, np.asarray(points)[:, 0])


def _sct_oracle(expression: ExpressionOracle) -> Oracle:
    def oracle(points: np.ndarray) -> np.ndarray:
        out = np.array(points, dtype=float)
        out[:, -1] = expression(points)
        return out
    return oracle


def load_oracle(path: str, dim: int) -> Oracle:
    """Oracle from a spec file; relative paths resolve against the spec's folder."""
    doc = load_document(path, OracleDoc)
    base = Path(path).parent

    def target_path() -> Path:
        if not doc.path:
            raise NarrowForgeError(f"oracle kind '{doc.kind}' needs a path")
        return base / doc.path

    if doc.kind == 'expression':
        if not doc.outputs:
            raise NarrowForgeError("expression oracle needs 'outputs'")
        return VectorExpressionOracle(doc.outputs, dim)
    if doc.kind == 'network':
        return load_network(target_path()).evaluate
    if doc.kind == 'pwl':
        return _pwl_oracle(PwlFunction.from_doc(load_document(target_path(), PwlDoc)))
    if doc.kind == 'acf':
        spec = AcfSpec.from_doc(load_document(target_path(), AcfDoc))
        return lambda points: evaluate_acf(spec, points)
    if doc.kind == 'inn':
        program = InnProgram.from_doc(load_document(target_path(), InnProgramDoc))
        return lambda points: evaluate_inn_program(program, points)
    target = DiffeoTarget.from_doc(load_document(target_path(), DiffeoTargetDoc))
    return target.evaluate


def _emit(args: argparse.Namespace, report: VerifyReport, net: Network,
          extra: Optional[Dict[str, Any]] = None) -> VerifyReport:
    payload = {'command': args.command, **report.to_dict(), 'network': net.summary()}
    if getattr(args, 'output', None):
        payload['output'] = str(save_network(net, args.output))
    if extra:
        payload.update(extra)
    payload['config'] = get_config().to_dict()
    sys.stdout.write(dump_json(payload))
    return report


def _report(args: argparse.Namespace, net: Network, oracle: Oracle, box: Box,
            tol: Optional[float], per_stage_errors: Optional[List[Optional[float]]] = None,
            extra: Optional[Dict[str, Any]] = None) -> VerifyReport:
    grid_res = grid_res_for(args.preset, args.grid)
    report = sup_error(net, oracle, box, grid_res, tol=tol, seed=args.seed,
                       per_stage_errors=per_stage_errors)
    return _emit(args, report, net, extra)


# =================
# SUBCOMMANDS
# =================

def cmd_compile_pwl(args: argparse.Namespace) -> VerifyReport:
    f = PwlFunction.from_doc(load_document(args.file, PwlDoc))
    net = compile_increasing_pwl(f)
    box = parse_box(args.box) if args.box else _pwl_box(f)
    return _report(args, net, _pwl_oracle(f), box, args.tol)


def cmd_compile_acf(args: argparse.Namespace) -> VerifyReport:
    spec = AcfSpec.from_doc(load_document(args.file, AcfDoc))
    box = parse_box(args.box)
    net = compile_acf(spec, box, args.tol, mode=args.mode)
    return _report(args, net, lambda points: evaluate_acf(spec, points), box, args.tol)


def cmd_compile_inn(args: argparse.Namespace) -> VerifyReport:
    program = InnProgram.from_doc(load_document(args.file, InnProgramDoc))
    box = parse_box(args.box)
    tracker = StageTracker().start()
    net = compile_inn(program, box, args.tol, mode=args.mode, seed=args.seed, tracker=tracker)
    return _report(args, net, lambda points: evaluate_inn_program(program, points), box,
                   args.tol, tracker.per_stage_errors(), {'stages': tracker.get_status()['stages']})


def cmd_compile_sct(args: argparse.Namespace) -> VerifyReport:
    doc = load_document(args.spec, SctDoc)
    box = parse_box(args.box)
    expression = ExpressionOracle(doc.expression, box.dim)
    slices = args.slices or doc.slices
    tracker = StageTracker().start()
    started = time.perf_counter()
    result = compile_sct_with_report(expression, box, slices, args.tol, mode=args.mode,
                                     seed=args.seed, tracker=tracker)
    # the network matches tau on the slices x_d = lo + i/N * width only
    grid_res = grid_res_for(args.preset, args.grid)
    prefix = box.prefix().grid(grid_res)
    slice_axis = np.linspace(box.lo[-1], box.hi[-1], slices + 1)
    points = np.column_stack([np.repeat(prefix, slice_axis.size, axis=0),
                              np.tile(slice_axis, prefix.shape[0])])
    error, index = sup_deviation(result.network.evaluate, _sct_oracle(expression), points)
    report = VerifyReport(
        sup_error=error,
        argmax=[float(v) for v in points[index]],
        grid_res=grid_res,
        width=result.network.width,
        depth=result.network.depth,
        seed=get_config().seed if args.seed is None else args.seed,
        tol=args.tol,
        per_stage_errors=list(result.slice_errors),
        wall_time=time.perf_counter() - started,
        label="grid-measured on slices",
    )
    return _emit(args, report, result.network, {'sct': result.to_dict()})


def cmd_compile_pipeline(args: argparse.Namespace) -> VerifyReport:
    target = DiffeoTarget.from_doc(load_document(args.file, DiffeoTargetDoc))
    cls = parse_activation_class(args.activation)
    box = parse_box(args.box)
    tracker = StageTracker().start()
    net = compile_pipeline(target, cls, box, args.tol, seed=args.seed, tracker=tracker)
    extra = {'activation': cls.describe(), 'width_bound': min_width_bound(target.n, target.m, cls)}
    return _report(args, net, target.evaluate, box, args.tol, tracker.per_stage_errors(), extra)


def cmd_verify(args: argparse.Namespace) -> VerifyReport:
    net = load_network(args.file)
    box = parse_box(args.box)
    return _report(args, net, load_oracle(args.oracle, net.input_dim), box, args.tol)


def cmd_bound(args: argparse.Namespace) -> None:
    cls = parse_activation_class(args.activation)
    sys.stdout.write(f"{min_width_bound(args.n, args.m, cls)}\n")


# =================
# ARGUMENTS
# =================

def _add_common(parser: argparse.ArgumentParser, box_required: bool = True,
                tol_default: Optional[float] = 1e-2) -> None:
    parser.add_argument('--box', required=box_required, help="lo:hi per axis, comma separated")
    parser.add_argument('--tol', type=float, default=tol_default, help="sup-norm tolerance")
    parser.add_argument('--grid', type=int, default=None, help="grid points per axis for the report")
    parser.add_argument('--preset', choices=sorted(VERIFY_PRESETS), default=None,
                        help="named grid resolution (quick/standard/thorough)")
    parser.add_argument('--seed', type=int, default=None, help="seed for every randomized step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='narrowforge',
                                     description="Compile functions into deep narrow networks.")
    parser.add_argument('--log-level', default=None, help="override NARROWFORGE_LOG_LEVEL")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('compile-pwl', help="increasing PWL -> width-1 Leaky-ReLU network")
    p.add_argument('file')
    p.add_argument('-o', '--output')
    _add_common(p, box_required=False, tol_default=1e-9)
    p.set_defaults(handler=cmd_compile_pwl)

    p = sub.add_parser('compile-acf', help="affine coupling flow -> width-d network")
    p.add_argument('file')
    p.add_argument('-o', '--output')
    p.add_argument('--mode', choices=('leaky', 'relu'), default='leaky')
    _add_common(p, tol_default=1e-3)
    p.set_defaults(handler=cmd_compile_acf)

    p = sub.add_parser('compile-inn', help="invertible program -> width-d network")
    p.add_argument('file')
    p.add_argument('-o', '--output')
    p.add_argument('--mode', choices=('leaky', 'relu'), default='leaky')
    _add_common(p)
    p.set_defaults(handler=cmd_compile_inn)

    p = sub.add_parser('compile-sct', help="single-coordinate transformation by slice induction")
    p.add_argument('--spec', required=True)
    p.add_argument('--slices', type=int, default=None)
    p.add_argument('-o', '--output')
    p.add_argument('--mode', choices=('leaky', 'relu'), default='leaky')
    _add_common(p)
    p.set_defaults(handler=cmd_compile_sct)

    p = sub.add_parser('compile-pipeline', help="diffeomorphism target -> network R^n -> R^m")
    p.add_argument('file')
    p.add_argument('--activation', default='leaky-relu',
                   help="leaky-relu, relu or general:<name>")
    p.add_argument('-o', '--output')
    _add_common(p)
    p.set_defaults(handler=cmd_compile_pipeline)

    p = sub.add_parser('verify', help="grid sup-norm error of a network against an oracle")
    p.add_argument('file')
    p.add_argument('--oracle', required=True, help="oracle spec JSON")
    _add_common(p, tol_default=None)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser('bound', help="print max(2n+1, m) + alpha(sigma)")
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--m', type=int, required=True)
    p.add_argument('--activation', required=True)
    p.set_defaults(handler=cmd_bound)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        report = args.handler(args)
    except (NarrowForgeError, ValidationError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return 2
    if report is None:
        return 0
    if not report.within_tol:
        logger.warning(f"{args.command}: sup_error {report.sup_error:.3e} exceeds tol {report.tol}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

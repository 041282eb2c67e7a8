"""Command-line front end.

Subcommands: catalog, ratios, analytic, sweep, pullin, band.  Values cross
the CLI boundary in micrometres, volts and GPa; everything internal is SI.
Output is CSV by default (JSON with --format json), written to --out or
standard output.  Exit codes: 0 success, 2 usage error, 3 solver
non-convergence where convergence was required, 4 file error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence, TextIO

from . import catalog, electro
from .analytic import osterberg_pull_in
from .coupled import (
    SolverConfig,
    SweepResult,
    find_pull_in,
    modulus_band_sweep,
    solve_equilibrium,
    voltage_sweep,
)
from .errors import PullInNotFoundError, SpecimenFormatError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_FILE = 4

_UM = 1e-6


class _UsageError(Exception):
    pass


def _fmt(value: float) -> str:
    """Shortest exact decimal form; keeps CSV output byte-stable."""
    return repr(float(value))


def _fmt6(value: float) -> str:
    """Six significant digits (micrometre displacement columns)."""
    return f"{value:.6g}"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="micropull",
        description=(
            "Static simulation of electrostatically actuated microcantilevers: "
            "displacement-voltage curves and pull-in prediction."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_selector(p: argparse.ArgumentParser, with_dims: bool = True) -> None:
        p.add_argument("--id", help="specimen id, e.g. ST1-1")
        p.add_argument("--file", help="specimen file (JSON, micrometre units)")
        if with_dims:
            p.add_argument(
                "--dims", choices=(catalog.NOMINAL, catalog.MEASURED),
                default=catalog.NOMINAL, help="dimension set (default: nominal)",
            )

    def add_output(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def add_model(p: argparse.ArgumentParser) -> None:
        p.add_argument("--model", choices=("linear", "nonlinear"), default="nonlinear")
        p.add_argument("--load", choices=("plate", "field2d"), default="field2d")
        p.add_argument(
            "--coupling", choices=("staggered", "monolithic"), default="staggered"
        )
        p.add_argument("--fringing", type=float, default=0.65, metavar="F")
        p.add_argument("--E", dest="modulus", metavar="GPA[,GPA]",
                       help="override Young's modulus; a pair selects a band")
        p.add_argument("--dump-field", dest="dump_field", metavar="PATH",
                       help="write the final potential grid as CSV (field2d only)")

    p = sub.add_parser("catalog", help="list specimens")
    p.add_argument("--file", help="specimen file instead of the built-in catalog")
    add_output(p)

    p = sub.add_parser("ratios", help="aspect ratios and behaviour flags")
    add_selector(p)
    add_output(p)

    p = sub.add_parser("analytic", help="closed-form pull-in estimate")
    add_selector(p)
    p.add_argument("--E", dest="modulus", metavar="GPA")
    add_output(p)

    p = sub.add_parser("sweep", help="displacement-voltage sweep")
    add_selector(p)
    add_model(p)
    p.add_argument("--vmax", type=float, required=True, metavar="V")
    p.add_argument("--steps", type=int, default=20, metavar="N")
    add_output(p)

    p = sub.add_parser("pullin", help="bracket the pull-in voltage")
    add_selector(p)
    add_model(p)
    add_output(p)

    p = sub.add_parser("band", help="sweeps at the ends of a modulus band")
    add_selector(p)
    add_model(p)
    p.add_argument("--vmax", type=float, required=True, metavar="V")
    p.add_argument("--steps", type=int, default=20, metavar="N")
    add_output(p)

    return parser


def _specimens_for(args) -> list[catalog.Specimen]:
    if getattr(args, "file", None):
        return catalog.load_specimens(args.file)
    return catalog.builtin_catalog()


def _select(args) -> catalog.Specimen:
    specimens = _specimens_for(args)
    if not args.id:
        if len(specimens) == 1:
            return specimens[0]
        raise _UsageError("--id is required (the specimen set has several entries)")
    dims = getattr(args, "dims", catalog.NOMINAL)
    try:
        return catalog.select_specimen(specimens, args.id, dims)
    except KeyError as exc:
        raise _UsageError(str(exc.args[0])) from exc


def _parse_modulus(text: str | None, expect_pair: bool) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        values = tuple(float(part) * 1e9 for part in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"--E must be GPa numbers, got {text!r}") from exc
    if expect_pair and len(values) != 2:
        raise _UsageError("--E must be a 'low,high' GPa pair for band sweeps")
    if not expect_pair and len(values) != 1:
        raise _UsageError("--E takes a single GPa value for this command")
    if any(v <= 0 for v in values):
        raise _UsageError("--E values must be positive")
    return values


def _solver_config(args) -> SolverConfig:
    kind = electro.PARALLEL_PLATE if args.load == "plate" else electro.FIELD_2D
    return SolverConfig(
        structural_mode=args.model,
        load_model=electro.LoadModelConfig(
            kind=kind, fringing_coefficient=args.fringing
        ),
        coupling_mode=args.coupling,
    )


def _open_out(args):
    if args.out:
        try:
            return open(args.out, "w", encoding="utf-8", newline=""), True
        except OSError as exc:
            raise _FileError(str(exc)) from exc
    return sys.stdout, False


class _FileError(Exception):
    pass


def emit_sweep_csv(result: SweepResult, sink: TextIO) -> None:
    """Serialize a sweep: one row per point, trailing pull-in comment if any."""
    sink.write("voltage_V,tip_displacement_um,converged,iterations\n")
    for p in result.points:
        sink.write(
            f"{_fmt(p.voltage)},{_fmt6(p.tip_displacement * 1e6)},"
            f"{'true' if p.converged else 'false'},{p.iterations}\n"
        )
    if result.pull_in is not None:
        sink.write(f"# pull_in_V={_fmt(result.pull_in.pull_in_voltage)}\n")


def _sweep_json_obj(result: SweepResult) -> dict:
    obj: dict = {
        "points": [
            {
                "voltage_V": p.voltage,
                "tip_displacement_um": p.tip_displacement * 1e6,
                "converged": p.converged,
                "iterations": p.iterations,
            }
            for p in result.points
        ]
    }
    obj["pull_in_V"] = result.pull_in.pull_in_voltage if result.pull_in else None
    return obj


def _emit(args, csv_writer, json_obj) -> None:
    sink, close = _open_out(args)
    try:
        if args.format == "json":
            json.dump(json_obj(), sink, indent=2)
            sink.write("\n")
        else:
            csv_writer(sink)
    finally:
        if close:
            sink.close()


def _cmd_catalog(args) -> int:
    specimens = _specimens_for(args)

    def csv_writer(sink: TextIO) -> None:
        sink.write(
            "id,dimension_source,length_um,width_um,thickness_um,gap_um,"
            "young_modulus_gpa,poisson_ratio\n"
        )
        for s in specimens:
            sink.write(
                f"{s.id},{s.dimension_source},{_fmt(s.length_l / _UM)},"
                f"{_fmt(s.width_w / _UM)},{_fmt(s.thickness_t / _UM)},"
                f"{_fmt(s.gap_g / _UM)},{_fmt(s.material.young_modulus / 1e9)},"
                f"{_fmt(s.material.poisson_ratio)}\n"
            )

    def json_obj() -> dict:
        return {
            "specimens": [
                {
                    "id": s.id,
                    "dimension_source": s.dimension_source,
                    "length_um": s.length_l / _UM,
                    "width_um": s.width_w / _UM,
                    "thickness_um": s.thickness_t / _UM,
                    "gap_um": s.gap_g / _UM,
                    "young_modulus_gpa": s.material.young_modulus / 1e9,
                    "poisson_ratio": s.material.poisson_ratio,
                }
                for s in specimens
            ]
        }

    _emit(args, csv_writer, json_obj)
    return EXIT_OK


def _cmd_ratios(args) -> int:
    spec = _select(args)
    ratios = catalog.aspect_ratios(spec)
    flags = catalog.classify(ratios)

    def csv_writer(sink: TextIO) -> None:
        sink.write(
            "id,dimension_source,r1,r2,r3,r4,"
            "plate_model_warning,large_displacement_warning,high_compliance\n"
        )
        sink.write(
            f"{spec.id},{spec.dimension_source},"
            f"{_fmt6(ratios.r1)},{_fmt6(ratios.r2)},{_fmt6(ratios.r3)},{_fmt6(ratios.r4)},"
            f"{str(flags.plate_model_warning).lower()},"
            f"{str(flags.large_displacement_warning).lower()},"
            f"{str(flags.high_compliance).lower()}\n"
        )

    def json_obj() -> dict:
        return {
            "id": spec.id,
            "dimension_source": spec.dimension_source,
            "r1": ratios.r1,
            "r2": ratios.r2,
            "r3": ratios.r3,
            "r4": ratios.r4,
            "plate_model_warning": flags.plate_model_warning,
            "large_displacement_warning": flags.large_displacement_warning,
            "high_compliance": flags.high_compliance,
        }

    _emit(args, csv_writer, json_obj)
    return EXIT_OK


def _cmd_analytic(args) -> int:
    spec = _select(args)
    modulus = _parse_modulus(args.modulus, expect_pair=False)
    if modulus:
        spec = spec.with_young_modulus(modulus[0])
    estimate = osterberg_pull_in(spec)

    def csv_writer(sink: TextIO) -> None:
        sink.write("id,dimension_source,method,pull_in_voltage_V,pull_in_displacement_um\n")
        sink.write(
            f"{spec.id},{spec.dimension_source},{estimate.method},"
            f"{_fmt(estimate.voltage)},{_fmt6(estimate.displacement * 1e6)}\n"
        )

    def json_obj() -> dict:
        return {
            "id": spec.id,
            "dimension_source": spec.dimension_source,
            "method": estimate.method,
            "pull_in_voltage_V": estimate.voltage,
            "pull_in_displacement_um": estimate.displacement * 1e6,
        }

    _emit(args, csv_writer, json_obj)
    return EXIT_OK


def _maybe_dump_field(args, spec, cfg: SolverConfig, voltage: float | None) -> None:
    if not getattr(args, "dump_field", None):
        return
    if cfg.load_model.kind != electro.FIELD_2D:
        raise _UsageError("--dump-field requires --load field2d")
    if voltage is None:
        return
    eq = solve_equilibrium(spec, voltage, cfg)
    solution = electro.solve_field2d(spec, eq.deflection, voltage, cfg.load_model)
    try:
        with open(args.dump_field, "w", encoding="utf-8", newline="") as fh:
            electro.dump_field_csv(solution, fh)
    except OSError as exc:
        raise _FileError(str(exc)) from exc


def _cmd_sweep(args) -> int:
    spec = _select(args)
    modulus = _parse_modulus(args.modulus, expect_pair=False)
    if modulus:
        spec = spec.with_young_modulus(modulus[0])
    cfg = _solver_config(args)
    result = voltage_sweep(spec, args.vmax, args.steps, cfg)
    _emit(args, lambda sink: emit_sweep_csv(result, sink), lambda: _sweep_json_obj(result))
    converged = result.converged_points()
    _maybe_dump_field(args, spec, cfg, converged[-1].voltage if converged else None)
    return EXIT_OK


def _cmd_pullin(args) -> int:
    spec = _select(args)
    modulus = _parse_modulus(args.modulus, expect_pair=False)
    if modulus:
        spec = spec.with_young_modulus(modulus[0])
    cfg = _solver_config(args)
    result = find_pull_in(spec, cfg)

    def csv_writer(sink: TextIO) -> None:
        sink.write(
            "id,dimension_source,pull_in_V,bracket_low_V,bracket_high_V,"
            "last_stable_tip_um\n"
        )
        sink.write(
            f"{spec.id},{spec.dimension_source},{_fmt(result.pull_in_voltage)},"
            f"{_fmt(result.bracket_low)},{_fmt(result.bracket_high)},"
            f"{_fmt6(result.tip_displacement * 1e6)}\n"
        )

    def json_obj() -> dict:
        return {
            "id": spec.id,
            "dimension_source": spec.dimension_source,
            "pull_in_V": result.pull_in_voltage,
            "bracket_low_V": result.bracket_low,
            "bracket_high_V": result.bracket_high,
            "last_stable_tip_um": result.tip_displacement * 1e6,
        }

    _emit(args, csv_writer, json_obj)
    _maybe_dump_field(args, spec, cfg, result.bracket_low if result.bracket_low > 0 else None)
    return EXIT_OK


def _cmd_band(args) -> int:
    spec = _select(args)
    moduli = _parse_modulus(args.modulus, expect_pair=True) or (150e9, 166e9)
    e_low, e_high = sorted(moduli)
    cfg = _solver_config(args)
    low, high = modulus_band_sweep(spec, e_low, e_high, args.vmax, args.steps, cfg)

    def csv_writer(sink: TextIO) -> None:
        sink.write("young_modulus_gpa,voltage_V,tip_displacement_um,converged,iterations\n")
        for e_gpa, sweep in ((e_low / 1e9, low), (e_high / 1e9, high)):
            for p in sweep.points:
                sink.write(
                    f"{_fmt(e_gpa)},{_fmt(p.voltage)},{_fmt6(p.tip_displacement * 1e6)},"
                    f"{'true' if p.converged else 'false'},{p.iterations}\n"
                )
        for e_gpa, sweep in ((e_low / 1e9, low), (e_high / 1e9, high)):
            if sweep.pull_in is not None:
                sink.write(
                    f"# pull_in_V[{_fmt(e_gpa)}]={_fmt(sweep.pull_in.pull_in_voltage)}\n"
                )

    def json_obj() -> dict:
        return {
            "low_modulus_gpa": e_low / 1e9,
            "high_modulus_gpa": e_high / 1e9,
            "low": _sweep_json_obj(low),
            "high": _sweep_json_obj(high),
        }

    _emit(args, csv_writer, json_obj)
    return EXIT_OK


_COMMANDS = {
    "catalog": _cmd_catalog,
    "ratios": _cmd_ratios,
    "analytic": _cmd_analytic,
    "sweep": _cmd_sweep,
    "pullin": _cmd_pullin,
    "band": _cmd_band,
}


def run(argv: Sequence[str]) -> int:
    """Execute one command line; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"micropull: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PullInNotFoundError as exc:
        print(f"micropull: no pull-in: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (SpecimenFormatError, _FileError, FileNotFoundError) as exc:
        print(f"micropull: file error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except OSError as exc:
        print(f"micropull: file error: {exc}", file=sys.stderr)
        return EXIT_FILE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

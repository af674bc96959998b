#!/usr/bin/env python3
"""
Command-line interface: construction, AS-G1 checks, biharmonic solves,
convergence studies and exports.

Exit status: 0 success, 1 usage/format/missing file, 2 admissibility,
3 topology, 4 infeasible or degenerate stage, 5 AS-G1 check failed,
6 problem does not fit the geometry.
"""
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Tuple

from utils.shared import APP_NAME, APP_VERSION, ASG1_TOL, DEFAULT_REACTION, DEFAULT_SAMPLES, configure_logging, \
    resolve_threads
from .construction import ConstructionParams, check_asg1, construct_global, construct_local
from .errors import Asg1Error, CheckFailedError, InvalidArgumentError
from .geometry_io import read_geometry, write_geometry
from .gluing import gluing_for
from .iga import DIRICHLET, MANUFACTURED, REACTION, ProblemSpec, convergence_study
from .mpatch import MultiPatchSpline, SurfaceSource, Topology, relative_errors
from .reports import (EXPORT_FORMATS, check_report, construction_report, distance_field, export_csv_grid,
                      export_vtk, ledger_report, plot_convergence_html, plot_surface_html, write_excel_report,
                      write_ledger_csv, write_report)
from .samples import SAMPLES, cube_sphere

logger = logging.getLogger(__name__)

ANALYTIC_INPUTS = {'cube-sphere': cube_sphere}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_input(args) -> Tuple[SurfaceSource, Topology, Optional[MultiPatchSpline], object]:
    """Input surface from a geometry file or an analytic sample."""
    if args.input.startswith('analytic:'):
        key = args.input.split(':', 1)[1]
        if key not in ANALYTIC_INPUTS:
            raise InvalidArgumentError(f"unknown analytic input {key!r}; choose from {sorted(ANALYTIC_INPUTS)}")
        source, topology = ANALYTIC_INPUTS[key]()
        return source, topology, None, None
    geometry, gluing = read_geometry(args.input)
    return geometry.source(), geometry.topology, geometry, gluing


def _params(args) -> ConstructionParams:
    return ConstructionParams(args.degree, args.regularity, args.segments)


def _fit(source, topology, params, mode, threads, name):
    build = construct_local if mode == 'local' else construct_global
    result = build(source, topology, params, threads=threads, name=name)
    errors = relative_errors(result.geometry, source, params.sigma)
    return result, errors


def cmd_fit(args) -> int:
    threads = resolve_threads(args.threads)
    source, topology, _, _ = _load_input(args)
    params = _params(args)
    print(f"🔍 Fitting {getattr(source, 'name', 'input')} into S^{{{params.p},{params.r}}}_{params.k} "
          f"({args.mode} mode, {threads} thread(s))")
    result, errors = _fit(source, topology, params, args.mode, threads, Path(args.output).stem)
    check = check_asg1(result.geometry, result.gluing, DEFAULT_SAMPLES)
    write_geometry(args.output, result.geometry, result.gluing)
    report = construction_report(result, params, errors, check)
    if args.report:
        write_report(args.report, report)
    if args.excel:
        write_excel_report(args.excel, report)
    if args.plot:
        plot_surface_html(args.plot, result.geometry, scalar=distance_field(result.geometry, source),
                          title=f"{result.geometry.name}: |F - S|")
    print(f"📊 relative errors: eL2 = {errors[0]:.3e}, eH1 = {errors[1]:.3e}")
    print(f"📊 AS-G1 residual {check.max_residual:.3e} (tolerance {params.asg1_tol:.0e})")
    print(f"📁 geometry written to {args.output}")
    if not check.passed(params.asg1_tol):
        raise CheckFailedError(f"constructed geometry fails the AS-G1 check at interface {check.worst_interface}",
                               interface=check.worst_interface, residual=check.max_residual)
    print("✅ construction succeeded")
    return 0


def cmd_compare(args) -> int:
    threads = resolve_threads(args.threads)
    source, topology, _, _ = _load_input(args)
    params = _params(args)
    rows = {}
    for mode in ('local', 'global'):
        start = time.perf_counter()
        result, errors = _fit(source, topology, params, mode, threads, f"{mode}")
        rows[mode] = {'eL2': errors[0], 'eH1': errors[1], 'seconds': time.perf_counter() - start}
        print(f"📊 {mode:6s}: eL2 = {errors[0]:.3e}, eH1 = {errors[1]:.3e}, {rows[mode]['seconds']:.2f} s")
    ratio = rows['global']['seconds'] / max(rows['local']['seconds'], 1e-12)
    print(f"⏱️ global/local wall time ratio {ratio:.2f} with {threads} thread(s)")
    if args.report:
        write_report(args.report, {
            'tool': {'name': APP_NAME, 'version': APP_VERSION},
            'space': {'degree': params.p, 'regularity': params.r, 'segments': params.k},
            'errors': {m: {'eL2': r['eL2'], 'eH1': r['eH1']} for m, r in rows.items()},
            'run': {'timings': {m: r['seconds'] for m, r in rows.items()}, 'threads': threads},
        })
    return 0


def cmd_check(args) -> int:
    geometry, stored = read_geometry(args.input)
    gluing = gluing_for(geometry, stored)
    check = check_asg1(geometry, gluing, args.samples)
    if args.report:
        write_report(args.report, check_report(geometry.name, check, args.tol, gluing))
    print(f"📊 max AS-G1 residual {check.max_residual:.3e} over {len(check.rows)} interface(s)")
    if not check.passed(args.tol):
        raise CheckFailedError(f"AS-G1 check failed at interface {check.worst_interface} "
                               f"(residual {check.max_residual:.3e} > {args.tol:.0e})",
                               interface=check.worst_interface, residual=check.max_residual)
    print("✅ geometry is AS-G1")
    return 0


def _problem(args) -> ProblemSpec:
    solution = MANUFACTURED[args.solution]
    if args.problem == DIRICHLET:
        return ProblemSpec.dirichlet(solution)
    return ProblemSpec.reaction_problem(solution, args.reaction)


def cmd_convergence(args) -> int:
    threads = resolve_threads(args.threads)
    geometry, stored = read_geometry(args.input)
    problem = _problem(args)
    if problem.kind == REACTION and args.reaction == DEFAULT_REACTION:
        logger.warning("using the default reaction coefficient %s", DEFAULT_REACTION)
    print(f"🔍 {problem.kind} problem with {args.solution} on {geometry.name}, {args.levels} level(s)")
    start = time.perf_counter()
    ledger = convergence_study(problem, geometry, args.levels, gluing_for(geometry, stored), threads)
    elapsed = time.perf_counter() - start
    print(ledger.frame.loc[:, list(ledger.COLUMNS)].to_string(index=False))
    orders = ledger.final_orders()
    print(f"📊 final observed orders ({ledger.measure}): L2 {orders[0]:.2f}, H1 {orders[1]:.2f}, H2 {orders[2]:.2f}")
    if args.csv:
        write_ledger_csv(args.csv, ledger)
        print(f"📁 ledger written to {args.csv}")
    if args.plot:
        plot_convergence_html(args.plot, ledger, title=f"{problem.kind}: {args.solution}")
    if args.report:
        reaction = args.reaction if problem.kind == REACTION else None
        write_report(args.report, ledger_report(geometry.name, problem.kind, ledger, reaction, {'total': elapsed}))
    print("✅ study finished")
    return 0


def cmd_export(args) -> int:
    geometry, _ = read_geometry(args.input)
    scalar = None
    if args.reference:
        reference, _ = read_geometry(args.reference)
        scalar = distance_field(geometry, reference.source())
    if args.format == 'vtk':
        paths = export_vtk(args.output, geometry, args.samples_per_patch, scalar)
        print(f"📁 {len(paths)} VTK file(s) written to {args.output}")
    elif args.format == 'csv-grid':
        export_csv_grid(args.output, geometry, args.samples_per_patch, scalar)
        print(f"📁 point grid written to {args.output}")
    else:
        plot_surface_html(args.output, geometry, args.samples_per_patch, scalar)
        print(f"📁 figure written to {args.output}")
    return 0


def cmd_samples(args) -> int:
    out = Path(args.output_dir)
    names = args.names or sorted(SAMPLES)
    for name in names:
        if name not in SAMPLES:
            raise InvalidArgumentError(f"unknown sample {name!r}; choose from {sorted(SAMPLES)}")
        geometry = SAMPLES[name]()
        geometry.name = name
        write_geometry(out / f"{name}.xml", geometry)
        print(f"📁 {name}: {geometry.num_patches} patch(es) in S^{{{geometry.space.p},{geometry.space.r}}}"
              f"_{geometry.space.k}")
    return 0


def _samples_per_patch(raw: str) -> int:
    value = int(raw)
    if value < 2:
        raise argparse.ArgumentTypeError("need at least 2 samples per patch direction")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='asg1', description=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="-v info, -vv debug")
    parser.add_argument('--quiet', action='store_true', help="errors only")
    parser.add_argument('--threads', type=int, default=None, help="workers (default: $ASG1_THREADS or 1)")
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    def space_flags(p, default_p=4):
        p.add_argument('--input', required=True, help="geometry file, or analytic:NAME")
        p.add_argument('--degree', '-p', type=int, default=default_p)
        p.add_argument('--regularity', '-r', type=int, default=1)
        p.add_argument('--segments', '-k', type=int, default=2)

    fit = sub.add_parser('fit', help="construct an AS-G1 approximation")
    space_flags(fit)
    fit.add_argument('--mode', choices=('local', 'global'), default='local')
    fit.add_argument('--output', required=True)
    fit.add_argument('--report')
    fit.add_argument('--excel')
    fit.add_argument('--plot')
    fit.set_defaults(func=cmd_fit)

    compare = sub.add_parser('compare', help="local versus global construction")
    space_flags(compare)
    compare.add_argument('--report')
    compare.set_defaults(func=cmd_compare)

    check = sub.add_parser('check', help="AS-G1 residual map of a geometry")
    check.add_argument('--input', required=True)
    check.add_argument('--samples', type=int, default=DEFAULT_SAMPLES)
    check.add_argument('--tol', type=float, default=ASG1_TOL)
    check.add_argument('--report')
    check.set_defaults(func=cmd_check)

    for name, levels, help_text in (('solve', 1, "biharmonic solve on one level"),
                                    ('convergence', 3, "dyadic convergence study")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--input', required=True)
        p.add_argument('--problem', choices=(DIRICHLET, REACTION), default=DIRICHLET)
        p.add_argument('--solution', choices=sorted(MANUFACTURED), default='cos4sin4')
        p.add_argument('--lambda', dest='reaction', type=float, default=DEFAULT_REACTION)
        p.add_argument('--levels', type=int, default=levels)
        p.add_argument('--csv')
        p.add_argument('--plot')
        p.add_argument('--report')
        p.set_defaults(func=cmd_convergence)

    export = sub.add_parser('export', help="sample a geometry for external viewers")
    export.add_argument('--input', required=True)
    export.add_argument('--format', choices=EXPORT_FORMATS, default='vtk')
    export.add_argument('--samples-per-patch', type=_samples_per_patch, default=17)
    export.add_argument('--reference', help="second geometry; exports |F - reference| as a scalar")
    export.add_argument('--output', required=True)
    export.set_defaults(func=cmd_export)

    samples = sub.add_parser('samples', help="write the bundled geometries")
    samples.add_argument('--output-dir', default='data')
    samples.add_argument('names', nargs='*')
    samples.set_defaults(func=cmd_samples)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(-1 if args.quiet else args.verbose)
    try:
        return args.func(args)
    except Asg1Error as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())

#!/usr/bin/env python
# Positive quadrature compression, complex moment matrices and analytic root counts
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional

# Allow running as a script directly (python tchakaloff/cli.py) by ensuring
# the project root is first on sys.path so local `tchakaloff.*` imports resolve.
if __name__ == "__main__" and (__package__ is None or __package__ == ""):
    project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
    if project_root not in sys.path:
        sys.path.insert(0, project_root)

from tchakaloff.backend.commands import Command
from tchakaloff.utils import settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_UNEXPECTED = 1


@dataclass
class RunConfig:
    """Resolved settings for one invocation: exactly one subcommand, tol > 0."""

    command: str
    action: Optional[str] = None
    inputs: List[str] = field(default_factory=list)
    degree: Optional[int] = None
    constrained: bool = False
    over_complex: bool = False
    norm_degree: Optional[int] = None
    tol: float = settings.DEFAULT_TOL
    rank_tol: Optional[float] = None
    output: Optional[str] = None
    grid: Optional[str] = None
    polys: List[str] = field(default_factory=list)
    examples: List[str] = field(default_factory=list)
    seed: Optional[int] = None
    trials: Optional[int] = None
    jobs: int = 1
    verbose: bool = False

    def __post_init__(self):
        Command(self.command)
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


def _get_version() -> str:
    import toml

    try:
        pyproject_path = os.path.join(os.path.dirname(os.path.dirname(__file__)), "pyproject.toml")
        with open(pyproject_path, "r") as f:
            data = toml.load(f)
        return data["project"]["version"]
    except (FileNotFoundError, KeyError, AttributeError, ValueError) as e:
        logging.warning(f"Could not read version from pyproject.toml: {e}")
        return "unknown"


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument(
        "--input",
        "-i",
        help="Input file; repeat for several independent jobs",
        action="append",
        default=[],
        dest="inputs",
    )
    common.add_argument(
        "--output",
        "-o",
        help="Output path (a directory when there are several inputs)",
        default=None,
    )
    common.add_argument("--degree", "-d", help="Moment degree m (or n for mm)", type=int)
    common.add_argument("--tol", help="Moment-match tolerance (default 1e-9)", type=float)
    common.add_argument(
        "--rank-tol",
        help="Relative singular-value cutoff for numerical rank (default size*eps)",
        type=float,
    )
    common.add_argument("--jobs", "-j", help="Worker threads for several inputs", type=int)
    common.add_argument(
        "--config",
        help="INI file with a [tchakaloff] section",
        default=settings.DEFAULT_CONFIG_FILE,
        dest="config_file",
    )
    return common


def parse_args(argv=None):
    # Example call:
    # tchakaloff compress --degree 2 --input atoms.csv --output rule.csv
    common = _common_arguments()
    parser = argparse.ArgumentParser(
        prog="tchakaloff",
        description="Positive quadrature rules from discrete measures, "
        "complex moment matrices and root counts of z^k - q(z, zbar).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_get_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "compress", parents=[common], help="Compress a measure to a rule on its support"
    )
    p.add_argument(
        "--constrained",
        help="Match moments through degree n-1 without raising the degree-n norm moment",
        action="store_true",
    )
    p.add_argument("--norm-degree", help="Norm degree n (default --degree + 1)", type=int)
    p.add_argument("--complex", help="Match complex moments (d = 2 nodes)", action="store_true")

    p = sub.add_parser("moments", parents=[common], help="Write the moments of a measure")
    p.add_argument("--norm-degree", help="Also record the degree-n norm moment", type=int)
    p.add_argument("--complex", help="Complex moments gamma_ij (d = 2)", action="store_true")

    p = sub.add_parser(
        "represent-grid", parents=[common], help="Represent moment data on a node grid"
    )
    p.add_argument("--grid", help="CSV of candidate nodes (x1..xd[,w])", required=True)

    p = sub.add_parser("mm", parents=[common], help="Moment-matrix analysis of complex data")
    p.add_argument("action", choices=["analyze", "certify", "extract"])

    p = sub.add_parser("roots", parents=[common], help="Zeros of z^k - q(z, zbar)")
    p.add_argument(
        "--poly", help="Polynomial JSON; repeatable", action="append", default=[], dest="polys"
    )
    p.add_argument(
        "--example",
        help="Built-in sharp example; repeatable",
        action="append",
        default=[],
        dest="examples",
        choices=["z2_conj", "q3", "q4", "q5"],
    )

    p = sub.add_parser("selftest", parents=[common], help="Randomized property suites")
    p.add_argument("--seed", help="Random seed", type=int, default=0)
    p.add_argument("--trials", help="Trials per suite (default 200, 500 per root degree)", type=int)

    return parser.parse_args(argv)


def build_config(args, environ=None) -> RunConfig:
    """Merge parsed flags with the INI file and TCHAK_TOL into a RunConfig."""
    ini = settings.load_settings(args.config_file, settings.SECTION, settings.DEFAULTS)
    return RunConfig(
        command=args.command,
        action=getattr(args, "action", None),
        inputs=list(args.inputs),
        degree=args.degree,
        constrained=getattr(args, "constrained", False),
        over_complex=getattr(args, "complex", False),
        norm_degree=getattr(args, "norm_degree", None),
        tol=settings.resolve_tolerance(args.tol, ini, environ),
        rank_tol=settings.resolve_rank_tol(args.rank_tol, ini),
        output=args.output,
        grid=getattr(args, "grid", None),
        polys=list(getattr(args, "polys", [])),
        examples=list(getattr(args, "examples", [])),
        seed=getattr(args, "seed", None),
        trials=getattr(args, "trials", None),
        jobs=settings.resolve_jobs(args.jobs, ini),
        verbose=settings.resolve_verbose(args.verbose, ini),
    )


def log_warnings(config: RunConfig):
    # Log warnings for flags that have no effect in combination:
    if config.command == Command.COMPRESS.value:
        if config.norm_degree is not None and not config.constrained:
            logging.warning("--norm-degree is only used with --constrained")
    if config.jobs > 1 and len(config.inputs) + len(config.polys) + len(config.examples) <= 1:
        logging.warning("--jobs > 1 has no effect with a single input")
    if config.inputs and config.command == Command.ROOTS.value:
        logging.warning("roots reads --poly / --example; --input is ignored")


def exit_code_for(error: BaseException) -> int:
    from tchakaloff.backend.compress import CompressionError, Infeasible
    from tchakaloff.backend.tcmp import MomentMatrixError

    if isinstance(error, Infeasible):
        return EXIT_INFEASIBLE
    if isinstance(error, (CompressionError, MomentMatrixError)):
        return EXIT_NUMERICAL
    if isinstance(error, (ValueError, OSError)):
        return EXIT_INVALID_INPUT
    return EXIT_UNEXPECTED


def _dump(report) -> str:
    from tchakaloff.utils.utils import to_jsonable

    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"


def _stem_paths(directory: str, op, sources: List[str], command: str) -> List[str]:
    """<directory>/<stem>.<command> per source; repeated stems get -2, -3, ..."""
    seen, paths = {}, []
    for source in sources:
        stem = op.stem(source)
        seen[stem] = seen.get(stem, 0) + 1
        if seen[stem] > 1:
            stem = f"{stem}-{seen[stem]}"
        paths.append(os.path.join(directory, f"{stem}.{command}"))
    return paths


def _output_paths(config: RunConfig, op, sources: List[str]) -> List[Optional[str]]:
    """
    One base path per source. With a single source it is --output itself;
    with several, --output is a directory holding <stem>.<command> bases.
    """
    if config.output is None:
        return [None] * len(sources)
    if len(sources) == 1:
        return [config.output]
    os.makedirs(config.output, exist_ok=True)
    return _stem_paths(config.output, op, sources, config.command)


def emit(result, base: Optional[str], several: bool, fallback: Optional[str] = None) -> None:
    """
    Write one op result. Without a base path the report goes to stdout and
    a rule, if any, to <fallback>.csv in the working directory.
    A rule is written as CSV and moment data as JSON at the artifact path;
    the report then sits next to it as <root>.report.json.
    """
    from tchakaloff.backend.measure import write_measure, write_moments

    if base is None:
        sys.stdout.write(_dump(result.report))
        if result.rule is not None and fallback is not None:
            write_measure(result.rule, fallback + ".csv", format="csv")
            logger.info(f"Rule written to {fallback}.csv")
        print(result.summary)
        return

    has_artifact = result.rule is not None or result.moments is not None
    if several:
        artifact = base + (".csv" if result.rule is not None else ".json")
        report_path = base + ".report.json" if has_artifact else base + ".json"
    else:
        artifact = base
        report_path = os.path.splitext(base)[0] + ".report.json" if has_artifact else base

    if result.rule is not None:
        write_measure(result.rule, artifact, format="csv")
    elif result.moments is not None:
        write_moments(result.moments, artifact)
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_dump(result.report))
    logger.debug(f"Wrote {report_path}" + (f" and {artifact}" if has_artifact else ""))
    print(result.summary)


def run(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        # --help and --version exit 0; usage errors are invalid input
        return EXIT_OK if not e.code else EXIT_INVALID_INPUT

    try:
        config = build_config(args)
    except ValueError as e:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
        logging.error(f"Invalid configuration: {e}")
        return EXIT_INVALID_INPUT

    log_level = logging.DEBUG if config.verbose else logging.INFO
    logging.basicConfig(level=log_level, format="%(message)s")
    log_warnings(config)

    from tchakaloff.backend.commands import load_op
    from tchakaloff.backend.manager import Job, JobManager

    op = load_op(config.command)(config)
    try:
        sources = op.sources()
        bases = _output_paths(config, op, sources)
        fallbacks = _stem_paths(os.getcwd(), op, sources, config.command)
    except (ValueError, OSError) as e:
        logging.error(f"{config.command}: {e}")
        return EXIT_INVALID_INPUT

    JobManager.reset()
    mgr = JobManager(jobs=config.jobs)
    for source in sources:
        mgr.attach(Job(source, partial(op.run, source)))
    try:
        results = mgr.run()
    finally:
        op.cleanup()
        JobManager.reset()

    code = EXIT_OK
    for base, fallback, result in zip(bases, fallbacks, results):
        if not result.ok:
            logging.error(f"{result.name}: {result.error}")
            code = max(code, exit_code_for(result.error))
            continue
        try:
            emit(result.value, base, several=len(sources) > 1, fallback=fallback)
        except OSError as e:
            logging.error(f"{result.name}: could not write output: {e}")
            code = max(code, EXIT_INVALID_INPUT)
            continue
        code = max(code, result.value.exit_code)
    return code


def main():
    code = EXIT_UNEXPECTED
    try:
        code = run()
    except KeyboardInterrupt:
        logging.warning("^C caught. Exiting.")
    except Exception as e:
        logging.error("An unexpected error occurred.")
        logging.error(e)
    finally:
        logging.shutdown()  # Flush and close all handlers before exit
    sys.exit(code)


if __name__ == "__main__":
    main()

import argparse
import logging
import sys

from fractions import Fraction
from pathlib import Path
from typing import Callable

from matching_sparsifier import __version__
from matching_sparsifier.harness import (
    run_independence_test,
    run_ratio_sweep,
    run_sparsify,
    run_validity_audit,
    run_vimatch_demo,
)
from matching_sparsifier.misc import (
    CapExceeded,
    DegenerateDenominator,
    IterationOverflow,
    NoEligiblePairs,
    ParameterOverflow,
    ParseError,
    RecursionBudgetExceeded,
    ReportError,
    with_exception_trace,
)
from matching_sparsifier.report import Report, emit_report, trials_path
from matching_sparsifier.state import State, init_config, load_config


DOMAIN_ERRORS = (
    CapExceeded,
    DegenerateDenominator,
    IterationOverflow,
    NoEligiblePairs,
    ParameterOverflow,
    ParseError,
    RecursionBudgetExceeded,
    ReportError,
)


def _add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        "-c",
        dest="config_path",
        required=False,
        default=None,
        help="Path to configuration file (defaults are used without one).",
    )
    parser.add_argument("--graph", dest="graph", help="Edge-list graph file.")
    parser.add_argument(
        "--gen",
        dest="generator",
        help="Graph generator spec, e.g. 'er:n=16,m=30,wmin=1,wmax=10'.",
    )
    parser.add_argument("--epsilon", dest="epsilon", help="Accuracy parameter in (0, 1).")
    parser.add_argument("--p", dest="p", help="Edge realization probability in (0, 1].")
    parser.add_argument("--seed", dest="seed", type=int, help="Root seed.")
    parser.add_argument("--trials", dest="trials", type=int, help="Number of trials or runs.")
    parser.add_argument(
        "--R",
        dest="r_values",
        type=int,
        nargs="+",
        help="Number of sampled matchings; a list for ratio-sweep.",
    )
    parser.add_argument("--out", dest="output", help="Report path (JSON).")
    parser.add_argument(
        "--no-timestamps",
        action="store_true",
        dest="no_timestamps",
        help="Leaves creation time out of the report.",
    )
    parser.add_argument(
        "--quiet",
        action="store_true",
        dest="quiet",
        help="Hides progress bars.",
    )


def _fraction(parser: argparse.ArgumentParser, name: str, text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        parser.error(f"argument --{name}: not a number: {text!r}")


def apply_overrides(
    parser: argparse.ArgumentParser, config: State, args: argparse.Namespace
) -> None:
    """
    Command line values take precedence over the config file.
    """
    experiment = config.experiment
    sparsifier = config.sparsifier
    if args.graph is not None:
        experiment.graph = Path(args.graph)
        experiment.generator = None
    if args.generator is not None:
        experiment.generator = args.generator
        experiment.graph = None
    if args.epsilon is not None:
        sparsifier.epsilon = _fraction(parser, "epsilon", args.epsilon)
    if args.p is not None:
        sparsifier.p = _fraction(parser, "p", args.p)
    if args.seed is not None:
        experiment.seed = args.seed
    if args.trials is not None:
        experiment.trials = args.trials
        experiment.independence_runs = args.trials
    if args.r_values is not None:
        if args.mode == "ratio-sweep":
            experiment.r_values = args.r_values
        else:
            sparsifier.r_override = args.r_values[0]
    if args.output is not None:
        experiment.output = Path(args.output)
    if getattr(args, "lambda_hops", None) is not None:
        experiment.lambda_hops = args.lambda_hops
    if getattr(args, "ratio_pilot", None) is not None:
        experiment.ratio_pilot = args.ratio_pilot


def driver() -> None:
    """Handles the arguments for the package."""
    parser = argparse.ArgumentParser(
        description="Builds stochastic matching sparsifiers and audits them."
    )
    parent_parser = argparse.ArgumentParser(add_help=False)
    parent_parser.add_argument(
        "--debug",
        action="store_true",
        dest="debug",
        help="Prints debug statements to a log file (debug.log).",
    )
    subparsers = parser.add_subparsers(dest="mode")

    init = subparsers.add_parser(
        "init",
        description="Creates a default configuration for an experiment run.",
        help="Creates a default configuration for an experiment run.",
        parents=[parent_parser],
    )
    init.add_argument(
        "--config",
        "-c",
        dest="config_path",
        required=False,
        default="config.json",
        help="Path to configuration file (default 'config.json').",
    )

    sparsify = subparsers.add_parser(
        "sparsify",
        description="Builds one sparsifier Q and reports its degrees.",
        help="Builds one sparsifier Q and reports its degrees.",
        parents=[parent_parser],
    )
    _add_experiment_arguments(sparsify)

    audit = subparsers.add_parser(
        "audit",
        description="Runs pipeline trials and checks every hard invariant.",
        help="Runs pipeline trials and checks every hard invariant.",
        parents=[parent_parser],
    )
    _add_experiment_arguments(audit)
    audit.add_argument(
        "--certificate",
        dest="certificate",
        help="Writes the assignments of the first trial to this JSON file.",
    )
    audit.add_argument(
        "--blossom-max",
        dest="blossom_max",
        type=int,
        help="Largest odd set size checked (default max(5, min(ceil(1/epsilon), blossom_cap))).",
    )

    sweep = subparsers.add_parser(
        "ratio-sweep",
        description="Measures the approximation ratio as a function of R.",
        help="Measures the approximation ratio as a function of R.",
        parents=[parent_parser],
    )
    _add_experiment_arguments(sweep)
    sweep.add_argument(
        "--sampler-only",
        action="store_true",
        dest="sampler_only",
        help="Uses Q = S, without the greedy crucial edges.",
    )
    sweep.add_argument(
        "--ratio-pilot",
        dest="ratio_pilot",
        type=float,
        help="Recorded r(64) of a pilot run; the sweep must land within 0.02 of it.",
    )

    independence = subparsers.add_parser(
        "independence",
        description="Tests far vertices for independent matched events.",
        help="Tests far vertices for independent matched events.",
        parents=[parent_parser],
    )
    _add_experiment_arguments(independence)
    independence.add_argument(
        "--lambda-hops",
        dest="lambda_hops",
        type=int,
        help="Minimum hop distance of a tested pair.",
    )

    demo = subparsers.add_parser(
        "vimatch-demo",
        description="Reports findmatching weights and traces per depth.",
        help="Reports findmatching weights and traces per depth.",
        parents=[parent_parser],
    )
    _add_experiment_arguments(demo)

    subparsers.add_parser(
        "help",
        description="Shows this help message and exits.",
        help="Shows this help message and exits.",
    )
    parser.add_argument(
        "-V",
        "--version",
        action="store_true",
        help="Shows the version number and exits.",
    )

    args = parser.parse_args()

    if len(sys.argv) == 1:
        parser.print_help()
        parser.exit(1)

    if args.version:
        print(__version__)
        exit()

    if getattr(args, "debug", False):
        logging.basicConfig(
            level=logging.DEBUG,
            format="%(asctime)s - %(levelname)s - %(message)s",
            datefmt="%y-%m-%d %H:%M:%S",
            filename="debug.log",
        )
        logging.debug("Enabled debug mode")

    if args.mode == "init":
        init_config(Path(args.config_path))
        parser.exit()

    elif args.mode == "help" or args.mode is None:
        parser.print_help()
        parser.exit()

    if args.config_path is not None:
        config_path = Path(args.config_path)
        if not config_path.exists():
            parser.exit(1, f"Config file does not exist: {config_path}\n")
        config = load_config(config_path)
    else:
        config = State()

    apply_overrides(parser, config, args)
    if getattr(args, "blossom_max", None) is not None and args.blossom_max < 3:
        parser.error(f"argument --blossom-max: must be at least 3: {args.blossom_max}")
    config.validate_or_exit()

    timestamps = not args.no_timestamps
    progress = not args.quiet
    commands: dict[str, Callable[[], Report]] = {
        "sparsify": lambda: run_sparsify(
            config, timestamps=timestamps, progress=progress
        ),
        "audit": lambda: run_validity_audit(
            config,
            certificate_path=Path(args.certificate) if args.certificate else None,
            blossom_max=args.blossom_max,
            timestamps=timestamps,
            progress=progress,
        ),
        "ratio-sweep": lambda: run_ratio_sweep(
            config,
            sampler_only=True if args.sampler_only else None,
            timestamps=timestamps,
            progress=progress,
        ),
        "independence": lambda: run_independence_test(
            config, timestamps=timestamps, progress=progress
        ),
        "vimatch-demo": lambda: run_vimatch_demo(
            config, timestamps=timestamps, progress=progress
        ),
    }
    command = commands[args.mode]
    if args.debug:
        command = with_exception_trace(command)

    try:
        report = command()
        emit_report(report, config.experiment.output)
    except DOMAIN_ERRORS as e:
        print(f"{type(e).__name__}: {e}")
        exit(1)

    print(report.summary())
    print(f"Report saved at: {config.experiment.output}")
    print(f"Trials saved at: {trials_path(config.experiment.output)}")
    exit(0 if report.passed else 1)


def __init__() -> None:
    driver()

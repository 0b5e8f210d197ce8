from datetime import datetime
from typing import List, Optional

from configargparse import ArgumentParser, ArgumentTypeError, Namespace

from pybsvie.scenarios import CHECKS

__version__ = "0.1.0"


def gen_args(argv: Optional[List[str]] = None) -> Namespace:
    parser = ArgumentParser(
        description="Solve backward stochastic Volterra integral equations and check the results."
    )

    add_general_args(parser)
    add_run_args(parser)
    add_check_args(parser)

    args = parser.parse_args(argv)
    if args.config is None and not args.list:
        parser.error("a scenario is required! Pass --config or --list")

    return args


def add_general_args(parser: ArgumentParser):
    parser.add_argument(
        "--options-file",
        is_config_file=True,
        help="filepath of a configuration file of command line options to use",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--config",
        help="the path of a scenario JSON file or the name of a bundled scenario",
    )
    parser.add_argument(
        "--list", action="store_true", help="list the available scenarios and exit"
    )
    parser.add_argument(
        "--scenario-dir",
        help="a directory of additional scenario files to search and list",
    )
    parser.add_argument(
        "-o",
        "--out",
        "--output-dir",
        dest="output_dir",
        default=f'pybsvie_{datetime.now().strftime("%Y-%m-%d_%H-%M-%S")}',
        help="the path of the output directory",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="the level of output this program should print",
    )


def add_run_args(parser: ArgumentParser):
    parser.add_argument(
        "--seed",
        type=nonnegative_int,
        help="the seed of the path ensemble. Overrides the seed of the scenario",
    )
    parser.add_argument(
        "--threads",
        type=positive_int,
        default=1,
        help="the number of workers used to simulate paths. Does not change any output",
    )


def add_check_args(parser: ArgumentParser):
    parser.add_argument(
        "--checks",
        nargs="+",
        choices=CHECKS,
        help="the checks to run. Overrides the checks of the scenario",
    )


def positive_int(arg: str):
    val = int(arg)
    if val <= 0:
        raise ArgumentTypeError(f"Value must be greater than 0! got: {arg}")

    return val


def nonnegative_int(arg: str):
    val = int(arg)
    if val < 0:
        raise ArgumentTypeError(f"Value must be at least 0! got: {arg}")

    return val

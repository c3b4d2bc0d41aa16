import argparse
import sys

from ..allocators import SCHEMES
from ..errors import InvalidGeometryError, ScenarioFileError
from .commands import (EXIT_INFEASIBLE, EXIT_SCHEMA, RunOptions, cmd_compare, cmd_solve, cmd_sweep, cmd_verify,
                       run_scheme, verify_report)
from .results import ResultRow, ResultTable, columns
from .scenario_file import DEFAULT_SCENARIO, ScenarioFile, load_scenario, parse_scenario

COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uav-isac",
                                     description="Robust sensing/communication power allocation for multi-UAV ISAC")
    parser.add_argument('command', choices=list(COMMANDS),
                        help='solve | sweep | verify | compare')

    # Run parameters
    parser.add_argument('--scenario', type=str, default=DEFAULT_SCENARIO,
                        help='Scenario JSON file')
    parser.add_argument('--scheme', type=str, default=None, choices=list(SCHEMES),
                        help='Allocation scheme, defaults to allocator.scheme of the scenario file')
    parser.add_argument('--out', type=str, default=None,
                        help='Output CSV (solve, sweep, compare) or JSON (verify) path; stdout when omitted')
    parser.add_argument('--seed', type=int, default=None,
                        help='Monte-Carlo seed, overrides montecarlo.seed')
    parser.add_argument('--samples', type=int, default=None,
                        help='Monte-Carlo samples per family, overrides montecarlo.samples')
    parser.add_argument('--workers', type=int, default=1,
                        help='Parallel runs for sweep and compare, -1 for all cores')

    # Sweep settings
    parser.add_argument('--parameter', type=str, default=None,
                        help='Swept parameter: rate_floor, total_power, delta or p_out')
    parser.add_argument('--grid', type=str, default=None,
                        help='Comma-separated sweep values')

    # Logging and diagnostics
    parser.add_argument('--log', type=eval, default=False,
                        help='logging flag')
    parser.add_argument('--wandb_project', type=str, default='uav-isac',
                        help='wandb project of logged runs')
    parser.add_argument('--enable_progress_bar', type=eval, default=False,
                        help='enable progress bar')
    parser.add_argument('--no_timing', action='store_true',
                        help='Leave wall_time empty so repeated runs give identical files')
    parser.add_argument('--dump_sdpa', type=str, default=None,
                        help='Directory receiving every conic subproblem in SDPA format')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.samples is not None and args.samples < 1:
            raise ScenarioFileError("montecarlo.samples", f"must be at least 1, got {args.samples}")
        return COMMANDS[args.command](args)
    except ScenarioFileError as err:
        print(f"error: scenario file: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except InvalidGeometryError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE


__all__ = ('COMMANDS', 'DEFAULT_SCENARIO', 'ResultRow', 'ResultTable', 'RunOptions', 'ScenarioFile',
           'build_parser', 'cmd_compare', 'cmd_solve', 'cmd_sweep', 'cmd_verify', 'columns', 'load_scenario',
           'main', 'parse_scenario', 'run_scheme', 'verify_report')

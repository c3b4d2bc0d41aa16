"""
commands.py

The four subcommands. Each takes the parsed command-line arguments and
returns a process exit code.
"""

import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
import torch
import torch.multiprocessing

from ..allocators import SCHEMES, ArbitraryMoments, Ellipsoid, Gaussian, allocate
from ..channel import rate, worst_case_lse
from ..errors import InfeasibleError, NumericalFailureError, ScenarioFileError
from ..fisher import crb, fim_basis
from ..montecarlo import FAMILIES, RATE_TOL, LseSampler, empirical_outage, outage_margin, sample
from .results import ResultRow, ResultTable
from .scenario_file import SWEEP_PARAMETERS, MonteCarloSettings, ScenarioFile, load_scenario

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_VERIFY = 5

VERIFY_SCHEMA_VERSION = 1

STATUS_EXIT = {"optimal": EXIT_OK, "infeasible": EXIT_INFEASIBLE, "numerical-failure": EXIT_NUMERICAL}


@dataclass(frozen=True)
class RunOptions:
    """
    Arguments:
        - seed: Overrides the scenario file's sampling seed.
        - samples: Overrides the scenario file's sample count.
        - timing: Record wall times.
        - show_pbar: Progress bar over allocator iterations.
        - dump_dir: Write every subproblem in SDPA format there.
    """
    seed: Optional[int] = None
    samples: Optional[int] = None
    timing: bool = True
    show_pbar: bool = False
    dump_dir: Optional[str] = None

    @classmethod
    def from_args(cls, args) -> "RunOptions":
        return cls(seed=args.seed, samples=args.samples, timing=not args.no_timing,
                   show_pbar=args.enable_progress_bar, dump_dir=args.dump_sdpa)

    def montecarlo(self, scenario_file: ScenarioFile) -> Optional[MonteCarloSettings]:
        settings = scenario_file.montecarlo
        if settings is None:
            return None
        changes = {}
        if self.seed is not None:
            changes["seed"] = self.seed
        if self.samples is not None:
            changes["samples"] = self.samples
        return MonteCarloSettings(**{**settings.__dict__, **changes})


def _sampler(scenario_file: ScenarioFile, family: str, fim, seed: int) -> LseSampler:
    if family == "ellipsoid":
        model = Ellipsoid(scenario_file.delta)
    elif family == "gaussian":
        model = Gaussian(scenario_file.p_out)
    else:
        model = ArbitraryMoments(scenario_file.p_out)
    return LseSampler(model=model, fim=fim, seed=seed, family=family)


def _families(scheme: str, settings: MonteCarloSettings) -> List[str]:
    """The configured families plus the one the scheme itself hedges against."""
    own = "ellipsoid" if scheme == "s-ao" else "gaussian"
    return [f for f in FAMILIES if f in settings.families or f == own]


######################################
# Single runs
######################################


def run_scheme(scenario_file: ScenarioFile, scheme: str, options: RunOptions,
               parameter: str = "", value: Optional[float] = None) -> ResultRow:
    """Runs one scheme on one scenario and folds every outcome into a row."""
    config = scenario_file.config(show_pbar=options.show_pbar,
                         dump_dir=None if options.dump_dir is None else os.path.join(options.dump_dir, scheme))
    start = time.perf_counter()
    try:
        allocation, trace = allocate(scheme, scenario_file.scenario, config, scenario_file.model(scheme))
    except InfeasibleError as err:
        return ResultRow(scheme=scheme, status="infeasible", parameter=parameter, value=value,
                         message=f"{type(err).__name__}: {err}")
    except NumericalFailureError as err:
        return ResultRow(scheme=scheme, status="numerical-failure", parameter=parameter, value=value,
                         message=f"{type(err).__name__}: {err}")
    elapsed = time.perf_counter() - start

    row = ResultRow(
        scheme=scheme, status="optimal", parameter=parameter, value=value,
        message=trace.stop_reason,
        crb=crb(_fim(scenario_file, allocation.sensing)),
        iterations=trace.iterations,
        wall_time=elapsed if options.timing else None,
        sensing=allocation.sensing, comm=allocation.comm,
    )
    settings = options.montecarlo(scenario_file)
    if settings is not None:
        fim = _fim(scenario_file, allocation.sensing)
        for i, family in enumerate(_families(scheme, settings)):
            samples = sample(_sampler(scenario_file, family, fim, settings.seed + i), settings.samples)
            outage = empirical_outage(scenario_file.scenario, allocation, samples, scenario_file.rate_floor)
            row.outage[family] = outage.worst
    return row


def _fim(scenario_file: ScenarioFile, sensing: np.ndarray):
    return torch.einsum("k,kij->ij", torch.as_tensor(sensing, dtype=torch.float64), fim_basis(scenario_file.scenario))


def _init_worker() -> None:
    torch.set_num_threads(1)


def _run_task(task) -> ResultRow:
    scenario_file, scheme, parameter, value, options = task
    return run_scheme(scenario_file.with_parameter(parameter, value) if parameter else scenario_file, scheme, options,
                      parameter=parameter, value=value)


def _fan_out(tasks: list, workers: int) -> List[ResultRow]:
    """Runs tasks inline for one worker, otherwise in a spawned process pool; order is kept."""
    if workers == -1:
        workers = os.cpu_count()
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(task) for task in tasks]
    context = torch.multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=context,
                             initializer=_init_worker) as pool:
        return list(pool.map(_run_task, tasks))


######################################
# Reporting
######################################


def _logger(args, name: str):
    if not args.log:
        return None
    import wandb
    return wandb.init(project=args.wandb_project, name=name, config=vars(args))


def _publish(table: ResultTable, args, name: str) -> None:
    if args.out:
        table.to_csv(args.out)
        print(f"Wrote {len(table)} rows to {args.out}")
    else:
        table.to_csv(sys.stdout)
    run = _logger(args, name)
    if run is not None:
        for row in table.to_frame().to_dict(orient="records"):
            run.log({k: v for k, v in row.items() if not pd.isna(v)})
        run.finish()


def _summary(row: ResultRow) -> None:
    print(f"[{row.scheme}] status: {row.status}")
    if not row.ok:
        print(f"[{row.scheme}] {row.message}")
        return
    print(f"[{row.scheme}] CRB tr(J_p^-1): {row.crb:.6g} m^2 after {row.iterations} iterations ({row.message})")
    for k, (p_s, p_c) in enumerate(zip(row.sensing, row.comm)):
        print(f"[{row.scheme}]   UAV {k + 1}: P_s = {p_s:.6g} W, P_c = {p_c:.6g} W")
    print(f"[{row.scheme}] total power: {row.sensing.sum() + row.comm.sum():.6g} W")
    for family, outage in row.outage.items():
        print(f"[{row.scheme}] outage ({family}): {outage:.4g}")


def _exit_code(table: ResultTable) -> int:
    if table.any_ok or not table.rows:
        return EXIT_OK
    return STATUS_EXIT.get(table.rows[0].status, EXIT_INFEASIBLE)


######################################
# Commands
######################################


def cmd_solve(args) -> int:
    scenario_file = load_scenario(args.scenario)
    scheme = args.scheme or scenario_file.scheme
    row = run_scheme(scenario_file, scheme, RunOptions.from_args(args))
    _summary(row)
    table = ResultTable(scenario_file.scenario.num_uavs)
    table.append(row)
    if args.out or args.log:
        _publish(table, args, f"solve-{scheme}")
    return STATUS_EXIT[row.status]


def cmd_sweep(args) -> int:
    scenario_file = load_scenario(args.scenario)
    parameter = args.parameter or (scenario_file.sweep.parameter if scenario_file.sweep else None)
    if parameter is None:
        raise ScenarioFileError("sweep", "sweep needs --parameter or a sweep block in the scenario file")
    if args.grid is not None:
        try:
            grid = [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError as err:
            raise ScenarioFileError("sweep.grid", f"--grid must be comma-separated numbers: {err}") from err
    elif scenario_file.sweep is not None:
        grid = list(scenario_file.sweep.grid)
    else:
        grid = []
    if args.scheme:
        schemes = [args.scheme]
    elif scenario_file.sweep is not None and scenario_file.sweep.schemes:
        schemes = list(scenario_file.sweep.schemes)
    else:
        schemes = [scenario_file.scheme]
    if parameter not in SWEEP_PARAMETERS:
        raise ScenarioFileError("sweep.parameter", f"must be one of {list(SWEEP_PARAMETERS)}, got {parameter!r}")
    for i, value in enumerate(grid):
        if not value > 0 or (parameter == "p_out" and not value < 1):
            raise ScenarioFileError(f"sweep.grid[{i}]", f"{value} is not a valid {parameter}")

    options = RunOptions.from_args(args)
    tasks = [(scenario_file, scheme, parameter, value, options) for value in grid for scheme in schemes]
    print(f"Sweeping {parameter} over {len(grid)} points for {', '.join(schemes)}...")
    table = ResultTable(scenario_file.scenario.num_uavs)
    table.extend(_fan_out(tasks, args.workers))
    _publish(table, args, f"sweep-{parameter}")
    return _exit_code(table)


def cmd_compare(args) -> int:
    scenario_file = load_scenario(args.scenario)
    options = RunOptions.from_args(args)
    tasks = [(scenario_file, scheme, "", None, options) for scheme in SCHEMES]
    table = ResultTable(scenario_file.scenario.num_uavs)
    table.extend(_fan_out(tasks, args.workers))
    for row in table.rows:
        _summary(row)
    _publish(table, args, "compare")
    return _exit_code(table)


def verify_report(scenario_file: ScenarioFile, scheme: str, options: RunOptions) -> tuple:
    """
    Solves and samples one scheme.

    Returns:
        - (report dict, exit code). Without a successful solve the report
          carries the failure and the exit code of the solve.
    """
    settings = options.montecarlo(scenario_file)
    if settings is None:
        raise ScenarioFileError("montecarlo", "verify needs a montecarlo block")
    if settings.samples < 1:
        raise ScenarioFileError("montecarlo.samples", f"must be at least 1, got {settings.samples}")

    config = scenario_file.config(show_pbar=options.show_pbar, dump_dir=options.dump_dir)
    report = {
        "schema_version": VERIFY_SCHEMA_VERSION,
        "scheme": scheme,
        "rate_floor": scenario_file.rate_floor,
        "p_out": scenario_file.p_out,
        "delta": scenario_file.delta,
        "samples": settings.samples,
        "seed": settings.seed,
        "families": {},
        "pass": False,
    }
    try:
        allocation, _ = allocate(scheme, scenario_file.scenario, config, scenario_file.model(scheme))
    except (InfeasibleError, NumericalFailureError) as err:
        report["error"] = f"{type(err).__name__}: {err}"
        return report, EXIT_NUMERICAL if isinstance(err, NumericalFailureError) else EXIT_INFEASIBLE

    fim = _fim(scenario_file, allocation.sensing)
    if scheme == "s-ao":
        families = ["ellipsoid"]
    elif scheme == "cvar-ao":
        families = [f for f in settings.families if f != "ellipsoid"] or ["gaussian"]
    else:
        families = ["gaussian"]

    scenario, rate_floor = scenario_file.scenario, scenario_file.rate_floor
    for i, family in enumerate(families):
        sampler = _sampler(scenario_file, family, fim, settings.seed + i)
        outage = empirical_outage(scenario, allocation, sample(sampler, settings.samples), rate_floor)
        entry = {"outage": outage.fraction.tolist()}
        if family == "ellipsoid":
            boundary = empirical_outage(scenario, allocation,
                                        sample(sampler, max(settings.boundary_samples, 1), boundary=True), rate_floor)
            worst = [torch.as_tensor(worst_case_lse(scenario, k, fim.numpy(), scenario_file.delta)[0])
                     for k in range(scenario.num_uavs)]
            violated = [bool(rate(scenario, k, float(allocation.comm[k]), du) < rate_floor - RATE_TOL)
                     for k, du in enumerate(worst)]
            entry.update(boundary_outage=boundary.fraction.tolist(), worst_case_violation=violated, margin=0.0)
            entry["pass"] = outage.worst == 0 and boundary.worst == 0 and not any(violated)
        else:
            entry["margin"] = outage_margin(scenario_file.p_out, settings.samples)
            entry["pass"] = outage.worst <= scenario_file.p_out + entry["margin"]
        report["families"][family] = entry

    report["pass"] = all(entry["pass"] for entry in report["families"].values())
    return report, EXIT_OK if report["pass"] else EXIT_VERIFY


def cmd_verify(args) -> int:
    scenario_file = load_scenario(args.scenario)
    scheme = args.scheme or scenario_file.scheme
    report, code = verify_report(scenario_file, scheme, RunOptions.from_args(args))
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as file:
            file.write(text + "\n")
        print(f"Wrote verification report to {args.out}")
    else:
        print(text)
    print(f"[{scheme}] verification: {'PASS' if report['pass'] else 'FAIL'}")
    return code

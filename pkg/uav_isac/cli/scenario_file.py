import json
import os
from dataclasses import dataclass, replace
from math import isfinite
from typing import Optional, Tuple

from ..allocators import SCHEMES, AllocatorConfig, RobustnessModel, robustness_model
from ..errors import InvalidGeometryError, ScenarioFileError
from ..geometry import LIGHTSPEED, Scenario, upa_layout
from ..montecarlo import FAMILIES, MOMENT_FAMILIES

TOP_LEVEL = ("uavs", "ue_estimate", "radio", "allocator", "robustness", "montecarlo", "sweep")
SWEEP_PARAMETERS = ("rate_floor", "total_power", "delta", "p_out")
DEFAULT_SCENARIO = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios", "default.json")


@dataclass(frozen=True)
class MonteCarloSettings:
    samples: int = 100000
    seed: int = 0
    boundary_samples: int = 1000
    families: Tuple[str, ...] = MOMENT_FAMILIES


@dataclass(frozen=True)
class SweepSettings:
    parameter: str
    grid: Tuple[float, ...]
    schemes: Tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    """
    A validated scenario file: the world, the allocator inputs, the LSE model
    sizes, and the optional sampling and sweep blocks.
    """
    scenario: Scenario
    scheme: str
    rate_floor: float
    total_power: float
    tolerance: float = 1e-5
    max_iters: int = 30
    initial_sensing: Optional[Tuple[float, ...]] = None
    delta: float = 1.0
    p_out: float = 0.05
    montecarlo: Optional[MonteCarloSettings] = None
    sweep: Optional[SweepSettings] = None
    source: str = "<dict>"

    def config(self, **overrides) -> AllocatorConfig:
        return AllocatorConfig(
            rate_floor=self.rate_floor,
            total_power=self.total_power,
            tolerance=self.tolerance,
            max_iters=self.max_iters,
            initial_sensing=self.initial_sensing,
            **overrides,
        )

    def model(self, scheme: str) -> RobustnessModel:
        return robustness_model(scheme, self.delta, self.p_out)

    def with_parameter(self, parameter: str, value: float) -> "ScenarioFile":
        if parameter not in SWEEP_PARAMETERS:
            raise ScenarioFileError("sweep.parameter", f"must be one of {list(SWEEP_PARAMETERS)}, got {parameter!r}")
        return replace(self, **{parameter: float(value)})


######################################
# Validation helpers
######################################


def _require(block: dict, key: str, path: str):
    if not isinstance(block, dict):
        raise ScenarioFileError(path, "must be an object")
    if key not in block:
        raise ScenarioFileError(f"{path}.{key}" if path else key, "missing required key")
    return block[key]


def _number(value, path: str, positive: bool = True, upper: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not isfinite(value):
        raise ScenarioFileError(path, f"must be a finite number, got {value!r}")
    if positive and not value > 0:
        raise ScenarioFileError(path, f"must be positive, got {value!r}")
    if upper is not None and not value < upper:
        raise ScenarioFileError(path, f"must be below {upper}, got {value!r}")
    return float(value)


def _integer(value, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ScenarioFileError(path, f"must be an integer >= {minimum}, got {value!r}")
    return value


def _point(value, path: str) -> Tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ScenarioFileError(path, f"must be a list of 3 numbers, got {value!r}")
    return tuple(_number(v, f"{path}[{i}]", positive=False) for i, v in enumerate(value))


def _scheme(value, path: str) -> str:
    if value not in SCHEMES:
        raise ScenarioFileError(path, f"unknown scheme {value!r}, expected one of {list(SCHEMES)}")
    return value


######################################
# Blocks
######################################


def _scenario(data: dict) -> Scenario:
    radio = _require(data, "radio", "")
    wavelength = _number(_require(radio, "wavelength", "radio"), "radio.wavelength")
    bandwidth = _number(_require(radio, "effective_bandwidth", "radio"), "radio.effective_bandwidth")
    noise_psd = _number(_require(radio, "noise_psd", "radio"), "radio.noise_psd")
    lightspeed = _number(radio.get("lightspeed", LIGHTSPEED), "radio.lightspeed")

    uavs = _require(data, "uavs", "")
    if not isinstance(uavs, list) or not uavs:
        raise ScenarioFileError("uavs", "must be a non-empty list")
    positions, layouts, phases = [], [], []
    for i, uav in enumerate(uavs):
        path = f"uavs[{i}]"
        positions.append(_point(_require(uav, "position", path), f"{path}.position"))
        array = uav.get("array", {})
        if not isinstance(array, dict):
            raise ScenarioFileError(f"{path}.array", "must be an object")
        rows = _integer(array.get("rows", 4), f"{path}.array.rows", 1)
        cols = _integer(array.get("cols", 4), f"{path}.array.cols", 1)
        spacing = _number(array.get("spacing", wavelength / 2), f"{path}.array.spacing")
        layouts.append(upa_layout(rows, cols, spacing))
        phases.append(_number(uav.get("phase_shift", 0.0), f"{path}.phase_shift", positive=False))

    ue = _point(_require(data, "ue_estimate", ""), "ue_estimate")
    try:
        return Scenario.create(positions, ue, wavelength, bandwidth, noise_psd, lightspeed,
                               antenna_offsets=layouts, phase_shifts=phases)
    except InvalidGeometryError:
        raise
    except ValueError as err:
        raise ScenarioFileError("uavs", str(err)) from err


def _montecarlo(block) -> MonteCarloSettings:
    if not isinstance(block, dict):
        raise ScenarioFileError("montecarlo", "must be an object")
    families = block.get("families", list(MOMENT_FAMILIES))
    if not isinstance(families, list) or any(f not in FAMILIES for f in families):
        raise ScenarioFileError("montecarlo.families", f"must be a list drawn from {list(FAMILIES)}, got {families!r}")
    return MonteCarloSettings(
        samples=_integer(block.get("samples", 100000), "montecarlo.samples", 1),
        seed=_integer(block.get("seed", 0), "montecarlo.seed", 0),
        boundary_samples=_integer(block.get("boundary_samples", 1000), "montecarlo.boundary_samples", 0),
        families=tuple(families),
    )


def _sweep(block) -> SweepSettings:
    if not isinstance(block, dict):
        raise ScenarioFileError("sweep", "must be an object")
    parameter = _require(block, "parameter", "sweep")
    if parameter not in SWEEP_PARAMETERS:
        raise ScenarioFileError("sweep.parameter", f"must be one of {list(SWEEP_PARAMETERS)}, got {parameter!r}")
    grid = _require(block, "grid", "sweep")
    if not isinstance(grid, list):
        raise ScenarioFileError("sweep.grid", "must be a list of numbers")
    schemes = block.get("schemes", [])
    if not isinstance(schemes, list):
        raise ScenarioFileError("sweep.schemes", "must be a list of scheme names")
    return SweepSettings(
        parameter=parameter,
        grid=tuple(_number(v, f"sweep.grid[{i}]") for i, v in enumerate(grid)),
        schemes=tuple(_scheme(s, f"sweep.schemes[{i}]") for i, s in enumerate(schemes)),
    )


def parse_scenario(data: dict, source: str = "<dict>") -> ScenarioFile:
    """
    Validates a decoded scenario file.

    Raises ScenarioFileError naming the dotted path of the first bad entry.
    """
    if not isinstance(data, dict):
        raise ScenarioFileError("", "the scenario file must hold a JSON object")
    for key in data:
        if key not in TOP_LEVEL:
            raise ScenarioFileError(key, f"unknown top-level key, expected one of {list(TOP_LEVEL)}")

    scenario = _scenario(data)
    allocator = _require(data, "allocator", "")
    robustness = data.get("robustness", {})
    if not isinstance(robustness, dict):
        raise ScenarioFileError("robustness", "must be an object")

    initial = allocator.get("initial_sensing")
    if initial is not None:
        if not isinstance(initial, list) or len(initial) != scenario.num_uavs:
            raise ScenarioFileError("allocator.initial_sensing", f"must list {scenario.num_uavs} numbers")
        initial = tuple(_number(v, f"allocator.initial_sensing[{i}]") for i, v in enumerate(initial))

    return ScenarioFile(
        scenario=scenario,
        scheme=_scheme(allocator.get("scheme", "s-ao"), "allocator.scheme"),
        rate_floor=_number(_require(allocator, "rate_floor", "allocator"), "allocator.rate_floor"),
        total_power=_number(_require(allocator, "total_power", "allocator"), "allocator.total_power"),
        tolerance=_number(allocator.get("tolerance", 1e-5), "allocator.tolerance"),
        max_iters=_integer(allocator.get("max_iters", 30), "allocator.max_iters", 1),
        initial_sensing=initial,
        delta=_number(robustness.get("delta", 1.0), "robustness.delta"),
        p_out=_number(robustness.get("p_out", 0.05), "robustness.p_out", upper=1.0),
        montecarlo=_montecarlo(data["montecarlo"]) if "montecarlo" in data else None,
        sweep=_sweep(data["sweep"]) if "sweep" in data else None,
        source=source,
    )


def load_scenario(path: str) -> ScenarioFile:
    """Reads and validates a JSON scenario file."""
    print(f"Reading scenario {path}...")
    try:
        with open(path, "r") as file:
            data = json.load(file)
    except json.JSONDecodeError as err:
        raise ScenarioFileError("", f"{path} is not valid JSON: {err}") from err
    except OSError as err:
        raise ScenarioFileError("", f"cannot read {path}: {err}") from err
    return parse_scenario(data, source=path)

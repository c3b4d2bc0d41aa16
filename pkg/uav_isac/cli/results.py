"""
results.py

Tabular run results with a fixed column order:

    scheme, parameter, value, status, message, crb, total_power_used,
    iterations, wall_time, ps_1..ps_K, pc_1..pc_K, outage_ellipsoid,
    outage_gaussian, outage_uniform_ellipsoid, outage_rademacher_mixture

Failed runs keep their row with the status and the error message; their
numeric columns stay empty. Outage columns hold the worst UAV's fraction.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..montecarlo import FAMILIES

BASE_COLUMNS = ["scheme", "parameter", "value", "status", "message", "crb", "total_power_used",
                "iterations", "wall_time"]
OUTAGE_COLUMNS = [f"outage_{family.replace('-', '_')}" for family in FAMILIES]


def columns(num_uavs: int) -> List[str]:
    return (BASE_COLUMNS
            + [f"ps_{k + 1}" for k in range(num_uavs)]
            + [f"pc_{k + 1}" for k in range(num_uavs)]
            + OUTAGE_COLUMNS)


@dataclass
class ResultRow:
    scheme: str
    status: str
    parameter: str = ""
    value: Optional[float] = None
    message: str = ""
    crb: Optional[float] = None
    iterations: Optional[int] = None
    wall_time: Optional[float] = None
    sensing: Optional[np.ndarray] = None
    comm: Optional[np.ndarray] = None
    outage: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def as_dict(self, num_uavs: int) -> dict:
        row = {
            "scheme": self.scheme,
            "parameter": self.parameter,
            "value": self.value,
            "status": self.status,
            "message": self.message,
            "crb": self.crb,
            "total_power_used": None,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
        }
        for k in range(num_uavs):
            row[f"ps_{k + 1}"] = None if self.sensing is None else float(self.sensing[k])
            row[f"pc_{k + 1}"] = None if self.comm is None else float(self.comm[k])
        if self.sensing is not None and self.comm is not None:
            row["total_power_used"] = float(self.sensing.sum() + self.comm.sum())
        for family in FAMILIES:
            row[f"outage_{family.replace('-', '_')}"] = self.outage.get(family)
        return row


class ResultTable:
    """One row per completed or failed run, in insertion order."""

    def __init__(self, num_uavs: int):
        self.num_uavs = num_uavs
        self.rows: List[ResultRow] = []

    def append(self, row: ResultRow) -> None:
        self.rows.append(row)

    def extend(self, rows) -> None:
        self.rows.extend(rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def any_ok(self) -> bool:
        return any(row.ok for row in self.rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.as_dict(self.num_uavs) for row in self.rows], columns=columns(self.num_uavs))
        return frame.astype({"iterations": "Int64"})

    def to_csv(self, path_or_buf) -> None:
        self.to_frame().to_csv(path_or_buf, index=False, float_format="%.12g")

"""
CSV persistence for trajectories, tables and run summaries.

Floats are written with 17 significant digits and read back with the
round-trip parser, so a stored trajectory reproduces the in-memory values
bit for bit. Undefined entries are empty cells.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence

import numpy as np
import pandas as pd

from src.repositories.base import FileRepository
from src.utils.exceptions import ContractError

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["k", "t", "x", "theta", "u", "lambda", "H", "res_stat", "res_con"]
FLOAT_FORMAT = "%.17g"


def trajectory_frame(t: Sequence[float], x: Sequence[float], theta: Sequence[float],
                     u: Sequence[float], lam: Sequence[float], H: Sequence[float],
                     res_stat: Sequence[float], res_con: Sequence[float]) -> pd.DataFrame:
    """Assemble a trajectory table with one row per node; NaN marks undefined values."""
    columns = {"t": t, "x": x, "theta": theta, "u": u, "lambda": lam,
               "H": H, "res_stat": res_stat, "res_con": res_con}
    arrays = {name: np.asarray(values, dtype=float).reshape(-1) for name, values in columns.items()}
    lengths = {a.shape[0] for a in arrays.values()}
    if len(lengths) != 1:
        raise ContractError(f"trajectory columns have mixed lengths {sorted(lengths)}")
    rows = lengths.pop()
    frame = pd.DataFrame({"k": np.arange(rows, dtype=np.int64), **arrays})
    return frame[TRAJECTORY_COLUMNS]


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


class TrajectoryRepository(FileRepository):
    """Stores pandas tables as CSV files below the output directory."""

    suffix = ".csv"

    def save(self, name: str, frame: pd.DataFrame) -> Path:
        """
        Write a table.

        Args:
            name (str): Artifact name (``.csv`` is appended when missing)
            frame (pd.DataFrame): Table to write; NaN cells are written empty

        Returns:
            Path: The written file
        """
        self.ensure_root()
        path = self.path_for(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        logger.info(f"wrote {len(frame)} rows to {path}")
        return path

    def load(self, name: str) -> pd.DataFrame:
        """
        Read a table written by ``save``.

        Raises:
            ContractError: if the file does not exist
        """
        path = self.path_for(name)
        if not path.is_file():
            raise ContractError(f"no table named {path.name} in {self.root}")
        return pd.read_csv(path, float_precision="round_trip")

    def load_trajectory(self, name: str) -> pd.DataFrame:
        """Read a trajectory table and check its header."""
        frame = self.load(name)
        if list(frame.columns) != TRAJECTORY_COLUMNS:
            raise ContractError(f"unexpected trajectory header {list(frame.columns)}")
        return frame


class SummaryRepository(FileRepository):
    """Run summaries as ``key: value`` lines."""

    suffix = ".txt"

    def save(self, summary: Mapping[str, Any], name: str = "summary") -> Path:
        self.ensure_root()
        path = self.path_for(name)
        path.write_text("".join(f"{k}: {format_value(v)}\n" for k, v in summary.items()))
        logger.debug(f"wrote summary to {path}")
        return path

    def load(self, name: str = "summary") -> Dict[str, str]:
        path = self.path_for(name)
        if not path.is_file():
            raise ContractError(f"no summary named {path.name} in {self.root}")
        entries = {}
        for line in path.read_text().splitlines():
            key, sep, value = line.partition(": ")
            if sep:
                entries[key] = value
        return entries

"""
Static SVG line plots.

Rendering uses the non-interactive Agg backend. The SVG hash salt is fixed
and the date metadata dropped, so identical input gives identical files.
"""

import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.repositories.base import FileRepository  # noqa: E402
from src.utils.exceptions import ContractError  # noqa: E402

logger = logging.getLogger(__name__)

_RC = {
    "svg.hashsalt": "vakonomic-integrators",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
}


class PlotRepository(FileRepository):
    """Writes line plots as SVG files below the output directory."""

    suffix = ".svg"

    def save_line_plot(self, name: str, x: Sequence[float], series: Mapping[str, Sequence[float]],
                       xlabel: str, ylabel: str, title: Optional[str] = None) -> Path:
        """
        Plot one or more series against a common abscissa.

        NaN values leave gaps in the lines.

        Args:
            name (str): Artifact name (``.svg`` is appended when missing)
            x (Sequence[float]): Abscissa shared by all series
            series (Mapping[str, Sequence[float]]): Legend label -> values
            xlabel (str): Label of the horizontal axis
            ylabel (str): Label of the vertical axis
            title (Optional[str]): Figure title

        Returns:
            Path: The written file
        """
        x = np.asarray(x, dtype=float)
        if not series:
            raise ContractError("a line plot needs at least one series")
        self.ensure_root()
        path = self.path_for(name)

        with plt.rc_context(_RC):
            fig, ax = plt.subplots(figsize=(7.0, 4.0))
            try:
                for label, values in series.items():
                    values = np.asarray(values, dtype=float)
                    if values.shape != x.shape:
                        raise ContractError(f"series '{label}' has shape {values.shape}, expected {x.shape}")
                    ax.plot(x, values, linewidth=1.2, label=label)
                ax.set_xlabel(xlabel)
                ax.set_ylabel(ylabel)
                if title:
                    ax.set_title(title)
                if len(series) > 1:
                    ax.legend(loc="best")
                ax.grid(True, linewidth=0.4, alpha=0.5)
                fig.tight_layout()
                fig.savefig(path, format="svg", metadata={"Date": None})
            finally:
                plt.close(fig)

        logger.info(f"wrote plot {path}")
        return path

"""
Base repository for run artifacts.

Every experiment run writes its files below one output directory. This
module provides the shared path handling; specific repositories add the
format they persist (CSV tables, SVG plots, summaries).
"""

import logging
from pathlib import Path
from typing import List, Union

from src.utils.exceptions import ContractError

logger = logging.getLogger(__name__)


class FileRepository:
    """
    Generic repository for files stored below a root directory.

    Attributes:
        root (Path): Output directory; created lazily on the first write
        suffix (str): File extension handled by the repository
    """

    suffix: str = ""

    def __init__(self, root: Union[str, Path]):
        """
        Initialize the repository with its output directory.

        Args:
            root (Union[str, Path]): Directory that receives the files
        """
        self.root = Path(root)

    def path_for(self, name: str) -> Path:
        """
        Resolve the file path of an artifact.

        Args:
            name (str): Artifact name, with or without the suffix

        Returns:
            Path: Path below ``root``

        Raises:
            ContractError: if the name is empty or leaves the root directory
        """
        if not name or Path(name).name != name:
            raise ContractError(f"artifact name must be a plain file name, got '{name}'")
        if self.suffix and not name.endswith(self.suffix):
            name = f"{name}{self.suffix}"
        return self.root / name

    def ensure_root(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root

    def list(self) -> List[str]:
        """Names of the stored artifacts, sorted."""
        if not self.root.is_dir():
            return []
        pattern = f"*{self.suffix}" if self.suffix else "*"
        return sorted(p.name for p in self.root.glob(pattern) if p.is_file())

"""
This package contains the domain value types: configuration points, paths,
multiplier sequences, slotted functions and the discrete variational problems.
"""

from src.models.core import (
    ConfigPoint,
    DiscretePath,
    DofSplit,
    MultiplierSeq,
    SplitReport,
    config_point,
    multiplier,
    validate_split,
    window,
)
from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.models.problems import VakonomicProblem1, VakonomicProblem2

__all__ = [
    'ConfigPoint', 'DiscretePath', 'DofSplit', 'MultiplierSeq', 'SplitReport',
    'config_point', 'multiplier', 'validate_split', 'window',
    'SlottedScalarFn', 'SlottedVectorFn', 'VakonomicProblem1', 'VakonomicProblem2',
]

"""
Data handling for Proj-BNN.

- dataset: Dataset, normalization and splits
- generators: synthetic toys and the sine task family
- io: CSV reading/writing
- sources: registry of named data sources
"""

from .dataset import (
    DataSplits,
    Dataset,
    NormStats,
    SplitKind,
    SplitSpec,
    denormalize,
    normalize,
    split,
)
from .generators import (
    FourModeData,
    ModeDescriptor,
    SineTaskSpec,
    TaskSet,
    ToyRbfData,
    gen_sine_tasks,
    gen_toy_four_modes,
    gen_toy_latent_rbf,
)
from .io import load_csv, load_task_set, write_csv, write_task_set
from .sources import SOURCES, DataSource, GeneratedData, get_source

__all__ = [
    "DataSplits",
    "Dataset",
    "NormStats",
    "SplitKind",
    "SplitSpec",
    "denormalize",
    "normalize",
    "split",
    "FourModeData",
    "ModeDescriptor",
    "SineTaskSpec",
    "TaskSet",
    "ToyRbfData",
    "gen_sine_tasks",
    "gen_toy_four_modes",
    "gen_toy_latent_rbf",
    "load_csv",
    "load_task_set",
    "write_csv",
    "write_task_set",
    "SOURCES",
    "DataSource",
    "GeneratedData",
    "get_source",
]

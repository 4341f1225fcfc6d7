"""
Experiment configuration, command orchestration and artifact output
"""
from .commands import LabCommands, log_slope, power_grid
from .experiment_config import COMMANDS, ExperimentConfig, hash_bytes
from .outputs import ArtifactWriter, dumps, read_csv, to_jsonable

__all__ = [
    'COMMANDS',
    'ArtifactWriter',
    'ExperimentConfig',
    'LabCommands',
    'dumps',
    'hash_bytes',
    'log_slope',
    'power_grid',
    'read_csv',
    'to_jsonable',
]

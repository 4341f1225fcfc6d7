"""
TTSA recursion engine, decoupled reformulation and deterministic products
"""
from .decoupling import DecouplingSequence, DecouplingState, difference_terms
from .products import (
    LeadingStatistic,
    MatrixProducts,
    leading_statistic_last,
    leading_statistic_pr,
    matrix_products,
    psi_series,
)
from .streams import make_stream
from .ttsa_engine import (
    BatchResult,
    Checkpoint,
    IterateState,
    KahanMean,
    RunOptions,
    StepOutcome,
    TrajectoryRecord,
    TtsaEngine,
    decoupled_update,
    default_checkpoints,
    run,
)

__all__ = [
    'BatchResult',
    'Checkpoint',
    'DecouplingSequence',
    'DecouplingState',
    'IterateState',
    'KahanMean',
    'LeadingStatistic',
    'MatrixProducts',
    'RunOptions',
    'StepOutcome',
    'TrajectoryRecord',
    'TtsaEngine',
    'decoupled_update',
    'default_checkpoints',
    'difference_terms',
    'leading_statistic_last',
    'leading_statistic_pr',
    'make_stream',
    'matrix_products',
    'psi_series',
    'run',
]

"""
GTD(0) and TDC on finite MDPs as linear TTSA instances
"""
from .td_mappings import (
    ALGORITHMS,
    FeatureMap,
    FiniteMdp,
    PolicyEvaluation,
    TdInstance,
    TupleChain,
    build_gtd,
    build_instance,
    build_tdc,
    evaluate_policy_exact,
    gtd_update,
    load_mdp,
    random_mdp,
    raw_update,
    state_chain_mixing,
    tdc_update,
    td_error,
    tuple_chain,
)

__all__ = [
    'ALGORITHMS',
    'FeatureMap',
    'FiniteMdp',
    'PolicyEvaluation',
    'TdInstance',
    'TupleChain',
    'build_gtd',
    'build_instance',
    'build_tdc',
    'evaluate_policy_exact',
    'gtd_update',
    'load_mdp',
    'random_mdp',
    'raw_update',
    'state_chain_mixing',
    'td_error',
    'tdc_update',
    'tuple_chain',
]

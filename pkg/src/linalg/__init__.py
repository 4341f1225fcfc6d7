"""
Dense matrix kernel: Lyapunov certificates, Q-norms and Hurwitz checks
"""
from .kernel import (
    HurwitzCheck,
    LyapunovCertificate,
    as_matrix,
    as_vector,
    eig_check_hurwitz,
    q_norm,
    q_op_norm,
    solve_lyapunov,
    solve_lyapunov_equation,
    sym_sqrt,
)

__all__ = [
    'HurwitzCheck',
    'LyapunovCertificate',
    'as_matrix',
    'as_vector',
    'eig_check_hurwitz',
    'q_norm',
    'q_op_norm',
    'solve_lyapunov',
    'solve_lyapunov_equation',
    'sym_sqrt',
]

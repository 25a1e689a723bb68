"""
Handlers Package
================
Runtime support shared by the compilers and the verifier.

This package contains:
- stage_tracker: per-stage status, errors and the compile wall-clock budget
- grid_runner: chunked lattice evaluation on a thread pool
"""

from .grid_runner import evaluate_on_grid, sup_deviation
from .stage_tracker import StageRecord, StageStatus, StageTracker, TimeoutManager

__all__ = [
    'TimeoutManager',
    'StageStatus',
    'StageRecord',
    'StageTracker',
    'evaluate_on_grid',
    'sup_deviation',
]

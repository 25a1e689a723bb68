"""
Verify Package
==============
Grid-measured sup-norm errors and structural checks for emitted networks.
"""

from .verifier import (
    VERIFY_PRESETS, InvertibilityCheck, MonotonicityCheck, VerifyReport,
    check_invertible, check_monotone_last, check_width, grid_res_for, sup_error,
)

__all__ = [
    'VERIFY_PRESETS',
    'VerifyReport',
    'MonotonicityCheck',
    'InvertibilityCheck',
    'sup_error',
    'check_monotone_last',
    'check_invertible',
    'check_width',
    'grid_res_for',
]

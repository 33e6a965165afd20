"""Hot stencil kernels, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
numpy implementation in ``_pykernels`` is used. Setting the environment
variable ``ADAPTIVE_SBP_PURE=1`` forces the numpy path. ``BACKEND`` names
the active implementation.
"""

import os

from . import _pykernels

if os.environ.get("ADAPTIVE_SBP_PURE", "") not in ("", "0"):
    _ckernels = None
else:
    try:
        from . import _ckernels
    except ImportError:
        _ckernels = None

if _ckernels is not None:
    apply_q = _ckernels.apply_q
    sat_rhs = _ckernels.sat_rhs
    design_matrix = _ckernels.design_matrix
    BACKEND = "cython"
else:
    apply_q = _pykernels.apply_q
    sat_rhs = _pykernels.sat_rhs
    design_matrix = _pykernels.design_matrix
    BACKEND = "python"

__all__ = ["apply_q", "sat_rhs", "design_matrix", "BACKEND"]

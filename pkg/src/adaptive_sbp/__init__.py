"""Stencil-adaptive SBP-SAT finite differences for periodic linear advection."""

from .advection import (ADAPTIVE, CONVENTIONAL, MultiBlockState, SolverConfig,
                        check_transmission, dp45_integrate, energy,
                        energy_rate_identity, exact_solution, l2_error, rhs,
                        run)
from .grid import BlockGrid
from .kernels import BACKEND
from .operators import (NormMatrix, SbpOperator, assemble_Q, extract_w,
                        make_blocknorm_target, make_sbp42, validate_sbp)
from .stencil_opt import (LsStage, OptimizerConfig, accuracy_stage,
                          build_stage, lexicographic_lsq,
                          optimize_block_operator)

__version__ = "0.1.0"

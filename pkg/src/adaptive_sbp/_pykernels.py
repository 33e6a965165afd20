"""Pure numpy versions of the stencil kernels.

Each block operator is described by its 14 free coefficients ``w`` (layout
documented in :mod:`adaptive_sbp.operators`) plus the fixed corners
``Q[0, 0] = -1/2`` and ``Q[N, N] = 1/2``. These routines never form ``Q``.
"""

import numpy as np


def apply_q(w, u, out):
    """``out[k] = Q(w[k]) @ u[k]`` for every block ``k``."""
    n = u.shape[1] - 1
    q01, q02, q03, q12, q13, q23 = (w[:, j, None] for j in range(6))
    r01, r02, r03, r12, r13, r23 = (w[:, 6 + j, None] for j in range(6))
    a1 = w[:, 12, None]
    a2 = w[:, 13, None]
    u0, u1, u2, u3, u4, u5 = (u[:, j, None] for j in range(6))
    v0, v1, v2, v3, v4, v5 = (u[:, n - j, None] for j in range(6))

    out[:, 4:n - 3] = (a1 * (u[:, 5:n - 2] - u[:, 3:n - 4])
                       + a2 * (u[:, 6:n - 1] - u[:, 2:n - 5]))

    out[:, 0:1] = -0.5 * u0 + q01 * u1 + q02 * u2 + q03 * u3
    out[:, 1:2] = -q01 * u0 + q12 * u2 + q13 * u3
    out[:, 2:3] = -q02 * u0 - q12 * u1 + q23 * u3 + a2 * u4
    out[:, 3:4] = -q03 * u0 - q13 * u1 - q23 * u2 + a1 * u4 + a2 * u5

    out[:, n:n + 1] = 0.5 * v0 - r01 * v1 - r02 * v2 - r03 * v3
    out[:, n - 1:n] = r01 * v0 - r12 * v2 - r13 * v3
    out[:, n - 2:n - 1] = r02 * v0 + r12 * v1 - r23 * v3 - a2 * v4
    out[:, n - 3:n - 2] = (r03 * v0 + r13 * v1 + r23 * v2
                           - a1 * v4 - a2 * v5)
    return out


def sat_rhs(w, pinv, u, theta, out):
    """Periodic multiblock SBP-SAT tendency for diagonal-norm operators.

    ``pinv`` holds the inverse diagonal norm weights, one row per block.
    """
    n = u.shape[1] - 1
    apply_q(w, u, out)
    out *= -pinv
    left_jump = u[:, 0] - np.roll(u[:, n], 1)
    right_jump = u[:, n] - np.roll(u[:, 0], -1)
    out[:, 0] -= 0.5 * (1.0 + theta) * pinv[:, 0] * left_jump
    out[:, n] += 0.5 * (1.0 - theta) * pinv[:, n] * right_jump
    return out


def design_matrix(u, a):
    """Fill ``a`` (shape ``(N+1, 14)``) with the columns ``M_j @ u``.

    ``M_j`` is the antisymmetric placement pattern of unknown ``j``.
    """
    n = u.shape[0] - 1
    a[:] = 0.0
    left = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    for j, (p, q) in enumerate(left):
        a[p, j] += u[q]
        a[q, j] -= u[p]
        # right end: +r at (N-q, N-p), -r at (N-p, N-q)
        a[n - q, 6 + j] += u[n - p]
        a[n - p, 6 + j] -= u[n - q]
    # a1 sits at (i, i+1) for i = 3..N-4, a2 at (i, i+2) for i = 2..N-4
    a[3:n - 3, 12] += u[4:n - 2]
    a[4:n - 2, 12] -= u[3:n - 3]
    a[2:n - 3, 13] += u[4:n - 1]
    a[4:n - 1, 13] -= u[2:n - 3]
    return a

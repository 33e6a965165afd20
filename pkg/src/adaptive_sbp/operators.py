r"""
Summation-by-parts first-derivative operators on a single block.

An SBP operator is a pair :math:`(P, Q)` with :math:`P = P^T > 0` and
:math:`Q + Q^T = B = \mathrm{diag}(-1, 0, \dots, 0, 1)`, so that
:math:`D = P^{-1} Q` approximates :math:`\partial_x`.

All operators here share one sparsity pattern for :math:`Q`: a 4x4 block at
each end, a five-point antisymmetric interior band :math:`(-a_2, -a_1, 0,
a_1, a_2)` and the fixed corners :math:`\mp 1/2`. Such a :math:`Q` is fully
described by 14 numbers, stored in the order

.. code::

    w = (q01, q02, q03, q12, q13, q23,   # left block, Q[i, j] = q_ij
         r01, r02, r03, r12, r13, r23,   # right block, Q[N-j, N-i] = r_ij
         a1, a2)                         # interior band

with every off-diagonal entry mirrored antisymmetrically. Three operators
are provided:

* :func:`make_sbp42` -- the classical diagonal-norm SBP(4,2) operator.
* :func:`make_blocknorm_target` -- a block-norm operator with the same
  :math:`Q` pattern, exact for cubics at every row.
* :func:`assemble_Q` -- any member of the pattern from a coefficient vector.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

N_COEFFS = 14
MIN_N = 8

LABELS = ("SBP42", "BlockNormTarget", "Adaptive")

# (i, j) index pairs of the upper-triangle boundary unknowns, in layout order
BOUNDARY_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

SBP42_NORM = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])
SBP42_Q = np.array([59 / 96, -1 / 12, -1 / 32, 59 / 96, 0.0, 59 / 96])
INTERIOR_BAND = np.array([2 / 3, -1 / 12])


def sbp42_coefficients() -> np.ndarray:
    """Coefficient vector ``w`` of SBP(4,2)."""
    return np.concatenate([SBP42_Q, SBP42_Q, INTERIOR_BAND])


def _check_size(n: int) -> None:
    if int(n) != n or n < MIN_N:
        raise ValueError(
            f"N={n} is too small: need N >= {MIN_N} so that the two "
            "boundary closures do not overlap")


def boundary_matrix(n: int) -> np.ndarray:
    """``B = diag(-1, 0, ..., 0, 1)`` of size ``n + 1``."""
    b = np.zeros((n + 1, n + 1))
    b[0, 0] = -1.0
    b[n, n] = 1.0
    return b


# {{{ norm matrix

@dataclass(frozen=True, eq=False)
class NormMatrix:
    """Discrete inner-product weight ``P`` including the factor ``dx``.

    .. attribute:: kind

        ``"diagonal"`` or ``"block"``.

    .. attribute:: diag

        The ``N + 1`` diagonal entries of ``P``.

    .. attribute:: corner

        For ``kind == "block"``, the symmetric 4x4 upper-left block. The
        lower-right block is its index-reversed mirror ``corner[::-1, ::-1]``.
    """

    kind: str
    diag: np.ndarray
    corner: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in ("diagonal", "block"):
            raise ValueError(f"unknown norm kind: {self.kind!r}")
        if self.kind == "block":
            if self.corner is None or self.corner.shape != (4, 4):
                raise ValueError("block norm needs a 4x4 corner block")
            if not np.array_equal(np.diag(self.corner), self.diag[:4]):
                raise ValueError("corner block disagrees with the diagonal")

    @classmethod
    def diagonal(cls, weights: np.ndarray) -> "NormMatrix":
        return cls("diagonal", np.asarray(weights, dtype=float))

    @classmethod
    def block(cls, corner: np.ndarray, n: int, dx: float) -> "NormMatrix":
        corner = np.asarray(corner, dtype=float)
        d = np.full(n + 1, float(dx))
        d[:4] = np.diag(corner)
        d[n - 3:] = np.diag(corner)[::-1]
        return cls("block", d, corner)

    @property
    def size(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        p = np.diag(self.diag)
        if self.kind == "block":
            n = self.size - 1
            p[:4, :4] = self.corner
            p[n - 3:, n - 3:] = self.corner[::-1, ::-1]
        return p

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``P @ v`` without forming ``P``."""
        out = self.diag * v
        if self.kind == "block":
            n = self.size - 1
            out[:4] = self.corner @ v[:4]
            out[n - 3:] = self.corner[::-1, ::-1] @ v[n - 3:]
        return out

    def solve(self, v: np.ndarray) -> np.ndarray:
        """``P^{-1} @ v`` without forming ``P``."""
        out = v / self.diag
        if self.kind == "block":
            n = self.size - 1
            out[:4] = np.linalg.solve(self.corner, v[:4])
            out[n - 3:] = np.linalg.solve(self.corner[::-1, ::-1], v[n - 3:])
        return out

    @cached_property
    def inverse_diagonal(self) -> np.ndarray:
        if self.kind != "diagonal":
            raise ValueError("only diagonal norms have a diagonal inverse")
        return 1.0 / self.diag

    def is_spd(self) -> bool:
        if np.any(self.diag <= 0.0):
            return False
        if self.kind == "block":
            if not np.array_equal(self.corner, self.corner.T):
                return False
            return bool(np.linalg.eigvalsh(self.corner)[0] > 0.0)
        return True

    def equals(self, other: "NormMatrix", atol: float = 1e-14) -> bool:
        if self.kind != other.kind or self.size != other.size:
            return False
        if not np.allclose(self.diag, other.diag, rtol=0.0, atol=atol):
            return False
        if self.kind == "block":
            return np.allclose(self.corner, other.corner, rtol=0.0, atol=atol)
        return True

# }}}


# {{{ operator

@dataclass(frozen=True, eq=False)
class SbpOperator:
    """First-derivative SBP operator ``D = P^{-1} Q`` on one block.

    ``x0`` is the physical coordinate of the first grid point and only
    matters for evaluating monomials.
    """

    n: int
    dx: float
    P: NormMatrix
    Q: np.ndarray
    label: str
    x0: float = 0.0
    w: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"unknown operator label: {self.label!r}")
        if self.Q.shape != (self.n + 1, self.n + 1):
            raise ValueError("Q does not match the grid size")
        if self.P.size != self.n + 1:
            raise ValueError("P does not match the grid size")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n + 1)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """The 14-entry coefficient vector of ``Q``."""
        if self.w is not None:
            return self.w
        return extract_w(self)

    @cached_property
    def D(self) -> np.ndarray:
        if self.P.kind == "diagonal":
            return self.Q / self.P.diag[:, None]
        return np.linalg.solve(self.P.dense(), self.Q)

    def derivative(self, u: np.ndarray) -> np.ndarray:
        return self.P.solve(self.Q @ u)

# }}}


# {{{ assembly

def assemble_Q(w: np.ndarray, n: int) -> np.ndarray:
    """Dense ``Q`` from the coefficient vector ``w``.

    Every free coefficient is written once with a ``+`` and once with a
    ``-`` sign, so ``Q + Q^T = B`` holds bit-exactly for any ``w``.
    """
    _check_size(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (N_COEFFS,):
        raise ValueError(f"expected {N_COEFFS} coefficients, got {w.shape}")

    q = np.zeros((n + 1, n + 1))
    q[0, 0] = -0.5
    q[n, n] = 0.5
    for j, (a, b) in enumerate(BOUNDARY_PAIRS):
        q[a, b] = w[j]
        q[b, a] = -w[j]
        q[n - b, n - a] = w[6 + j]
        q[n - a, n - b] = -w[6 + j]

    a1, a2 = w[12], w[13]
    i = np.arange(3, n - 3)
    q[i, i + 1] = a1
    q[i + 1, i] = -a1
    i = np.arange(2, n - 3)
    q[i, i + 2] = a2
    q[i + 2, i] = -a2
    return q


def extract_w(op: SbpOperator, atol: float = 1e-14) -> np.ndarray:
    """Inverse of :func:`assemble_Q`.

    Raises :class:`ValueError` if ``op.Q`` has an entry that the pattern
    cannot represent.
    """
    n = op.n
    q = op.Q
    w = np.empty(N_COEFFS)
    for j, (a, b) in enumerate(BOUNDARY_PAIRS):
        w[j] = q[a, b]
        w[6 + j] = q[n - b, n - a]
    mid = n // 2
    w[12] = q[mid, mid + 1]
    w[13] = q[mid, mid + 2]

    mismatch = np.abs(assemble_Q(w, n) - q)
    if mismatch.max() > atol:
        i, j = np.unravel_index(np.argmax(mismatch), mismatch.shape)
        raise ValueError(
            f"Q violates the stencil pattern at ({i}, {j}): "
            f"deviation {mismatch[i, j]:.3e}")
    return w

# }}}


# {{{ constructors

def make_sbp42(n: int, dx: float, x0: float = 0.0) -> SbpOperator:
    """Diagonal-norm SBP(4,2): second order at the four boundary rows,
    fourth order in the interior."""
    _check_size(n)
    d = np.full(n + 1, float(dx))
    d[:4] = dx * SBP42_NORM
    d[n - 3:] = dx * SBP42_NORM[::-1]
    w = sbp42_coefficients()
    return SbpOperator(n, float(dx), NormMatrix.diagonal(d), assemble_Q(w, n),
                       "SBP42", x0=x0, w=w)


def _closure_system(degrees):
    """Linear exactness conditions on the left closure of a block norm.

    Unknowns are the 10 upper-triangle entries of the (unit spacing) 4x4
    norm block followed by the 6 boundary entries of ``Q``; one equation
    per (row, degree) with rows 0..3.
    """
    a1, a2 = INTERIOR_BAND
    sym = [(i, j) for i in range(4) for j in range(i, 4)]
    xi = np.arange(8.0)
    rows, rhs = [], []
    for i in range(4):
        for m in degrees:
            xm = xi**m
            dxm = m * xi**(m - 1) if m > 0 else np.zeros_like(xi)
            row = np.zeros(16)
            for k, (a, b) in enumerate(BOUNDARY_PAIRS):
                if a == i:
                    row[10 + k] += xm[b]
                if b == i:
                    row[10 + k] -= xm[a]
            for k, (a, b) in enumerate(sym):
                if a == i:
                    row[k] -= dxm[b]
                elif b == i:
                    row[k] -= dxm[a]
            fixed = {0: -0.5 * xm[0],
                     2: a2 * xm[4],
                     3: a1 * xm[4] + a2 * xm[5]}.get(i, 0.0)
            rows.append(row)
            rhs.append(-fixed)
    return np.array(rows), np.array(rhs), sym


@lru_cache(maxsize=None)
def blocknorm_closure(tol: float = 1e-10):
    """Solve for the left closure of the block-norm target operator.

    Exactness for ``1, x, x^2, x^3`` at rows 0..3 gives 16 equations in 16
    unknowns, but the system has a two-dimensional null space and its
    minimum-norm solution has an indefinite norm block. The null space is
    used to pull the norm block as close as possible (Frobenius norm) to
    the SBP(4,2) weights, which yields a positive-definite block.

    Returns the unit-spacing norm block (4x4) and the 6 ``Q`` entries.
    """
    a, b, sym = _closure_system(range(4))
    u, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > 1e-12 * s[0]))
    particular = vt[:rank].T @ ((u[:, :rank].T @ b) / s[:rank])
    null = vt[rank:].T

    if null.shape[1] > 0:
        target = np.diag(SBP42_NORM)
        scale = np.array([1.0 if i == j else np.sqrt(2.0) for i, j in sym])
        goal = np.array([target[i, j] for i, j in sym]) - particular[:10]
        z = np.linalg.lstsq(scale[:, None] * null[:10], scale * goal,
                            rcond=None)[0]
        sol = particular + null @ z
    else:
        sol = particular

    residual = np.abs(a @ sol - b).max()
    if residual > tol:
        raise ValueError(
            f"block-norm exactness system is inconsistent: residual "
            f"{residual:.3e} > {tol:.1e}")

    corner = np.zeros((4, 4))
    for k, (i, j) in enumerate(sym):
        corner[i, j] = corner[j, i] = sol[k]
    eig = np.linalg.eigvalsh(corner)
    if eig[0] <= 0.0:
        raise ValueError(
            f"block-norm corner is not positive definite: eigenvalues {eig}")
    return corner, sol[10:]


def make_blocknorm_target(n: int, dx: float, x0: float = 0.0) -> SbpOperator:
    """Block-norm operator with the SBP(4,2) ``Q`` pattern, exact for cubics
    at every row."""
    _check_size(n)
    corner, q = blocknorm_closure()
    w = np.concatenate([q, q, INTERIOR_BAND])
    P = NormMatrix.block(dx * corner, n, dx)
    return SbpOperator(n, float(dx), P, assemble_Q(w, n), "BlockNormTarget",
                       x0=x0, w=w)


def make_adaptive(w: np.ndarray, base: SbpOperator) -> SbpOperator:
    """Operator with ``base``'s norm and ``Q`` assembled from ``w``."""
    w = np.array(w, dtype=float)
    return SbpOperator(base.n, base.dx, base.P, assemble_Q(w, base.n),
                       "Adaptive", x0=base.x0, w=w)

# }}}


# {{{ validation

@dataclass
class ValidationReport:
    sbp_identity_residual: float
    norm_spd: bool
    exactness_degrees: list

    def boundary_degree(self) -> int:
        rows = self.exactness_degrees
        return min(rows[:4] + rows[-4:])

    def interior_degree(self) -> int:
        rows = self.exactness_degrees
        return min(rows[4:-4]) if len(rows) > 8 else -1


def exactness_errors(op: SbpOperator, degree: int) -> np.ndarray:
    """Per-row error of ``D x^m`` relative to the monomial scale."""
    x = op.x
    xmax = max(1.0, float(np.abs(x).max()))
    exact = degree * x**(degree - 1) if degree > 0 else np.zeros_like(x)
    scale = max(1.0, degree * xmax**(degree - 1))
    return np.abs(op.derivative(x**degree) - exact) / scale


def validate_sbp(op: SbpOperator, max_degree: int = 6,
                 tol: float = 1e-9) -> ValidationReport:
    """Check the SBP identity, positivity of ``P`` and per-row exactness.

    ``exactness_degrees[i]`` is the largest ``d`` such that row ``i`` of ``D``
    differentiates every monomial of degree ``0..d`` exactly (``-1`` if not
    even constants).
    """
    n = op.n
    residual = float(np.abs(op.Q + op.Q.T - boundary_matrix(n)).max())
    degrees = np.full(n + 1, -1)
    alive = np.ones(n + 1, dtype=bool)
    for m in range(max_degree + 1):
        alive &= exactness_errors(op, m) <= tol
        degrees[alive] = m
    return ValidationReport(residual, op.P.is_spd(), degrees.tolist())


def dump_csv(op: SbpOperator, q_path, p_path) -> None:
    """Write dense ``Q`` and ``P`` as CSV with 17 significant digits."""
    np.savetxt(q_path, op.Q, delimiter=",", fmt="%.16e")
    np.savetxt(p_path, op.P.dense(), delimiter=",", fmt="%.16e")

# }}}

"""
Re-optimizing the stencil coefficients of ``Q`` from a grid function.

For a grid function ``u`` and an approximation ``v`` of its derivative, the
residual ``Q(w) u - P v`` is affine in the 14 coefficients ``w``, so it can
be written ``A(u) w - b(u, v)``. Several such least-squares stages are
solved in priority order: each later stage only uses the freedom left over
by the earlier ones.
"""

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .operators import (N_COEFFS, NormMatrix, SbpOperator, make_adaptive,
                        sbp42_coefficients)


@dataclass(frozen=True, eq=False)
class LsStage:
    """One least-squares problem ``min |A w - b|``."""

    A: np.ndarray
    b: np.ndarray

    def residual(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(self.A @ w - self.b))


@dataclass(frozen=True)
class OptimizerConfig:
    """
    .. attribute:: rank_tol

        Singular values below ``rank_tol * sigma_max`` of a stage are treated
        as zero.

    .. attribute:: anchor

        Coefficients used to fix whatever freedom is left after the last
        stage (closest point in the Euclidean norm). Defaults to SBP(4,2).
    """

    rank_tol: float = 1e-10
    anchor: np.ndarray = field(default_factory=sbp42_coefficients)

    def __post_init__(self) -> None:
        if not 0.0 < self.rank_tol < 1.0:
            raise ValueError(f"rank_tol must lie in (0, 1): {self.rank_tol}")
        if np.shape(self.anchor) != (N_COEFFS,):
            raise ValueError("anchor must have 14 entries")


def design_matrix(u: np.ndarray) -> np.ndarray:
    """``A(u)``: column ``j`` is the placement pattern of ``w_j`` applied to
    ``u``."""
    u = np.ascontiguousarray(u, dtype=float)
    a = np.empty((u.size, N_COEFFS))
    kernels.design_matrix(u, a)
    return a


def build_stage(u: np.ndarray, v: np.ndarray, P: NormMatrix) -> LsStage:
    """Stage for ``Q(w) u ~ P v``.

    The fixed corners of ``Q`` move to the right-hand side:
    ``b = P v - Q_fixed u``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1 or u.size != P.size:
        raise ValueError(
            f"shape mismatch: u {u.shape}, v {v.shape}, P of size {P.size}")
    b = P.apply(v)
    b[0] += 0.5 * u[0]
    b[-1] -= 0.5 * u[-1]
    return LsStage(design_matrix(u), b)


def accuracy_stage(degree: int, x: np.ndarray, P: NormMatrix) -> LsStage:
    """Stage imposing exactness on ``x**degree`` for ``degree`` in {0, 1}."""
    if degree == 0:
        return build_stage(np.ones_like(x), np.zeros_like(x), P)
    if degree == 1:
        return build_stage(np.asarray(x, dtype=float), np.ones_like(x), P)
    raise ValueError(f"unsupported accuracy degree: {degree}")


def lexicographic_lsq(stages: Sequence[LsStage],
                      config: Optional[OptimizerConfig] = None,
                      singular_values: Optional[List[np.ndarray]] = None
                      ) -> np.ndarray:
    """Solve the stages in order, each within the minimizers of the previous.

    The minimizer set is kept as ``w + N z`` with orthonormal ``N``. A stage
    restricted to that set is solved by SVD; directions with singular values
    below ``rank_tol * sigma_max`` stay free for later stages. ``sigma_max``
    belongs to the unrestricted stage matrix, so roundoff left over from
    earlier stages is not mistaken for a constraint. Whatever
    freedom survives all stages is resolved toward ``config.anchor``.

    If ``singular_values`` is a list, the restricted singular values of each
    stage are appended to it.
    """
    if config is None:
        config = OptimizerConfig()
    if len(stages) == 0:
        raise ValueError("need at least one stage")

    w = np.zeros(N_COEFFS)
    basis = np.eye(N_COEFFS)
    for stage in stages:
        if stage.A.shape[1] != N_COEFFS:
            raise ValueError(f"stage has {stage.A.shape[1]} columns")
        if basis.shape[1] == 0:
            if singular_values is not None:
                singular_values.append(np.zeros(0))
            continue

        restricted = stage.A @ basis
        u, s, vt = np.linalg.svd(restricted, full_matrices=False)
        if vt.shape[0] < restricted.shape[1]:
            vt = np.linalg.svd(restricted)[2]
        if singular_values is not None:
            singular_values.append(s)
        scale = np.linalg.norm(stage.A, 2)
        rank = int(np.sum(s > config.rank_tol * scale)) if scale > 0 else 0

        r = stage.b - stage.A @ w
        w = w + basis @ (vt[:rank].T @ ((u[:, :rank].T @ r) / s[:rank]))
        null = vt[rank:]
        basis = basis @ null.T

    if basis.shape[1] > 0:
        w = w + basis @ (basis.T @ (config.anchor - w))
    return w


def optimize_block_operator(u: np.ndarray, base: SbpOperator,
                            target: SbpOperator,
                            config: Optional[OptimizerConfig] = None,
                            singular_values: Optional[List[np.ndarray]] = None
                            ) -> SbpOperator:
    """Adaptive operator for the grid function ``u`` on one block.

    The target derivative is ``v = target.D u``. The stages are, in order,
    ``Q u ~ P v``, exactness on constants and exactness on ``x``. The norm of
    ``base`` is reused unchanged, so swapping operators keeps the energy.
    """
    if base.n != target.n or base.dx != target.dx:
        raise ValueError("base and target operators must share N and dx")
    u = np.asarray(u, dtype=float)
    v = target.derivative(u)
    x = base.x
    stages = [build_stage(u, v, base.P),
              accuracy_stage(0, x, base.P),
              accuracy_stage(1, x, base.P)]
    w = lexicographic_lsq(stages, config, singular_values)
    return make_adaptive(w, base)


def write_singular_values_csv(path, singular_values: Sequence[np.ndarray]
                              ) -> None:
    """One row per stage: ``stage,index,sigma``."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["stage", "index", "sigma"])
        for k, s in enumerate(singular_values):
            for i, value in enumerate(s):
                writer.writerow([k, i, f"{value:.16e}"])

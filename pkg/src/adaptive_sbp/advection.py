"""
Multiblock SBP-SAT discretization of ``u_t + u_x = 0`` with periodic coupling.

On block ``k`` the semidiscretization reads::

    u_t = -D u - (1 + theta)/2 P^{-1} (u_0 - u_N^{(k-1)}) e_0
                + (1 - theta)/2 P^{-1} (u_N - u_0^{(k+1)}) e_N

with block indices taken modulo ``K``. Interface points are stored twice,
once in each neighbouring block.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .grid import BlockGrid
from .operators import (NormMatrix, SbpOperator, make_blocknorm_target,
                        make_sbp42)
from .stencil_opt import OptimizerConfig, optimize_block_operator

log = logging.getLogger(__name__)

CONVENTIONAL = "conventional"
ADAPTIVE = "adaptive"


class IntegrationError(RuntimeError):
    pass


class TransmissionError(RuntimeError):
    pass


@dataclass
class MultiBlockState:
    """Solution values at time ``t``; ``blocks`` has shape ``(K, N + 1)``."""

    t: float
    blocks: np.ndarray

    def __post_init__(self) -> None:
        self.blocks = np.ascontiguousarray(self.blocks, dtype=float)
        if self.blocks.ndim != 2:
            raise ValueError("blocks must be a (K, N + 1) array")

    @property
    def K(self) -> int:
        return self.blocks.shape[0]

    @property
    def N(self) -> int:
        return self.blocks.shape[1] - 1

    def copy(self) -> "MultiBlockState":
        return MultiBlockState(self.t, self.blocks.copy())


@dataclass(frozen=True)
class SolverConfig:
    T: float = 1.0
    theta: float = 1.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    retau_factor: float = 0.5
    mode: str = ADAPTIVE
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self) -> None:
        if self.theta < 0:
            raise ValueError(f"theta must be non-negative: {self.theta}")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("integrator tolerances must be positive")
        if self.T < 0:
            raise ValueError(f"final time must be non-negative: {self.T}")
        if self.retau_factor <= 0:
            raise ValueError("retau_factor must be positive")
        if self.mode not in (CONVENTIONAL, ADAPTIVE):
            raise ValueError(f"unknown mode: {self.mode!r}")

    def retau(self, grid: BlockGrid) -> float:
        """Re-optimization interval ``c / (K (N + 1))``."""
        return self.retau_factor / (grid.K * (grid.N + 1))


# {{{ semidiscretization

def _check_conforming(state: MultiBlockState, ops: Sequence[SbpOperator]):
    if len(ops) != state.K:
        raise ValueError(f"{len(ops)} operators for {state.K} blocks")
    for op in ops:
        if op.n != state.N:
            raise ValueError(f"operator of size {op.n} for blocks of size "
                             f"{state.N}")


def pack_operators(ops: Sequence[SbpOperator]):
    """Coefficient and inverse-norm arrays consumed by the RHS kernel."""
    w = np.ascontiguousarray([op.coefficients for op in ops])
    pinv = np.ascontiguousarray([op.P.inverse_diagonal for op in ops])
    return w, pinv


def rhs(state: MultiBlockState, ops: Sequence[SbpOperator],
        theta: float = 1.0) -> np.ndarray:
    """Time derivative of every block, shape ``(K, N + 1)``."""
    _check_conforming(state, ops)
    u = state.blocks
    if all(op.P.kind == "diagonal" for op in ops):
        w, pinv = pack_operators(ops)
        return kernels.sat_rhs(w, pinv, u, float(theta), np.empty_like(u))

    # block norms: P^{-1} e_0 is no longer a multiple of e_0
    n = state.N
    out = np.empty_like(u)
    for k, op in enumerate(ops):
        e0 = np.zeros(n + 1)
        eN = np.zeros(n + 1)
        e0[0] = 0.5 * (1 + theta) * (u[k, 0] - u[k - 1, n])
        eN[n] = 0.5 * (1 - theta) * (u[k, n] - u[(k + 1) % state.K, 0])
        out[k] = op.P.solve(-op.Q @ u[k] - e0 + eN)
    return out


def energy(state: MultiBlockState, ops: Sequence[SbpOperator]) -> float:
    """``sum_k u_k^T P_k u_k``."""
    _check_conforming(state, ops)
    return float(sum(u @ op.P.apply(u) for u, op in zip(state.blocks, ops)))


def interface_jumps(state: MultiBlockState) -> np.ndarray:
    """``u_0^{(k)} - u_N^{(k-1)}`` for every block (periodic)."""
    u = state.blocks
    return u[:, 0] - np.roll(u[:, -1], 1)


def energy_rate_identity(state: MultiBlockState, ops: Sequence[SbpOperator],
                         theta: float = 1.0) -> Tuple[float, float]:
    """Both sides of ``d/dt sum |u|_P^2 = -theta sum jumps^2``.

    The left side is evaluated from the actual tendency, the right side from
    the interface jumps alone.
    """
    tend = rhs(state, ops, theta)
    lhs = 2.0 * sum(float(op.P.apply(u) @ du)
                    for u, du, op in zip(state.blocks, tend, ops))
    jumps = interface_jumps(state)
    return lhs, -theta * float(jumps @ jumps)


def check_transmission(p_old: NormMatrix, p_new: NormMatrix,
                       atol: float = 1e-14) -> bool:
    """True if swapping operators keeps the energy estimate, i.e. the two
    diagonal norms coincide."""
    if p_old.size != p_new.size:
        raise ValueError("norms of different size")
    return p_old.equals(p_new, atol=atol)

# }}}


# {{{ Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order weights minus the embedded fourth-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    last_step: Optional[float] = None


def _error_norm(err, y, y_new, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, atol, rtol):
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(fun: Callable[[float, np.ndarray], np.ndarray], t0: float,
           y0: np.ndarray, t_end: float, abs_tol: float = 1e-10,
           rel_tol: float = 1e-10, h0: Optional[float] = None,
           stats: Optional[StepStats] = None,
           max_step: Optional[float] = None) -> np.ndarray:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end``.

    Embedded Dormand-Prince 5(4) pair with local extrapolation and FSAL.
    Steps are accepted when the weighted RMS norm of the error estimate,
    scaled by ``abs_tol + rel_tol |y|``, is at most one. The last step is
    clipped to land on ``t_end``. ``h0`` seeds the first step size; on
    return ``stats.last_step`` holds a suitable seed for a continuation.

    Steps never exceed ``max_step``, by default a tenth of the interval
    (the same default as MATLAB's ``ode45``).
    """
    if t_end < t0:
        raise ValueError(f"t_end={t_end} lies before t0={t0}")
    if stats is None:
        stats = StepStats()
    y = np.array(y0, dtype=float)
    t = float(t0)
    if t_end == t:
        return y
    if max_step is None:
        max_step = 0.1 * (t_end - t)

    f = fun(t, y)
    stats.evaluations += 1
    if h0 is None:
        h = _initial_step(fun, t, y, f, abs_tol, rel_tol)
        stats.evaluations += 1
    else:
        h = float(h0)
    h = min(h, max_step)

    k = np.empty((7,) + y.shape)
    while t < t_end:
        h_min = 16 * np.spacing(max(abs(t), abs(t_end)))
        if h < h_min:
            raise IntegrationError(
                f"step size underflow at t={t:.6e} (h={h:.3e}); "
                "the problem may be stiff")
        last = t + h >= t_end
        step = t_end - t if last else h

        k[0] = f
        for s in range(1, 7):
            ys = y + step * np.tensordot(_A[s], k[:s], axes=1)
            k[s] = fun(t + _C[s] * step, ys)
        stats.evaluations += 6
        y_new = ys
        err = _error_norm(step * np.tensordot(_E, k, axes=1), y, y_new,
                          abs_tol, rel_tol)

        if not np.isfinite(err):
            raise IntegrationError(f"non-finite solution at t={t:.6e}")

        if err <= 1.0:
            t = t_end if last else t + step
            y = y_new
            f = k[6]
            stats.accepted += 1
            factor = MAX_FACTOR if err == 0.0 else \
                min(MAX_FACTOR, SAFETY * err ** -0.2)
            # a clipped final step says little about the next natural step
            h = max(h, step * factor) if last else step * factor
            h = min(h, max_step)
        else:
            stats.rejected += 1
            h = step * max(MIN_FACTOR, SAFETY * err ** -0.2)
    stats.last_step = h
    return y


def dp45_integrate(state: MultiBlockState, ops: Sequence[SbpOperator],
                   t_end: float, abs_tol: float = 1e-10,
                   rel_tol: float = 1e-10, theta: float = 1.0,
                   h0: Optional[float] = None,
                   stats: Optional[StepStats] = None,
                   max_step: Optional[float] = None) -> MultiBlockState:
    """Advance ``state`` to ``t_end`` with fixed operators."""
    _check_conforming(state, ops)
    shape = state.blocks.shape
    if all(op.P.kind == "diagonal" for op in ops):
        w, pinv = pack_operators(ops)
        theta = float(theta)

        def fun(t, y):
            return kernels.sat_rhs(w, pinv, y, theta, np.empty(shape))
    else:
        def fun(t, y):
            return rhs(MultiBlockState(t, y), ops, theta)

    y = dopri5(fun, state.t, state.blocks, t_end, abs_tol, rel_tol,
               h0=h0, stats=stats, max_step=max_step)
    return MultiBlockState(t_end, y)

# }}}


# {{{ experiment

def exact_solution(x, t):
    """``sin(2 pi (x - t)) + cos(4 pi (x - t)) / 2``."""
    s = np.asarray(x) - t
    return np.sin(2 * np.pi * s) + 0.5 * np.cos(4 * np.pi * s)


def l2_error(state: MultiBlockState, ops: Sequence[SbpOperator],
             grid: BlockGrid, solution=exact_solution) -> float:
    """P-weighted discrete L2 distance to ``solution`` at ``state.t``."""
    _check_conforming(state, ops)
    diff = state.blocks - solution(grid.coords, state.t)
    return float(np.sqrt(sum(e @ op.P.apply(e) for e, op in zip(diff, ops))))


def reoptimization_times(T: float, dtau: float) -> np.ndarray:
    """``0, dtau, 2 dtau, ...`` with the last instant clipped to ``T``."""
    n = int(np.ceil(T / dtau * (1 - 1e-12))) if T > 0 else 0
    times = dtau * np.arange(n + 1)
    times[-1] = T
    return times


@dataclass
class RunResult:
    state: MultiBlockState
    ops: List[SbpOperator]
    times: np.ndarray
    errors: np.ndarray
    stats: StepStats
    reoptimizations: int = 0

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])


Optimizer = Callable[[np.ndarray, SbpOperator, SbpOperator, OptimizerConfig],
                     SbpOperator]


def run(config: SolverConfig, grid: BlockGrid,
        u0: Callable[[np.ndarray], np.ndarray] = None,
        optimizer: Optimizer = optimize_block_operator,
        sample: bool = True,
        solution=exact_solution) -> RunResult:
    """Solve the periodic advection problem from ``t = 0`` to ``config.T``.

    In adaptive mode the operators of all blocks are re-optimized from the
    current solution at every instant ``j * dtau`` (including ``t = 0``),
    keeping the state and the norm unchanged across each swap. Errors are
    recorded at those instants in both modes if ``sample`` is set;
    otherwise a conventional run integrates in one pass and records only the
    initial and final errors.
    """
    if u0 is None:
        def u0(x):
            return solution(x, 0.0)

    base = [make_sbp42(grid.N, grid.dx, grid.block_origin(k))
            for k in range(grid.K)]
    state = MultiBlockState(0.0, u0(grid.coords))
    adaptive = config.mode == ADAPTIVE
    if adaptive or sample:
        times = reoptimization_times(config.T, config.retau(grid))
    else:
        times = np.array([0.0, config.T]) if config.T > 0 else np.zeros(1)
    if adaptive:
        target = [make_blocknorm_target(grid.N, grid.dx, grid.block_origin(k))
                  for k in range(grid.K)]

    stats = StepStats()
    ops = base
    errors = np.empty(times.size)
    errors[0] = l2_error(state, ops, grid, solution)
    h = None
    count = 0
    for j in range(times.size - 1):
        if adaptive:
            new_ops = [optimizer(u, b, tg, config.optimizer)
                       for u, b, tg in zip(state.blocks, base, target)]
            for k, (old, new) in enumerate(zip(ops, new_ops)):
                if not check_transmission(old.P, new.P):
                    raise TransmissionError(
                        f"norm changed on block {k} at t={state.t:.6e}")
            ops = new_ops
            count += 1
        state = dp45_integrate(state, ops, times[j + 1], config.abs_tol,
                               config.rel_tol, config.theta, h0=h,
                               stats=stats)
        h = stats.last_step
        errors[j + 1] = l2_error(state, ops, grid, solution)
    log.debug("mode=%s K=%d N=%d: %d steps, %d rejected, %d evaluations",
              config.mode, grid.K, grid.N, stats.accepted, stats.rejected,
              stats.evaluations)
    return RunResult(state, list(ops), times, errors, stats, count)


def write_error_series(path, times: np.ndarray, errors: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "l2_error"])
        for t, e in zip(times, errors):
            writer.writerow([f"{t:.16e}", f"{e:.16e}"])

# }}}

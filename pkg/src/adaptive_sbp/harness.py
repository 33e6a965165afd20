"""
Convergence and time-error studies, a self-check suite and the CLI.

Examples::

    adaptive-sbp --study convergence --mode adaptive --K 4 --N 20,40,80,160
    adaptive-sbp --study time-error --K 4 --N 80 --out errors.csv
    adaptive-sbp --study validate
"""

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .advection import (ADAPTIVE, CONVENTIONAL, MultiBlockState, SolverConfig,
                        check_transmission, dopri5, energy_rate_identity,
                        rhs, run, write_error_series)
from .grid import BlockGrid
from .operators import (assemble_Q, boundary_matrix, extract_w,
                        make_blocknorm_target, make_sbp42, sbp42_coefficients,
                        validate_sbp)
from .stencil_opt import (OptimizerConfig, build_stage, design_matrix,
                          lexicographic_lsq, optimize_block_operator)

log = logging.getLogger(__name__)

DEFAULT_N_LIST = (20, 40, 80, 160)


@dataclass(frozen=True)
class ConvergenceRecord:
    K: int
    N: int
    error: float
    rate: Optional[float] = None

    @property
    def dx(self) -> float:
        return 1.0 / (self.K * self.N)


def observed_rates(n_list: Sequence[int], errors: Sequence[float]
                   ) -> List[Optional[float]]:
    """``log(e_prev / e) / log(N / N_prev)``; ``None`` for the first entry."""
    rates: List[Optional[float]] = [None]
    for (n0, e0), (n1, e1) in zip(zip(n_list, errors),
                                  zip(n_list[1:], errors[1:])):
        if e0 > 0 and e1 > 0:
            rates.append(math.log(e0 / e1) / math.log(n1 / n0))
        else:
            rates.append(float("nan"))
    return rates


def _final_error(args) -> float:
    config, K, N = args
    try:
        return run(config, BlockGrid(K, N), sample=False).final_error
    except Exception as exc:
        raise RuntimeError(f"run failed for N={N}: {exc}") from exc


def convergence_study(mode: str, K: int, n_list: Sequence[int],
                      config: Optional[SolverConfig] = None,
                      workers: int = 1) -> List[ConvergenceRecord]:
    """Final-time errors and observed rates over a sequence of grids."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError(f"N list must be strictly increasing: {n_list}")
    config = replace(config or SolverConfig(), mode=mode)
    jobs = [(config, K, n) for n in n_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_final_error, jobs))
    else:
        errors = [_final_error(job) for job in jobs]
    rates = observed_rates(n_list, errors)
    return [ConvergenceRecord(K, n, e, r)
            for n, e, r in zip(n_list, errors, rates)]


def time_error_study(mode: str, K: int, N: int,
                     config: Optional[SolverConfig] = None,
                     out=None) -> Tuple[np.ndarray, np.ndarray]:
    """Errors at every re-optimization instant ``j * dtau``.

    Both modes sample at the same instants, so the two series line up.
    """
    config = replace(config or SolverConfig(), mode=mode)
    result = run(config, BlockGrid(K, N), sample=True)
    if out is not None:
        write_error_series(out, result.times, result.errors)
    return result.times, result.errors


def write_convergence_csv(f, records: Sequence[ConvergenceRecord]) -> None:
    writer = csv.writer(f)
    writer.writerow(["K", "N", "dx", "error", "rate"])
    for r in records:
        rate = "" if r.rate is None else f"{r.rate:.16e}"
        writer.writerow([r.K, r.N, f"{r.dx:.16e}", f"{r.error:.16e}", rate])


# {{{ self-checks

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _check(name: str, fn: Callable[[], Tuple[bool, str]]) -> Check:
    try:
        passed, detail = fn()
    except Exception as exc:  # noqa: BLE001
        return Check(name, False, f"raised {type(exc).__name__}: {exc}")
    return Check(name, bool(passed), detail)


def validate(seed: int = 0) -> List[Check]:
    """Quick operator, energy and optimizer property checks."""
    rng = np.random.default_rng(seed)
    n, dx = 40, 1.0 / 40
    sbp42 = make_sbp42(n, dx)
    target = make_blocknorm_target(n, dx)

    def sbp_identity():
        res = [validate_sbp(sbp42).sbp_identity_residual,
               validate_sbp(target).sbp_identity_residual]
        b = boundary_matrix(n)
        for _ in range(100):
            q = assemble_Q(rng.standard_normal(14), n)
            res.append(float(np.abs(q + q.T - b).max()))
        return max(res) <= 1e-14, \
            f"SBP42 residual {res[0]:.1e}, max residual {max(res):.1e}"

    def exactness():
        r42 = validate_sbp(sbp42)
        rt = validate_sbp(target)
        ok = (r42.boundary_degree() >= 2 and r42.interior_degree() >= 4
              and rt.boundary_degree() >= 3 and r42.norm_spd and rt.norm_spd)
        return ok, (f"SBP42 boundary/interior degree {r42.boundary_degree()}/"
                    f"{r42.interior_degree()}, target boundary degree "
                    f"{rt.boundary_degree()}")

    def round_trip():
        ok = all(np.array_equal(assemble_Q(extract_w(op), n), op.Q)
                 for op in (sbp42, target))
        return ok, "assemble_Q(extract_w(op)) == op.Q"

    def energy_identity():
        worst = 0.0
        for K in (1, 3, 4):
            for theta in (0.0, 1.0, 2.0):
                for _ in range(4):
                    ops = [optimize_block_operator(
                        rng.standard_normal(13), make_sbp42(12, 1 / 12),
                        make_blocknorm_target(12, 1 / 12))
                        for _ in range(K)]
                    state = MultiBlockState(0.0, rng.standard_normal((K, 13)))
                    lhs, rhs_ = energy_rate_identity(state, ops, theta)
                    worst = max(worst, abs(lhs - rhs_))
        return worst <= 1e-11, f"max |lhs - rhs| = {worst:.1e}"

    def conservation():
        ops = [make_sbp42(n, dx)] * 3
        state = MultiBlockState(0.0, rng.standard_normal((3, n + 1)))
        tend = rhs(state, ops, 1.0)
        total = sum(float(op.P.diag @ t) for op, t in zip(ops, tend))
        return abs(total) <= 1e-12, f"sum 1^T P rhs = {total:.1e}"

    def oracle_recovery():
        x = sbp42.x
        op = optimize_block_operator(x**2, sbp42, target)
        dev = float(np.abs(op.Q - sbp42.Q).max())
        return dev <= 1e-8, f"max |Q - Q_42| = {dev:.1e}"

    def rank_deficiency():
        m, x = 40, np.linspace(0.0, 1.0, 41)
        ranks = []
        for _ in range(20):
            c = rng.standard_normal(4)
            u = (c[0] * np.sin(2 * np.pi * x + c[1])
                 + c[2] * np.cos(4 * np.pi * x + c[3]))
            s = np.linalg.svd(design_matrix(u), compute_uv=False)
            ranks.append(int(np.sum(s > 1e-8 * s[0])))
        return max(ranks) < 14, f"max numerical rank {max(ranks)} (N={m})"

    def stage_optimality():
        x = sbp42.x
        u = np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x)
        stage = build_stage(u, target.derivative(u), sbp42.P)
        w = lexicographic_lsq([stage])
        best = stage.residual(w)
        others = [stage.residual(sbp42_coefficients())]
        others += [stage.residual(rng.standard_normal(14)) for _ in range(100)]
        return best <= min(others) + 1e-10, \
            f"optimal {best:.2e} vs best other {min(others):.2e}"

    def transmission():
        op = optimize_block_operator(rng.standard_normal(n + 1), sbp42, target)
        ok = check_transmission(sbp42.P, op.P) and not check_transmission(
            sbp42.P, target.P)
        return ok, "P preserved by the optimizer"

    def integrator():
        y = dopri5(lambda t, y: -y, 0.0, np.array([1.0]), 1.0)
        err = abs(float(y[0]) - math.exp(-1.0))
        return err <= 1e-9, f"|y(1) - 1/e| = {err:.1e}"

    checks = [
        ("sbp identity", sbp_identity),
        ("operator exactness", exactness),
        ("pattern round trip", round_trip),
        ("energy identity", energy_identity),
        ("conservation", conservation),
        ("oracle recovery", oracle_recovery),
        ("rank deficiency", rank_deficiency),
        ("stage-1 optimality", stage_optimality),
        ("transmission", transmission),
        ("dopri5 scalar test", integrator),
    ]
    return [_check(name, fn) for name, fn in checks]

# }}}


# {{{ CLI

def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adaptive-sbp",
        description="Stencil-adaptive SBP-SAT experiments for periodic "
                    "linear advection.")
    p.add_argument("--study", required=True,
                   choices=("convergence", "time-error", "validate"))
    p.add_argument("--mode", default=ADAPTIVE,
                   choices=(CONVENTIONAL, ADAPTIVE))
    p.add_argument("--K", type=int, default=4, help="number of blocks")
    p.add_argument("--N", type=_int_list, default=None,
                   help="intervals per block, comma separated")
    p.add_argument("--T", type=float, default=1.0, help="final time")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--retau-factor", type=float, default=0.5,
                   help="c in dtau = c / (K (N + 1))")
    p.add_argument("--abs-tol", type=float, default=1e-10)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--rank-tol", type=float, default=1e-10)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel runs in a convergence study")
    p.add_argument("--out", default=None,
                   help="output path (default: standard output)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else
                        logging.WARNING, format="%(levelname)s: %(message)s")

    if args.study == "validate":
        checks = validate()
        f, close = _open_out(args.out)
        try:
            f.write(f"backend: {kernels.BACKEND}\n")
            for c in checks:
                f.write(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: "
                        f"{c.detail}\n")
        finally:
            if close:
                f.close()
        failed = [c.name for c in checks if not c.passed]
        if failed:
            print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
            return 1
        return 0

    try:
        config = SolverConfig(
            T=args.T, theta=args.theta, abs_tol=args.abs_tol,
            rel_tol=args.rel_tol, retau_factor=args.retau_factor,
            mode=args.mode, optimizer=OptimizerConfig(rank_tol=args.rank_tol))
        if args.K < 1:
            raise ValueError(f"--K must be at least 1, got {args.K}")
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.study == "convergence":
            n_list = args.N or list(DEFAULT_N_LIST)
            records = convergence_study(args.mode, args.K, n_list, config,
                                        workers=args.workers)
            f, close = _open_out(args.out)
            try:
                write_convergence_csv(f, records)
            finally:
                if close:
                    f.close()
        else:
            n_list = args.N or [80]
            if len(n_list) != 1:
                parser.print_usage(sys.stderr)
                print(f"{parser.prog}: error: time-error takes a single N",
                      file=sys.stderr)
                return 2
            times, errors = time_error_study(args.mode, args.K, n_list[0],
                                             config, out=args.out)
            if args.out is None:
                writer = csv.writer(sys.stdout)
                writer.writerow(["t", "l2_error"])
                for t, e in zip(times, errors):
                    writer.writerow([f"{t:.16e}", f"{e:.16e}"])
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0

# }}}


if __name__ == "__main__":
    sys.exit(main())

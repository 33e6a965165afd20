"""Semidiscretization, energy accounting, time integration and runs."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_sbp.advection import (ADAPTIVE, CONVENTIONAL, IntegrationError,
                                    MultiBlockState, SolverConfig, StepStats,
                                    check_transmission, dopri5,
                                    dp45_integrate, energy,
                                    energy_rate_identity, exact_solution,
                                    l2_error, reoptimization_times, rhs, run,
                                    write_error_series)
from adaptive_sbp.grid import BlockGrid
from adaptive_sbp.operators import (NormMatrix, make_adaptive,
                                    make_blocknorm_target, make_sbp42,
                                    sbp42_coefficients)
from adaptive_sbp.stencil_opt import optimize_block_operator


def random_ops(rng, K, n):
    """Mix of SBP(4,2) and optimized operators sharing the SBP(4,2) norm."""
    base = make_sbp42(n, 1.0 / n)
    target = make_blocknorm_target(n, 1.0 / n)
    ops = []
    for k in range(K):
        if k % 2:
            ops.append(base)
        else:
            ops.append(optimize_block_operator(rng.standard_normal(n + 1),
                                               base, target))
    return ops


def dense_semidiscretization(ops, theta):
    """Global matrix L with u_t = L u, assembled entry by entry."""
    K = len(ops)
    n = ops[0].n
    m = n + 1
    L = np.zeros((K * m, K * m))
    for k, op in enumerate(ops):
        pinv = np.linalg.inv(op.P.dense())
        sl = slice(k * m, (k + 1) * m)
        L[sl, sl] -= pinv @ op.Q
        prev = ((k - 1) % K) * m + n
        nxt = ((k + 1) % K) * m
        e0 = pinv[:, 0]
        eN = pinv[:, n]
        L[sl, k * m] -= 0.5 * (1 + theta) * e0
        L[sl, prev] += 0.5 * (1 + theta) * e0
        L[sl, k * m + n] += 0.5 * (1 - theta) * eN
        L[sl, nxt] -= 0.5 * (1 - theta) * eN
    return L


class TestRhs:
    def test_constant_state(self):
        ops = [make_sbp42(16, 1 / 16)] * 3
        state = MultiBlockState(0.0, np.full((3, 17), 2.5))
        assert np.abs(rhs(state, ops)).max() <= 1e-13

    def test_single_block_wraps(self):
        op = make_sbp42(16, 1 / 16)
        u = np.zeros((1, 17))
        u[0, -1] = 1.0
        # only the periodic SAT couples u_N into row 0
        t = rhs(MultiBlockState(0.0, u), [op], theta=1.0)
        assert t[0, 0] == pytest.approx(1.0 / op.P.diag[0])

    @pytest.mark.parametrize("theta", [0.0, 1.0, 2.0])
    def test_matches_dense(self, rng, theta):
        ops = random_ops(rng, 3, 12)
        u = rng.standard_normal((3, 13))
        L = dense_semidiscretization(ops, theta)
        np.testing.assert_allclose(rhs(MultiBlockState(0, u), ops, theta).ravel(),
                                   L @ u.ravel(), rtol=1e-12, atol=1e-11)

    def test_block_norm_path_matches_dense(self, rng):
        ops = [make_blocknorm_target(12, 1 / 12)] * 2
        u = rng.standard_normal((2, 13))
        L = dense_semidiscretization(ops, 1.0)
        np.testing.assert_allclose(rhs(MultiBlockState(0, u), ops).ravel(),
                                   L @ u.ravel(), rtol=1e-12, atol=1e-11)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rhs(MultiBlockState(0, np.zeros((2, 17))), [make_sbp42(16, 1 / 16)])
        with pytest.raises(ValueError):
            rhs(MultiBlockState(0, np.zeros((1, 18))), [make_sbp42(16, 1 / 16)])

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 999))
    def test_linear(self, a, b, seed):
        rng = np.random.default_rng(seed)
        ops = random_ops(rng, 3, 12)
        u, v = rng.standard_normal((2, 3, 13))
        lhs = rhs(MultiBlockState(0, a * u + b * v), ops)
        rhs_ = a * rhs(MultiBlockState(0, u), ops) + b * rhs(MultiBlockState(0, v), ops)
        np.testing.assert_allclose(lhs, rhs_, atol=1e-13 * (1 + abs(a) + abs(b)) * 1e2)


class TestEnergy:
    def test_zero(self):
        assert energy(MultiBlockState(0, np.zeros((2, 17))),
                      [make_sbp42(16, 1 / 16)] * 2) == 0.0

    def test_constant_integrates_length(self):
        grid = BlockGrid(4, 20)
        ops = [make_sbp42(20, grid.dx)] * 4
        assert energy(MultiBlockState(0, np.ones((4, 21))), ops) == \
            pytest.approx(1.0, abs=1e-14)

    def test_matches_dense(self, rng):
        ops = [make_blocknorm_target(12, 0.1), make_sbp42(12, 0.1)]
        u = rng.standard_normal((2, 13))
        dense = sum(ui @ op.P.dense() @ ui for ui, op in zip(u, ops))
        assert energy(MultiBlockState(0, u), ops) == pytest.approx(dense, rel=1e-13)

    @pytest.mark.parametrize("K", [1, 3])
    @pytest.mark.parametrize("theta", [0.0, 1.0])
    def test_rate_identity_dense_oracle(self, rng, K, theta):
        n = 12
        ops = random_ops(rng, K, n)
        u = rng.standard_normal((K, n + 1))
        lhs, rhs_ = energy_rate_identity(MultiBlockState(0, u), ops, theta)
        L = dense_semidiscretization(ops, theta)
        P = np.zeros((K * (n + 1),) * 2)
        for k, op in enumerate(ops):
            sl = slice(k * (n + 1), (k + 1) * (n + 1))
            P[sl, sl] = op.P.dense()
        y = u.ravel()
        assert lhs == pytest.approx(2 * y @ P @ L @ y, abs=1e-12)
        jumps = [u[k, 0] - u[k - 1, n] for k in range(K)]
        assert rhs_ == pytest.approx(-theta * sum(j * j for j in jumps), abs=1e-14)
        assert abs(lhs - rhs_) <= 1e-12 * (1 + abs(rhs_))

    def test_theta_zero_conserves(self, rng):
        lhs, rhs_ = energy_rate_identity(
            MultiBlockState(0, rng.standard_normal((3, 13))),
            random_ops(rng, 3, 12), theta=0.0)
        assert abs(lhs) <= 1e-12 and rhs_ == 0.0

    def test_constant_state(self):
        lhs, rhs_ = energy_rate_identity(MultiBlockState(0, np.ones((3, 17))),
                                         [make_sbp42(16, 1 / 16)] * 3)
        assert abs(lhs) <= 1e-13 and rhs_ == 0.0

    def test_conservation(self, rng):
        ops = [make_sbp42(16, 1 / 16)] * 3
        tend = rhs(MultiBlockState(0, rng.standard_normal((3, 17))), ops)
        assert abs(sum(op.P.diag @ t for op, t in zip(ops, tend))) <= 1e-12


class TestTransmission:
    def test_identical(self):
        p = make_sbp42(16, 1 / 16).P
        assert check_transmission(p, p)

    def test_one_entry_differs(self):
        p = make_sbp42(16, 1 / 16).P
        d = p.diag.copy()
        d[5] *= 1.5
        assert not check_transmission(p, NormMatrix.diagonal(d))

    def test_adaptive_keeps_norm(self, rng):
        base = make_sbp42(16, 1 / 16)
        new = optimize_block_operator(rng.standard_normal(17), base,
                                      make_blocknorm_target(16, 1 / 16))
        assert check_transmission(base.P, new.P)


class TestDopri5:
    def test_exponential_decay(self):
        y = dopri5(lambda t, y: -y, 0.0, np.array([1.0]), 1.0, 1e-10, 1e-10)
        assert abs(y[0] - math.exp(-1)) <= 1e-9

    def test_oscillator_lands_on_t_end(self):
        stats = StepStats()
        f = lambda t, y: np.array([y[1], -y[0]])  # noqa: E731
        y = dopri5(f, 0.0, np.array([0.0, 1.0]), 2.0, 1e-11, 1e-11, stats=stats)
        np.testing.assert_allclose(y, [math.sin(2), math.cos(2)], atol=1e-9)
        assert stats.accepted > 0 and stats.last_step > 0

    def test_constant_state_unchanged(self):
        ops = [make_sbp42(16, 1 / 16)] * 2
        s = dp45_integrate(MultiBlockState(0.0, np.full((2, 17), 0.3)), ops, 0.7)
        assert s.t == 0.7
        assert np.abs(s.blocks - 0.3).max() <= 1e-13

    def test_zero_length(self):
        y0 = np.array([1.0, 2.0])
        np.testing.assert_array_equal(dopri5(lambda t, y: y, 1.0, y0, 1.0), y0)

    def test_backwards(self):
        with pytest.raises(ValueError):
            dopri5(lambda t, y: y, 1.0, np.ones(1), 0.5)

    def test_non_finite(self):
        with pytest.raises(IntegrationError):
            dopri5(lambda t, y: np.array([np.nan]), 0.0, np.ones(1), 1.0)

    def test_step_underflow(self):
        # finite-time blow-up at t = 1
        with pytest.raises(IntegrationError):
            dopri5(lambda t, y: y**2, 0.0, np.ones(1), 2.0, 1e-8, 1e-8)


class TestExactSolution:
    def test_origin(self):
        assert exact_solution(0.0, 0.0) == 0.5

    def test_translation(self):
        x = np.linspace(0, 1, 7)
        np.testing.assert_allclose(exact_solution(x + 0.3, 0.3),
                                   exact_solution(x, 0.0), atol=1e-14)

    def test_error_of_exact_sample(self):
        grid = BlockGrid(3, 16)
        ops = [make_sbp42(16, grid.dx)] * 3
        state = MultiBlockState(0.4, exact_solution(grid.coords, 0.4))
        assert l2_error(state, ops, grid) == 0.0

    def test_error_of_zero_state(self):
        # integral of u0^2 over one period is 1/2 + 0 + 1/8
        grid = BlockGrid(4, 80)
        ops = [make_sbp42(80, grid.dx)] * 4
        err = l2_error(MultiBlockState(0.0, np.zeros((4, 81))), ops, grid)
        assert err == pytest.approx(math.sqrt(5 / 8), rel=1e-8)


class TestRun:
    def test_reoptimization_count(self):
        times = reoptimization_times(1.0, 1 / 648)
        assert times.size == 649
        assert times[-1] == 1.0
        assert times[1] == 1 / 648

    def test_clipped_last_segment(self):
        times = reoptimization_times(0.25, 0.1)
        np.testing.assert_allclose(times, [0, 0.1, 0.2, 0.25])

    def test_retau(self):
        assert SolverConfig().retau(BlockGrid(4, 80)) == 1 / 648

    def test_zero_time(self):
        r = run(SolverConfig(T=0.0), BlockGrid(2, 16))
        assert r.times.tolist() == [0.0]
        assert r.final_error == 0.0

    def test_adaptive_with_identity_optimizer(self):
        grid = BlockGrid(2, 16)

        def identity(u, base, target, config):
            return make_adaptive(sbp42_coefficients(), base)

        conv = run(SolverConfig(mode=CONVENTIONAL, T=0.2), grid)
        adap = run(SolverConfig(mode=ADAPTIVE, T=0.2), grid, optimizer=identity)
        np.testing.assert_array_equal(conv.times, adap.times)
        assert abs(conv.final_error - adap.final_error) <= 1e-9
        assert adap.reoptimizations == conv.times.size - 1

    def test_conventional_one_pass(self):
        grid = BlockGrid(2, 16)
        one = run(SolverConfig(mode=CONVENTIONAL, T=0.2), grid, sample=False)
        many = run(SolverConfig(mode=CONVENTIONAL, T=0.2), grid, sample=True)
        assert one.times.size == 2
        assert abs(one.final_error - many.final_error) <= 1e-9

    def test_energy_unchanged_across_swap(self):
        grid = BlockGrid(2, 16)
        r = run(SolverConfig(T=0.05), grid)
        base = [make_sbp42(16, grid.dx, grid.block_origin(k)) for k in range(2)]
        assert energy(r.state, r.ops) == energy(r.state, base)

    def test_adaptive_beats_conventional(self):
        grid = BlockGrid(4, 40)
        conv = run(SolverConfig(mode=CONVENTIONAL, T=0.25), grid)
        adap = run(SolverConfig(mode=ADAPTIVE, T=0.25), grid)
        assert adap.final_error < conv.final_error

    def test_transmission_violation_aborts(self):
        from adaptive_sbp.advection import TransmissionError

        def breaks_norm(u, base, target, config):
            return type(base)(base.n, base.dx, NormMatrix.diagonal(2 * base.P.diag),
                              base.Q, "Adaptive")

        with pytest.raises(TransmissionError):
            run(SolverConfig(T=0.1), BlockGrid(1, 16), optimizer=breaks_norm)

    def test_error_series_csv(self, tmp_path):
        path = tmp_path / "e.csv"
        write_error_series(path, np.array([0.0, 0.5]), np.array([0.0, 1e-3]))
        lines = path.read_text().splitlines()
        assert lines == ["t,l2_error",
                         "0.0000000000000000e+00,0.0000000000000000e+00",
                         "5.0000000000000000e-01,1.0000000000000000e-03"]


class TestConfig:
    def test_negative_theta(self):
        with pytest.raises(ValueError):
            SolverConfig(theta=-0.1)

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            SolverConfig(abs_tol=0.0)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            SolverConfig(mode="magic")

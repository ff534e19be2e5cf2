"""Unit tests for the numeric kernels against independent brute-force oracles."""

import itertools

import numpy as np
import pytest

from povmrand import kernels


def brute_force_lp(A, b, c, tol=1e-9):
    """Enumerate all basic solutions of max c.x, Ax = b, x >= 0.

    Exponential, so only for tiny instances; serves as the ground truth the
    simplex is checked against.
    """
    m, n = A.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        sub = A[:, cols]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x_b = np.linalg.solve(sub, b)
        if np.min(x_b) < -tol:
            continue
        val = float(c[list(cols)] @ x_b)
        if best is None or val > best:
            best = val
    return best


class TestSimplex:
    def test_small_known_problem(self):
        # max 3x + 2y s.t. x + y = 4, x - y = 0 -> x = y = 2, value 10
        A = np.array([[1.0, 1.0], [1.0, -1.0]])
        b = np.array([4.0, 0.0])
        c = np.array([3.0, 2.0])
        status, obj, x, y, resid, _ = kernels.lp_solve_dense(A, b, c)
        assert status == kernels.LP_OPTIMAL
        assert obj == pytest.approx(10.0, abs=1e-12)
        assert np.allclose(x, [2.0, 2.0], atol=1e-12)

    def test_duals_satisfy_strong_duality(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            m, n = 3, 8
            A = rng.random((m, n))
            x_feas = rng.random(n)
            b = A @ x_feas
            c = rng.normal(size=n)
            status, obj, x, y, resid, _ = kernels.lp_solve_dense(A, b, c)
            assert status == kernels.LP_OPTIMAL
            assert b @ y == pytest.approx(obj, abs=1e-8)
            # dual feasibility: reduced costs nonpositive for a max problem
            assert np.max(c - y @ A) < 1e-8

    def test_matches_brute_force(self):
        rng = np.random.default_rng(22)
        for trial in range(40):
            m = int(rng.integers(2, 4))
            n = int(rng.integers(m + 1, 7))
            A = rng.normal(size=(m, n))
            x_feas = rng.random(n)
            b = A @ x_feas
            c = rng.normal(size=n)
            expected = brute_force_lp(A, b, c)
            status, obj, x, y, resid, _ = kernels.lp_solve_dense(A, b, c)
            if expected is None:
                continue
            assert status == kernels.LP_OPTIMAL
            assert obj == pytest.approx(expected, abs=1e-8)
            assert np.max(np.abs(A @ x - b)) < 1e-9
            assert np.min(x) > -1e-12

    def test_infeasible_detected(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0])  # inconsistent duplicate rows
        c = np.array([1.0, 0.0])
        status, obj, x, y, resid, _ = kernels.lp_solve_dense(A, b, c)
        assert status == kernels.LP_INFEASIBLE
        assert resid > 0.1

    def test_redundant_rows_handled(self):
        # consistent duplicate constraints leave a redundant artificial basic
        A = np.array([[1.0, 2.0, 0.5], [1.0, 2.0, 0.5], [0.0, 1.0, 1.0]])
        b = A @ np.array([0.2, 0.3, 0.5])
        c = np.array([1.0, -1.0, 0.3])
        status, obj, x, y, resid, _ = kernels.lp_solve_dense(A, b, c)
        assert status == kernels.LP_OPTIMAL
        assert np.max(np.abs(A @ x - b)) < 1e-10

    def test_determinism(self):
        rng = np.random.default_rng(23)
        A = rng.random((4, 30))
        b = A @ rng.random(30)
        c = rng.normal(size=30)
        first = kernels.lp_solve_dense(A, b, c)
        for _ in range(3):
            again = kernels.lp_solve_dense(A, b, c)
            assert again[1] == first[1]  # bit-identical objective
            assert np.array_equal(again[2], first[2])

    def test_degenerate_rhs_zeros(self):
        # b entries can be exactly zero (outcomes that never fire)
        A = np.array([[0.5, 0.2, 0.0], [0.5, 0.3, 0.4], [0.0, 0.5, 0.6]])
        b = A @ np.array([0.0, 0.0, 1.0])
        assert b[0] == 0.0
        c = np.array([1.0, 2.0, 0.1])
        status, obj, x, y, resid, _ = kernels.lp_solve_dense(A, b, c)
        assert status == kernels.LP_OPTIMAL
        assert np.max(np.abs(A @ x - b)) < 1e-10


class TestCoincidenceMatcher:
    def run(self, h, d, out, n_out, max_dev):
        return kernels.match_coincidences(
            np.asarray(h, np.int64),
            np.asarray(d, np.int64),
            np.asarray(out, np.int64),
            n_out,
            np.int64(max_dev),
        )

    def test_simple_pairs(self):
        counts = self.run([100, 200, 300], [98, 203, 305], [0, 1, 2], 3, 6)
        assert counts.tolist() == [1, 1, 1]

    def test_boundary_closed(self):
        assert self.run([100], [106], [0], 2, 6).tolist() == [1, 0]
        assert self.run([100], [107], [0], 2, 6).tolist() == [0, 0]
        assert self.run([100], [94], [1], 2, 6).tolist() == [0, 1]
        assert self.run([100], [93], [1], 2, 6).tolist() == [0, 0]

    def test_nearest_wins_tie_earlier(self):
        # two candidates at distance 3; the earlier one is consumed
        counts = self.run([100], [97, 103], [0, 1], 2, 6)
        assert counts.tolist() == [1, 0]

    def test_event_consumed_once(self):
        # two heralds competing for one event: only one match happens
        counts = self.run([100, 104], [102], [0], 1, 6)
        assert counts.tolist() == [1]

    def test_leftover_event_matches_later_herald(self):
        # first herald takes the nearest; the earlier event stays available
        counts = self.run([100, 103], [99, 100], [0, 1], 2, 6)
        assert counts.tolist() == [1, 1]

    def test_exact_planted_count(self):
        rng = np.random.default_rng(24)
        k = 5000
        heralds = np.cumsum(rng.integers(100, 2000, size=k)) + 1000
        offsets = rng.integers(-6, 7, size=k)
        outcomes = rng.integers(0, 3, size=k)
        order = np.argsort(heralds + offsets, kind="stable")
        counts = self.run(
            heralds, (heralds + offsets)[order], outcomes[order], 3, 6
        )
        assert counts.sum() == k
        for j in range(3):
            assert counts[j] == np.sum(outcomes == j)

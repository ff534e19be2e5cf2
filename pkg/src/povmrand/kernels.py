"""Hot numeric kernels: dense simplex, coincidence matching, MLE iteration.

Each kernel is written once as a plain numpy function and compiled with
numba when available.  Set ``POVMRAND_NO_NUMBA=1`` to force the pure-numpy
path (identical source, undecorated); ``benchmarks/bench_kernels.py`` times
the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

_NO_NUMBA = os.environ.get("POVMRAND_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _NO_NUMBA:
        raise ImportError("numba disabled by POVMRAND_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):  # noqa: ANN002 - mirrors numba.njit signature
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def _jit(func):
    return njit(cache=True)(func) if NUMBA_ENABLED else func


def kernel_backend() -> str:
    """Return the active kernel backend name ("numba" or "numpy")."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# Dense two-phase simplex.
#
# Solves   max c.x   s.t.  A x = b,  x >= 0   with A (m x n) dense, b >= 0.
# The tableau keeps the artificial columns so the dual vector can be read
# off the objective row at optimality.  Pivoting is Dantzig's rule with a
# lowest-index tie-break, switching to Bland's rule after many iterations so
# degenerate problems cannot cycle; everything is deterministic (same input
# -> same output, bit for bit).
# ---------------------------------------------------------------------------

LP_OPTIMAL = 0
LP_INFEASIBLE = 1
LP_UNBOUNDED = 2
LP_ITER_LIMIT = 3

_PIVOT_TOL = 1e-11
_FEAS_TOL = 1e-9


def _simplex_iterate_impl(T, basis, n_enter, tol, bland_after, max_iter):
    m = T.shape[0] - 1
    last = T.shape[1] - 1
    it = 0
    while it < max_iter:
        # entering column
        jp = -1
        if it < bland_after:
            best = -tol
            for j in range(n_enter):
                v = T[m, j]
                if v < best:
                    best = v
                    jp = j
        else:
            for j in range(n_enter):
                if T[m, j] < -tol:
                    jp = j
                    break
        if jp < 0:
            return it, 0  # optimal
        # leaving row: minimum ratio; ties prefer the larger pivot element
        # (numerical stability), then the smaller basis index (determinism)
        ip = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, jp]
            if a > tol:
                r = T[i, last] / a
                if r < best_ratio:
                    best_ratio = r
                    ip = i
                elif r == best_ratio and ip >= 0:
                    if a > T[ip, jp] or (a == T[ip, jp] and basis[i] < basis[ip]):
                        ip = i
        if ip < 0:
            return it, 2  # unbounded
        # pivot
        inv = 1.0 / T[ip, jp]
        for j in range(last + 1):
            T[ip, j] *= inv
        for i in range(m + 1):
            if i != ip:
                f = T[i, jp]
                if f != 0.0:
                    for j in range(last + 1):
                        T[i, j] -= f * T[ip, j]
                    T[i, jp] = 0.0
        T[ip, jp] = 1.0
        basis[ip] = jp
        it += 1
    return it, 3


_simplex_iterate = _jit(_simplex_iterate_impl)


def _lp_solve_dense_impl(A, b, c):
    """Two-phase simplex; returns (status, objective, x, duals, residual, iters)."""
    m, n = A.shape
    last = n + m
    T = np.zeros((m + 1, last + 1))
    basis = np.empty(m, np.int64)
    for i in range(m):
        if b[i] >= 0.0:
            for j in range(n):
                T[i, j] = A[i, j]
            T[i, last] = b[i]
        else:
            for j in range(n):
                T[i, j] = -A[i, j]
            T[i, last] = -b[i]
        T[i, n + i] = 1.0
        basis[i] = n + i
    # phase-1 objective: maximize -(sum of artificials)
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += T[i, j]
        T[m, j] = -s
    s = 0.0
    for i in range(m):
        s += T[i, last]
    T[m, last] = -s

    bland_after = 50 * (m + n)
    max_iter = 200 * (m + n) + 10_000
    it1, st1 = _simplex_iterate(T, basis, n, _PIVOT_TOL, bland_after, max_iter)
    x = np.zeros(n)
    y = np.zeros(m)
    residual = -T[m, last]
    if residual < 0.0:
        residual = 0.0
    if st1 == 3:
        return 3, 0.0, x, y, residual, it1
    if residual > _FEAS_TOL:
        return 1, 0.0, x, y, residual, it1

    # drive leftover artificial basics out where possible; redundant rows
    # keep a zero-level artificial and never pivot again
    for i in range(m):
        if basis[i] >= n:
            jp = -1
            for j in range(n):
                if abs(T[i, j]) > _PIVOT_TOL:
                    jp = j
                    break
            if jp >= 0:
                inv = 1.0 / T[i, jp]
                for j in range(last + 1):
                    T[i, j] *= inv
                for k in range(m + 1):
                    if k != i:
                        f = T[k, jp]
                        if f != 0.0:
                            for j in range(last + 1):
                                T[k, j] -= f * T[i, j]
                            T[k, jp] = 0.0
                T[i, jp] = 1.0
                basis[i] = jp

    # phase-2 objective row
    for j in range(last + 1):
        T[m, j] = 0.0
    for j in range(n):
        T[m, j] = -c[j]
    for i in range(m):
        k = basis[i]
        if k < n:
            f = T[m, k]
            if f != 0.0:
                for j in range(last + 1):
                    T[m, j] -= f * T[i, j]
                T[m, k] = 0.0

    it2, st2 = _simplex_iterate(T, basis, n, _PIVOT_TOL, bland_after, max_iter)
    if st2 != 0:
        return st2, 0.0, x, y, residual, it1 + it2
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, last]
    for i in range(m):
        y[i] = T[m, n + i]
    return 0, T[m, last], x, y, residual, it1 + it2


lp_solve_dense = _jit(_lp_solve_dense_impl)


# ---------------------------------------------------------------------------
# Coincidence matching.
#
# Heralds and detector events arrive time-sorted (integer ticks).  Each
# herald takes the nearest unconsumed detector event within +-max_dev ticks
# (closed interval); equidistant candidates resolve to the earlier event.
# Each detector event is consumed at most once.
# ---------------------------------------------------------------------------


def _match_coincidences_impl(h_ticks, d_ticks, d_out, n_out, max_dev):
    counts = np.zeros(n_out, np.int64)
    nd = d_ticks.shape[0]
    consumed = np.zeros(nd, np.uint8)
    base = 0
    for hi in range(h_ticks.shape[0]):
        h = h_ticks[hi]
        lo = h - max_dev
        hi_tick = h + max_dev
        while base < nd and (d_ticks[base] < lo or consumed[base] == 1):
            base += 1
        j = base
        best = -1
        best_dev = max_dev + 1
        while j < nd and d_ticks[j] <= hi_tick:
            if consumed[j] == 0:
                dev = d_ticks[j] - h
                if dev < 0:
                    dev = -dev
                if dev < best_dev:
                    best_dev = dev
                    best = j
            j += 1
        if best >= 0:
            consumed[best] = 1
            counts[d_out[best]] += 1
    return counts


match_coincidences = _jit(_match_coincidences_impl)


# ---------------------------------------------------------------------------
# Diluted R.rho.R maximum-likelihood iteration for one qubit.
#
# rho <- normalize(G rho G),  G = (1-eps) I + eps R,
# R = sum_k (N_k / (N_tot tr[F_k rho])) F_k   from the measured counts.
# Stops when the log-likelihood gain (the relative gain of the likelihood
# itself) drops to tol; boundary optima are approached tangentially and
# typically exhaust max_iter instead, which callers treat as a diagnostic,
# not an error.  The loop tracks the worst per-step gain (monotonicity
# witness) and the worst physicality of any iterate (minimum eigenvalue,
# trace deviation).
# ---------------------------------------------------------------------------


def _mle_rrr_impl(F, counts, eps, tol, max_iter, track):
    n_out = F.shape[0]
    total = 0.0
    for k in range(n_out):
        total += counts[k]
    rho = np.zeros((2, 2), np.complex128)
    rho[0, 0] = 0.5
    rho[1, 1] = 0.5
    hist = np.empty(max_iter + 1 if track else 1, np.float64)

    ll = 0.0
    for k in range(n_out):
        if counts[k] > 0.0:
            p = (
                F[k, 0, 0] * rho[0, 0]
                + F[k, 0, 1] * rho[1, 0]
                + F[k, 1, 0] * rho[0, 1]
                + F[k, 1, 1] * rho[1, 1]
            ).real
            if p < 1e-300:
                p = 1e-300
            ll += counts[k] * np.log(p)
    if track:
        hist[0] = ll

    min_gain = 0.0
    min_eig = 0.5
    max_trdev = 0.0
    converged = False
    it = 0
    G = np.empty((2, 2), np.complex128)
    first = True
    while it < max_iter:
        r00 = 0.0 + 0.0j
        r01 = 0.0 + 0.0j
        r10 = 0.0 + 0.0j
        r11 = 0.0 + 0.0j
        for k in range(n_out):
            ck = counts[k]
            if ck > 0.0:
                p = (
                    F[k, 0, 0] * rho[0, 0]
                    + F[k, 0, 1] * rho[1, 0]
                    + F[k, 1, 0] * rho[0, 1]
                    + F[k, 1, 1] * rho[1, 1]
                ).real
                if p < 1e-300:
                    p = 1e-300
                w = ck / (total * p)
                r00 += w * F[k, 0, 0]
                r01 += w * F[k, 0, 1]
                r10 += w * F[k, 1, 0]
                r11 += w * F[k, 1, 1]
        G[0, 0] = (1.0 - eps) + eps * r00
        G[0, 1] = eps * r01
        G[1, 0] = eps * r10
        G[1, 1] = (1.0 - eps) + eps * r11
        new = G @ rho @ G
        # hermitize to kill floating-point drift
        h01 = 0.5 * (new[0, 1] + np.conj(new[1, 0]))
        new[0, 1] = h01
        new[1, 0] = np.conj(h01)
        new[0, 0] = new[0, 0].real + 0.0j
        new[1, 1] = new[1, 1].real + 0.0j
        tr = (new[0, 0] + new[1, 1]).real
        rho = new / tr

        t = (rho[0, 0] + rho[1, 1]).real
        det = (rho[0, 0] * rho[1, 1] - rho[0, 1] * rho[1, 0]).real
        disc = t * t - 4.0 * det
        if disc < 0.0:
            disc = 0.0
        eig_lo = 0.5 * (t - np.sqrt(disc))
        if eig_lo < min_eig:
            min_eig = eig_lo
        trdev = abs(t - 1.0)
        if trdev > max_trdev:
            max_trdev = trdev

        ll_new = 0.0
        for k in range(n_out):
            if counts[k] > 0.0:
                p = (
                    F[k, 0, 0] * rho[0, 0]
                    + F[k, 0, 1] * rho[1, 0]
                    + F[k, 1, 0] * rho[0, 1]
                    + F[k, 1, 1] * rho[1, 1]
                ).real
                if p < 1e-300:
                    p = 1e-300
                ll_new += counts[k] * np.log(p)
        gain = ll_new - ll
        if first or gain < min_gain:
            min_gain = gain
            first = False
        it += 1
        if track:
            hist[it] = ll_new
        ll = ll_new
        # negative computed gains are rounding noise (the true gain is >= 0),
        # so only a nonnegative gain at or below tol counts as converged
        if 0.0 <= gain <= tol:
            converged = True
            break
    return rho, ll, it, converged, min_gain, min_eig, max_trdev, hist[: it + 1]


mle_rrr = _jit(_mle_rrr_impl)

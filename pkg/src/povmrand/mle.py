"""Constrained maximum-likelihood state reconstruction from counts.

The fit maximizes sum_k N_k ln Tr[F_k rho] over physical density matrices
with the diluted fixed-point iteration

    rho <- normalize(G rho G),   G = (1 - eps) I + eps R,
    R = sum_k (N_k / (N_tot Tr[F_k rho])) F_k,

which keeps every iterate Hermitian, unit-trace, and PSD by construction
and never decreases the likelihood.  At exact interior frequencies R = I,
so the true state is a fixed point.

Planar POVMs carry no information about r_y; the iteration starts from the
maximally mixed state and all its operators are real for such geometries,
so the fit keeps r_y = 0 (the maximum-entropy tie-break) and the result is
flagged accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .analytic import (
    METHOD_ORACLE,
    CertificateReport,
    guessing_probability_analytic,
    min_entropy,
    trusted_min_entropy,
)
from .geometry import BlochVector, OutcomeStats, PovmGeometry, QubitState, born_probabilities

DEFAULT_DILUTION = 0.5
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000

# Monotonicity slack: likelihood sums carry O(|ll| eps) rounding per step.
_MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class MleConfig:
    max_iter: int = DEFAULT_MAX_ITER
    # stop once the log-likelihood gains <= tol per step, i.e. the relative
    # gain of the likelihood itself; boundary fits usually hit max_iter first
    tol: float = DEFAULT_TOL
    dilution: float = DEFAULT_DILUTION
    track_history: bool = False


@dataclass(frozen=True)
class MleResult:
    rho_hat: QubitState
    log_likelihood: float  # sum_k N_k ln p_k at the fit
    iterations: int
    converged: bool
    gradient_norm: float  # Frobenius norm of the undiluted fixed-point step
    monotone: bool  # likelihood never decreased beyond rounding slack
    min_eigenvalue_seen: float  # worst eigenvalue over all iterates
    max_trace_dev_seen: float  # worst |tr - 1| over all iterates
    y_gauge_fixed: bool  # True when the geometry cannot observe r_y
    history: np.ndarray | None = None  # per-iteration log-likelihood (if tracked)


def log_likelihood(counts: OutcomeStats, state: QubitState, povm: PovmGeometry) -> float:
    """sum_k N_k ln Tr[F_k rho] with 0 ln 0 = 0; -inf on impossible outcomes."""
    if counts.counts is None:
        raise ValueError("log_likelihood needs counts, not bare probabilities")
    probs = np.einsum("kij,ji->k", povm.elements(), state.matrix).real
    total = 0.0
    for nk, pk in zip(counts.counts, probs):
        if nk == 0:
            continue
        if pk <= 0.0:
            return float("-inf")
        total += float(nk) * math.log(pk)
    return total


def _frequencies(counts: OutcomeStats) -> np.ndarray:
    if counts.counts is None:
        raise ValueError("MLE reconstruction needs counts")
    total = counts.counts.sum()
    if total <= 0:
        raise ValueError("MLE reconstruction needs at least one recorded event")
    return counts.counts.astype(float) / float(total)


def response_operator(freqs, state_matrix, povm: PovmGeometry) -> np.ndarray:
    """R = sum_k (f_k / Tr[F_k rho]) F_k (terms with f_k = 0 are dropped)."""
    F = povm.elements()
    probs = np.einsum("kij,ji->k", F, state_matrix).real
    R = np.zeros((2, 2), dtype=complex)
    for k in range(povm.n):
        if freqs[k] > 0.0:
            R += (freqs[k] / max(probs[k], 1e-300)) * F[k]
    return R


def fixed_point_step(
    freqs, state_matrix, povm: PovmGeometry, dilution: float = DEFAULT_DILUTION
) -> np.ndarray:
    """One diluted iteration rho -> normalize(G rho G); exposed for testing.

    When freqs equal the Born probabilities of an interior state, R = I and
    the state maps to itself.
    """
    R = response_operator(freqs, state_matrix, povm)
    G = (1.0 - dilution) * np.eye(2, dtype=complex) + dilution * R
    new = G @ np.asarray(state_matrix, dtype=complex) @ G
    new = 0.5 * (new + new.conj().T)
    return new / new.trace().real


def mle_reconstruct(
    counts: OutcomeStats, povm: PovmGeometry, config: MleConfig | None = None
) -> MleResult:
    """Fit a physical state to measured counts by diluted R.rho.R ascent."""
    cfg = config or MleConfig()
    freqs = _frequencies(counts)
    F = np.ascontiguousarray(povm.elements())
    rho, ll, iters, converged, min_gain, min_eig, max_trdev, hist = kernels.mle_rrr(
        F,
        np.ascontiguousarray(counts.counts.astype(float)),
        float(cfg.dilution),
        float(cfg.tol),
        int(cfg.max_iter),
        bool(cfg.track_history),
    )
    # undiluted fixed-point step size at the fit
    R = response_operator(freqs, rho, povm)
    step = R @ rho @ R
    step = step / step.trace()
    grad = float(np.linalg.norm(step - rho))
    monotone = min_gain >= -_MONOTONE_SLACK * (1.0 + abs(ll))
    return MleResult(
        rho_hat=QubitState(rho),
        log_likelihood=float(ll),
        iterations=int(iters),
        converged=bool(converged),
        gradient_norm=grad,
        monotone=bool(monotone),
        min_eigenvalue_seen=float(min_eig),
        max_trace_dev_seen=float(max_trdev),
        y_gauge_fixed=povm.planar,
        history=(hist.copy() if cfg.track_history else None),
    )


def certify_from_counts(
    counts: OutcomeStats,
    povm: PovmGeometry,
    prepared: BlochVector | None = None,
    oracle_grid: int = 720,
    mle_config: MleConfig | None = None,
) -> tuple[CertificateReport, MleResult]:
    """Counts -> MLE fit -> certificate.

    Planar geometries certify with the exact closed form; 3D geometries use
    the LP oracle on the fitted state's Born statistics (the closed form is
    only an upper bound there).  The trusted-scenario entropy comes from the
    measured statistics themselves.  When the prepared state is declared,
    its closed-form entropy is attached for comparison as ``hmin_theory``.
    """
    from .oracle import oracle_pguess_lp  # local import to avoid a cycle

    fit = mle_reconstruct(counts, povm, mle_config)
    r_hat = fit.rho_hat.bloch()
    h_theory = None
    if prepared is not None:
        h_theory = guessing_probability_analytic(prepared, povm).hmin_sdi
    if povm.planar:
        base = guessing_probability_analytic(r_hat, povm)
        p_guess = base.p_guess
        method = base.method
        active = base.active_facets
    else:
        strategy = oracle_pguess_lp(
            born_probabilities(r_hat, povm), povm, grid_size=oracle_grid, refine=True
        )
        p_guess = strategy.p_guess
        method = METHOD_ORACLE
        active = ()
    report = CertificateReport(
        geometry=povm.geometry_id,
        p_guess=p_guess,
        hmin_sdi=min_entropy(p_guess),
        hmin_trusted=trusted_min_entropy(counts),
        method=method,
        active_facets=active,
        state=r_hat,
        stats=counts,
        hmin_theory=h_theory,
    )
    return report, fit

"""LP oracle for the adversarial guessing probability.

The adversary's best ensemble decomposes the observed statistics into pure
states, one aimed at each outcome; restricting the pure directions to a
finite candidate set turns the optimization into a linear program

    max  sum_m v_m max_k Tr[F_k pi_m]
    s.t. sum_m v_m Tr[F_j pi_m] = P_j   for every outcome j,  v >= 0,

whose optimum is a certified *achievable* guessing probability (the N
constraints embed normalization because sum_j F_j = I).  Candidates are a
uniform circle grid (planar) or Fibonacci sphere (3D), augmented with the
outcome directions themselves (so inside-hull targets solve exactly at 2/N)
and the implied state direction (so pure targets stay feasible).  With
``refine=True`` the active directions are polished by reduced-cost ascent
and the LP re-solved, which converges to the exact optimum on polygons.

Solved with the deterministic dense simplex in ``kernels``; no external
solver is involved, so the oracle is independent of the closed-form module
it cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTargetError
from .geometry import (
    BlochVector,
    OutcomeStats,
    PovmGeometry,
    as_bloch,
    hull_membership,
    linear_inversion_state,
)
from .analytic import facet_score, fibonacci_sphere
from . import kernels

DEFAULT_GRID = 720
MIN_GRID = 32
_WEIGHT_CUTOFF = 1e-12
_ASCENT_TOL = 1e-10
_MAX_OUTER = 20


@dataclass(frozen=True)
class StrategyComponent:
    """One pure state in the adversary's ensemble, aimed at one outcome."""

    weight: float
    direction: BlochVector
    outcome: int


@dataclass(frozen=True)
class EveStrategy:
    """Explicit adversarial ensemble realizing the LP optimum."""

    components: tuple[StrategyComponent, ...]
    p_guess: float
    residual: float  # worst statistics mismatch of the returned ensemble
    geometry: str
    grid_size: int
    refined: bool
    lp_iterations: int

    def weight_sum(self) -> float:
        return float(sum(c.weight for c in self.components))

    def realized_probs(self, povm: PovmGeometry) -> np.ndarray:
        p = np.zeros(povm.n)
        for c in self.components:
            p += c.weight * povm.weights * (1.0 + povm.directions @ c.direction.as_array())
        return p

    def recomputed_objective(self, povm: PovmGeometry) -> float:
        total = 0.0
        for c in self.components:
            k = c.outcome
            total += c.weight * povm.weights[k] * (
                1.0 + float(povm.directions[k] @ c.direction.as_array())
            )
        return total


@dataclass(frozen=True)
class StrategyAudit:
    """Re-derivation of a strategy's objective and constraint residuals."""

    objective: float
    objective_mismatch: float
    max_constraint_residual: float
    weight_sum: float
    flags: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.flags


def strategy_audit(
    strategy: EveStrategy, povm: PovmGeometry, target: OutcomeStats
) -> StrategyAudit:
    """Recompute everything from raw components; flag violations above 1e-8."""
    objective = strategy.recomputed_objective(povm)
    realized = strategy.realized_probs(povm)
    resid = float(np.max(np.abs(realized - target.probs)))
    wsum = strategy.weight_sum()
    flags = []
    if abs(wsum - 1.0) > 1e-8:
        flags.append(f"weights sum to {wsum:.12g}")
    if resid > 1e-8:
        flags.append(f"statistics residual {resid:.3e}")
    mismatch = abs(objective - strategy.p_guess)
    if mismatch > 1e-9:
        flags.append(f"objective mismatch {mismatch:.3e}")
    for i, c in enumerate(strategy.components):
        if abs(c.direction.norm - 1.0) > 1e-9:
            flags.append(f"component {i} direction norm {c.direction.norm:.12g}")
            break
    return StrategyAudit(
        objective=objective,
        objective_mismatch=mismatch,
        max_constraint_residual=resid,
        weight_sum=wsum,
        flags=tuple(flags),
    )


def _candidate_directions(povm: PovmGeometry, grid_size: int, r_hint: np.ndarray) -> np.ndarray:
    """Grid candidates plus the outcome vertices and the implied direction."""
    if povm.planar:
        theta = 2.0 * math.pi * np.arange(grid_size) / grid_size
        grid = np.stack([np.sin(theta), np.zeros(grid_size), np.cos(theta)], axis=1)
    else:
        grid = fibonacci_sphere(grid_size)
    extras = [povm.directions]
    norm = np.linalg.norm(r_hint)
    if norm > 1e-12:
        hint = r_hint / norm
        if povm.planar:
            hint = np.array([hint[0], 0.0, hint[2]])
            h = np.linalg.norm(hint)
            hint = hint / h if h > 1e-12 else np.array([0.0, 0.0, 1.0])
        extras.append(hint[None, :])
    return np.concatenate([grid] + extras, axis=0)


def _columns(povm: PovmGeometry, dirs: np.ndarray):
    """Constraint matrix, objective vector, and outcome assignment per candidate."""
    A = povm.weights[:, None] * (1.0 + povm.directions @ dirs.T)  # (N, M)
    assign = np.argmax(A, axis=0)
    c = A[assign, np.arange(A.shape[1])]
    return A, c, assign


def _solve(A: np.ndarray, b: np.ndarray, c: np.ndarray):
    status, obj, x, y, resid, iters = kernels.lp_solve_dense(
        np.ascontiguousarray(A), np.ascontiguousarray(b), np.ascontiguousarray(c)
    )
    if status == kernels.LP_INFEASIBLE:
        raise InfeasibleTargetError(
            f"no pure-state ensemble reproduces the target statistics "
            f"(phase-1 residual {resid:.3e})",
            residual=resid,
        )
    if status != kernels.LP_OPTIMAL:
        raise RuntimeError(f"LP solver returned status {status}")
    return obj, x, y, iters


def _solution_sound(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> bool:
    """Reject numerically corrupted bases (infeasible or negative weights)."""
    if float(np.min(x)) < -1e-9:
        return False
    return float(np.max(np.abs(A @ x - b))) <= 1e-9


def _reduced_cost(t: np.ndarray, povm: PovmGeometry, duals: np.ndarray) -> float:
    col = povm.weights * (1.0 + povm.directions @ t)
    return float(np.max(col) - duals @ col)


def _ascend_direction(t0: np.ndarray, povm: PovmGeometry, duals: np.ndarray, step0: float) -> np.ndarray:
    """Coordinate ascent of the reduced cost over the circle/sphere angles."""
    if povm.planar:
        params = np.array([math.atan2(t0[0], t0[2])])
    else:
        params = np.array(
            [math.acos(min(max(t0[2], -1.0), 1.0)), math.atan2(t0[1], t0[0])]
        )

    def to_vec(p):
        if povm.planar:
            return np.array([math.sin(p[0]), 0.0, math.cos(p[0])])
        s = math.sin(p[0])
        return np.array([s * math.cos(p[1]), s * math.sin(p[1]), math.cos(p[0])])

    best = _reduced_cost(to_vec(params), povm, duals)
    step = step0
    while step > _ASCENT_TOL:
        moved = False
        for axis in range(params.size):
            for sign in (1.0, -1.0):
                trial = params.copy()
                trial[axis] += sign * step
                val = _reduced_cost(to_vec(trial), povm, duals)
                if val > best + 1e-15:
                    params, best = trial, val
                    moved = True
        if not moved:
            step *= 0.5
    return to_vec(params)


def oracle_pguess_lp(
    target: OutcomeStats,
    povm: PovmGeometry,
    grid_size: int = DEFAULT_GRID,
    refine: bool = True,
) -> EveStrategy:
    """Solve the guessing-probability LP for the target statistics.

    Raises InfeasibleTargetError when no quantum state reproduces the target
    (detected from the linear-inversion radius/residual before the LP runs).
    """
    if grid_size < MIN_GRID:
        raise ValueError(f"grid_size must be >= {MIN_GRID}, got {grid_size}")
    if target.n != povm.n:
        raise ValueError(f"target has {target.n} outcomes, geometry has {povm.n}")
    inv = linear_inversion_state(target, povm)
    if inv.r.norm > 1.0 + 1e-6:
        raise InfeasibleTargetError(
            f"target statistics imply |r| = {inv.r.norm:.9g} > 1",
            residual=inv.r.norm - 1.0,
        )
    if inv.residual > 1e-8:
        raise InfeasibleTargetError(
            f"target statistics lie {inv.residual:.3e} outside the physical set",
            residual=inv.residual,
        )

    dirs = _candidate_directions(povm, grid_size, inv.r.as_array())
    b = target.probs.copy()
    A, c, assign = _columns(povm, dirs)
    obj, x, duals, iters = _solve(A, b, c)
    total_iters = iters
    if not _solution_sound(A, b, x):
        raise RuntimeError("LP solution failed the soundness check on the base grid")

    if refine:
        step0 = 2.0 * math.pi / grid_size
        for _ in range(_MAX_OUTER):
            active = np.nonzero(x > _WEIGHT_CUTOFF)[0]
            new_dirs = []
            for idx in active:
                polished = _ascend_direction(dirs[idx], povm, duals, step0)
                if _reduced_cost(polished, povm, duals) <= 1e-11:
                    continue
                # near-duplicate columns make the tableau ill-conditioned
                if np.max(dirs @ polished) >= 1.0 - 1e-14:
                    continue
                new_dirs.append(polished)
            if not new_dirs:
                break
            trial_dirs = np.concatenate([dirs, np.array(new_dirs)], axis=0)
            trial_A, trial_c, trial_assign = _columns(povm, trial_dirs)
            new_obj, new_x, new_duals, iters = _solve(trial_A, b, trial_c)
            total_iters += iters
            # accept a round only if the solution is numerically sound and
            # did not regress; otherwise keep the last good solution
            if not _solution_sound(trial_A, b, new_x) or new_obj < obj - 1e-9:
                break
            dirs, A, c, assign = trial_dirs, trial_A, trial_c, trial_assign
            x, duals = new_x, new_duals
            if new_obj - obj < 1e-12:
                obj = max(obj, new_obj)
                break
            obj = new_obj

    weights = x
    support = np.nonzero(weights > _WEIGHT_CUTOFF)[0]
    components = tuple(
        StrategyComponent(
            weight=float(weights[m]),
            direction=BlochVector.from_array(dirs[m]),
            outcome=int(assign[m]),
        )
        for m in support
    )
    realized = A[:, support] @ weights[support]
    residual = float(np.max(np.abs(realized - b)))
    return EveStrategy(
        components=components,
        p_guess=float(obj),
        residual=residual,
        geometry=povm.geometry_id,
        grid_size=grid_size,
        refined=refine,
        lp_iterations=int(total_iters),
    )


# ---------------------------------------------------------------------------
# Closed-form planar strategy (the geometric construction the LP verifies).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricStrategy:
    """Two-pure-state construction for planar polygons.

    Outside the hull the ensemble is (lam, t1) -> k*, (1-lam, t2) -> k*+1
    with t1, t2 symmetric about the active facet normal; q stays 0, so t3
    (a bookkeeping third direction) is never used.  Inside the hull the
    optimal ensemble is the vertex mixture stored in ``components``.
    """

    s: BlochVector
    lam: float
    q: float
    t1: BlochVector
    t2: BlochVector
    t3: BlochVector
    p_guess: float
    inside: bool
    active_facet: int | None
    components: tuple[StrategyComponent, ...]

    def to_ensemble(self, povm: PovmGeometry) -> EveStrategy:
        realized = np.zeros(povm.n)
        for c in self.components:
            realized += c.weight * povm.weights * (
                1.0 + povm.directions @ c.direction.as_array()
            )
        target = povm.weights * (1.0 + povm.directions @ self.s.as_array())
        return EveStrategy(
            components=self.components,
            p_guess=self.p_guess,
            residual=float(np.max(np.abs(realized - target))),
            geometry=povm.geometry_id,
            grid_size=0,
            refined=False,
            lp_iterations=0,
        )


def _vertex_mixture(r: np.ndarray, povm: PovmGeometry) -> tuple[StrategyComponent, ...]:
    """Weights over the polygon vertices reproducing an inside-hull r.

    Shoot a ray from the center through r to the hull edge it crosses,
    split that edge point between its two vertices, and spread the leftover
    weight uniformly (the uniform vertex mixture has zero Bloch vector).
    """
    n = povm.n
    dirs = povm.directions
    weights = np.full(n, 0.0)
    norm = np.linalg.norm(r)
    if norm > 1e-14:
        loc = hull_membership(BlochVector.from_array(r), povm)
        edge = int(np.argmax(loc.margins))
        j1, j2 = povm.facets[edge].adjacent
        # solve r = b1 a_j1 + b2 a_j2 in the ZX plane
        M = np.array(
            [[dirs[j1, 2], dirs[j2, 2]], [dirs[j1, 0], dirs[j2, 0]]]
        )
        b1, b2 = np.linalg.solve(M, np.array([r[2], r[0]]))
        leftover = 1.0 - b1 - b2
        weights[j1] += b1
        weights[j2] += b2
        weights += leftover / n
    else:
        weights += 1.0 / n
    return tuple(
        StrategyComponent(float(weights[k]), BlochVector.from_array(dirs[k]), k)
        for k in range(n)
        if weights[k] > 1e-15
    )


def parametric_pguess_planar(state, povm: PovmGeometry) -> ParametricStrategy:
    """Appendix-style geometric optimum for planar polygons.

    Inside the hull: p_g = 2/N via the vertex mixture.  Outside: the two
    directions symmetric about the active facet normal with t.u = r.u give
    p_g = (1 + f(r.u, pi/N)) / N; their weights follow from the lambda
    formula lam = (1 - |s|^2) / (2 - 2 s.t1) with s = r and q = 0.
    """
    if not povm.planar:
        raise ValueError("parametric construction applies to planar polygons only")
    r = as_bloch(state).require_physical().zx_projection()
    rv = r.as_array()
    loc = hull_membership(r, povm)
    n = povm.n
    alpha = povm.alpha

    if loc.region != "outside":
        facet = int(np.argmax(loc.margins))
        t_dir = rv / np.linalg.norm(rv) if r.norm > 1e-14 else povm.directions[0]
        t1 = BlochVector.from_array(t_dir)
        s_norm = r.norm
        lam = 1.0 if s_norm >= 1.0 - 1e-12 else (1.0 + s_norm) / 2.0
        return ParametricStrategy(
            s=r,
            lam=lam,
            q=0.0,
            t1=t1,
            t2=t1,
            t3=BlochVector.from_array(-t_dir),
            p_guess=2.0 / n,
            inside=True,
            active_facet=None,
            components=_vertex_mixture(rv, povm),
        )

    k = loc.facet
    u = povm.facets[k].normal
    j1, j2 = povm.facets[k].adjacent
    u_perp = povm.directions[j1] - povm.directions[j2]
    u_perp = u_perp / np.linalg.norm(u_perp)
    x = min(max(float(rv @ u), -1.0), 1.0)
    span = math.sqrt(1.0 - x * x)
    t1v = x * u + span * u_perp
    t2v = x * u - span * u_perp
    s_norm = r.norm
    if s_norm >= 1.0 - 1e-12:
        lam = 1.0 if float(rv @ t1v) >= float(rv @ t2v) else 0.0
    else:
        lam = (1.0 - s_norm * s_norm) / (2.0 - 2.0 * float(rv @ t1v))
    p_guess = (1.0 + float(facet_score(x, alpha))) / n
    components = []
    if lam > 1e-15:
        components.append(StrategyComponent(lam, BlochVector.from_array(t1v), int(j1)))
    if 1.0 - lam > 1e-15:
        components.append(
            StrategyComponent(1.0 - lam, BlochVector.from_array(t2v), int(j2))
        )
    return ParametricStrategy(
        s=r,
        lam=lam,
        q=0.0,
        t1=BlochVector.from_array(t1v),
        t2=BlochVector.from_array(t2v),
        t3=BlochVector.from_array(povm.directions[(k + 2) % n]),
        p_guess=p_guess,
        inside=False,
        active_facet=int(k),
        components=tuple(components),
    )

"""Self-verification: cross-checks the closed forms against the LP oracle.

Runs the invariant suite (completeness, facet consistency, planar
analytic-vs-oracle equivalence, 3D conservativeness, trusted-gap and range
bounds) and reports the worst residual of each check.  All sampling flows
from one seed; work may be partitioned over threads, but results are merged
in submission order so the log is byte-identical for any thread count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import (
    ball_grid,
    disk_grid,
    guessing_probability_analytic,
    hmin_extrema,
    scan_entropy_grid,
    trusted_min_entropy,
)
from .errors import InfeasibleTargetError, InvalidGeometryError
from .geometry import (
    BlochVector,
    PovmGeometry,
    born_probabilities,
    geometry_from_dict,
    hull_membership,
    make_platonic_povm,
    make_polygon_povm,
)
from .oracle import oracle_pguess_lp, strategy_audit

PLANAR_TOL = 1e-3  # |analytic - LP| on polygons
SOUNDNESS_TOL = 1e-9  # oracle may exceed the 3D analytic bound by at most this
GAP_TOL = 1.0 + 1e-9  # trusted-vs-SDI gap
RANGE_TOL = 1e-9
COMPLETENESS_TOL = 1e-12
FACET_TOL = 1e-9


@dataclass(frozen=True)
class VerifyCheck:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str

    def format_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (
            f"[{tag}] {self.name}: worst={self.worst:.6e} "
            f"tolerance={self.tolerance:.6e} {self.detail}"
        )


def _builtin_suite() -> list[PovmGeometry]:
    povms = [make_polygon_povm(n) for n in (3, 4, 5, 6)]
    povms.append(make_polygon_povm(3, orientation=math.pi))
    povms += [make_platonic_povm(k) for k in ("tetrahedron", "octahedron", "cube",
                                              "icosahedron", "dodecahedron")]
    return povms


def _check_completeness(povms, extra_raw: dict | None) -> VerifyCheck:
    worst = 0.0
    detail = f"{len(povms)} geometries"
    for p in povms:
        worst = max(worst, float(np.max(np.abs(p.weights @ p.directions))))
        worst = max(worst, abs(float(p.weights.sum()) - 1.0))
    if extra_raw is not None:
        dirs = np.asarray(extra_raw["directions"], dtype=float)
        w = np.asarray(extra_raw["weights"], dtype=float)
        worst = max(worst, float(np.max(np.abs(w @ dirs))), abs(float(w.sum()) - 1.0))
        detail += " + custom file"
    return VerifyCheck("completeness", worst <= COMPLETENESS_TOL, worst,
                       COMPLETENESS_TOL, detail)


def _check_facets(povms) -> VerifyCheck:
    worst = 0.0
    for p in povms:
        cos_a = math.cos(p.alpha)
        for f in p.facets:
            dots = p.directions[list(f.adjacent)] @ f.normal
            worst = max(worst, float(np.max(np.abs(dots - cos_a))))
    return VerifyCheck("facet-consistency", worst <= FACET_TOL, worst, FACET_TOL,
                       f"{len(povms)} geometries")


def _map_chunked(fn, items, threads: int):
    """Order-preserving map, optionally fanned out over a thread pool."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_planar_equivalence(
    povms, rng: np.random.Generator, samples: int, grid: int, threads: int
) -> VerifyCheck:
    planar = [p for p in povms if p.planar]
    jobs = []
    for p in planar:
        radii = np.sqrt(rng.random(samples))
        angles = 2.0 * math.pi * rng.random(samples)
        for r, a in zip(radii, angles):
            jobs.append((p, BlochVector.pure_zx(float(a)).as_array() * r))

    def run(job):
        povm, rv = job
        state = BlochVector.from_array(rv)
        analytic = guessing_probability_analytic(state, povm).p_guess
        strat = oracle_pguess_lp(
            born_probabilities(state, povm), povm, grid_size=grid, refine=True
        )
        audit = strategy_audit(strat, povm, born_probabilities(state, povm))
        penalty = 0.0 if audit.ok else 1.0
        return abs(analytic - strat.p_guess) + penalty

    residuals = _map_chunked(run, jobs, threads)
    worst = max(residuals) if residuals else 0.0
    return VerifyCheck(
        "planar-equivalence", worst <= PLANAR_TOL, worst, PLANAR_TOL,
        f"{len(jobs)} states, grid {grid}",
    )


def _check_3d_soundness(
    povms, rng: np.random.Generator, samples: int, grid: int, threads: int
) -> VerifyCheck:
    solids = [p for p in povms if not p.planar]
    worst = -math.inf
    worst_inside = 0.0
    total = 0
    for p in solids:
        pts = ball_grid(max(samples // 4, 16), 5)
        idx = rng.choice(pts.shape[0], size=min(samples, pts.shape[0]), replace=False)
        pts = pts[idx]
        total += pts.shape[0]

        def run(rv, povm=p):
            state = BlochVector.from_array(rv)
            analytic = guessing_probability_analytic(state, povm).p_guess
            strat = oracle_pguess_lp(
                born_probabilities(state, povm), povm, grid_size=grid, refine=False
            )
            inside = hull_membership(state, povm).region != "outside"
            gap_in = abs(strat.p_guess - 2.0 / povm.n) if inside else 0.0
            return strat.p_guess - analytic, gap_in

        results = _map_chunked(run, list(pts), threads)
        for over, gap_in in results:
            worst = max(worst, over)
            worst_inside = max(worst_inside, gap_in)
    worst = max(worst, worst_inside)
    return VerifyCheck(
        "3d-soundness", worst <= SOUNDNESS_TOL, worst, SOUNDNESS_TOL,
        f"{total} ball states over {len(solids)} solids, grid {grid}",
    )


def _check_gap_and_range(povms) -> list[VerifyCheck]:
    worst_gap = -math.inf
    worst_range = 0.0
    n_pts = 0
    for p in povms:
        table = scan_entropy_grid(p, 40, "disk" if p.planar else "sphere")
        hs = table.column("hmin_sdi").astype(float)
        ht = table.column("hmin_trusted").astype(float)
        worst_gap = max(worst_gap, float(np.max(ht - hs)))
        n_pts += hs.size
        if p.planar:
            m, big = hmin_extrema(p)
            worst_range = max(
                worst_range, float(np.max(hs - big)), float(np.max(m - hs))
            )
    return [
        VerifyCheck("trusted-gap", worst_gap <= GAP_TOL, worst_gap, GAP_TOL,
                    f"{n_pts} grid states"),
        VerifyCheck("entropy-range", worst_range <= RANGE_TOL, worst_range,
                    RANGE_TOL, "planar grids vs (m_N, M_N)"),
    ]


def run_verification(
    seed: int = 0,
    threads: int = 1,
    geometry_path=None,
    planar_samples: int = 40,
    ball_samples: int = 60,
    grid: int = 360,
) -> tuple[list[VerifyCheck], str]:
    """Run every check; returns (checks, log text).  Deterministic in seed."""
    rng = np.random.default_rng(seed)
    povms = _builtin_suite()
    extra_raw = None
    checks: list[VerifyCheck] = []
    if geometry_path is not None:
        with open(geometry_path, "r", encoding="utf-8") as fh:
            extra_raw = json.load(fh)
        try:
            povms.append(geometry_from_dict(extra_raw))
        except (InvalidGeometryError, ValueError) as exc:
            checks.append(
                VerifyCheck("completeness", False, math.inf, COMPLETENESS_TOL,
                            f"custom geometry rejected: {exc}")
            )
    if not checks:  # custom geometry (if any) loaded fine
        checks.append(_check_completeness(povms, extra_raw))
    checks.append(_check_facets(povms))
    checks.append(
        _check_planar_equivalence(povms, rng, planar_samples, grid, threads)
    )
    solids = [p for p in povms if not p.planar]
    reduced = [p for p in solids if p.kind in ("tetrahedron", "octahedron")]
    checks.append(
        _check_3d_soundness(reduced or solids, rng, ball_samples, grid, threads)
    )
    checks.extend(_check_gap_and_range(povms))

    lines = [c.format_line() for c in checks]
    failed = [c for c in checks if not c.passed]
    lines.append(
        f"verification {'FAILED' if failed else 'passed'}: "
        f"{len(checks) - len(failed)}/{len(checks)} checks clean"
    )
    return checks, "\n".join(lines) + "\n"

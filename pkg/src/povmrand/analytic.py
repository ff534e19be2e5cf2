"""Closed-form guessing-probability bounds and min-entropy certificates.

For a symmetric POVM with facet normals u_k and facet angle alpha, the
adversarial guessing probability of a state with Bloch vector r is

    p_g = 2/N                                   r inside the hull,
    p_g = (1 + sum_active f(r.u_k, alpha)) / N  r outside,

with f(x, alpha) = x cos(alpha) + sqrt(1 - x^2) sin(alpha) evaluated over
the strictly active facets (r.u_k > cos(alpha)).  Approaching the boundary
from outside, f -> 1 and the two branches agree, so p_g is continuous.

On planar polygons at most one facet is ever active and the value is exact.
On Platonic solids several facets can be active at once near edges and the
sum can overshoot the true optimum, so those certificates are conservative
upper bounds on p_g; the LP oracle gives exact 3D values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedGeometryError
from .geometry import (
    EPS_TIE,
    BlochVector,
    OutcomeStats,
    PovmGeometry,
    as_bloch,
    born_probabilities,
    hull_membership,
    make_platonic_povm,
    make_polygon_povm,
)

METHOD_ANALYTIC_EXACT = "analytic-exact"
METHOD_ANALYTIC_UPPER = "analytic-upper-bound"
METHOD_ORACLE = "oracle"

GAP_SLACK = 1e-9  # trusted-vs-SDI gap may exceed 1 bit by at most this


@dataclass(frozen=True)
class CertificateReport:
    """Randomness certificate for one state or one set of outcome statistics."""

    geometry: str
    p_guess: float
    hmin_sdi: float
    hmin_trusted: float
    method: str
    active_facets: tuple[int, ...]
    state: BlochVector | None = None
    stats: OutcomeStats | None = None
    hmin_theory: float | None = None  # closed form for a declared preparation

    def __post_init__(self):
        if not 0.0 < self.p_guess <= 1.0 + 1e-12:
            raise ValueError(f"p_guess = {self.p_guess!r} outside (0, 1]")
        if abs(self.hmin_sdi + math.log2(self.p_guess)) > 1e-12:
            raise ValueError("hmin_sdi does not equal -log2(p_guess)")
        if self.hmin_trusted - self.hmin_sdi > 1.0 + GAP_SLACK:
            raise ValueError(
                f"trusted-vs-SDI gap {self.hmin_trusted - self.hmin_sdi:.12g} exceeds 1 bit"
            )

    def to_dict(self) -> dict:
        out = {
            "geometry": self.geometry,
            "p_guess": self.p_guess,
            "hmin_sdi": self.hmin_sdi,
            "hmin_trusted": self.hmin_trusted,
            "method": self.method,
            "active_facets": list(self.active_facets),
        }
        if self.state is not None:
            out["state"] = [self.state.x, self.state.y, self.state.z]
        if self.stats is not None:
            out["probs"] = [float(p) for p in self.stats.probs]
            if self.stats.counts is not None:
                out["counts"] = [int(c) for c in self.stats.counts]
        if self.hmin_theory is not None:
            out["hmin_theory"] = self.hmin_theory
        return out


def min_entropy(p_guess: float) -> float:
    """Certified bits per outcome: -log2 of the guessing probability."""
    if not 0.0 < p_guess <= 1.0 + 1e-9:
        raise ValueError(f"p_guess must lie in (0, 1], got {p_guess!r}")
    return -math.log2(min(p_guess, 1.0))


def trusted_min_entropy(stats: OutcomeStats) -> float:
    """Classical min-entropy -log2 max_k P_k (both devices trusted)."""
    return -math.log2(float(np.max(stats.probs)))


def facet_score(x, alpha: float):
    """f(x, alpha) = x cos(alpha) + sqrt(1-x^2) sin(alpha), x clamped to [-1, 1]."""
    x = np.clip(x, -1.0, 1.0)
    return x * math.cos(alpha) + np.sqrt(1.0 - x * x) * math.sin(alpha)


def _require_uniform_alpha(povm: PovmGeometry) -> float:
    if not povm.facets:
        raise UnsupportedGeometryError(
            f"geometry {povm.geometry_id!r} carries no facet data"
        )
    return povm.alpha


def guessing_probability_analytic(state, povm: PovmGeometry) -> CertificateReport:
    """Closed-form certificate for a known state under a symmetric POVM."""
    r = as_bloch(state).require_physical()
    alpha = _require_uniform_alpha(povm)
    loc = hull_membership(r, povm)
    cos_a = math.cos(alpha)
    active = np.nonzero(loc.margins > EPS_TIE)[0]
    if active.size == 0:
        # inside or on the boundary: the vertex strategy is optimal and any
        # tied facet contributes f(cos(alpha)) = 1, so p_g = 2/N either way
        p_guess = 2.0 / povm.n
    else:
        x = loc.margins[active] + cos_a
        p_guess = (1.0 + float(np.sum(facet_score(x, alpha)))) / povm.n
    method = METHOD_ANALYTIC_EXACT if povm.planar else METHOD_ANALYTIC_UPPER
    stats = born_probabilities(r, povm)
    return CertificateReport(
        geometry=povm.geometry_id,
        p_guess=p_guess,
        hmin_sdi=min_entropy(p_guess),
        hmin_trusted=trusted_min_entropy(stats),
        method=method,
        active_facets=tuple(int(k) for k in active),
        state=r,
    )


def hmin_extrema(povm: PovmGeometry) -> tuple[float, float]:
    """(m_N, M_N): the lowest and highest certifiable min-entropy.

    m_N = log2(N) - 1 holds inside the hull; M_N = log2(N / (1 + cos alpha))
    is attained at the facet normals.
    """
    alpha = _require_uniform_alpha(povm)
    m = math.log2(povm.n) - 1.0
    big = math.log2(povm.n / (1.0 + math.cos(alpha)))
    return m, big


# ---------------------------------------------------------------------------
# Vectorized grid evaluation (scans stay numpy-level; the per-point API above
# is for single certificates).
# ---------------------------------------------------------------------------


def _pg_batch(points: np.ndarray, povm: PovmGeometry) -> tuple[np.ndarray, np.ndarray]:
    """(p_g, region code) for an (M, 3) array of Bloch vectors.

    Region codes: 0 inside, 1 boundary, 2 outside.
    """
    alpha = _require_uniform_alpha(povm)
    cos_a, sin_a = math.cos(alpha), math.sin(alpha)
    pts = points.copy()
    if povm.planar:
        pts[:, 1] = 0.0
    dots = pts @ povm.facet_normals().T  # (M, K)
    margins = dots - cos_a
    active = margins > EPS_TIE
    x = np.clip(dots, -1.0, 1.0)
    f = x * cos_a + np.sqrt(1.0 - x * x) * sin_a
    contrib = np.where(active, f, 0.0).sum(axis=1)
    any_active = active.any(axis=1)
    pg = np.where(any_active, (1.0 + contrib) / povm.n, 2.0 / povm.n)
    region = np.where(
        any_active, 2, np.where((np.abs(margins) <= EPS_TIE).any(axis=1), 1, 0)
    )
    return pg, region


def _trusted_batch(points: np.ndarray, povm: PovmGeometry) -> np.ndarray:
    p = povm.weights[None, :] * (1.0 + points @ povm.directions.T)
    return -np.log2(np.max(p, axis=1))


_REGION_NAMES = ("inside", "boundary", "outside")

SCAN_COLUMNS = ("rz", "rx", "ry", "pg", "hmin_sdi", "hmin_trusted", "region", "method")


@dataclass(frozen=True)
class TabularData:
    """Small column-labelled table; rows are plain tuples."""

    columns: tuple[str, ...]
    rows: list

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.asarray([row[idx] for row in self.rows])


def disk_grid(resolution: int) -> np.ndarray:
    """Polar grid over the closed unit disk in the ZX plane, (M, 3) array.

    ``resolution`` radii x ``resolution`` angles; the origin is emitted once.
    The angle set {2 pi k / resolution} contains pi for even resolutions, so
    vertex-antipode extrema sit exactly on the grid.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    radii = np.linspace(0.0, 1.0, resolution)[1:]
    angles = 2.0 * math.pi * np.arange(resolution) / resolution
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    rz = (rr * np.cos(aa)).ravel()
    rx = (rr * np.sin(aa)).ravel()
    pts = np.zeros((rz.size + 1, 3))
    pts[1:, 0] = rx
    pts[1:, 2] = rz
    return pts


def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly-uniform unit vectors (deterministic Fibonacci lattice)."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)


def ball_grid(n_directions: int, n_radii: int) -> np.ndarray:
    """Fibonacci sphere x radial grid over the closed unit ball, origin once."""
    dirs = fibonacci_sphere(n_directions)
    radii = np.linspace(0.0, 1.0, n_radii)[1:]
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    return np.concatenate([np.zeros((1, 3)), pts], axis=0)


def scan_entropy_grid(povm: PovmGeometry, resolution: int, domain: str = "disk") -> TabularData:
    """Tabulate p_g / H_min over the unit disk or ball.

    ``resolution`` counts points per axis: the disk uses resolution radii x
    resolution angles; the ball uses resolution^2 Fibonacci directions x
    resolution radii.
    """
    if domain == "disk":
        pts = disk_grid(resolution)
    elif domain == "sphere":
        pts = ball_grid(resolution * resolution, resolution)
    else:
        raise ValueError(f"domain must be 'disk' or 'sphere', got {domain!r}")
    pg, region = _pg_batch(pts, povm)
    hs = -np.log2(pg)
    ht = _trusted_batch(pts, povm)
    method = METHOD_ANALYTIC_EXACT if povm.planar else METHOD_ANALYTIC_UPPER
    rows = [
        (
            float(pts[i, 2]),
            float(pts[i, 0]),
            float(pts[i, 1]),
            float(pg[i]),
            float(hs[i]),
            float(ht[i]),
            _REGION_NAMES[int(region[i])],
            method,
        )
        for i in range(pts.shape[0])
    ]
    return TabularData(SCAN_COLUMNS, rows)


SCALING_COLUMNS = ("kind", "N", "hmin_min", "hmin_max", "trusted_max", "gap", "gap_asymptote")


def scaling_table(n_max: int) -> TabularData:
    """Extrema m_N, M_N for planar N = 3..n_max plus the five Platonic solids.

    The gap_asymptote column stores pi^2 / (2 N^2 ln 2) on the planar rows
    (empty for solids, which are not part of the large-N family).
    """
    if n_max < 3:
        raise ValueError("n_max must be >= 3")
    rows = []
    for n in range(3, n_max + 1):
        m, big = hmin_extrema(make_polygon_povm(n))
        rows.append(
            (
                "polygon",
                n,
                m,
                big,
                math.log2(n),
                big - m,
                math.pi**2 / (2.0 * n * n * math.log(2.0)),
            )
        )
    for kind in ("tetrahedron", "octahedron", "cube", "icosahedron", "dodecahedron"):
        povm = make_platonic_povm(kind)
        m, big = hmin_extrema(povm)
        rows.append((kind, povm.n, m, big, math.log2(povm.n), big - m, ""))
    return TabularData(SCALING_COLUMNS, rows)

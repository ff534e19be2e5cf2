"""Qubit states, symmetric POVM construction, and Bloch-sphere facet geometry.

Conventions used throughout the package:

* Bloch components are ordered ``(x, y, z)`` with ``rho = (I + r.sigma)/2``.
* Planar geometries live in the ZX plane (``y = 0``).  In-plane angles are
  measured from +z toward +x, so a polygon built with orientation 0 has its
  first outcome direction along +z (the horizontal-polarization state).
* Polarization dictionary: ``|H> = +z``, ``|V> = -z``, ``|+> = +x``,
  ``|-> = -x``, ``|L> = +y``, ``|R> = -y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import InvalidGeometryError, UnphysicalStateError

EPS_PHYS = 1e-9  # slack on |r| <= 1 before a state counts as unphysical
EPS_TIE = 1e-9  # facet-membership tie tolerance

GEOMETRY_SCHEMA_VERSION = 1

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

PLATONIC_SOLIDS = ("tetrahedron", "octahedron", "cube", "icosahedron", "dodecahedron")


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BlochVector:
    """Real 3-vector on or inside the Bloch sphere."""

    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        v = np.asarray(v, dtype=float)
        if v.shape != (3,):
            raise ValueError(f"Bloch vector needs 3 components, got shape {v.shape}")
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def zero(cls) -> "BlochVector":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def pure_zx(cls, theta: float) -> "BlochVector":
        """Unit vector in the ZX plane at Bloch angle ``theta`` from +z."""
        return cls(math.sin(theta), 0.0, math.cos(theta))

    @classmethod
    def pure(cls, theta: float, phi: float = 0.0) -> "BlochVector":
        """Unit vector at spherical angles (theta from +z, phi from +x)."""
        s = math.sin(theta)
        return cls(s * math.cos(phi), s * math.sin(phi), math.cos(theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def require_physical(self) -> "BlochVector":
        if self.norm > 1.0 + EPS_PHYS:
            raise UnphysicalStateError(f"|r| = {self.norm:.12g} exceeds 1")
        return self

    def zx_projection(self) -> "BlochVector":
        return BlochVector(self.x, 0.0, self.z)


def as_bloch(value) -> BlochVector:
    """Coerce a BlochVector, QubitState, or length-3 sequence to BlochVector."""
    if isinstance(value, BlochVector):
        return value
    if isinstance(value, QubitState):
        return value.bloch()
    return BlochVector.from_array(value)


# Named polarization states used by the CLI and the table/figure drivers.
NAMED_STATES = {
    "H": BlochVector(0.0, 0.0, 1.0),
    "V": BlochVector(0.0, 0.0, -1.0),
    "+": BlochVector(1.0, 0.0, 0.0),
    "-": BlochVector(-1.0, 0.0, 0.0),
    "L": BlochVector(0.0, 1.0, 0.0),
    "R": BlochVector(0.0, -1.0, 0.0),
    "int": BlochVector.from_array(np.ones(3) / math.sqrt(3.0)),
    "mixed": BlochVector.zero(),
}


@dataclass(frozen=True)
class QubitState:
    """2x2 density operator; validated Hermitian, unit-trace, PSD."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"density matrix must be 2x2, got {m.shape}")
        if abs(m[1, 0] - np.conj(m[0, 1])) > 1e-12:
            raise UnphysicalStateError("density matrix is not Hermitian within 1e-12")
        if abs(m.trace() - 1.0) > 1e-12:
            raise UnphysicalStateError("density matrix trace differs from 1 by > 1e-12")
        t = m.trace().real
        det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
        eig_lo = 0.5 * (t - math.sqrt(max(t * t - 4.0 * det, 0.0)))
        if eig_lo < -1e-9:
            raise UnphysicalStateError(f"density matrix has eigenvalue {eig_lo:.3e} < -1e-9")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_bloch(cls, r) -> "QubitState":
        r = as_bloch(r).require_physical()
        m = 0.5 * (np.eye(2, dtype=complex) + r.x * PAULI[0] + r.y * PAULI[1] + r.z * PAULI[2])
        return cls(m)

    @classmethod
    def maximally_mixed(cls) -> "QubitState":
        return cls(0.5 * np.eye(2, dtype=complex))

    def bloch(self) -> BlochVector:
        m = self.matrix
        return BlochVector(
            float(2.0 * m[0, 1].real),
            float(-2.0 * m[0, 1].imag),
            float((m[0, 0] - m[1, 1]).real),
        )

    def eigenvalues(self) -> tuple[float, float]:
        m = self.matrix
        t = m.trace().real
        det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
        d = math.sqrt(max(t * t - 4.0 * det, 0.0))
        return (0.5 * (t - d), 0.5 * (t + d))


@dataclass(frozen=True)
class Facet:
    """One facet of the outcome-direction convex hull."""

    normal: np.ndarray  # outward unit normal
    adjacent: tuple[int, ...]  # indices of the vertices on this facet

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(self.normal))
        object.__setattr__(self, "adjacent", tuple(int(i) for i in self.adjacent))


@dataclass(frozen=True)
class PovmGeometry:
    """Symmetric qubit POVM: outcome directions, weights, and hull facets.

    Outcome k is the effect ``F_k = w_k (I + a_k.sigma)``; completeness
    requires ``sum w_k = 1`` and ``sum w_k a_k = 0``.
    """

    kind: str
    directions: np.ndarray  # (N, 3) unit vectors a_k
    weights: np.ndarray  # (N,)
    facets: tuple[Facet, ...]
    alpha: float  # angle between a facet normal and its adjacent vertices
    planar: bool
    orientation: float = 0.0  # in-plane rotation (radians), planar only

    def __post_init__(self):
        dirs = np.array(self.directions, dtype=float)
        w = np.array(self.weights, dtype=float)
        if dirs.ndim != 2 or dirs.shape[1] != 3 or dirs.shape[0] < 2:
            raise InvalidGeometryError(f"directions must be (N>=2, 3), got {dirs.shape}")
        if w.shape != (dirs.shape[0],):
            raise InvalidGeometryError("weights length must match directions")
        if np.any(w <= 0):
            raise InvalidGeometryError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidGeometryError(f"weights sum to {w.sum():.15g}, not 1 (completeness)")
        bias = w @ dirs
        if np.max(np.abs(bias)) > 1e-12:
            raise InvalidGeometryError(
                f"sum_k w_k a_k = {bias.tolist()} is not 0 (completeness)"
            )
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms > 1.0 + 1e-12):
            raise InvalidGeometryError("outcome directions must satisfy |a_k| <= 1 (PSD)")
        for f in self.facets:
            if abs(np.linalg.norm(f.normal) - 1.0) > 1e-9:
                raise InvalidGeometryError("facet normals must be unit vectors")
        object.__setattr__(self, "directions", _frozen(dirs))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "facets", tuple(self.facets))

    @property
    def n(self) -> int:
        return self.directions.shape[0]

    @property
    def geometry_id(self) -> str:
        if self.kind == "polygon":
            base = f"polygon{self.n}"
            if abs(self.orientation) > 1e-12:
                base += f"@{math.degrees(self.orientation):g}deg"
            return base
        return self.kind

    def facet_normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.facets])

    def elements(self) -> np.ndarray:
        """POVM effects F_k = w_k (I + a_k.sigma), shape (N, 2, 2)."""
        a = self.directions
        eye = np.eye(2, dtype=complex)
        sig = np.tensordot(a, PAULI, axes=(1, 0))
        return self.weights[:, None, None] * (eye[None, :, :] + sig)

    def element(self, k: int) -> np.ndarray:
        return self.elements()[k]

    def to_dict(self) -> dict:
        return {
            "schema_version": GEOMETRY_SCHEMA_VERSION,
            "kind": self.kind,
            "N": self.n,
            "directions": [[float(c) for c in row] for row in self.directions],
            "weights": [float(v) for v in self.weights],
            "facets": [
                {"normal": [float(c) for c in f.normal], "alpha": float(self.alpha)}
                for f in self.facets
            ],
            "orientation_deg": math.degrees(self.orientation),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _planar_facets(angles: np.ndarray) -> tuple[tuple[Facet, ...], float]:
    """Edge facets for polygon vertices at the given in-plane angles."""
    n = angles.size
    alpha = math.pi / n
    facets = []
    for k in range(n):
        mid = 0.5 * (angles[k] + angles[k] + 2.0 * math.pi / n)
        normal = np.array([math.sin(mid), 0.0, math.cos(mid)])
        facets.append(Facet(normal, (k, (k + 1) % n)))
    return tuple(facets), alpha


def _hull_facets(vertices: np.ndarray) -> tuple[tuple[Facet, ...], float]:
    """Facets of the convex hull of unit vertices (3D, origin interior).

    Brute-force over vertex triples is plenty for N <= 20: a triple's plane
    is a facet iff every vertex lies on its non-positive side.  Coplanar
    triangles merge by normal; facet order is lexicographic in the rounded
    normal so construction is deterministic.
    """
    n = vertices.shape[0]
    found: dict[tuple, tuple[np.ndarray, set]] = {}
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                normal = np.cross(vertices[j] - vertices[i], vertices[k] - vertices[i])
                norm = np.linalg.norm(normal)
                if norm < 1e-12:
                    continue
                normal = normal / norm
                offs = vertices @ normal
                h = offs[i]
                if abs(h) < 1e-12:
                    continue  # plane through the origin cannot support the hull
                if h < 0:
                    normal, offs, h = -normal, -offs, -h
                if np.max(offs) > h + 1e-9:
                    continue
                key = tuple(np.round(normal, 9))
                members = set(np.nonzero(offs > h - 1e-9)[0].tolist())
                if key in found:
                    found[key][1].update(members)
                else:
                    found[key] = (normal, members)
    if not found:
        raise InvalidGeometryError("vertex set has no supporting facets (degenerate hull)")
    facets = []
    alphas = []
    for key in sorted(found):
        normal, members = found[key]
        adjacent = tuple(sorted(members))
        dots = vertices[list(adjacent)] @ normal
        if np.max(np.abs(dots - dots[0])) > 1e-9:
            raise InvalidGeometryError("facet vertices are not equiangular to the normal")
        alphas.append(math.acos(min(max(dots[0], -1.0), 1.0)))
        facets.append(Facet(normal, adjacent))
    alpha = alphas[0]
    if max(abs(a - alpha) for a in alphas) > 1e-9:
        raise InvalidGeometryError("facet angles are not uniform across the hull")
    return tuple(facets), alpha


def make_polygon_povm(n: int, orientation: float = 0.0) -> PovmGeometry:
    """Equiangular N-outcome POVM with directions on a regular ZX-plane N-gon.

    The first direction sits at in-plane angle ``orientation`` from +z (so
    orientation 0 puts it at |H> and orientation pi at |V>).  N = 2 would be
    a projective measurement, which certifies nothing, so N >= 3 is required.
    """
    if int(n) != n or n < 3:
        raise InvalidGeometryError(f"polygon POVM needs integer N >= 3, got {n!r}")
    n = int(n)
    angles = orientation + 2.0 * math.pi * np.arange(n) / n
    dirs = np.stack([np.sin(angles), np.zeros(n), np.cos(angles)], axis=1)
    facets, alpha = _planar_facets(angles)
    return PovmGeometry(
        kind="polygon",
        directions=dirs,
        weights=np.full(n, 1.0 / n),
        facets=facets,
        alpha=alpha,
        planar=True,
        orientation=float(orientation),
    )


def _platonic_vertices(kind: str) -> np.ndarray:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    if kind == "tetrahedron":
        v = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    elif kind == "octahedron":
        # ordered to match the six polarization analyzers H, +, L, V, -, R
        v = [(0, 0, 1), (1, 0, 0), (0, 1, 0), (0, 0, -1), (-1, 0, 0), (0, -1, 0)]
    elif kind == "cube":
        v = [(sx, sy, sz) for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]
    elif kind == "icosahedron":
        v = []
        for a in (1.0, -1.0):
            for b in (phi, -phi):
                v += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    elif kind == "dodecahedron":
        v = [(sx, sy, sz) for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]
        inv = 1.0 / phi
        for a in (inv, -inv):
            for b in (phi, -phi):
                v += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    else:
        raise InvalidGeometryError(
            f"unknown Platonic solid {kind!r}; choose one of {PLATONIC_SOLIDS}"
        )
    arr = np.array(v, dtype=float)
    return arr / np.linalg.norm(arr, axis=1)[:, None]


def make_platonic_povm(kind: str) -> PovmGeometry:
    """POVM whose outcome directions are the vertices of a Platonic solid."""
    verts = _platonic_vertices(kind)
    facets, alpha = _hull_facets(verts)
    n = verts.shape[0]
    return PovmGeometry(
        kind=kind,
        directions=verts,
        weights=np.full(n, 1.0 / n),
        facets=facets,
        alpha=alpha,
        planar=False,
    )


def make_custom_povm(directions, weights, kind: str = "custom") -> PovmGeometry:
    """Completeness-validated custom POVM; facets derived from the directions."""
    dirs = np.asarray(directions, dtype=float)
    w = np.asarray(weights, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != 3:
        raise InvalidGeometryError(f"directions must be (N, 3), got {dirs.shape}")
    n = dirs.shape[0]
    planar = bool(np.max(np.abs(dirs[:, 1])) < 1e-12)
    if planar:
        angles = np.mod(np.arctan2(dirs[:, 0], dirs[:, 2]), 2.0 * math.pi)
        order = np.argsort(angles, kind="stable")
        sorted_angles = angles[order]
        gaps = np.diff(np.concatenate([sorted_angles, [sorted_angles[0] + 2.0 * math.pi]]))
        if np.max(np.abs(gaps - 2.0 * math.pi / n)) > 1e-9:
            raise InvalidGeometryError("custom planar POVMs must be equiangular")
        alpha = math.pi / n
        facets = []
        for j in range(n):
            mid = sorted_angles[j] + alpha
            normal = np.array([math.sin(mid), 0.0, math.cos(mid)])
            facets.append(Facet(normal, (int(order[j]), int(order[(j + 1) % n]))))
        facets = tuple(facets)
    else:
        facets, alpha = _hull_facets(dirs)
    return PovmGeometry(
        kind=kind,
        directions=dirs,
        weights=w,
        facets=facets,
        alpha=alpha,
        planar=planar,
    )


def geometry_from_dict(data: dict) -> PovmGeometry:
    """Deserialize a geometry JSON object (see schemas/povm_geometry.schema.json).

    Facet normals and alpha are taken from the file when present so that
    ``verify`` can audit them against the directions; completeness is always
    enforced at construction.
    """
    kind = data.get("kind", "custom")
    dirs = np.asarray(data["directions"], dtype=float)
    weights = np.asarray(data["weights"], dtype=float)
    orientation = math.radians(float(data.get("orientation_deg", 0.0)))
    facets_spec = data.get("facets")
    planar = bool(np.max(np.abs(dirs[:, 1])) < 1e-12)
    if facets_spec:
        alpha = float(facets_spec[0]["alpha"])
        normals = [np.asarray(f["normal"], dtype=float) for f in facets_spec]
        facets = []
        for u in normals:
            dots = dirs @ u
            m = float(np.max(dots))
            adjacent = tuple(int(i) for i in np.nonzero(dots > m - 1e-6)[0])
            facets.append(Facet(u, adjacent))
        facets = tuple(facets)
    else:
        built = make_custom_povm(dirs, weights, kind=kind)
        facets, alpha = built.facets, built.alpha
    return PovmGeometry(
        kind=kind,
        directions=dirs,
        weights=weights,
        facets=facets,
        alpha=alpha,
        planar=planar,
        orientation=orientation,
    )


def load_geometry(path) -> PovmGeometry:
    with open(path, "r", encoding="utf-8") as fh:
        return geometry_from_dict(json.load(fh))


def builtin_geometry(name: str, orientation: float = 0.0) -> PovmGeometry:
    """Resolve a builtin geometry name: "polygonN" / "N" / a solid tag."""
    name = str(name).strip().lower()
    if name in PLATONIC_SOLIDS:
        return make_platonic_povm(name)
    if name.startswith("polygon"):
        name = name[len("polygon"):]
    if name.isdigit():
        return make_polygon_povm(int(name), orientation=orientation)
    raise InvalidGeometryError(f"unknown builtin geometry {name!r}")


def geometry_schema() -> dict:
    """Load the versioned JSON schema shipped with the package."""
    text = resources.files("povmrand").joinpath("schemas/povm_geometry.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class OutcomeStats:
    """Per-outcome counts and/or probabilities."""

    probs: np.ndarray
    counts: np.ndarray | None = None
    n_total: int | None = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("probs must be a 1-D array with at least two outcomes")
        if np.any(p < -1e-12):
            raise ValueError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum():.12g}, not 1 within 1e-9")
        object.__setattr__(self, "probs", _frozen(p))
        if self.counts is not None:
            c = np.array(self.counts, dtype=np.int64)
            if c.shape != p.shape:
                raise ValueError("counts shape must match probs")
            if np.any(c < 0):
                raise ValueError("counts must be nonnegative")
            object.__setattr__(self, "counts", _frozen(c, dtype=np.int64))
            object.__setattr__(self, "n_total", int(c.sum()))

    @classmethod
    def from_counts(cls, counts) -> "OutcomeStats":
        c = np.asarray(counts, dtype=np.int64)
        total = int(c.sum())
        if total <= 0:
            raise ValueError("counts must contain at least one event")
        return cls(probs=c / total, counts=c, n_total=total)

    @classmethod
    def from_probs(cls, probs) -> "OutcomeStats":
        return cls(probs=np.asarray(probs, dtype=float))

    @property
    def n(self) -> int:
        return self.probs.size


def born_probabilities(state, povm: PovmGeometry) -> OutcomeStats:
    """Outcome statistics P_k = w_k (1 + a_k.r) of a state under the POVM."""
    r = as_bloch(state).require_physical().as_array()
    p = povm.weights * (1.0 + povm.directions @ r)
    p = np.clip(p, 0.0, None)
    return OutcomeStats(probs=p / p.sum())


@dataclass(frozen=True)
class InversionResult:
    """Least-squares state reconstruction from outcome statistics."""

    r: BlochVector
    residual: float  # norm of the statistics misfit
    physical: bool  # |r| <= 1 + EPS_PHYS; never silently clamped
    y_observable: bool  # False for planar POVMs (r_y is gauge, reported 0)

    def as_array(self) -> np.ndarray:
        return self.r.as_array()


def linear_inversion_state(stats: OutcomeStats, povm: PovmGeometry) -> InversionResult:
    """Least-squares r solving P_k = w_k (1 + a_k.r).

    For the built-in symmetric POVMs this equals the frame formula
    ``r = c sum_k P_k a_k`` with c = 2 (planar; minimum-norm solution keeps
    the unobservable r_y at 0) or c = 3 (Platonic solids).
    """
    if stats.n != povm.n:
        raise ValueError(f"stats have {stats.n} outcomes, geometry has {povm.n}")
    A = povm.weights[:, None] * povm.directions
    b = stats.probs - povm.weights
    r, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.linalg.norm(A @ r - b))
    vec = BlochVector.from_array(r)
    return InversionResult(
        r=vec,
        residual=residual,
        physical=bool(vec.norm <= 1.0 + EPS_PHYS),
        y_observable=not povm.planar,
    )


@dataclass(frozen=True)
class HullLocation:
    """Position of a state relative to the outcome-direction hull."""

    region: str  # "inside" | "outside" | "boundary"
    facet: int | None  # argmax facet when outside
    facets: tuple[int, ...]  # tied facets when on the boundary
    margins: np.ndarray  # r.u_k - cos(alpha) per facet

    @property
    def inside(self) -> bool:
        return self.region == "inside"


def hull_membership(state, povm: PovmGeometry) -> HullLocation:
    """Classify r against the hull: r.u_k <= cos(alpha) for all k means inside.

    Planar geometries only see the ZX projection of r, so the test is run on
    that projection.  Ties within EPS_TIE of the boundary report "boundary"
    with every tied facet.
    """
    r = as_bloch(state)
    if povm.planar:
        r = r.zx_projection()
    rv = r.as_array()
    margins = povm.facet_normals() @ rv - math.cos(povm.alpha)
    margins.setflags(write=False)
    worst = int(np.argmax(margins))
    if margins[worst] > EPS_TIE:
        return HullLocation("outside", worst, (worst,), margins)
    tied = tuple(int(i) for i in np.nonzero(np.abs(margins) <= EPS_TIE)[0])
    if tied:
        return HullLocation("boundary", None, tied, margins)
    return HullLocation("inside", None, (), margins)

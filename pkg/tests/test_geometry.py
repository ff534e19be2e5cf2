import json
import math

import numpy as np
import pytest

from povmrand import (
    BlochVector,
    InvalidGeometryError,
    OutcomeStats,
    QubitState,
    UnphysicalStateError,
    born_probabilities,
    geometry_from_dict,
    geometry_schema,
    hull_membership,
    linear_inversion_state,
    load_geometry,
    make_custom_povm,
    make_platonic_povm,
    make_polygon_povm,
)
from conftest import random_disk_points

PLATONIC_ALPHAS = {
    "tetrahedron": math.acos(1.0 / 3.0),
    "octahedron": math.acos(1.0 / math.sqrt(3.0)),
    "cube": math.acos(1.0 / math.sqrt(3.0)),
    "icosahedron": math.acos(math.sqrt((5.0 + 2.0 * math.sqrt(5.0)) / 15.0)),
    "dodecahedron": math.acos(math.sqrt((5.0 + 2.0 * math.sqrt(5.0)) / 15.0)),
}


class TestQubitState:
    def test_bloch_round_trip(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            v *= rng.random()
            state = QubitState.from_bloch(BlochVector.from_array(v))
            assert np.allclose(state.bloch().as_array(), v, atol=1e-12)

    def test_validation(self):
        with pytest.raises(UnphysicalStateError):
            QubitState(np.array([[0.8, 0.1], [0.3, 0.2]]))  # not Hermitian
        with pytest.raises(UnphysicalStateError):
            QubitState(np.array([[0.9, 0.0], [0.0, 0.2]]))  # trace 1.1
        with pytest.raises(UnphysicalStateError):
            QubitState.from_bloch(BlochVector(1.0, 1.0, 1.0))  # |r| > 1

    def test_pure_constructors_unit_norm(self):
        for theta in np.linspace(0, 2 * math.pi, 17):
            assert abs(BlochVector.pure_zx(theta).norm - 1.0) < 1e-12
            assert abs(BlochVector.pure(theta, 0.3).norm - 1.0) < 1e-12


class TestPolygon:
    def test_three_outcome_angles(self, polygon3):
        # adjacent directions 120 degrees apart, facet angle 60 degrees
        assert polygon3.directions[0] @ polygon3.directions[1] == pytest.approx(-0.5, abs=1e-12)
        assert polygon3.alpha == pytest.approx(math.pi / 3, abs=1e-12)

    def test_square_facet_normals(self, polygon4):
        angles = sorted(
            math.degrees(math.atan2(f.normal[0], f.normal[2])) % 360.0
            for f in polygon4.facets
        )
        assert angles == pytest.approx([45.0, 135.0, 225.0, 315.0], abs=1e-9)
        assert polygon4.alpha == pytest.approx(math.pi / 4, abs=1e-12)

    def test_hexagon_centroid(self, polygon6):
        assert np.max(np.abs(polygon6.directions.sum(axis=0))) < 1e-12

    def test_consecutive_dot(self):
        for n in range(3, 12):
            povm = make_polygon_povm(n)
            for k in range(n):
                dot = povm.directions[k] @ povm.directions[(k + 1) % n]
                assert dot == pytest.approx(math.cos(2 * math.pi / n), abs=1e-12)

    def test_orientation_rotates_first_direction(self):
        povm = make_polygon_povm(3, orientation=math.pi)
        assert np.allclose(povm.directions[0], [0, 0, -1], atol=1e-12)

    def test_n_below_three_rejected(self):
        for bad in (2, 1, 0, -1):
            with pytest.raises(InvalidGeometryError):
                make_polygon_povm(bad)


class TestPlatonic:
    @pytest.mark.parametrize("kind,alpha", sorted(PLATONIC_ALPHAS.items()))
    def test_alpha_values(self, kind, alpha):
        assert make_platonic_povm(kind).alpha == pytest.approx(alpha, abs=1e-9)

    def test_octahedron_axes_order(self, octahedron):
        # outcome order matches the analyzer set H, +, L, V, -, R
        expected = np.array(
            [[0, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, -1], [-1, 0, 0], [0, -1, 0]],
            dtype=float,
        )
        assert np.allclose(octahedron.directions, expected, atol=1e-12)

    def test_face_vertex_angles(self, all_builtins):
        for povm in all_builtins:
            cos_a = math.cos(povm.alpha)
            for f in povm.facets:
                dots = povm.directions[list(f.adjacent)] @ f.normal
                assert np.max(np.abs(dots - cos_a)) < 1e-9

    def test_unknown_solid_rejected(self):
        with pytest.raises(InvalidGeometryError):
            make_platonic_povm("isocahedron")


class TestCompleteness:
    def test_all_builtins(self, all_builtins):
        for povm in all_builtins:
            assert abs(povm.weights.sum() - 1.0) < 1e-12
            assert np.max(np.abs(povm.weights @ povm.directions)) < 1e-12
            total = povm.elements().sum(axis=0)
            assert np.allclose(total, np.eye(2), atol=1e-12)

    def test_effects_are_psd(self, all_builtins):
        for povm in all_builtins:
            for F in povm.elements():
                eigs = np.linalg.eigvalsh(F)
                assert eigs.min() > -1e-12

    def test_incomplete_custom_rejected(self):
        dirs = np.array([[0, 0, 1], [0, 0, -0.5], [0.9, 0, 0]])
        with pytest.raises(InvalidGeometryError):
            make_custom_povm(dirs, np.full(3, 1 / 3))


class TestBornRule:
    def test_maximally_mixed_uniform(self, all_builtins):
        for povm in all_builtins:
            stats = born_probabilities(BlochVector.zero(), povm)
            assert np.allclose(stats.probs, 1.0 / povm.n, atol=1e-12)

    def test_vertex_state_three_outcomes(self, polygon3):
        stats = born_probabilities(BlochVector.from_array(polygon3.directions[0]), polygon3)
        assert stats.probs[0] == pytest.approx(2 / 3, abs=1e-12)
        assert stats.probs[1] == pytest.approx(1 / 6, abs=1e-12)
        assert stats.probs[2] == pytest.approx(1 / 6, abs=1e-12)

    def test_antipodal_state_blind_outcome(self, polygon3):
        stats = born_probabilities(BlochVector.from_array(-polygon3.directions[0]), polygon3)
        assert stats.probs[0] == pytest.approx(0.0, abs=1e-12)
        assert stats.probs[1] == pytest.approx(0.5, abs=1e-12)
        assert stats.probs[2] == pytest.approx(0.5, abs=1e-12)

    def test_rotation_symmetry(self):
        # rotating r by 2 pi / N about y and cycling labels leaves P invariant
        rng = np.random.default_rng(2)
        for n in (3, 5, 6):
            povm = make_polygon_povm(n)
            step = 2 * math.pi / n
            for _ in range(20):
                radius = math.sqrt(rng.random())
                theta = 2 * math.pi * rng.random()
                p0 = born_probabilities(
                    BlochVector.pure_zx(theta), povm
                ).probs * radius + povm.weights * (1 - radius)
                p1 = born_probabilities(
                    BlochVector.pure_zx(theta + step), povm
                ).probs * radius + povm.weights * (1 - radius)
                assert np.allclose(np.roll(p1, 1), p0, atol=1e-12)


class TestLinearInversion:
    def test_uniform_gives_origin(self, all_builtins):
        for povm in all_builtins:
            inv = linear_inversion_state(OutcomeStats.from_probs(np.full(povm.n, 1 / povm.n)), povm)
            assert inv.r.norm < 1e-12
            assert inv.physical

    def test_brute_force_grid_agrees(self, polygon3):
        # independent oracle: exhaustive disk search for the state whose Born
        # statistics best match P = (2/3, 1/6, 1/6); expect the first vertex
        target = np.array([2 / 3, 1 / 6, 1 / 6])
        radii = np.linspace(0, 1, 201)
        angles = np.linspace(0, 2 * math.pi, 721)[:-1]
        best, best_err = None, np.inf
        for rad in radii:
            z = rad * np.cos(angles)
            x = rad * np.sin(angles)
            probs = (1 + np.outer(polygon3.directions[:, 2], z)
                     + np.outer(polygon3.directions[:, 0], x)) / 3
            err = np.max(np.abs(probs - target[:, None]), axis=0)
            idx = int(np.argmin(err))
            if err[idx] < best_err:
                best_err = err[idx]
                best = np.array([x[idx], 0.0, z[idx]])
        assert best_err < 1e-2
        inv = linear_inversion_state(OutcomeStats.from_probs(target), polygon3)
        assert np.allclose(inv.r.as_array(), best, atol=1e-2)
        assert np.allclose(inv.r.as_array(), polygon3.directions[0], atol=1e-12)

    def test_antipodal_unbiased_coin(self, polygon3):
        inv = linear_inversion_state(OutcomeStats.from_probs([0.0, 0.5, 0.5]), polygon3)
        assert np.allclose(inv.r.as_array(), -polygon3.directions[0], atol=1e-12)

    def test_frame_constants(self, all_builtins):
        # least squares equals the closed-form frame inversion c = 2 or 3
        rng = np.random.default_rng(3)
        for povm in all_builtins:
            c = 2.0 if povm.planar else 3.0
            v = rng.normal(size=3)
            v /= np.linalg.norm(v) / 0.7
            stats = born_probabilities(BlochVector.from_array(v), povm)
            inv = linear_inversion_state(stats, povm)
            frame = c * (stats.probs @ povm.directions)
            assert np.allclose(inv.r.as_array(), frame, atol=1e-10)

    def test_round_trip(self, all_builtins):
        rng = np.random.default_rng(4)
        for povm in all_builtins:
            for _ in range(25):
                v = rng.normal(size=3)
                v /= np.linalg.norm(v)
                v *= rng.random()
                inv = linear_inversion_state(
                    born_probabilities(BlochVector.from_array(v), povm), povm
                )
                expected = np.array([v[0], 0.0, v[2]]) if povm.planar else v
                assert np.allclose(inv.r.as_array(), expected, atol=1e-10)
                assert inv.residual < 1e-12

    def test_unphysical_stats_flagged_not_clamped(self, polygon3):
        inv = linear_inversion_state(OutcomeStats.from_probs([0.75, 0.20, 0.05]), polygon3)
        assert inv.r.norm > 1.0
        assert not inv.physical

    def test_planar_y_unobservable(self, polygon4, octahedron):
        stats = OutcomeStats.from_probs(np.full(4, 0.25))
        assert not linear_inversion_state(stats, polygon4).y_observable
        stats6 = OutcomeStats.from_probs(np.full(6, 1 / 6))
        assert linear_inversion_state(stats6, octahedron).y_observable


class TestHullMembership:
    def test_origin_inside(self, all_builtins):
        for povm in all_builtins:
            assert hull_membership(BlochVector.zero(), povm).region == "inside"

    def test_facet_normal_outside(self, polygon3):
        loc = hull_membership(BlochVector.from_array(polygon3.facets[0].normal), polygon3)
        assert loc.region == "outside"
        assert loc.facet == 0

    def test_square_vertex_on_boundary(self, polygon4):
        loc = hull_membership(BlochVector.from_array(polygon4.directions[0]), polygon4)
        assert loc.region == "boundary"
        touching = {polygon4.facets[k].adjacent for k in loc.facets}
        assert all(0 in adj for adj in touching)
        assert len(loc.facets) == 2

    def test_inside_implies_all_margins_nonpositive(self, all_builtins):
        rng = np.random.default_rng(5)
        for povm in all_builtins:
            pts = random_disk_points(rng, 50)
            for p in pts:
                loc = hull_membership(BlochVector.from_array(p), povm)
                if loc.region == "inside":
                    assert np.all(loc.margins <= 1e-9)  # r.u_k <= cos(alpha)

    def test_planar_projection_used(self, polygon3):
        # a state with massive y component but zero ZX projection is inside
        loc = hull_membership(BlochVector(0.0, 1.0, 0.0), polygon3)
        assert loc.region == "inside"


class TestSerialization:
    def test_round_trip(self, tmp_path, all_builtins):
        for povm in all_builtins[:4]:
            path = tmp_path / f"{povm.geometry_id}.json"
            povm.save(path)
            back = load_geometry(path)
            assert back.n == povm.n
            assert np.allclose(back.directions, povm.directions, atol=1e-15)
            assert np.allclose(back.weights, povm.weights, atol=1e-15)
            assert back.alpha == pytest.approx(povm.alpha, abs=1e-12)

    def test_schema_validates_output(self, tmp_path, polygon6):
        jsonschema = pytest.importorskip("jsonschema")
        jsonschema.validate(polygon6.to_dict(), geometry_schema())

    def test_incomplete_file_rejected(self, tmp_path, polygon3):
        data = polygon3.to_dict()
        data["directions"][0] = [0.0, 0.0, 0.9]  # break sum_k w_k a_k = 0
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(data))
        with pytest.raises(InvalidGeometryError):
            load_geometry(path)

    def test_tampered_alpha_loads(self, polygon3):
        # facet-angle consistency is audited by verify, not at load time
        data = polygon3.to_dict()
        for f in data["facets"]:
            f["alpha"] = math.cos(math.pi / 3)
        povm = geometry_from_dict(data)
        assert povm.alpha == pytest.approx(0.5, abs=1e-12)

import math

import numpy as np
import pytest

from povmrand import (
    BlochVector,
    InfeasibleTargetError,
    OutcomeStats,
    born_probabilities,
    guessing_probability_analytic,
    hull_membership,
    make_platonic_povm,
    make_polygon_povm,
    oracle_pguess_lp,
    parametric_pguess_planar,
    strategy_audit,
)
from conftest import random_disk_points, random_ball_points


class TestOracleLP:
    def test_uniform_three_outcome(self, polygon3):
        strat = oracle_pguess_lp(
            OutcomeStats.from_probs(np.full(3, 1 / 3)), polygon3, grid_size=90
        )
        assert strat.p_guess == pytest.approx(2 / 3, abs=1e-12)
        audit = strategy_audit(strat, polygon3, OutcomeStats.from_probs(np.full(3, 1 / 3)))
        assert audit.ok

    def test_unbiased_coin_statistics(self, polygon3):
        target = OutcomeStats.from_probs([0.0, 0.5, 0.5])
        strat = oracle_pguess_lp(target, polygon3, grid_size=90)
        assert strat.p_guess == pytest.approx(0.5, abs=1e-9)
        # the ensemble lives at the state orthogonal to the blind outcome
        for comp in strat.components:
            assert comp.direction.as_array() @ (-polygon3.directions[0]) > 1 - 1e-9
            assert comp.outcome in (1, 2)

    def test_cross_check_against_analytic(self):
        # the LP run is the independent check of the closed form
        rng = np.random.default_rng(31)
        worst = 0.0
        for n in (3, 4, 6, 8):
            povm = make_polygon_povm(n)
            for p in random_disk_points(rng, 50):
                state = BlochVector.from_array(p)
                analytic = guessing_probability_analytic(state, povm).p_guess
                strat = oracle_pguess_lp(
                    born_probabilities(state, povm), povm, grid_size=720, refine=True
                )
                worst = max(worst, abs(analytic - strat.p_guess))
                # achievability: the oracle never exceeds the exact value
                assert strat.p_guess <= analytic + 1e-9
        assert worst <= 1e-3

    def test_octahedron_edge_midpoint_rigidity(self, octahedron):
        # pure target on an informationally complete POVM forces the ensemble
        r = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
        target = born_probabilities(BlochVector.from_array(r), octahedron)
        strat = oracle_pguess_lp(target, octahedron, grid_size=720, refine=False)
        assert strat.p_guess == pytest.approx((1 + 1 / math.sqrt(2)) / 6, abs=1e-9)

    def test_pure_target_rigidity_random(self, octahedron):
        rng = np.random.default_rng(32)
        for _ in range(20):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            target = born_probabilities(BlochVector.from_array(v), octahedron)
            strat = oracle_pguess_lp(target, octahedron, grid_size=400, refine=False)
            forced = float(np.max(octahedron.weights * (1 + octahedron.directions @ v)))
            assert strat.p_guess == pytest.approx(forced, abs=1e-6)

    def test_infeasible_radius_rejected(self, polygon3):
        with pytest.raises(InfeasibleTargetError) as err:
            oracle_pguess_lp(OutcomeStats.from_probs([0.75, 0.20, 0.05]), polygon3)
        assert err.value.residual > 0

    def test_infeasible_span_rejected(self, octahedron):
        # statistics off the physical affine span (residual too large)
        probs = np.array([0.30, 0.16, 0.10, 0.14, 0.18, 0.12])
        with pytest.raises(InfeasibleTargetError):
            oracle_pguess_lp(OutcomeStats.from_probs(probs), octahedron)

    def test_degenerate_zero_outcomes_supported(self, polygon4):
        target = born_probabilities(
            BlochVector.from_array(polygon4.directions[0]), polygon4
        )
        assert target.probs.min() == pytest.approx(0.0, abs=1e-15)
        strat = oracle_pguess_lp(target, polygon4, grid_size=128)
        assert strat.p_guess == pytest.approx(0.5, abs=1e-9)

    def test_grid_convergence_monotone(self, polygon6):
        # nested grids only enlarge the feasible set
        rng = np.random.default_rng(33)
        for p in random_disk_points(rng, 10):
            target = born_probabilities(BlochVector.from_array(p), polygon6)
            values = [
                oracle_pguess_lp(target, polygon6, grid_size=g, refine=False).p_guess
                for g in (45, 90, 180, 360)
            ]
            deltas = np.diff(values)
            assert np.all(deltas >= -1e-12)
            assert np.all(np.diff(deltas) <= 1e-9)  # improvements shrink

    def test_3d_soundness_random(self, octahedron):
        rng = np.random.default_rng(34)
        for p in random_ball_points(rng, 60):
            state = BlochVector.from_array(p)
            analytic = guessing_probability_analytic(state, octahedron).p_guess
            strat = oracle_pguess_lp(
                born_probabilities(state, octahedron), octahedron, 360, refine=False
            )
            assert strat.p_guess <= analytic + 1e-9
            if hull_membership(state, octahedron).region == "inside":
                assert strat.p_guess == pytest.approx(2 / 6, abs=1e-9)

    def test_determinism(self, polygon4):
        target = born_probabilities(BlochVector(0.61, 0.0, 0.4), polygon4)
        a = oracle_pguess_lp(target, polygon4, grid_size=256, refine=True)
        b = oracle_pguess_lp(target, polygon4, grid_size=256, refine=True)
        assert a.p_guess == b.p_guess
        assert [c.weight for c in a.components] == [c.weight for c in b.components]

    def test_grid_size_floor(self, polygon3):
        with pytest.raises(ValueError):
            oracle_pguess_lp(OutcomeStats.from_probs(np.full(3, 1 / 3)), polygon3, grid_size=8)


class TestParametricStrategy:
    def test_inside_hull_vertex_mixture(self, polygon4):
        strat = parametric_pguess_planar(BlochVector(0.1, 0.0, 0.2), polygon4)
        assert strat.inside
        assert strat.p_guess == pytest.approx(0.5, abs=1e-15)
        assert strat.q == 0.0
        ensemble = strat.to_ensemble(polygon4)
        audit = strategy_audit(
            ensemble, polygon4, born_probabilities(BlochVector(0.1, 0.0, 0.2), polygon4)
        )
        assert audit.ok
        # all components sit on polygon vertices
        for comp in ensemble.components:
            dots = polygon4.directions @ comp.direction.as_array()
            assert dots.max() > 1 - 1e-12

    def test_facet_normal_symmetric_states(self, polygon3):
        u = polygon3.facets[0].normal
        strat = parametric_pguess_planar(BlochVector.from_array(u), polygon3)
        assert strat.p_guess == pytest.approx((1 + math.cos(math.pi / 3)) / 3, abs=1e-12)
        j1, j2 = polygon3.facets[0].adjacent
        t1a = strat.t1.as_array() @ polygon3.directions[j1]
        t2a = strat.t2.as_array() @ polygon3.directions[j2]
        assert t1a == pytest.approx(t2a, abs=1e-12)

    def test_lambda_formula_invariant(self):
        rng = np.random.default_rng(35)
        for n in (3, 5, 8):
            povm = make_polygon_povm(n)
            for p in random_disk_points(rng, 40):
                state = BlochVector.from_array(p)
                strat = parametric_pguess_planar(state, povm)
                if strat.inside or state.norm >= 1 - 1e-9:
                    continue
                s = strat.s.as_array()
                lam_expected = (1 - state.norm**2) / (
                    2 - 2 * float(s @ strat.t1.as_array())
                )
                assert strat.lam == pytest.approx(lam_expected, abs=1e-9)
                assert strat.q == 0.0
                u = povm.facets[strat.active_facet].normal
                assert strat.t1.as_array() @ u == pytest.approx(float(s @ u), abs=1e-9)
                assert strat.t2.as_array() @ u == pytest.approx(float(s @ u), abs=1e-9)

    def test_matches_analytic_everywhere(self):
        rng = np.random.default_rng(36)
        for n in range(3, 11):
            povm = make_polygon_povm(n)
            for p in random_disk_points(rng, 60):
                state = BlochVector.from_array(p)
                par = parametric_pguess_planar(state, povm)
                ana = guessing_probability_analytic(state, povm).p_guess
                assert par.p_guess == pytest.approx(ana, abs=1e-12)

    def test_ensemble_realizes_statistics(self):
        rng = np.random.default_rng(37)
        povm = make_polygon_povm(5)
        for p in random_disk_points(rng, 50):
            state = BlochVector.from_array(p)
            strat = parametric_pguess_planar(state, povm)
            ensemble = strat.to_ensemble(povm)
            audit = strategy_audit(ensemble, povm, born_probabilities(state, povm))
            assert audit.ok, audit.flags

    def test_agrees_with_lp_near_boundary(self):
        povm = make_polygon_povm(5)
        state = BlochVector.from_array(0.99 * povm.facets[0].normal)
        par = parametric_pguess_planar(state, povm)
        lp = oracle_pguess_lp(
            born_probabilities(state, povm), povm, grid_size=1440, refine=True
        )
        assert par.p_guess == pytest.approx(lp.p_guess, abs=1e-4)

    def test_rejects_solids(self, octahedron):
        with pytest.raises(ValueError):
            parametric_pguess_planar(BlochVector.zero(), octahedron)


class TestStrategyAudit:
    def test_flags_short_weights(self, polygon3):
        strat = oracle_pguess_lp(
            OutcomeStats.from_probs(np.full(3, 1 / 3)), polygon3, grid_size=90
        )
        bad = type(strat)(
            components=tuple(
                type(c)(c.weight * 0.9, c.direction, c.outcome) for c in strat.components
            ),
            p_guess=strat.p_guess,
            residual=strat.residual,
            geometry=strat.geometry,
            grid_size=strat.grid_size,
            refined=strat.refined,
            lp_iterations=strat.lp_iterations,
        )
        audit = strategy_audit(bad, polygon3, OutcomeStats.from_probs(np.full(3, 1 / 3)))
        assert not audit.ok
        assert any("weights" in f for f in audit.flags)

    def test_property_random_targets(self):
        # the LP must never report an unrealizable strategy
        rng = np.random.default_rng(38)
        checked = 0
        for _ in range(100):
            n = int(rng.integers(3, 7))
            povm = make_polygon_povm(n)
            p = random_disk_points(rng, 1)[0]
            target = born_probabilities(BlochVector.from_array(p), povm)
            strat = oracle_pguess_lp(target, povm, grid_size=90, refine=bool(rng.integers(2)))
            audit = strategy_audit(strat, povm, target)
            assert audit.ok, audit.flags
            assert audit.max_constraint_residual <= 1e-8
            checked += 1
        assert checked == 100

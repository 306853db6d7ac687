"""Diagnostics: gap function, consensus split, errors, averages."""

import types

import numpy as np
import pytest

from nash_adm import (
    BoxSet,
    ExplicitSchedule,
    Game,
    InputError,
    averaged_iterate,
    best_response_gap,
    consensus_decompose,
    gap_function,
    generate_game,
    mixing_matrix,
    monotone_schedule,
    random_tree,
    relative_error,
    run_adm,
    run_centralized,
    strong_schedule,
)
from nash_adm.games import game_constants

import oracles


def identity_game(h=(0.0, 0.0), lo=-1.0, hi=1.0):
    return Game(
        n=2, dims=(1, 1), G=np.eye(2), h=np.asarray(h, dtype=float),
        boxes=BoxSet.uniform(2, lo, hi), kind="strongly_monotone",
        mu_declared=1.0, seed=0,
    )


class TestConsensusDecompose:
    def test_consensus_input_has_no_disagreement(self):
        X = np.tile([1.0, 2.0, 3.0], (4, 1))
        dec = consensus_decompose(X)
        np.testing.assert_array_equal(dec.consensus, X)
        assert dec.residual_norm == 0.0

    def test_mean_free_input_is_pure_disagreement(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        dec = consensus_decompose(X)
        np.testing.assert_array_equal(dec.consensus, np.zeros((2, 2)))
        np.testing.assert_array_equal(dec.disagreement, X)

    def test_parts_recompose_and_are_orthogonal(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            X = rng.normal(size=(5, 4))
            dec = consensus_decompose(X)
            np.testing.assert_allclose(dec.consensus + dec.disagreement, X, atol=1e-14)
            inner = float(np.sum(dec.consensus * dec.disagreement))
            assert abs(inner) <= 1e-12
            pythagoras = (
                np.linalg.norm(dec.consensus, "fro") ** 2
                + dec.residual_norm ** 2
                - np.linalg.norm(X, "fro") ** 2
            )
            assert abs(pythagoras) <= 1e-12

    def test_rejects_vectors(self):
        with pytest.raises(InputError):
            consensus_decompose(np.zeros(4))


class TestGapFunction:
    def test_zero_at_equilibrium(self):
        res = gap_function(identity_game(), np.zeros(2))
        assert res.value <= 1e-8
        assert res.converged

    def test_corner_point_pin(self):
        # max_x <x, y - x> over the square at y = (1, 1) peaks at x = y/2.
        res = gap_function(identity_game(), np.array([1.0, 1.0]))
        assert res.value == pytest.approx(0.5, abs=1e-6)
        np.testing.assert_allclose(res.maximizer, [0.5, 0.5], atol=1e-5)

    def test_never_negative(self):
        game = generate_game(3, 1, seed=6)
        rng = np.random.default_rng(0)
        for _ in range(20):
            y = rng.uniform(game.boxes.lo, game.boxes.hi)
            assert gap_function(game, y).value >= 0.0

    def test_infeasible_point_rejected(self):
        with pytest.raises(InputError):
            gap_function(identity_game(), np.array([2.0, 0.0]))

    def test_tiny_budget_flags_unconverged(self):
        res = gap_function(identity_game(), np.array([1.0, 1.0]), max_iters=2)
        assert not res.converged
        assert res.iterations == 2
        assert res.residual > 1e-8

    def test_matches_grid_search(self):
        rng = np.random.default_rng(14)
        for seed in (1, 2, 3, 4, 5):
            game = generate_game(2, 1, seed=seed)
            y = rng.uniform(game.boxes.lo, game.boxes.hi)
            res = gap_function(game, y)
            brute = oracles.grid_gap(game.G, game.h, game.boxes.lo, game.boxes.hi, y)
            assert res.value == pytest.approx(brute, abs=2e-3)

    def test_merely_monotone_games_accepted(self):
        game = generate_game(4, 1, kind="merely_monotone", seed=1)
        y = game.boxes.center
        assert gap_function(game, y).value >= 0.0


class TestRelativeError:
    def test_exact_match(self):
        x = np.array([1.0, 2.0])
        assert relative_error(x, x) == 0.0

    def test_doubled_point(self):
        x = np.array([3.0, 4.0])
        assert relative_error(2.0 * x, x) == pytest.approx(1.0)

    def test_unit_offset(self):
        assert relative_error(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_zero_reference_falls_back_to_absolute(self):
        with pytest.warns(UserWarning, match="zero norm"):
            err = relative_error(np.array([0.3, 0.4]), np.zeros(2))
        assert err == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            relative_error(np.zeros(2), np.zeros(3))


class TestAveragedIterate:
    def test_constant_actions_average_to_themselves(self):
        actions = np.tile([0.7, -0.2], (11, 1))
        trace = types.SimpleNamespace(actions=actions)
        out = averaged_iterate(trace, ExplicitSchedule(alpha=0.1))
        np.testing.assert_allclose(out, actions[1:], atol=1e-15)

    def test_first_row_is_first_step(self):
        actions = np.array([[9.0], [1.0], [5.0]])
        trace = types.SimpleNamespace(actions=actions)
        out = averaged_iterate(trace, ExplicitSchedule(alpha=0.1))
        assert out[0, 0] == pytest.approx(1.0)

    def test_uniform_weights_give_running_mean(self):
        rng = np.random.default_rng(2)
        actions = rng.normal(size=(8, 3))
        trace = types.SimpleNamespace(actions=actions)
        out = averaged_iterate(trace, ExplicitSchedule(alpha=0.25))
        for k in range(1, 8):
            np.testing.assert_allclose(out[k - 1], actions[1 : k + 1].mean(axis=0), atol=1e-12)

    def test_matches_prefix_sum_oracle_decaying(self):
        sched = monotone_schedule(1.0, 0.3)
        rng = np.random.default_rng(4)
        K = 200
        actions = rng.uniform(-1, 1, size=(K + 1, 2))
        trace = types.SimpleNamespace(actions=actions)
        out = averaged_iterate(trace, sched)
        ts = np.arange(1, K + 1)
        weights = sched.A * (ts + 1.0) ** (-(sched.a + sched.theta_exponent))
        expected = oracles.weighted_running_average(actions[1:], weights)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_geometric_weights_survive_rescaling(self):
        """Growing weights overflow a naive accumulator; the running
        form must rescale and keep matching a prefix-sum oracle computed
        while float64 still holds the raw sums."""
        sched = strong_schedule(1.0, 1.0, 1, 0.0, 0.0)
        K = 25_000
        rng = np.random.default_rng(6)
        actions = rng.uniform(-1, 1, size=(K + 1, 1))
        trace = types.SimpleNamespace(actions=actions)
        out = averaged_iterate(trace, sched)
        weights = sched.alpha * sched.c ** np.arange(1, K + 1)
        assert np.isfinite(weights[-1])
        expected = oracles.weighted_running_average(actions[1:], weights)
        np.testing.assert_allclose(out, expected, rtol=1e-9, atol=1e-12)

    def test_empty_trace_rejected(self):
        trace = types.SimpleNamespace(actions=np.zeros((1, 2)))
        with pytest.raises(InputError):
            averaged_iterate(trace, ExplicitSchedule(alpha=0.1))


class TestBestResponseGap:
    def test_zero_at_equilibrium(self):
        game = generate_game(4, 1, seed=3)
        consts = game_constants(game)
        x_star, _ = run_centralized(game, consts.mu / consts.L ** 2, 20000)
        assert best_response_gap(game, x_star) <= 1e-8

    def test_identity_game_pin(self):
        gap = best_response_gap(identity_game(), np.array([1.0, 0.0]))
        assert gap == pytest.approx(0.5, abs=1e-12)

    def test_small_deviation_is_quadratic(self):
        game = generate_game(3, 1, seed=5, mu=1.0)
        consts = game_constants(game)
        x_star, _ = run_centralized(game, consts.mu / consts.L ** 2, 30000)
        for i in range(3):
            delta = 1e-3
            y = x_star.copy()
            y[i] += delta
            expected = 0.5 * game.G[i, i] * delta ** 2
            assert best_response_gap(game, y) == pytest.approx(expected, rel=1e-2)

    def test_infeasible_point_rejected(self):
        with pytest.raises(InputError):
            best_response_gap(identity_game(), np.array([5.0, 0.0]))

    def test_controlled_by_gap_function(self):
        """Near-equilibrium points in the gap sense are near-equilibria
        in the unilateral-deviation sense, with the constant (1 + L D)."""
        game = generate_game(3, 1, seed=8)
        consts = game_constants(game)
        D = float(np.sqrt(game.boxes.diameter_sq))
        x_star, _ = run_centralized(game, consts.mu / consts.L ** 2, 20000)
        rng = np.random.default_rng(9)
        for scale in (1e-2, 1e-1, 0.5):
            for _ in range(10):
                y = game.boxes.project(x_star + scale * rng.normal(size=game.m))
                eps = gap_function(game, y).value
                br = best_response_gap(game, y)
                assert br <= (1.0 + consts.L * D) * np.sqrt(eps) + 1e-6


class TestRunWiring:
    def test_gap_cadence_rows(self):
        game = generate_game(3, 1, kind="merely_monotone", seed=2)
        mix = mixing_matrix(3, random_tree(3, seed=1))
        sched = monotone_schedule(game_constants(game).L, 0.25)
        trace = run_adm(game, mix, sched, K=30, gap_every=10)
        finite = np.flatnonzero(~np.isnan(trace.gap))
        # the gap of the average through step t sits on the row of X^{t+1}
        np.testing.assert_array_equal(finite, [10, 20, 30])
        np.testing.assert_array_equal(trace.iters[finite], [11, 21, 31])
        assert np.all(trace.gap[finite] >= 0.0)

    def test_gap_evaluated_at_weighted_average(self):
        game = generate_game(3, 1, kind="merely_monotone", seed=2)
        mix = mixing_matrix(3, random_tree(3, seed=1))
        sched = monotone_schedule(game_constants(game).L, 0.25)
        trace = run_adm(game, mix, sched, K=20, gap_every=20)
        avg = averaged_iterate(trace, sched)
        expected = gap_function(game, avg[-1]).value
        row = np.flatnonzero(~np.isnan(trace.gap))[0]
        assert trace.gap[row] == pytest.approx(expected, abs=1e-9)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

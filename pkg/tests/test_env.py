import itertools

import numpy as np
import pytest

from rwtq.env import (
    EpisodicMdp,
    GridWorldSpec,
    build_random_reward_grid,
    evaluate_policy,
    greedy_policy,
    grid_next_states,
    random_mdp,
    rollout,
    step,
    uniform_policy,
    value_iteration,
)


def small_spec(**kw):
    base = dict(dims=2, side=3, horizon=3, num_actions=4, delta_std=1.0, seed=7)
    base.update(kw)
    return GridWorldSpec(**base)


class TestMdpValidation:
    def test_rows_must_sum_to_one(self):
        P = np.full((1, 2, 1, 2), 0.5)
        P[0, 0, 0] = [0.6, 0.5]
        with pytest.raises(ValueError):
            EpisodicMdp(2, 1, 1, 0.9, np.zeros((1, 2, 1)), transitions=P)

    def test_exactly_one_dynamics(self):
        with pytest.raises(ValueError):
            EpisodicMdp(1, 1, 1, 0.9, np.zeros((1, 1, 1)))

    def test_nonfinite_reward(self):
        with pytest.raises(ValueError):
            EpisodicMdp(1, 1, 1, 0.9, np.full((1, 1, 1), np.nan), next_states=np.zeros((1, 1, 1), int))

    def test_tables_are_read_only(self, det_mdp):
        with pytest.raises(ValueError):
            det_mdp.rewards[0, 0, 0] = 5.0


class TestGrid:
    def test_full_size(self):
        target, sources = build_random_reward_grid(GridWorldSpec(delta_std=3.0, seed=1))
        assert target.num_states == 6561 and target.num_actions == 4 and target.horizon == 8
        assert len(sources) == 1 and target.initial_state == 0

    def test_zero_perturbation_copies_rewards(self):
        target, sources = build_random_reward_grid(small_spec(delta_std=0.0, num_sources=2))
        for s in sources:
            np.testing.assert_array_equal(s.rewards, target.rewards)

    def test_determinism(self):
        a, sa = build_random_reward_grid(small_spec())
        b, sb = build_random_reward_grid(small_spec())
        np.testing.assert_array_equal(a.rewards, b.rewards)
        np.testing.assert_array_equal(sa[0].rewards, sb[0].rewards)

    def test_stage_invariant_rewards(self):
        target, _ = build_random_reward_grid(small_spec())
        for h in range(target.horizon):
            np.testing.assert_array_equal(target.rewards[h], target.rewards[0])

    def test_shared_dynamics(self):
        target, sources = build_random_reward_grid(small_spec())
        np.testing.assert_array_equal(target.next_states, sources[0].next_states)

    def test_boundary_clipping(self):
        nxt = grid_next_states(2, 3, 4)
        # state (2, 0) is index 6; action 0 increments coordinate 0, already at the edge
        assert nxt[6, 0] == 6
        assert nxt[0, 0] == 3 and nxt[0, 1] == 1
        # decrement moves at the origin stay put
        assert nxt[0, 2] == 0 and nxt[0, 3] == 0

    def test_increment_only_with_dims_actions(self):
        nxt = grid_next_states(4, 3, 4)
        coords = np.stack(np.unravel_index(np.arange(81), (3,) * 4), axis=1)
        for a in range(4):
            moved = coords[nxt[:, a]] - coords
            assert np.all(moved[:, [i for i in range(4) if i != a]] == 0)
            assert np.all(moved[:, a] >= 0)

    def test_normalized_rewards_in_unit_interval(self):
        target, sources = build_random_reward_grid(small_spec(normalize_rewards=True))
        lo = min(t.rewards.min() for t in [target, *sources])
        hi = max(t.rewards.max() for t in [target, *sources])
        assert lo == pytest.approx(0.0) and hi == pytest.approx(1.0)

    @pytest.mark.parametrize("kw", [dict(side=1), dict(dims=0), dict(delta_std=-1.0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(ValueError):
            build_random_reward_grid(small_spec(**kw))


class TestStepRollout:
    def test_deterministic_step(self, det_mdp, rng):
        for _ in range(5):
            assert step(det_mdp, 0, 1, 0, rng) == (0.0, 1)

    def test_uniform_two_state(self, rng):
        P = np.full((1, 2, 1, 2), 0.5)
        mdp = EpisodicMdp(2, 1, 1, 1.0, np.zeros((1, 2, 1)), transitions=P)
        draws = np.array([step(mdp, 0, 0, 0, rng)[1] for _ in range(10000)])
        assert abs(draws.mean() - 0.5) < 0.02

    def test_out_of_range(self, det_mdp, rng):
        with pytest.raises(IndexError):
            step(det_mdp, 2, 0, 0, rng)
        with pytest.raises(IndexError):
            step(det_mdp, 0, 0, 2, rng)

    def test_horizon_one(self, rng):
        mdp = random_mdp(rng, 3, 2, 1)
        traj = rollout(mdp, uniform_policy(2), rng)
        assert len(traj) == 1

    def test_rollout_reproducible(self, det_mdp):
        Q, _ = value_iteration(det_mdp)
        pol = greedy_policy(Q)
        t1 = rollout(det_mdp, pol, np.random.default_rng(3))
        t2 = rollout(det_mdp, pol, np.random.default_rng(3))
        assert t1.samples == t2.samples

    def test_source_dataset_size(self, rng):
        target, sources = build_random_reward_grid(small_spec(horizon=8))
        trajs = [rollout(sources[0], uniform_policy(4), rng, task_id=1) for _ in range(1024)]
        assert sum(len(t) for t in trajs) == 1024 * 8


def enumerate_optimum(mdp):
    """Best start value over every deterministic (H, S) action table."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    best = np.full(S, -np.inf)
    for flat in itertools.product(range(A), repeat=H * S):
        V = evaluate_policy(mdp, np.array(flat).reshape(H, S))
        best = np.maximum(best, V[0])
    return best


class TestOracles:
    def test_horizon_one(self, rng):
        mdp = random_mdp(rng, 4, 3, 1)
        _, V = value_iteration(mdp)
        np.testing.assert_allclose(V[0], mdp.rewards[0].max(axis=1))

    def test_brute_force_enumeration(self, rng):
        for _ in range(5):
            mdp = random_mdp(rng, 2, 2, 2)
            _, V = value_iteration(mdp)
            np.testing.assert_allclose(V[0], enumerate_optimum(mdp), atol=1e-12)

    def test_myopic(self, rng):
        mdp = random_mdp(rng, 4, 3, 3, discount=0.0)
        _, V = value_iteration(mdp)
        np.testing.assert_allclose(V, mdp.rewards.max(axis=2))

    def test_bellman_residual(self, rng):
        mdp = random_mdp(rng, 6, 3, 4)
        Q, V = value_iteration(mdp)
        for h in range(mdp.horizon):
            v_next = V[h + 1] if h + 1 < mdp.horizon else np.zeros(mdp.num_states)
            resid = Q[h] - (mdp.rewards[h] + mdp.discount * mdp.transitions[h] @ v_next)
            assert np.max(np.abs(resid)) <= 1e-10

    def test_greedy_on_qstar_is_optimal(self, rng):
        mdp = random_mdp(rng, 5, 3, 4)
        Q, V = value_iteration(mdp)
        np.testing.assert_allclose(evaluate_policy(mdp, greedy_policy(Q)), V, atol=1e-12)

    def test_uniform_policy_averages(self, rng):
        mdp = random_mdp(rng, 3, 2, 1)
        V = evaluate_policy(mdp, np.full((1, 3, 2), 0.5))
        np.testing.assert_allclose(V[0], mdp.rewards[0].mean(axis=1))

    def test_dominance(self, rng):
        mdp = random_mdp(rng, 5, 3, 4)
        _, V = value_iteration(mdp)
        for _ in range(10):
            pol = rng.integers(3, size=(4, 5))
            assert np.all(evaluate_policy(mdp, pol) <= V + 1e-12)

    def test_monte_carlo(self, rng):
        mdp = random_mdp(rng, 3, 2, 3, discount=0.9)
        pol = rng.integers(2, size=(3, 3))
        V = evaluate_policy(mdp, pol)
        disc = mdp.discount ** np.arange(3)
        returns = np.array(
            [disc @ [s.reward for s in rollout(mdp, pol, rng)] for _ in range(100_000)]
        )
        se = returns.std() / np.sqrt(len(returns))
        # rewards are deterministic and H = 3, so the discounted return equals the value in expectation
        assert abs(returns.mean() - V[0, 0]) <= 3 * se + 1e-12

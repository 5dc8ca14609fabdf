import numpy as np
import pytest

from src.controllers import PurePursuitConfig, PurePursuitController
from src.errors import DimensionError
from src.learn import TrainConfig, init_policy
from src.learn.bc import bc_train
from src.learn.ppo import ppo_train
from src.learn.trainer import evaluate_policy
from src.sim.episode import Environment, SimConfig, VecEnvironment

TINY = TrainConfig(
    n_envs=2,
    n_steps=16,
    total_timesteps=64,
    update_epochs=2,
    num_minibatches=2,
    hidden_sizes=(16,),
    learning_rate=1e-3,
    seed=3,
)


def make_envs(oval, params, count: int = 2, max_steps: int = 30) -> VecEnvironment:
    return VecEnvironment(
        [
            Environment(
                grid=oval.grid,
                raceline=oval.raceline,
                params=params,
                controller=PurePursuitController(PurePursuitConfig(), params),
                sim=SimConfig(beam_count=12, max_steps=max_steps),
                seed=seed,
            )
            for seed in range(count)
        ]
    )


def test_bc_training_run(oval, params):
    envs = make_envs(oval, params)
    fired: list[int] = []

    result = bc_train(envs, TINY, on_checkpoint=lambda _policy, step: fired.append(step), checkpoint_interval=32)

    assert result.global_step == 64
    assert [row["step"] for row in result.losses] == [32.0, 64.0]
    assert all(np.isfinite(row["bc_loss"]) for row in result.losses)
    # Both environments hit the 30-step limit at least once.
    assert len(result.returns) >= 2
    assert fired == [32, 64]
    assert result.policy.observation_dim == envs.observation_dim


def test_bc_training_is_reproducible(oval, params):
    first = bc_train(make_envs(oval, params), TINY)
    second = bc_train(make_envs(oval, params), TINY)

    assert first.returns == second.returns
    for a, b in zip(first.policy.parameters(), second.policy.parameters()):
        np.testing.assert_array_equal(a, b)


def test_ppo_bootstraps_from_cloned_actor(oval, params):
    envs = make_envs(oval, params)
    cloned = bc_train(envs, TINY).policy
    actor_before = [p.copy() for p in cloned.actor.parameters()]

    result = ppo_train(make_envs(oval, params), TINY, bootstrap=cloned)

    assert result.global_step == 64
    assert set(result.losses[0]) == {
        "step",
        "actor_loss",
        "critic_loss",
        "entropy",
        "approx_kl",
        "clip_fraction",
        "grad_norm",
    }
    # The bootstrap policy is copied, never trained in place.
    for a, b in zip(actor_before, cloned.actor.parameters()):
        np.testing.assert_array_equal(a, b)
    assert result.policy is not cloned


def test_ppo_from_scratch(oval, params):
    result = ppo_train(make_envs(oval, params), TINY)

    assert len(result.losses) == TINY.num_updates
    assert all(np.isfinite(row["critic_loss"]) for row in result.losses)


def test_bootstrap_with_wrong_shape_is_rejected(oval, params):
    wrong = init_policy(7, 10, np.random.default_rng(0), hidden_sizes=(16,))

    with pytest.raises(DimensionError):
        ppo_train(make_envs(oval, params), TINY, bootstrap=wrong)


def test_evaluation_summary(oval, params):
    envs = make_envs(oval, params, count=1, max_steps=20)
    policy = init_policy(envs.observation_dim, envs.action_dim, np.random.default_rng(1), hidden_sizes=(16,))

    summary = evaluate_policy(envs.envs[0], policy, episodes=3, seed=10)

    assert len(summary.logs) == 3
    assert 0.0 <= summary.collision_rate <= 1.0
    assert summary.completion_rate == 0.0
    assert summary.max_abs_offset <= 1.0
    row = summary.as_row()
    assert row["episodes"] == 3.0
    assert set(row) >= {"return_mean", "return_std", "max_cross_track_error"}

    again = evaluate_policy(envs.envs[0], policy, episodes=3, seed=10)
    assert again.return_mean == summary.return_mean

import dataclasses
import math

import numpy as np
import pytest

from searchlab import demos, policy, tasks, train_rl, world


# ---------------------------------------------------------------------------
# Reward accounting
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def traced_rollout():
    """A 20-step Pick&Place rollout that sights, grabs, carries, places, and
    stops, starting two steps from the object."""
    scene = world.generate_scene(2)
    scene, episodes = tasks.generate_episodes(scene, tasks.PICKPLACE, 2, seed=2)
    episode = next(e for e in episodes if e.id == "ep-scene-2-pickplace-2-0")
    episode = dataclasses.replace(
        episode, start_pose=world.AgentPose(2.875, 2.375, 270.0, 0.0))
    demo = demos.shortest_path_demo(scene, episode)
    assert demo.success and len(demo.steps) == 20
    return scene, episode, [s.action for s in demo.steps]


def test_hand_traced_pickplace_rewards(traced_rollout):
    scene, episode, actions = traced_rollout
    got = train_rl.scripted_rollout_rewards(scene, episode, actions)
    s = -1e-4  # slack, paid every step
    expected = [
        0.25 + s,                         # t=0  explore: new patch, 0.25*0.995^0/1
        0.25 * 0.995 / 2 + s,             # t=1  explore: same patch, visit 2, decay^1
        1.5 + s,                          # t=2  LOOK_DOWN sights the book: +r_seen
        s, s, s, s, s, s,                 # t=3..8 turning in place, slack only
        2.0 + (math.sqrt(2) / 2 - 1.0) + s,  # t=9 grab +2.0; shaping target switches
                                             # from book to counter (0.2929 m farther)
        s, s, s, s, s, s,                 # t=10..15 turning back, slack only
        0.25 + s,                         # t=16 forward: geodesic to counter -0.25
        s,                                # t=17 forward along an equidistant cell
        2.0 + 0.5 + s,                    # t=18 release places the book: +2.0,
                                          #      shaping target reverts (+0.5)
        5.5 + s,                          # t=19 STOP on success: +r_success
    ]
    assert len(got) == 20
    for t, (g, e) in enumerate(zip(got, expected)):
        assert g == pytest.approx(e, abs=1e-12), f"step {t}: {g!r} != {e!r}"
    # the four landmark terms, exactly
    assert got[0] == 0.25 - 1e-4
    assert got[2] == 1.5 - 1e-4
    assert got[9] - (2.0 - 1e-4) == pytest.approx(math.sqrt(2) / 2 - 1.0, abs=1e-12)
    assert got[19] == 5.5 - 1e-4


def test_slack_charged_every_step(traced_rollout):
    scene, episode, actions = traced_rollout
    config = train_rl.RewardConfig(r_success=0.0, r_seen=0.0, r_grab_release=0.0,
                                   explore_scale=0.0)
    rewards = train_rl.scripted_rollout_rewards(scene, episode, actions, config)
    # with all bonuses off, only slack and geodesic shaping remain; turning
    # steps are pure slack
    for t in (3, 4, 5, 10, 11):
        assert rewards[t] == config.r_slack


def test_explore_reward_decays_and_divides(traced_rollout):
    scene, episode, actions = traced_rollout
    config = train_rl.RewardConfig(r_seen=0.0)
    state = train_rl.RewardState(visits={}, object_seen=False,
                                 last_geodesic=None, t=0, held=None)
    # revisiting the same patch k times pays scale * decay^t / k
    sim = tasks.Sim(scene, episode)
    sim.reset()
    cache = train_rl.GeodesicCache(scene)
    values = []
    for t, action in enumerate(actions[:2]):
        s, obs, outcome = sim.step(action)
        r, state = train_rl.reward_step(scene, episode, config, state, s, obs,
                                        outcome, cache)
        values.append(r - config.r_slack)
    assert values[0] == 0.25
    assert values[1] == 0.25 * 0.995 / 2


def test_no_explore_after_sighting(traced_rollout):
    scene, episode, actions = traced_rollout
    got = train_rl.scripted_rollout_rewards(scene, episode, actions)
    # t=3..8: object already seen, agent turns in place -> no explore term
    for t in range(3, 9):
        assert got[t] == -1e-4


def test_drop_far_from_receptacle_penalized():
    scene = world.generate_scene(2)
    scene, episodes = tasks.generate_episodes(scene, tasks.PICKPLACE, 2, seed=2)
    episode = next(e for e in episodes if e.id == "ep-scene-2-pickplace-2-0")
    episode = dataclasses.replace(
        episode, start_pose=world.AgentPose(2.875, 2.375, 270.0, 0.0))
    demo = demos.shortest_path_demo(scene, episode)
    actions = [s.action for s in demo.steps]
    # grab as scripted, then walk away and release > 2 m from the counter
    grab_at = actions.index(tasks.GRAB_RELEASE)
    tampered = (actions[: grab_at + 1] + [tasks.TURN_LEFT] * 7 +
                [tasks.MOVE_FORWARD] * 16 + [tasks.GRAB_RELEASE])
    with_pen = train_rl.scripted_rollout_rewards(scene, episode, tampered)
    no_pen = train_rl.scripted_rollout_rewards(
        scene, episode, tampered,
        train_rl.RewardConfig(r_drop_penalty=0.0))
    # the two traces differ only by the drop penalty on the release step
    assert with_pen[:-1] == no_pen[:-1]
    assert with_pen[-1] - no_pen[-1] == -3.5


def test_reward_config_defaults():
    config = train_rl.RewardConfig()
    assert config.r_success == 5.5
    assert config.r_seen == 1.5
    assert config.r_grab_release == 2.0
    assert config.r_drop_penalty == -3.5
    assert config.r_slack == -1e-4
    assert config.explore_scale == 0.25
    assert config.decay == 0.995


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_rl_setup():
    scene = world.generate_scene(31)
    scene, episodes = tasks.generate_episodes(scene, tasks.OBJECTNAV, 4, seed=2)
    categories = sorted({o.category for o in scene.objects})
    config = policy.config_for_scene_catalog(
        tasks.OBJECTNAV, categories, rnn_hidden=16, seed=0)
    return [(scene, ep) for ep in episodes], config


def test_rl_training_runs_and_is_deterministic(tiny_rl_setup):
    train_set, config = tiny_rl_setup
    trainer = train_rl.TrainerConfig(workers=4, rollout_steps=8,
                                     max_env_steps=600, seed=5)
    reward = train_rl.RewardConfig()
    a = train_rl.rl_train(train_set, reward, trainer, config)
    b = train_rl.rl_train(train_set, reward, trainer, config)
    assert a.env_steps == b.env_steps
    assert a.reward_curve == b.reward_curve
    for key in a.params:
        assert np.array_equal(a.params[key], b.params[key])
    assert a.env_steps >= 600
    assert a.updates > 0


def test_rl_tracks_episode_returns(tiny_rl_setup):
    train_set, config = tiny_rl_setup
    trainer = train_rl.TrainerConfig(workers=2, rollout_steps=8,
                                     max_env_steps=400, seed=1)
    result = train_rl.rl_train(train_set, train_rl.RewardConfig(), trainer, config)
    assert all(np.isfinite(r) for _, r in result.reward_curve)

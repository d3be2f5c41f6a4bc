import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchlab import demos, policy, tasks, train_bc, world

F, L, R, S = (tasks.MOVE_FORWARD, tasks.TURN_LEFT, tasks.TURN_RIGHT, tasks.STOP)


def _fake_demo(actions):
    pose = world.AgentPose(0.0, 0.0, 0.0, 0.0)
    steps = [demos.DemoStep(a, pose, None, 100 * (i + 1))
             for i, a in enumerate(actions)]
    return demos.Demonstration("ep", "shortest", steps, True, 1.0)


def test_coefficient_reference_sequence():
    # [F, F, F, L, L, S]: 6 actions, inflections at t=0 (first step), t=3, t=5
    assert train_bc.compute_inflection_coefficient([_fake_demo([F, F, F, L, L, S])]) == 2.0


def test_count_inflections():
    assert train_bc.count_inflections([]) == 0
    assert train_bc.count_inflections([F]) == 1
    assert train_bc.count_inflections([F, F, F]) == 1
    assert train_bc.count_inflections([F, L, F, L]) == 4


def test_inflection_weights_pattern():
    w = train_bc.inflection_weights([F, F, F, L, L, S], 2.0)
    assert np.array_equal(w, [2.0, 1.0, 1.0, 2.0, 1.0, 2.0])


def test_coefficient_one_weights_are_uniform():
    w = train_bc.inflection_weights([F, F, L, S, S], 1.0)
    assert np.array_equal(w, np.ones(5))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([F, L, R, S]), min_size=1, max_size=40))
def test_coefficient_at_least_one(actions):
    coeff = train_bc.compute_inflection_coefficient([_fake_demo(actions)])
    assert coeff >= 1.0


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        train_bc.compute_inflection_coefficient([])


@pytest.fixture(scope="module")
def tiny_bc_setup():
    scene = world.generate_scene(30)
    scene, episodes = tasks.generate_episodes(scene, tasks.OBJECTNAV, 3, seed=1)
    corpus = [(scene, ep, demos.shortest_path_demo(scene, ep)) for ep in episodes]
    categories = sorted({o.category for o in scene.objects})
    config = policy.config_for_scene_catalog(
        tasks.OBJECTNAV, categories, rnn_hidden=16, seed=0)
    return corpus, config


def test_weighted_loss_with_coefficient_one_is_unweighted(tiny_bc_setup):
    corpus, config = tiny_bc_setup
    encoder = policy.ObsEncoder(config)
    items = train_bc.prepare_corpus(corpus, encoder)
    params = policy.init_params(config)
    seq_w, targets_w, weights_w = train_bc.batch_items(items, encoder, 1.0, True)
    seq_u, targets_u, weights_u = train_bc.batch_items(items, encoder, 1.0, False)
    assert np.array_equal(weights_w, weights_u)
    loss_w, grads_w = train_bc.bc_loss(params, config, seq_w, targets_w, weights_w)
    loss_u, grads_u = train_bc.bc_loss(params, config, seq_u, targets_u, weights_u)
    assert loss_w == loss_u  # bit-for-bit
    for key in grads_w:
        assert np.array_equal(grads_w[key], grads_u[key])


def test_training_is_deterministic(tiny_bc_setup):
    corpus, config = tiny_bc_setup
    bc = train_bc.BCConfig(epochs=2, batch_episodes=2, seed=7)
    a = train_bc.train(corpus, bc, config)
    b = train_bc.train(corpus, bc, config)
    assert a.loss_curve == b.loss_curve
    for key in a.final_params:
        assert np.array_equal(a.final_params[key], b.final_params[key])


def test_parallel_workers_match_single_process(tiny_bc_setup):
    corpus, config = tiny_bc_setup
    one = train_bc.train(corpus, train_bc.BCConfig(epochs=2, batch_episodes=2,
                                                   seed=7, workers=1), config)
    two = train_bc.train(corpus, train_bc.BCConfig(epochs=2, batch_episodes=2,
                                                   seed=7, workers=2), config)
    again = train_bc.train(corpus, train_bc.BCConfig(epochs=2, batch_episodes=2,
                                                     seed=7, workers=2), config)
    # sharded gradients recombine exactly up to float reassociation
    for key in one.final_params:
        np.testing.assert_allclose(two.final_params[key], one.final_params[key],
                                   rtol=0, atol=1e-9)
        assert np.array_equal(two.final_params[key], again.final_params[key])


def test_training_reduces_loss(tiny_bc_setup):
    corpus, config = tiny_bc_setup
    bc = train_bc.BCConfig(epochs=25, batch_episodes=4, seed=3)
    result = train_bc.train(corpus, bc, config)
    first = result.loss_curve[0][1]
    last = result.loss_curve[-1][1]
    assert last < first * 0.8


def test_overfit_memorizes_actions(tiny_bc_setup):
    corpus, config = tiny_bc_setup
    bc = train_bc.BCConfig(epochs=60, batch_episodes=4, learning_rate=3e-3, seed=3)
    result = train_bc.train(corpus, bc, config)
    encoder = policy.ObsEncoder(config)
    items = train_bc.prepare_corpus(corpus, encoder)
    acc = train_bc.action_prediction_accuracy(result.final_params, config, items,
                                              encoder)
    assert acc > 0.9


def test_evaluate_policy_reports_env_steps(tiny_bc_setup):
    corpus, config = tiny_bc_setup
    params = policy.init_params(config)
    eval_set = [(scene, ep) for scene, ep, _ in corpus]
    result = train_bc.evaluate_policy(params, config, eval_set, seed=0)
    assert result.env_steps > 0
    assert 0.0 <= result.success_rate <= 1.0
    assert len(result.records) == len(eval_set)

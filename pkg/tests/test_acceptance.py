"""Acceptance gate: one printed PASS/FAIL line per criterion (A1-A11).

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
lines as they complete.  A3, A10 and A11 share one training setup (built
once per session) and together dominate the runtime; their wall-clock
budgets are stated for an 8-core machine, so each line also reports the
measured time normalized by ``min(cpu_count, 8) / 8``.
"""

import dataclasses
import math
import os
import time

import numpy as np
import pytest

from searchlab import demos, metrics, policy, tasks, teleop, train_bc, train_rl, world

import conftest
from test_metrics import oc_oracle, sc_oracle
from test_policy import gradient_check
from test_world import dijkstra_oracle, viewpoints_oracle


def _report(name: str, ok: bool, detail: str) -> None:
    line = f"{name}: {'PASS' if ok else 'FAIL'} - {detail}"
    conftest.acceptance_lines.append(line)
    print("\n" + line, flush=True)
    assert ok, f"{name}: {detail}"


def _cores() -> int:
    return len(os.sched_getaffinity(0))


def _normalized(seconds: float) -> float:
    """Wall-clock scaled to the criterion's 8-core reference machine,
    assuming the embarrassingly parallel phases (demo generation, batched
    training shards, evaluation chunks) scale with core count."""
    return seconds * min(_cores(), 8) / 8.0


# ---------------------------------------------------------------------------
# A1 - shortest-path corpus quality
# ---------------------------------------------------------------------------


def test_a1_shortest_corpus_quality():
    t0 = time.monotonic()
    records = []
    for i in range(20):
        scene = world.generate_scene(500 + i)
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 10, seed=i)
        for ep in eps:
            demo = demos.shortest_path_demo(scene, ep)
            records.append(metrics.record_from_demo(scene, ep, demo))
    elapsed = time.monotonic() - t0
    successes = sum(r.success for r in records)
    mean_spl = metrics.spl(records)
    ok = successes == 200 and mean_spl >= 0.90 and elapsed < 120
    _report("A1", ok, f"{successes}/200 success, SPL {mean_spl:.4f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# A2 - exploration statistics of the scripted corpus
# ---------------------------------------------------------------------------


def test_a2_exploration_statistics():
    t0 = time.monotonic()
    cfg = world.SceneConfig(grid_rows=64, grid_cols=64, room_count_range=(6, 9),
                            object_count_range=(10, 14))
    profile = demos.ExplorerProfile(panoramic_prob=0.1,
                                    frontier_tie_break="random",
                                    frontier_lease_steps=100)
    pairs = []
    sidx = 0
    while len(pairs) < 100:
        scene = world.generate_scene(sidx, cfg)
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 20, seed=sidx)
        kept = 0
        for ep in eps:
            if ep.task.goal_category not in ("book", "clock"):
                continue
            if metrics.shortest_path_length(scene, ep) < 5.0:
                continue
            kept += 1
            scripted = demos.scripted_explorer_demo(scene, ep, seed=31 * sidx + kept,
                                                    profile=profile)
            shortest = demos.shortest_path_demo(scene, ep)
            pairs.append((scene, ep, scripted, shortest))
            if kept >= 4 or len(pairs) >= 100:
                break
        sidx += 1
    oc_s, oc_p, sc_s, sc_p = [], [], [], []
    for scene, ep, scripted, shortest in pairs:
        rec_s = metrics.record_from_demo(scene, ep, scripted)
        rec_p = metrics.record_from_demo(scene, ep, shortest)
        oc_s.append(metrics.occupancy_coverage(rec_s, scene))
        oc_p.append(metrics.occupancy_coverage(rec_p, scene))
        sc_s.append(metrics.sight_coverage(rec_s, scene))
        sc_p.append(metrics.sight_coverage(rec_p, scene))
    elapsed = time.monotonic() - t0
    oc_ratio = np.mean(oc_s) / np.mean(oc_p)
    sc_ratio = np.mean(sc_s) / np.mean(sc_p)
    ok = oc_ratio >= 2.0 and sc_ratio >= 1.5 and elapsed < 300
    _report("A2", ok, f"OC ratio {oc_ratio:.3f}x (>=2), SC ratio {sc_ratio:.3f}x "
                      f"(>=1.5), {len(pairs)} episodes, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# A3 / A10 / A11 - shared behavior-cloning setup
# ---------------------------------------------------------------------------

A3_TRAIN_SCENES = 20
A3_HELDOUT_SCENES = 5
A3_SCRIPTED_PER_SCENE = 100  # 2000 demos total
A3_EVAL_PER_SCENE = 40  # 200 episodes total


def _a3_train_scene(i):
    return world.generate_scene(100 + i)


def _a3_heldout_scene(i):
    return world.generate_scene(200 + i)


def _a3_scripted_for_scene(sidx, want):
    scene = _a3_train_scene(sidx)
    out, dseed, ep_seed = [], 0, 0
    while len(out) < want and ep_seed < 200:
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 10,
                                             seed=1000 * sidx + ep_seed)
        for ep in eps:
            demo = demos.scripted_explorer_demo(scene, ep, seed=31 * sidx + dseed)
            dseed += 1
            if demo.success:
                out.append((scene, ep, demo))
                if len(out) >= want:
                    break
        ep_seed += 1
    return out


def _a3_shortest_for_scene(sidx, want_steps):
    scene = _a3_train_scene(sidx)
    out, total, ep_seed = [], 0, 500
    while total < want_steps and ep_seed < 2000:
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 10,
                                             seed=1000 * sidx + ep_seed)
        for ep in eps:
            demo = demos.shortest_path_demo(scene, ep)
            if demo.success:
                out.append((scene, ep, demo))
                total += len(demo.steps)
                if total >= want_steps:
                    break
        ep_seed += 1
    return out


def _a3_bc_config():
    workers = min(_cores(), 8)
    return train_bc.BCConfig(epochs=20, batch_episodes=32, learning_rate=1e-3,
                             workers=workers if workers > 1 else 1, seed=5)


@pytest.fixture(scope="session")
def a3_setup():
    """Corpora, policy config and evaluation set shared by A3/A10/A11."""
    t0 = time.monotonic()
    scripted, per_scene_steps = [], []
    for i in range(A3_TRAIN_SCENES):
        part = _a3_scripted_for_scene(i, A3_SCRIPTED_PER_SCENE)
        per_scene_steps.append(sum(len(d.steps) for _, _, d in part))
        scripted += part
    shortest = []
    for i in range(A3_TRAIN_SCENES):
        shortest += _a3_shortest_for_scene(i, per_scene_steps[i])
    gen_seconds = time.monotonic() - t0

    cats = sorted({o.category for i in range(A3_TRAIN_SCENES)
                   for o in _a3_train_scene(i).objects}
                  | {o.category for i in range(A3_HELDOUT_SCENES)
                     for o in _a3_heldout_scene(i).objects})
    pconfig = policy.config_for_scene_catalog(tasks.OBJECTNAV, cats,
                                              rnn_hidden=128, seed=0)
    eval_set = []
    for i in range(A3_HELDOUT_SCENES):
        scene = _a3_heldout_scene(i)
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV,
                                             A3_EVAL_PER_SCENE, seed=900 + i)
        eval_set += [(scene, e) for e in eps]
    return {"scripted": scripted, "shortest": shortest, "pconfig": pconfig,
            "eval_set": eval_set, "gen_seconds": gen_seconds}


@pytest.fixture(scope="session")
def a3_results(a3_setup):
    """Both trained arms and their held-out evaluations, with timings."""
    out = {"gen_seconds": a3_setup["gen_seconds"]}
    for name in ("scripted", "shortest"):
        t0 = time.monotonic()
        result = train_bc.train(a3_setup[name], _a3_bc_config(),
                                a3_setup["pconfig"])
        train_seconds = time.monotonic() - t0
        t0 = time.monotonic()
        ev = train_bc.evaluate_policy(result.final_params, a3_setup["pconfig"],
                                      a3_setup["eval_set"], seed=0)
        out[name] = {"train": result, "eval": ev,
                     "train_seconds": train_seconds,
                     "eval_seconds": time.monotonic() - t0}
    return out


def test_a3_explorer_demos_beat_shortest_demos(a3_setup, a3_results):
    n_scripted = len(a3_setup["scripted"])
    succ_i = a3_results["scripted"]["eval"].success_rate
    succ_ii = a3_results["shortest"]["eval"].success_rate
    gap = (succ_i - succ_ii) * 100
    wall = (a3_results["gen_seconds"]
            + sum(a3_results[n]["train_seconds"] + a3_results[n]["eval_seconds"]
                  for n in ("scripted", "shortest")))
    norm = _normalized(wall)
    ok = (n_scripted == 2000 and gap >= 15.0 and succ_i >= 0.30
          and norm <= 45 * 60)
    _report("A3", ok,
            f"scripted {succ_i:.1%} vs shortest {succ_ii:.1%} (gap {gap:.1f} pts, "
            f"need >=15 and scripted >=30%), {n_scripted} demos, wall {wall:.0f}s "
            f"on {_cores()} core(s) = {norm:.0f}s 8-core-normalized (<=2700s)")


# ---------------------------------------------------------------------------
# A4 - analytic gradients vs central finite differences
# ---------------------------------------------------------------------------


def test_a4_gradient_check():
    t0 = time.monotonic()
    worst = 0.0
    for seed in range(20):
        variant = tasks.OBJECTNAV if seed % 2 == 0 else tasks.PICKPLACE
        worst = max(worst, gradient_check(seed, variant))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-4 and elapsed < 120
    _report("A4", ok, f"max relative error {worst:.2e} over 20 configs "
                      f"(<=1e-4), {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# A5 - inflection coefficient
# ---------------------------------------------------------------------------


def test_a5_inflection_coefficient():
    actions = [tasks.MOVE_FORWARD, tasks.MOVE_FORWARD, tasks.MOVE_FORWARD,
               tasks.TURN_LEFT, tasks.TURN_LEFT, tasks.STOP]
    demo = demos.Demonstration(
        episode_id="a5", source="scripted", success=True, path_length=1.0,
        steps=[demos.DemoStep(a, world.AgentPose(0, 0, 0, 0), None, 0)
               for a in actions])
    coeff = train_bc.compute_inflection_coefficient([demo])
    scene = world.generate_scene(30)
    scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 2, seed=1)
    corpus = [(scene, ep, demos.shortest_path_demo(scene, ep)) for ep in eps]
    encoder = policy.ObsEncoder(
        policy.config_for_scene_catalog(
            tasks.OBJECTNAV, sorted({o.category for o in scene.objects}),
            rnn_hidden=16, seed=0))
    items = train_bc.prepare_corpus(corpus, encoder)
    params = policy.init_params(encoder.config)
    seq_w, t_w, w_w = train_bc.batch_items(items, encoder, 1.0, True)
    seq_u, t_u, w_u = train_bc.batch_items(items, encoder, 1.0, False)
    loss_w, grads_w = train_bc.bc_loss(params, encoder.config, seq_w, t_w, w_w)
    loss_u, grads_u = train_bc.bc_loss(params, encoder.config, seq_u, t_u, w_u)
    bitwise = (loss_w == loss_u
               and all(np.array_equal(grads_w[k], grads_u[k]) for k in grads_w))
    ok = coeff == 2.0 and bitwise
    _report("A5", ok, f"[F,F,F,L,L,S] coefficient {coeff} (==2.0 exactly); "
                      f"coefficient-1 weighting bit-identical: {bitwise}")


# ---------------------------------------------------------------------------
# A6 - motion model timings
# ---------------------------------------------------------------------------


def _a6_record(variant, action):
    poses = [world.AgentPose(0, 0, 0, 0)] * 2
    return metrics.TrajectoryRecord(
        episode_id="a6", variant=variant, source="scripted", poses=poses,
        actions=[action], success=True, shortest_path_length=1.0,
        path_length=1.0, goal_position=None)


def test_a6_motion_model():
    turn = metrics.estimate_real_time(_a6_record(tasks.OBJECTNAV, tasks.TURN_LEFT))
    fwd = metrics.estimate_real_time(_a6_record(tasks.OBJECTNAV, tasks.MOVE_FORWARD))
    grab = metrics.estimate_real_time(_a6_record(tasks.PICKPLACE, tasks.GRAB_RELEASE))
    ok = (abs(turn - 5.7922) <= 1e-9 and abs(fwd - 1.412) <= 1e-9
          and abs(grab - 0.992) <= 1e-9)
    _report("A6", ok, f"30-degree turn {turn:.4f}s (5.7922), forward {fwd:.3f}s "
                      f"(1.412), grab {grab:.3f}s (0.992), each to 1e-9")


# ---------------------------------------------------------------------------
# A7 - replay determinism for all three sources
# ---------------------------------------------------------------------------


def _a7_replay_all(triples):
    worst = 0.0
    for scene, ep, demo in triples:
        result = demos.replay(scene, ep, demo)
        assert result.divergences == [], f"divergence replaying {demo.episode_id}"
        assert result.success == demo.success, f"success flag mismatch {demo.episode_id}"
    return worst


def test_a7_replay_determinism(tmp_path):
    shortest, scripted, human = [], [], []
    # shortest: both task variants
    for i in range(10):
        scene = world.generate_scene(700 + i)
        variant = tasks.OBJECTNAV if i % 2 == 0 else tasks.PICKPLACE
        scene, eps = tasks.generate_episodes(scene, variant, 10, seed=i)
        shortest += [(scene, ep, demos.shortest_path_demo(scene, ep)) for ep in eps]
    # scripted explorer (success not required; flags must round-trip)
    for i in range(10):
        scene = world.generate_scene(720 + i)
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 10, seed=i)
        scripted += [(scene, ep, demos.scripted_explorer_demo(scene, ep, seed=i * 100 + j))
                     for j, ep in enumerate(eps)]
    # human: drive the teleop service through its wire protocol
    ledger = tmp_path / "human.jsonl"
    for i in range(10):
        scene = world.generate_scene(740 + i)
        scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 10, seed=i)
        service = teleop.TeleopService({"nav": [(scene, e) for e in eps]}, ledger)
        for ep in eps:
            handler = teleop.ProtocolHandler(service)
            seq = [0]

            def send(**payload):
                seq[0] += 1
                payload.setdefault("v", teleop.PROTOCOL_VERSION)
                payload["seq"] = seq[0]
                import json as _json
                return handler.handle(_json.dumps(payload))

            out = send(type="start", user="acceptance", task=tasks.OBJECTNAV,
                       dataset="nav")
            served = tasks.episode_from_dict(out[0]["episode"])
            drive = demos.shortest_path_demo(scene, served)
            for step in drive.steps:
                send(type="action", name=tasks.ACTION_NAMES[step.action])
                handler.tick()
            send(type="submit")
            human.append((scene, served))
    loaded, diagnostics = demos.load_demos(ledger)
    assert diagnostics == []
    assert len(loaded) == 100
    human_triples = [(scene, ep, demo)
                     for (scene, ep), demo in zip(human, loaded)]
    for triples, n in ((shortest, 100), (scripted, 100), (human_triples, 100)):
        assert len(triples) == n
        _a7_replay_all(triples)
    ok = True
    _report("A7", ok, "100 shortest + 100 scripted + 100 human demos replay "
                      "with zero pose divergence (1e-9) and matching success flags")


# ---------------------------------------------------------------------------
# A8 - metric oracles on random small scenes
# ---------------------------------------------------------------------------


def test_a8_metric_oracles():
    rng = np.random.default_rng(88)
    checked = 0
    while checked < 20:
        rows = int(rng.integers(20, 41))
        cols = int(rng.integers(20, 41))
        seed = int(rng.integers(0, 100000))
        try:
            scene = world.generate_scene(seed, world.SceneConfig(
                grid_rows=rows, grid_cols=cols))
        except world.GenerationError:
            continue
        # geodesic distance vs independent Dijkstra, both connectivity modes
        sources = [scene.navigable_cells()[0], scene.navigable_cells()[-1]]
        for mode in (False, True):
            got = world.distance_field(scene, sources, no_corner_cut=mode)
            want = dijkstra_oracle(scene, sources, no_corner_cut=mode)
            assert np.array_equal(got, want), f"distance_field mismatch seed {seed}"
        # goal viewpoints vs brute-force oracle (corner-degenerate segments
        # are tie-order ambiguous and excluded by the oracle)
        obj = scene.objects[int(rng.integers(0, len(scene.objects)))]
        want_vp, ambiguous = viewpoints_oracle(scene, obj, 1.0)
        got_vp = set(world.goal_viewpoints(scene, obj, 1.0))
        assert got_vp - ambiguous == set(want_vp) - ambiguous, \
            f"goal_viewpoints mismatch seed {seed}"
        # OC / SC vs brute-force recomputation on a scripted trajectory
        try:
            scene, eps = tasks.generate_episodes(scene, tasks.OBJECTNAV, 1,
                                                 seed=seed)
        except (world.GenerationError, tasks.ProtocolError):
            continue
        demo = demos.scripted_explorer_demo(scene, eps[0], seed=seed)
        record = metrics.record_from_demo(scene, eps[0], demo)
        assert metrics.occupancy_coverage(record, scene) == oc_oracle(record, scene)
        assert metrics.sight_coverage(record, scene) == sc_oracle(record, scene)
        checked += 1
    _report("A8", True, "OC, SC, geodesic field (both modes) and goal "
                        "viewpoints match brute-force oracles exactly on "
                        "20 random scenes <=40x40")


# ---------------------------------------------------------------------------
# A9 - hand-traced reward accounting
# ---------------------------------------------------------------------------


def test_a9_reward_accounting():
    scene = world.generate_scene(2)
    scene, episodes = tasks.generate_episodes(scene, tasks.PICKPLACE, 2, seed=2)
    episode = next(e for e in episodes if e.id == "ep-scene-2-pickplace-2-0")
    episode = dataclasses.replace(
        episode, start_pose=world.AgentPose(2.875, 2.375, 270.0, 0.0))
    demo = demos.shortest_path_demo(scene, episode)
    assert demo.success and len(demo.steps) == 20
    got = train_rl.scripted_rollout_rewards(scene, episode,
                                            [s.action for s in demo.steps])
    s = -1e-4  # slack, paid every step
    expected = [
        0.25 + s, 0.25 * 0.995 / 2 + s, 1.5 + s,
        s, s, s, s, s, s,
        2.0 + (math.sqrt(2) / 2 - 1.0) + s,
        s, s, s, s, s, s,
        0.25 + s, s,
        2.0 + 0.5 + s,
        5.5 + s,
    ]
    exact = (len(got) == 20
             and all(g == pytest.approx(e, abs=1e-12)
                     for g, e in zip(got, expected))
             and got[0] == 0.25 - 1e-4        # explore at t=0
             and got[2] == 1.5 - 1e-4         # first sight
             and got[9] - (2.0 - 1e-4) == pytest.approx(math.sqrt(2) / 2 - 1.0,
                                                        abs=1e-12)  # grab
             and got[19] == 5.5 - 1e-4)       # success
    _report("A9", exact, "20-step PickPlace trace exact: 0.2499 explore at t=0, "
                         "1.4999 first sight, grab 2.0 + shaping at t=9, "
                         "5.4999 success at t=19")


# ---------------------------------------------------------------------------
# A10 - BC vs RL environment-step usage at equal wall-clock
# ---------------------------------------------------------------------------


def test_a10_bc_vs_rl_sample_use(a3_setup, a3_results):
    bc = a3_results["scripted"]
    bc_env_steps = bc["train"].total_demo_steps  # env steps spent gathering demos
    bc_wall = a3_results["gen_seconds"] / 2 + bc["train_seconds"]
    trainer = train_rl.TrainerConfig(workers=16, rollout_steps=32,
                                     max_env_steps=10**9,
                                     max_wall_seconds=bc_wall, seed=5)
    train_set = [(scene, ep) for scene, ep, _ in a3_setup["scripted"]]
    rl = train_rl.rl_train(train_set, train_rl.RewardConfig(), trainer,
                           a3_setup["pconfig"])
    rl_eval = train_bc.evaluate_policy(rl.params, a3_setup["pconfig"],
                                       a3_setup["eval_set"], seed=0)
    curve_tail = [(s, round(r, 3)) for s, r in rl.reward_curve[-3:]]
    ratio = rl.env_steps / bc_env_steps if bc_env_steps else float("inf")
    ok = bc_env_steps * 4 <= rl.env_steps
    parity = ("RL reached BC parity" if rl_eval.success_rate >= bc["eval"].success_rate
              else f"RL did not reach BC parity ({rl_eval.success_rate:.1%} vs "
                   f"{bc['eval'].success_rate:.1%}) - reported, not hidden")
    _report("A10", ok,
            f"BC used {bc_env_steps} env steps (demo corpus); RL used "
            f"{rl.env_steps} in an equal {bc_wall:.0f}s wall-clock budget "
            f"({ratio:.1f}x, need >=4x); RL reward curve tail {curve_tail}; "
            f"{parity}")


# ---------------------------------------------------------------------------
# A11 - dataset-size sweep
# ---------------------------------------------------------------------------


def test_a11_dataset_size_sweep(a3_setup, a3_results):
    # interleave scenes so every prefix spans all 20 training scenes
    by_rank = sorted(range(len(a3_setup["scripted"])),
                     key=lambda i: (i % A3_SCRIPTED_PER_SCENE,
                                    i // A3_SCRIPTED_PER_SCENE))
    corpus = [a3_setup["scripted"][i] for i in by_rank]
    successes = []
    for size in (250, 500, 1000, 2000):
        if size == 2000:
            ev = a3_results["scripted"]["eval"]
        else:
            result = train_bc.train(corpus[:size], _a3_bc_config(),
                                    a3_setup["pconfig"])
            ev = train_bc.evaluate_policy(result.final_params,
                                          a3_setup["pconfig"],
                                          a3_setup["eval_set"], seed=0)
        successes.append((size, ev.success_rate))
    ok = all(b >= a - 0.02 for (_, a), (_, b) in zip(successes, successes[1:]))
    _report("A11", ok, "success by corpus size: "
            + ", ".join(f"{n}: {s:.1%}" for n, s in successes)
            + " (non-decreasing within 2 pts)")

"""Shaped-reward reinforcement learning baseline.

Reward structure: sparse success bonus, per-step slack, count-decayed
exploration bonus until the task object is first sighted, a one-time sighting
bonus, geodesic-progress shaping thereafter, and grab/place/drop terms for
Pick&Place.  The trainer is an n-step advantage actor-critic over the same
recurrent policy used for behavior cloning, with batched episode workers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import policy, tasks, world
from .policy import NumericalError, ObsEncoder, PolicyConfig, RecurrentState
from .tasks import (
    GRAB_RELEASE,
    OBJECTNAV,
    PICKPLACE,
    Episode,
    Observation,
    Sim,
    SimState,
    StepOutcome,
)
from .train_bc import Adam, EvalResult, evaluate_policy
from .world import Scene


# ---------------------------------------------------------------------------
# Reward configuration and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RewardConfig:
    r_success: float = 5.5
    r_slack: float = -1e-4
    r_seen: float = 1.5
    r_drop_penalty: float = -3.5
    drop_distance_m: float = 2.0
    r_grab_release: float = 2.0
    explore_scale: float = 0.25
    decay: float = 0.995
    voxel_size: float = 2.5


@dataclass(frozen=True)
class RewardState:
    """Per-episode bookkeeping threaded through reward_step (immutable)."""
    visits: dict = field(default_factory=dict)  # patch -> visit count (>= 1)
    object_seen: bool = False
    last_geodesic: float | None = None
    t: int = 0
    held: int | None = None


def _patch_of(x: float, y: float, voxel: float) -> tuple[int, int]:
    return (int(math.floor(x / voxel)), int(math.floor(y / voxel)))


class GeodesicCache:
    """Distance fields keyed by target position, reused across steps."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self._fields: dict[tuple, np.ndarray] = {}

    def distance(self, pose_xy: tuple[float, float],
                 targets: list[tuple[float, float]]) -> float:
        best = math.inf
        cell = self.scene.cell_of(*pose_xy)
        if not self.scene.in_bounds(*cell) or self.scene.grid[cell]:
            return math.inf
        for pos in targets:
            key = (round(pos[0], 6), round(pos[1], 6))
            if key not in self._fields:
                tcell = self.scene.cell_of(*pos)
                self._fields[key] = world.distance_field(self.scene, [tcell])
            d = float(self._fields[key][cell])
            if d < best:
                best = d
        return best


def _target_positions(scene: Scene, episode: Episode, state: SimState) -> list[tuple[float, float]]:
    """Current navigation target(s): goal instances (ObjectNav); the task
    object until held, then the receptacle (Pick&Place)."""
    task = episode.task
    if task.variant == OBJECTNAV:
        return [o.position for o in tasks.effective_objects(scene, state)
                if o.category == task.goal_category]
    if state.held_object == task.object_id:
        return [tasks.object_state(scene, state, task.receptacle_id).position]
    return [tasks.object_state(scene, state, task.object_id).position]


def _task_object_category(scene: Scene, episode: Episode) -> str:
    if episode.task.variant == OBJECTNAV:
        return episode.task.goal_category
    return scene.object_by_id(episode.task.object_id).category


def reward_step(scene: Scene, episode: Episode, config: RewardConfig,
                prev: RewardState, state: SimState, obs: Observation,
                outcome: StepOutcome,
                cache: GeodesicCache | None = None) -> tuple[float, RewardState]:
    """Reward for the transition that produced (state, obs, outcome).

    Terms: slack every step; count-decayed exploration while the task object
    is unseen; +r_seen exactly once at first sighting; geodesic-progress
    shaping on steps after the sighting; grab/place/drop terms on held-state
    transitions; +r_success on the terminal success step.
    """
    if cache is None:
        cache = GeodesicCache(scene)
    task = episode.task
    reward = config.r_slack
    target_cat = _task_object_category(scene, episode)
    sighted_now = (not prev.object_seen) and any(
        lab == target_cat for lab in obs.rays.labels)
    seen = prev.object_seen or sighted_now

    visits = prev.visits
    if not seen:
        patch = _patch_of(state.pose.x, state.pose.y, config.voxel_size)
        visits = dict(prev.visits)
        visits[patch] = visits.get(patch, 0) + 1
        reward += config.explore_scale * config.decay ** prev.t / visits[patch]
    if sighted_now:
        reward += config.r_seen

    geo = cache.distance((state.pose.x, state.pose.y),
                         _target_positions(scene, episode, state))
    if prev.object_seen and prev.last_geodesic is not None \
            and math.isfinite(prev.last_geodesic) and math.isfinite(geo):
        reward += prev.last_geodesic - geo

    if task.variant == PICKPLACE:
        if prev.held is None and state.held_object == task.object_id:
            reward += config.r_grab_release
        elif prev.held == task.object_id and state.held_object is None:
            obj = tasks.object_state(scene, state, task.object_id)
            recep = tasks.object_state(scene, state, task.receptacle_id)
            d = math.hypot(obj.position[0] - recep.position[0],
                           obj.position[1] - recep.position[1])
            if d > config.drop_distance_m:
                reward += config.r_drop_penalty
            elif d <= episode.success_radius and obj.center_height > recep.center_height:
                reward += config.r_grab_release

    if outcome.status == "success":
        reward += config.r_success

    new = RewardState(visits=visits, object_seen=seen, last_geodesic=geo,
                      t=prev.t + 1, held=state.held_object)
    return reward, new


def scripted_rollout_rewards(scene: Scene, episode: Episode, actions: list[int],
                             config: RewardConfig | None = None) -> list[float]:
    """Per-step rewards of a scripted action sequence (the exact accounting
    the trainer logs)."""
    config = config or RewardConfig()
    sim = Sim(scene, episode)
    sim.reset()
    cache = GeodesicCache(scene)
    rs = RewardState()
    out = []
    for action in actions:
        state, obs, outcome = sim.step(action)
        r, rs = reward_step(scene, episode, config, rs, state, obs, outcome, cache)
        out.append(r)
        if state.done:
            break
    return out


# ---------------------------------------------------------------------------
# Actor-critic trainer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainerConfig:
    workers: int = 16
    rollout_steps: int = 32
    gamma: float = 0.99
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 2.5e-4
    max_env_steps: int = 100_000
    max_wall_seconds: float | None = None
    eval_every_updates: int = 0
    eval_episodes: int = 40
    reward_window: int = 50  # episodes averaged per curve point
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1 or self.rollout_steps < 1:
            raise ValueError("workers and rollout_steps must be positive")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")


@dataclass
class RLResult:
    reward_curve: list[tuple[int, float]]  # (env_steps, mean episodic return)
    eval_curve: list[tuple[int, float, float]]  # (env_steps, success, spl)
    grab_rate_curve: list[tuple[int, float]]  # (env_steps, grab events/episode)
    episode_returns: list[float]
    params: dict
    env_steps: int
    updates: int
    wall_seconds: float


class _Worker:
    """One episode slot of the batched rollout."""

    def __init__(self, index: int):
        self.index = index
        self.sim: Sim | None = None
        self.scene: Scene | None = None
        self.episode: Episode | None = None
        self.obs: Observation | None = None
        self.reward_state = RewardState()
        self.cache: GeodesicCache | None = None
        self.episode_return = 0.0
        self.grab_events = 0
        self.needs_reset = True

    def start(self, scene: Scene, episode: Episode,
              caches: dict[str, GeodesicCache]) -> None:
        self.scene = scene
        self.episode = episode
        self.sim = Sim(scene, episode)
        _, self.obs = self.sim.reset()
        self.reward_state = RewardState()
        if scene.id not in caches:
            caches[scene.id] = GeodesicCache(scene)
        self.cache = caches[scene.id]
        self.episode_return = 0.0
        self.grab_events = 0
        self.needs_reset = False


def rl_train(train_set: list[tuple[Scene, Episode]], reward_config: RewardConfig,
             trainer_config: TrainerConfig, policy_config: PolicyConfig,
             eval_set: list[tuple[Scene, Episode]] | None = None,
             params: dict | None = None, log_fn=None) -> RLResult:
    """n-step advantage actor-critic over batched episode workers.

    Deterministic per seed.  Episodes are assigned to workers round-robin
    from ``train_set``; a worker that finishes mid-rollout idles (mask 0)
    until the next rollout starts.
    """
    if not train_set:
        raise ValueError("empty training set")
    cfg = trainer_config
    encoder = ObsEncoder(policy_config)
    params = params if params is not None else policy.init_params(policy_config)
    opt = Adam(params, lr=cfg.learning_rate)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0xA2C])))

    workers = [_Worker(i) for i in range(cfg.workers)]
    caches: dict[str, GeodesicCache] = {}
    next_episode = 0
    hidden = RecurrentState.zeros(policy_config, cfg.workers)

    env_steps = 0
    updates = 0
    episode_returns: list[float] = []
    episode_grabs: list[int] = []
    reward_curve: list[tuple[int, float]] = []
    grab_rate_curve: list[tuple[int, float]] = []
    eval_curve: list[tuple[int, float, float]] = []
    t0 = time.monotonic()

    def out_of_budget() -> bool:
        if env_steps >= cfg.max_env_steps:
            return True
        return (cfg.max_wall_seconds is not None
                and time.monotonic() - t0 >= cfg.max_wall_seconds)

    while not out_of_budget():
        # (Re)start workers whose episodes ended during the last rollout.
        for w in workers:
            if w.needs_reset:
                scene, episode = train_set[next_episode % len(train_set)]
                next_episode += 1
                w.start(scene, episode, caches)
                for layer in hidden.hidden:
                    layer[w.index] = 0.0

        h_start = hidden.copy()
        T, B = cfg.rollout_steps, cfg.workers
        enc_steps: list[list[dict | None]] = [[None] * T for _ in range(B)]
        actions = np.zeros((T, B), dtype=np.int64)
        rewards = np.zeros((T, B))
        mask = np.zeros((T, B))
        done_at = [T] * B  # first masked-out step per worker

        for t in range(T):
            alive = [w.index for w in workers if not w.needs_reset]
            if not alive:
                break
            encoded = {i: encoder.encode_step(workers[i].obs) for i in alive}
            seq = encoder.build_sequence([[encoded[i]] for i in alive])
            h_sub = RecurrentState([layer[alive] for layer in hidden.hidden])
            logits, _, h_new, _ = policy.forward_sequence(params, policy_config, seq, h_sub)
            probs = policy.softmax(logits[0])
            for layer, new in zip(hidden.hidden, h_new.hidden):
                layer[alive] = new
            for j, i in enumerate(alive):
                w = workers[i]
                a = int(rng.choice(len(probs[j]), p=probs[j]))
                prev_held = w.sim.state.held_object
                state, obs, outcome = w.sim.step(a)
                env_steps += 1
                r, w.reward_state = reward_step(
                    w.scene, w.episode, reward_config, w.reward_state,
                    state, obs, outcome, w.cache)
                w.obs = obs
                w.episode_return += r
                if prev_held is None and state.held_object is not None:
                    w.grab_events += 1
                enc_steps[i][t] = encoded[i]
                actions[t, i] = a
                rewards[t, i] = r
                mask[t, i] = 1.0
                if state.done:
                    episode_returns.append(w.episode_return)
                    episode_grabs.append(w.grab_events)
                    done_at[i] = t + 1
                    w.needs_reset = True

        n_real = int(mask.sum())
        if n_real == 0:
            continue

        # Bootstrap values for workers still running at rollout end.
        bootstrap = np.zeros(B)
        alive = [w.index for w in workers if not w.needs_reset]
        if alive:
            seq = encoder.build_sequence(
                [[encoder.encode_step(workers[i].obs)] for i in alive])
            h_sub = RecurrentState([layer[alive] for layer in hidden.hidden])
            _, values_boot, _, _ = policy.forward_sequence(params, policy_config, seq, h_sub)
            for j, i in enumerate(alive):
                bootstrap[i] = values_boot[0, j]

        returns = np.zeros((T, B))
        running = bootstrap.copy()
        for t in reversed(range(T)):
            running = np.where(mask[t] > 0, rewards[t] + cfg.gamma * running, running)
            # A step that ended its episode has no successor value.
            for b in range(B):
                if t + 1 == done_at[b]:
                    running[b] = rewards[t, b]
            returns[t] = running

        # Re-run the rollout as one padded sequence to build the backward cache.
        per_episode = []
        for b in range(B):
            steps = [enc_steps[b][t] for t in range(done_at[b]) if enc_steps[b][t] is not None]
            per_episode.append(steps if steps else [_dummy_step(encoder, policy_config)])
        seq = encoder.build_sequence(per_episode)
        seq = replace_seq_mask(seq, mask[: seq.steps])
        logits, values, _, fcache = policy.forward_sequence(
            params, policy_config, seq, h_start)

        probs = policy.softmax(logits)
        Tc = seq.steps
        adv = (returns[:Tc] - values) * seq.mask
        logp = np.log(np.clip(probs, 1e-300, None))
        entropy = -(probs * logp).sum(axis=-1)
        onehot = np.zeros_like(probs)
        t_idx, b_idx = np.meshgrid(np.arange(Tc), np.arange(B), indexing="ij")
        onehot[t_idx, b_idx, actions[:Tc]] = 1.0

        pg = (probs - onehot) * adv[:, :, None]
        ent_grad = cfg.entropy_coef * probs * (logp + entropy[:, :, None])
        dlogits = (pg + ent_grad) * seq.mask[:, :, None] / n_real
        dvalues = cfg.value_coef * (values - returns[:Tc]) * seq.mask / n_real

        pg_loss = float((-logp[t_idx, b_idx, actions[:Tc]] * adv * seq.mask).sum() / n_real)
        v_loss = float((0.5 * cfg.value_coef
                        * ((values - returns[:Tc]) ** 2) * seq.mask).sum() / n_real)
        if not (math.isfinite(pg_loss) and math.isfinite(v_loss)):
            raise NumericalError(
                f"non-finite loss at update {updates} (pg={pg_loss}, v={v_loss})")

        grads = policy.backward_sequence(params, policy_config, fcache, dlogits, dvalues)
        opt.step(params, grads)
        updates += 1

        if episode_returns:
            win = cfg.reward_window
            reward_curve.append((env_steps, float(np.mean(episode_returns[-win:]))))
            grab_rate_curve.append((env_steps, float(np.mean(episode_grabs[-win:]))))
        if log_fn and updates % 20 == 0:
            recent = float(np.mean(episode_returns[-cfg.reward_window:])) \
                if episode_returns else float("nan")
            log_fn(f"update {updates}: env_steps {env_steps} "
                   f"mean return {recent:.3f} pg {pg_loss:.4f} v {v_loss:.4f}")
        if (eval_set and cfg.eval_every_updates
                and updates % cfg.eval_every_updates == 0):
            res = evaluate_policy(params, policy_config,
                                  eval_set[: cfg.eval_episodes], seed=cfg.seed)
            eval_curve.append((env_steps, res.success_rate, res.spl))
            if log_fn:
                log_fn(f"update {updates}: eval success {res.success_rate:.3f}")

    if eval_set:
        res = evaluate_policy(params, policy_config,
                              eval_set[: cfg.eval_episodes], seed=cfg.seed)
        eval_curve.append((env_steps, res.success_rate, res.spl))

    return RLResult(
        reward_curve=reward_curve,
        eval_curve=eval_curve,
        grab_rate_curve=grab_rate_curve,
        episode_returns=episode_returns,
        params=params,
        env_steps=env_steps,
        updates=updates,
        wall_seconds=time.monotonic() - t0,
    )


def _dummy_step(encoder: ObsEncoder, config: PolicyConfig) -> dict:
    """All-zero placeholder step for a worker with no real steps (mask 0)."""
    return {
        "labels": np.zeros(config.num_rays, dtype=np.int32),
        "depths": np.zeros(config.num_rays),
        "state": np.zeros(config.state_dim),
        "prev": 0,
        "goal": 0,
        "instr": np.zeros(0, dtype=np.int32),
    }


def replace_seq_mask(seq: policy.ObsSeq, mask: np.ndarray) -> policy.ObsSeq:
    return policy.ObsSeq(
        ray_labels=seq.ray_labels, ray_depths=seq.ray_depths, state=seq.state,
        prev_action=seq.prev_action, goal_ids=seq.goal_ids,
        instr_tokens=seq.instr_tokens, mask=mask,
    )

"""Behavior cloning on demonstration corpora with inflection weighting.

The inflection coefficient is a corpus constant (total actions / total
inflection points, counting each demonstration's first step as an
inflection); the per-step loss weight is that coefficient at inflection
steps and 1 elsewhere, and the loss is normalized by the weight sum.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from dataclasses import dataclass, field

import numpy as np

from . import demos as demos_mod
from . import metrics, policy, tasks, world
from .policy import ObsEncoder, ObsSeq, PolicyConfig, RecurrentState
from .tasks import Episode, Sim
from .world import Scene


@dataclass(frozen=True)
class BCConfig:
    epochs: int = 20
    batch_episodes: int = 64
    bptt_window: int = 64
    learning_rate: float = 2.5e-4
    inflection_weighting: bool = True
    eval_every_steps: int = 0  # 0 = only at epoch boundaries
    eval_episodes_per_point: int = 40
    seed: int = 0
    workers: int = 1  # gradient processes; >1 splits each batch across them

    def __post_init__(self):
        if self.epochs < 1 or self.batch_episodes < 1 or self.bptt_window < 1:
            raise ValueError("BCConfig values must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


# ---------------------------------------------------------------------------
# Inflection weighting
# ---------------------------------------------------------------------------


def count_inflections(actions: list[int]) -> int:
    """Inflection points of one demo; the first step always counts."""
    if not actions:
        return 0
    n = 1
    for prev, cur in zip(actions, actions[1:]):
        if cur != prev:
            n += 1
    return n


def compute_inflection_coefficient(corpus: list[demos_mod.Demonstration]) -> float:
    """Total actions / total inflections over the whole corpus (>= 1)."""
    if not corpus:
        raise ValueError("empty corpus")
    actions = sum(len(d.steps) for d in corpus)
    inflections = sum(count_inflections(d.actions) for d in corpus)
    if actions == 0:
        raise ValueError("corpus has no actions")
    return actions / inflections


def inflection_weights(actions: list[int], coefficient: float) -> np.ndarray:
    w = np.ones(len(actions))
    prev = None
    for i, a in enumerate(actions):
        if prev is None or a != prev:
            w[i] = coefficient
        prev = a
    return w


# ---------------------------------------------------------------------------
# Corpus preparation
# ---------------------------------------------------------------------------


@dataclass
class TrainingItem:
    """One demonstration, encoded for the network."""
    episode_id: str
    encoded_steps: list[dict]  # inputs o_0 .. o_{T-1}
    targets: np.ndarray  # (T,) actions
    actions: list[int]


def prepare_corpus(corpus: list[tuple[Scene, Episode, demos_mod.Demonstration]],
                   encoder: ObsEncoder) -> list[TrainingItem]:
    """Replay each demo once to collect observations, encoded for training.
    The input at step t is the observation before action t."""
    items = []
    for scene, episode, demo in corpus:
        if not demo.steps:
            continue
        result = demos_mod.replay(scene, episode, demo, collect_observations=True)
        inputs = result.observations[: len(demo.steps)]
        items.append(
            TrainingItem(
                episode_id=episode.id,
                encoded_steps=[encoder.encode_step(o) for o in inputs],
                targets=np.array(demo.actions[: len(inputs)], dtype=np.int64),
                actions=list(demo.actions[: len(inputs)]),
            )
        )
    return items


def batch_items(items: list[TrainingItem], encoder: ObsEncoder, coefficient: float,
                weighting: bool) -> tuple[ObsSeq, np.ndarray, np.ndarray]:
    """Pad a list of items into (seq, targets (T,B), weights (T,B))."""
    seq = encoder.build_sequence([it.encoded_steps for it in items])
    T, B = seq.steps, seq.batch
    targets = np.zeros((T, B), dtype=np.int64)
    weights = np.zeros((T, B))
    for b, it in enumerate(items):
        n = len(it.targets)
        targets[:n, b] = it.targets
        if weighting:
            weights[:n, b] = inflection_weights(it.actions, coefficient)
        else:
            weights[:n, b] = 1.0
    return seq, targets, weights


def bc_loss(params: dict, config: PolicyConfig, seq: ObsSeq, targets: np.ndarray,
            weights: np.ndarray, bptt_window: int = 64):
    """Weighted, weight-sum-normalized NLL and its gradients."""
    return policy.backward(params, config, seq, targets, weights=weights,
                           bptt_window=bptt_window)


# Set in train() just before the gradient worker pool is forked; the child
# processes inherit the prepared corpus through copy-on-write pages instead of
# pickling it on every update.
_GRAD_CTX: tuple | None = None


def _grad_shard(args: tuple[dict, list[int]]) -> tuple[float, dict, float]:
    """Loss, gradients and weight sum for one shard of a batch."""
    params, indices = args
    items, encoder, coefficient, weighting, config, bptt = _GRAD_CTX
    batch = [items[i] for i in indices]
    seq, targets, weights = batch_items(batch, encoder, coefficient, weighting)
    loss, grads = bc_loss(params, config, seq, targets, weights, bptt_window=bptt)
    return loss, grads, float(weights.sum())


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, params: dict, lr: float = 2.5e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


# ---------------------------------------------------------------------------
# Policy rollout evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    success_rate: float
    spl: float
    records: list[metrics.TrajectoryRecord]
    env_steps: int = 0


def evaluate_policy(params: dict, config: PolicyConfig,
                    eval_set: list[tuple[Scene, Episode]],
                    sample: bool = False, seed: int = 0,
                    batch_size: int = 32) -> EvalResult:
    """Roll the policy in the simulator over an evaluation set.  Actions are
    argmax by default (``sample`` draws from the softmax)."""
    encoder = ObsEncoder(config)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xE7A1])))
    records = []
    total_steps = 0
    for start in range(0, len(eval_set), batch_size):
        chunk = eval_set[start : start + batch_size]
        sims = [Sim(scene, ep) for scene, ep in chunk]
        obs = [sim.reset()[1] for sim in sims]
        rec_state = RecurrentState.zeros(config, len(chunk))
        alive = list(range(len(chunk)))
        poses = [[sim.episode.start_pose] for sim in sims]
        actions_log: list[list[int]] = [[] for _ in sims]
        path_len = [0.0 for _ in sims]
        outcomes = [None for _ in sims]
        while alive:
            steps = [[encoder.encode_step(obs[i])] for i in alive]
            seq = encoder.build_sequence(steps)
            h = RecurrentState([layer[alive] for layer in rec_state.hidden])
            logits, _, h_new, _ = policy.forward_sequence(params, config, seq, h)
            probs = policy.softmax(logits[0])
            for layer, new in zip(rec_state.hidden, h_new.hidden):
                layer[alive] = new
            next_alive = []
            for j, i in enumerate(alive):
                if sample:
                    action = int(rng.choice(len(probs[j]), p=probs[j]))
                else:
                    action = int(np.argmax(probs[j]))
                before = sims[i].state.pose
                state, ob, outcome = sims[i].step(action)
                total_steps += 1
                path_len[i] += math.hypot(state.pose.x - before.x, state.pose.y - before.y)
                obs[i] = ob
                poses[i].append(state.pose)
                actions_log[i].append(action)
                if state.done:
                    outcomes[i] = outcome
                else:
                    next_alive.append(i)
            alive = next_alive
        for i, (scene, ep) in enumerate(chunk):
            records.append(
                metrics.TrajectoryRecord(
                    episode_id=ep.id,
                    variant=ep.task.variant,
                    source="policy",
                    poses=poses[i],
                    actions=actions_log[i],
                    success=bool(sims[i].state.succeeded),
                    shortest_path_length=metrics.shortest_path_length(scene, ep),
                    path_length=path_len[i],
                    goal_position=metrics._goal_position(scene, ep),
                )
            )
    success = sum(r.success for r in records) / len(records) if records else 0.0
    return EvalResult(
        success_rate=success,
        spl=metrics.spl(records) if records else 0.0,
        records=records,
        env_steps=total_steps,
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    loss_curve: list[tuple[int, float]]  # (optimizer step, loss)
    eval_curve: list[tuple[int, float, float]]  # (optimizer step, success, spl)
    best_params: dict
    best_eval_success: float
    final_params: dict
    coefficient: float
    total_demo_steps: int
    wall_seconds: float


def train(corpus: list[tuple[Scene, Episode, demos_mod.Demonstration]],
          bc_config: BCConfig, policy_config: PolicyConfig,
          eval_set: list[tuple[Scene, Episode]] | None = None,
          log_fn=None) -> TrainResult:
    """Behavior cloning with checkpoint selection by evaluation success."""
    encoder = ObsEncoder(policy_config)
    demos_only = [demo for _, _, demo in corpus]
    coefficient = compute_inflection_coefficient(demos_only) \
        if bc_config.inflection_weighting else 1.0
    items = prepare_corpus(corpus, encoder)
    if not items:
        raise ValueError("corpus contains no non-empty demonstrations")
    total_demo_steps = sum(len(it.targets) for it in items)

    params = policy.init_params(policy_config)
    opt = Adam(params, lr=bc_config.learning_rate)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([bc_config.seed, 0xBC])))

    pool = None
    if bc_config.workers > 1:
        global _GRAD_CTX
        _GRAD_CTX = (items, encoder, coefficient, bc_config.inflection_weighting,
                     policy_config, bc_config.bptt_window)
        pool = multiprocessing.get_context("fork").Pool(bc_config.workers)

    def compute_grads(batch_idx: list[int]) -> tuple[float, dict]:
        if pool is None:
            batch = [items[i] for i in batch_idx]
            seq, targets, weights = batch_items(
                batch, encoder, coefficient, bc_config.inflection_weighting)
            return bc_loss(params, policy_config, seq, targets, weights,
                           bptt_window=bc_config.bptt_window)
        # Exact recombination: each shard's loss/gradients are normalized by
        # its own weight sum, so the weighted average over shards equals the
        # single-process batch up to float reassociation.
        shards = [s for s in np.array_split(np.asarray(batch_idx), bc_config.workers)
                  if len(s)]
        parts = pool.map(_grad_shard, [(params, [int(i) for i in s]) for s in shards])
        total_w = sum(p[2] for p in parts)
        loss = sum(p[0] * p[2] for p in parts) / total_w
        grads = {k: sum(p[1][k] * p[2] for p in parts) / total_w
                 for k in parts[0][1]}
        return loss, grads

    loss_curve = []
    eval_curve = []
    best = (None, -1.0)
    step = 0
    t0 = time.monotonic()

    def run_eval():
        nonlocal best
        if eval_set is None:
            return
        subset = eval_set[: bc_config.eval_episodes_per_point] \
            if bc_config.eval_episodes_per_point else eval_set
        res = evaluate_policy(params, policy_config, subset, seed=bc_config.seed)
        eval_curve.append((step, res.success_rate, res.spl))
        if res.success_rate > best[1]:
            best = ({k: v.copy() for k, v in params.items()}, res.success_rate)
        if log_fn:
            log_fn(f"step {step}: eval success {res.success_rate:.3f} spl {res.spl:.3f}")

    try:
        for epoch in range(bc_config.epochs):
            order = rng.permutation(len(items))
            for start in range(0, len(items), bc_config.batch_episodes):
                batch_idx = list(order[start : start + bc_config.batch_episodes])
                loss, grads = compute_grads(batch_idx)
                opt.step(params, grads)
                step += 1
                loss_curve.append((step, loss))
                if bc_config.eval_every_steps and step % bc_config.eval_every_steps == 0:
                    run_eval()
            if log_fn:
                recent = [l for _, l in loss_curve[-max(1, len(items) // bc_config.batch_episodes):]]
                log_fn(f"epoch {epoch + 1}/{bc_config.epochs}: mean loss {np.mean(recent):.4f}")
            if not bc_config.eval_every_steps:
                run_eval()
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    if eval_set is not None and (best[0] is None):
        run_eval()
    best_params = best[0] if best[0] is not None else {k: v.copy() for k, v in params.items()}
    return TrainResult(
        loss_curve=loss_curve,
        eval_curve=eval_curve,
        best_params=best_params,
        best_eval_success=max(best[1], 0.0),
        final_params=params,
        coefficient=coefficient,
        total_demo_steps=total_demo_steps,
        wall_seconds=time.monotonic() - t0,
    )


def action_prediction_accuracy(params: dict, config: PolicyConfig,
                               items: list[TrainingItem], encoder: ObsEncoder) -> float:
    """Fraction of demo steps whose argmax action matches the target."""
    correct = 0
    total = 0
    for it in items:
        seq = encoder.build_sequence([it.encoded_steps])
        logits, _, _, _ = policy.forward_sequence(params, config, seq)
        pred = logits[:, 0, :].argmax(axis=1)
        correct += int((pred == it.targets).sum())
        total += len(it.targets)
    return correct / total if total else 0.0

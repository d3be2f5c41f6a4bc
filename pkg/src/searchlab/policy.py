"""Recurrent policy with exact analytic gradients.

Architecture: per-step observation encoders (ray MLP over depth + per-ray
label embeddings, state-vector encoder, goal/instruction embedding, previous
action embedding) concatenated and fed through a gated recurrent core to an
action head and a scalar value head.  All math is float64 numpy; gradients
are hand-derived and verified against central finite differences.

Parameters live in a flat ``dict[str, np.ndarray]``.  Gate layout for every
recurrent cell is ``[update | reset | candidate]``.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tasks
from .tasks import OBJECTNAV, PICKPLACE, Observation


class ConfigurationError(Exception):
    pass


class CheckpointError(Exception):
    pass


class NumericalError(Exception):
    pass


GPS_NORM_M = 5.0
PITCH_NORM_DEG = 30.0

RAY_LABEL_PAD = ("none", "wall")


@dataclass(frozen=True)
class PolicyConfig:
    variant: str = OBJECTNAV
    num_rays: int = 64
    max_range: float = 5.0
    categories: tuple[str, ...] = ()  # object categories visible in rays
    goal_categories: tuple[str, ...] = ()  # ObjectNav goal vocabulary
    instruction_vocab: tuple[str, ...] = ()  # Pick&Place token vocabulary
    action_count: int = 6
    ray_label_embed_dim: int = 8
    ray_embed_dim: int = 64
    goal_embed_dim: int = 32
    gps_embed_dim: int = 32
    prev_action_embed_dim: int = 32
    rnn_hidden: int = 128
    rnn_layers: int = 1
    use_instruction_rnn: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("num_rays", "action_count", "ray_label_embed_dim", "ray_embed_dim",
                     "goal_embed_dim", "gps_embed_dim", "prev_action_embed_dim",
                     "rnn_hidden", "rnn_layers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")

    @property
    def ray_vocab(self) -> tuple[str, ...]:
        return RAY_LABEL_PAD + tuple(self.categories)

    @property
    def state_dim(self) -> int:
        # [gps_x, gps_y, cos(compass), sin(compass), pitch, sge] (+ held flag)
        return 6 + (1 if self.variant == PICKPLACE else 0)

    @property
    def ray_input_dim(self) -> int:
        return self.num_rays * (1 + self.ray_label_embed_dim)

    @property
    def core_input_dim(self) -> int:
        return (self.ray_embed_dim + self.gps_embed_dim + self.goal_embed_dim
                + self.prev_action_embed_dim)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "PolicyConfig":
        data = dict(data)
        for key in ("categories", "goal_categories", "instruction_vocab"):
            data[key] = tuple(data[key])
        return PolicyConfig(**data)


def config_hash(config: PolicyConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def config_for_scene_catalog(variant: str, categories: list[str],
                             instruction_vocab: list[str] | None = None,
                             **overrides) -> PolicyConfig:
    """Convenience constructor: vocabulary from a scene catalog."""
    cats = tuple(sorted(set(categories)))
    if variant == OBJECTNAV:
        return PolicyConfig(variant=variant, categories=cats, goal_categories=cats,
                            action_count=len(tasks.OBJECTNAV_ACTIONS), **overrides)
    vocab = tuple(instruction_vocab or (["place", "the", "on"] + list(cats)))
    return PolicyConfig(variant=variant, categories=cats, instruction_vocab=vocab,
                        action_count=len(tasks.PICKPLACE_ACTIONS), **overrides)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def _glorot(rng, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _embed_init(rng, n, dim):
    return rng.uniform(-1.0, 1.0, size=(n, dim)) / math.sqrt(dim)


def param_shapes(config: PolicyConfig) -> dict[str, tuple]:
    shapes = {
        "ray_label_emb": (len(config.ray_vocab), config.ray_label_embed_dim),
        "ray_W1": (config.ray_input_dim, config.ray_embed_dim),
        "ray_b1": (config.ray_embed_dim,),
        "ray_W2": (config.ray_embed_dim, config.ray_embed_dim),
        "ray_b2": (config.ray_embed_dim,),
        "state_W": (config.state_dim, config.gps_embed_dim),
        "state_b": (config.gps_embed_dim,),
        "prev_emb": (config.action_count + 1, config.prev_action_embed_dim),
        "head_W": (config.rnn_hidden, config.action_count),
        "head_b": (config.action_count,),
        "value_W": (config.rnn_hidden, 1),
        "value_b": (1,),
    }
    if config.variant == OBJECTNAV:
        shapes["goal_emb"] = (max(len(config.goal_categories), 1), config.goal_embed_dim)
    else:
        g = config.goal_embed_dim
        shapes["instr_emb"] = (max(len(config.instruction_vocab), 1), g)
        if config.use_instruction_rnn:
            shapes["instr_W"] = (g, 3 * g)
            shapes["instr_U"] = (g, 3 * g)
            shapes["instr_b"] = (3 * g,)
    h = config.rnn_hidden
    for layer in range(config.rnn_layers):
        d_in = config.core_input_dim if layer == 0 else h
        shapes[f"gru{layer}_W"] = (d_in, 3 * h)
        shapes[f"gru{layer}_U"] = (h, 3 * h)
        shapes[f"gru{layer}_b"] = (3 * h,)
    return shapes


def init_params(config: PolicyConfig) -> dict[str, np.ndarray]:
    """Deterministic scaled-uniform initialization (Glorot bounds for
    matrices, 1/sqrt(dim)-scaled uniform for embeddings, zero biases)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("_b") or name.endswith("b1") or name.endswith("b2"):
            params[name] = np.zeros(shape)
        elif "emb" in name:
            params[name] = _embed_init(rng, *shape)
        else:
            params[name] = _glorot(rng, *shape)
    return params


def zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


@dataclass
class RecurrentState:
    hidden: list[np.ndarray]  # per layer, (B, H)

    @staticmethod
    def zeros(config: PolicyConfig, batch: int = 1) -> "RecurrentState":
        return RecurrentState(
            [np.zeros((batch, config.rnn_hidden)) for _ in range(config.rnn_layers)])

    def copy(self) -> "RecurrentState":
        return RecurrentState([h.copy() for h in self.hidden])


# ---------------------------------------------------------------------------
# Observation encoding to numeric arrays
# ---------------------------------------------------------------------------


@dataclass
class ObsSeq:
    """A (T, B) padded batch of per-step numeric observations."""
    ray_labels: np.ndarray  # (T, B, K) int32
    ray_depths: np.ndarray  # (T, B, K) f64, normalized by max_range
    state: np.ndarray  # (T, B, S) f64
    prev_action: np.ndarray  # (T, B) int32, 0 = none, else action id + 1
    goal_ids: np.ndarray  # (B,) int32 (ObjectNav; zeros otherwise)
    instr_tokens: np.ndarray  # (B, L) int32 (Pick&Place; (B, 0) otherwise)
    mask: np.ndarray  # (T, B) f64, 1 = real step

    @property
    def steps(self) -> int:
        return self.ray_labels.shape[0]

    @property
    def batch(self) -> int:
        return self.ray_labels.shape[1]


class ObsEncoder:
    """Maps task Observations to the numeric arrays the network consumes."""

    def __init__(self, config: PolicyConfig):
        self.config = config
        self.ray_index = {lab: i for i, lab in enumerate(config.ray_vocab)}
        self.goal_index = {cat: i for i, cat in enumerate(config.goal_categories)}
        self.token_index = {tok: i for i, tok in enumerate(config.instruction_vocab)}

    def encode_step(self, obs: Observation) -> dict:
        cfg = self.config
        labels = np.array([self.ray_index.get(lab, 0) for lab in obs.rays.labels],
                          dtype=np.int32)
        depths = np.asarray(obs.rays.depths, dtype=np.float64) / cfg.max_range
        compass_rad = math.radians(obs.compass)
        state = [obs.gps[0] / GPS_NORM_M, obs.gps[1] / GPS_NORM_M,
                 math.cos(compass_rad), math.sin(compass_rad),
                 obs.pitch / PITCH_NORM_DEG, obs.sge]
        if cfg.variant == PICKPLACE:
            state.append(1.0 if obs.held is not None else 0.0)
        prev = 0 if obs.prev_action is None else int(obs.prev_action) + 1
        out = {"labels": labels, "depths": depths,
               "state": np.array(state), "prev": prev}
        if cfg.variant == OBJECTNAV:
            out["goal"] = self.goal_index.get(obs.goal, 0)
        else:
            out["instr"] = np.array([self.token_index.get(t, 0) for t in obs.goal],
                                    dtype=np.int32)
        return out

    def build_sequence(self, per_episode_steps: list[list[dict]]) -> ObsSeq:
        """Pad a list of per-episode encoded step lists into an ObsSeq."""
        cfg = self.config
        B = len(per_episode_steps)
        T = max(len(s) for s in per_episode_steps)
        K = cfg.num_rays
        labels = np.zeros((T, B, K), dtype=np.int32)
        depths = np.zeros((T, B, K))
        state = np.zeros((T, B, cfg.state_dim))
        prev = np.zeros((T, B), dtype=np.int32)
        mask = np.zeros((T, B))
        goal_ids = np.zeros(B, dtype=np.int32)
        instr_len = max((len(s[0]["instr"]) for s in per_episode_steps if s),
                        default=0) if cfg.variant == PICKPLACE else 0
        instr = np.zeros((B, instr_len), dtype=np.int32)
        for b, steps in enumerate(per_episode_steps):
            for t, step in enumerate(steps):
                labels[t, b] = step["labels"]
                depths[t, b] = step["depths"]
                state[t, b] = step["state"]
                prev[t, b] = step["prev"]
                mask[t, b] = 1.0
            if steps:
                if cfg.variant == OBJECTNAV:
                    goal_ids[b] = steps[0]["goal"]
                else:
                    toks = steps[0]["instr"]
                    instr[b, : len(toks)] = toks
        return ObsSeq(labels, depths, state, prev, goal_ids, instr, mask)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gru_forward(x, h, W, U, b):
    H = h.shape[1]
    xW = x @ W
    hU = h @ U
    z = _sigmoid(xW[:, :H] + hU[:, :H] + b[:H])
    r = _sigmoid(xW[:, H:2 * H] + hU[:, H:2 * H] + b[H:2 * H])
    n = np.tanh(xW[:, 2 * H:] + r * hU[:, 2 * H:] + b[2 * H:])
    h_new = (1.0 - z) * h + z * n
    cache = (x, h, z, r, n, hU[:, 2 * H:])
    return h_new, cache


def _gru_backward(dh_new, cache, W, U, grads, prefix):
    x, h, z, r, n, hU_n = cache
    dz = dh_new * (n - h)
    dn = dh_new * z
    dh = dh_new * (1.0 - z)
    dn_pre = dn * (1.0 - n * n)
    dr = dn_pre * hU_n
    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)
    dxW = np.concatenate([dz_pre, dr_pre, dn_pre], axis=1)
    dhU = np.concatenate([dz_pre, dr_pre, dn_pre * r], axis=1)
    grads[prefix + "_W"] += x.T @ dxW
    grads[prefix + "_U"] += h.T @ dhU
    grads[prefix + "_b"] += dxW.sum(axis=0)
    dx = dxW @ W.T
    dh += dhU @ U.T
    return dx, dh


def _encode_instruction(params, config, tokens):
    """Single-layer recurrent encoding of instruction tokens (B, L) -> (B, G);
    returns (feature, cache)."""
    B, L = tokens.shape
    G = config.goal_embed_dim
    if L == 0:
        return np.zeros((B, G)), None
    if not config.use_instruction_rnn:
        feat_raw = params["instr_emb"][tokens]  # (B, L, G)
        return feat_raw.mean(axis=1), ("bag", tokens, L)
    h = np.zeros((B, G))
    caches = []
    for t in range(L):
        x = params["instr_emb"][tokens[:, t]]
        h, cache = _gru_forward(x, h, params["instr_W"], params["instr_U"],
                                params["instr_b"])
        caches.append(cache)
    return h, ("rnn", tokens, caches)


def _backward_instruction(dgoal, instr_cache, params, config, grads):
    if instr_cache is None:
        return
    kind = instr_cache[0]
    if kind == "bag":
        _, tokens, L = instr_cache
        per_tok = dgoal / L
        for t in range(L):
            np.add.at(grads["instr_emb"], tokens[:, t], per_tok)
        return
    _, tokens, caches = instr_cache
    dh = dgoal
    for t in reversed(range(len(caches))):
        dx, dh = _gru_backward(dh, caches[t], params["instr_W"], params["instr_U"],
                               grads, "instr")
        np.add.at(grads["instr_emb"], tokens[:, t], dx)


def forward_sequence(params: dict, config: PolicyConfig, seq: ObsSeq,
                     h0: RecurrentState | None = None):
    """Run the network over a padded (T, B) sequence.

    Returns (logits (T,B,A), values (T,B), final RecurrentState, cache).
    Padded steps (mask 0) leave the recurrent state unchanged.
    """
    T, B = seq.steps, seq.batch
    cfg = config
    h = (h0 or RecurrentState.zeros(cfg, B)).copy()

    if cfg.variant == OBJECTNAV:
        goal_feat = params["goal_emb"][seq.goal_ids]  # (B, G)
        instr_cache = None
    else:
        goal_feat, instr_cache = _encode_instruction(params, cfg, seq.instr_tokens)

    logits = np.zeros((T, B, cfg.action_count))
    values = np.zeros((T, B))
    step_caches = []
    for t in range(T):
        labels_t = seq.ray_labels[t]
        emb = params["ray_label_emb"][labels_t]  # (B, K, dl)
        xr = np.concatenate([seq.ray_depths[t], emb.reshape(B, -1)], axis=1)
        h1 = np.tanh(xr @ params["ray_W1"] + params["ray_b1"])
        h2 = np.tanh(h1 @ params["ray_W2"] + params["ray_b2"])
        s = np.tanh(seq.state[t] @ params["state_W"] + params["state_b"])
        p = params["prev_emb"][seq.prev_action[t]]
        x = np.concatenate([h2, s, goal_feat, p], axis=1)

        m = seq.mask[t][:, None]
        layer_caches = []
        inp = x
        for layer in range(cfg.rnn_layers):
            h_prev = h.hidden[layer]
            h_cand, cache = _gru_forward(inp, h_prev, params[f"gru{layer}_W"],
                                         params[f"gru{layer}_U"], params[f"gru{layer}_b"])
            h.hidden[layer] = h_prev + m * (h_cand - h_prev)
            layer_caches.append(cache)
            inp = h.hidden[layer]
        top = h.hidden[-1]
        logits[t] = top @ params["head_W"] + params["head_b"]
        values[t] = (top @ params["value_W"])[:, 0] + params["value_b"][0]
        step_caches.append((xr, h1, h2, s, layer_caches, seq.mask[t]))
    cache = {"steps": step_caches, "goal_feat": goal_feat, "instr_cache": instr_cache,
             "seq": seq, "h_final": h}
    return logits, values, h, cache


def backward_sequence(params: dict, config: PolicyConfig, cache: dict,
                      dlogits: np.ndarray, dvalues: np.ndarray | None = None,
                      dh_final: list[np.ndarray] | None = None,
                      return_dh0: bool = False):
    """Backpropagate arbitrary per-step output gradients through the network.

    ``dh_final`` optionally injects gradients w.r.t. the final hidden state
    (one array per layer), letting callers chain chunks without truncation.
    Returns a gradient dict, or (grads, dh0 per layer) with ``return_dh0``.
    """
    cfg = config
    seq: ObsSeq = cache["seq"]
    T, B = seq.steps, seq.batch
    grads = zero_grads(params)
    goal_feat = cache["goal_feat"]
    dgoal_total = np.zeros_like(goal_feat)
    if dh_final is not None:
        dh_layers = [d.copy() for d in dh_final]
    else:
        dh_layers = [np.zeros((B, cfg.rnn_hidden)) for _ in range(cfg.rnn_layers)]

    ray_slice = slice(0, cfg.ray_embed_dim)
    state_slice = slice(cfg.ray_embed_dim, cfg.ray_embed_dim + cfg.gps_embed_dim)
    goal_slice = slice(state_slice.stop, state_slice.stop + cfg.goal_embed_dim)
    prev_slice = slice(goal_slice.stop, goal_slice.stop + cfg.prev_action_embed_dim)

    for t in reversed(range(T)):
        xr, h1, h2, s, layer_caches, mask_t = cache["steps"][t]
        m = mask_t[:, None]
        dl = dlogits[t]
        # Recompute the post-blend hidden for the head gradients.
        h_prev_top = layer_caches[-1][1]
        h_cand_top = _gru_h_new(layer_caches[-1])
        top = h_prev_top + m * (h_cand_top - h_prev_top)

        grads["head_W"] += top.T @ dl
        grads["head_b"] += dl.sum(axis=0)
        dtop = dl @ params["head_W"].T
        if dvalues is not None:
            dv = dvalues[t][:, None]
            grads["value_W"] += top.T @ dv
            grads["value_b"] += dv.sum(axis=0)
            dtop += dv @ params["value_W"].T
        dh_layers[-1] += dtop

        dx_lower = None
        for layer in reversed(range(cfg.rnn_layers)):
            dh_new = dh_layers[layer]
            if dx_lower is not None:
                dh_new = dh_new + dx_lower
            # Blend: h_t = h_prev + m * (h_cand - h_prev).
            dh_cand = dh_new * m
            dh_passthrough = dh_new * (1.0 - m)
            dx, dh_prev = _gru_backward(dh_cand, layer_caches[layer],
                                        params[f"gru{layer}_W"], params[f"gru{layer}_U"],
                                        grads, f"gru{layer}")
            dh_layers[layer] = dh_prev + dh_passthrough
            dx_lower = dx
        dx = dx_lower

        dh2 = dx[:, ray_slice]
        ds_out = dx[:, state_slice]
        dgoal_total += dx[:, goal_slice] * m
        dp = dx[:, prev_slice]

        ds_pre = ds_out * (1.0 - s * s)
        grads["state_W"] += seq.state[t].T @ ds_pre
        grads["state_b"] += ds_pre.sum(axis=0)

        np.add.at(grads["prev_emb"], seq.prev_action[t], dp)

        dh2_pre = dh2 * (1.0 - h2 * h2)
        grads["ray_W2"] += h1.T @ dh2_pre
        grads["ray_b2"] += dh2_pre.sum(axis=0)
        dh1 = dh2_pre @ params["ray_W2"].T
        dh1_pre = dh1 * (1.0 - h1 * h1)
        grads["ray_W1"] += xr.T @ dh1_pre
        grads["ray_b1"] += dh1_pre.sum(axis=0)
        dxr = dh1_pre @ params["ray_W1"].T
        demb = dxr[:, cfg.num_rays:].reshape(B, cfg.num_rays, cfg.ray_label_embed_dim)
        np.add.at(grads["ray_label_emb"], seq.ray_labels[t], demb)

    if cfg.variant == OBJECTNAV:
        np.add.at(grads["goal_emb"], seq.goal_ids, dgoal_total)
    else:
        _backward_instruction(dgoal_total, cache["instr_cache"], params, cfg, grads)
    if return_dh0:
        return grads, dh_layers
    return grads


def _gru_h_new(cache):
    _, h, z, _, n, _ = cache
    return (1.0 - z) * h + z * n


# ---------------------------------------------------------------------------
# Probabilities and losses
# ---------------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def nll_loss(logits: np.ndarray, targets: np.ndarray, weights: np.ndarray,
             mask: np.ndarray):
    """Weighted negative log-likelihood normalized by the weight sum.

    logits (T,B,A); targets (T,B) int; weights/mask (T,B).
    Returns (loss, dlogits).
    """
    probs = softmax(logits)
    T, B, A = logits.shape
    w = weights * mask
    w_sum = w.sum()
    if w_sum <= 0:
        raise NumericalError("loss has zero total weight")
    t_idx, b_idx = np.meshgrid(np.arange(T), np.arange(B), indexing="ij")
    picked = probs[t_idx, b_idx, targets]
    picked = np.clip(picked, 1e-300, None)
    loss = float((w * -np.log(picked)).sum() / w_sum)
    if not np.isfinite(loss):
        bad = np.argwhere(~np.isfinite(-np.log(picked)))
        raise NumericalError(f"non-finite loss at step index {bad[0].tolist()}")
    dlogits = probs.copy()
    dlogits[t_idx, b_idx, targets] -= 1.0
    dlogits *= (w / w_sum)[:, :, None]
    return loss, dlogits


def backward(params: dict, config: PolicyConfig, seq: ObsSeq, targets: np.ndarray,
             weights: np.ndarray | None = None, bptt_window: int = 64,
             h0: RecurrentState | None = None):
    """Gradient of the weighted NLL of ``targets`` under the policy.

    The sequence is processed in truncated-BPTT chunks of ``bptt_window``
    steps (state carried across chunks, gradients not).  Normalization is by
    the total weight over the whole sequence, so chunking changes nothing in
    the loss value and only truncates gradient flow.
    """
    if seq.steps == 0:
        raise ValueError("empty trajectory")
    T, B = seq.steps, seq.batch
    if weights is None:
        weights = np.ones((T, B))
    w_all = weights * seq.mask
    w_sum = w_all.sum()
    h = h0 or RecurrentState.zeros(config, B)
    total_loss = 0.0
    grads = zero_grads(params)
    for start in range(0, T, bptt_window):
        end = min(start + bptt_window, T)
        sub = ObsSeq(
            ray_labels=seq.ray_labels[start:end],
            ray_depths=seq.ray_depths[start:end],
            state=seq.state[start:end],
            prev_action=seq.prev_action[start:end],
            goal_ids=seq.goal_ids,
            instr_tokens=seq.instr_tokens,
            mask=seq.mask[start:end],
        )
        logits, _, h, cache = forward_sequence(params, config, sub, h)
        probs = softmax(logits)
        t_idx, b_idx = np.meshgrid(np.arange(end - start), np.arange(B), indexing="ij")
        picked = np.clip(probs[t_idx, b_idx, targets[start:end]], 1e-300, None)
        w = w_all[start:end]
        chunk_loss = (w * -np.log(picked)).sum()
        if not np.isfinite(chunk_loss):
            raise NumericalError(f"non-finite loss in chunk starting at step {start}")
        total_loss += chunk_loss
        dlogits = probs
        dlogits[t_idx, b_idx, targets[start:end]] -= 1.0
        dlogits *= (w / w_sum)[:, :, None]
        chunk_grads = backward_sequence(params, config, cache, dlogits)
        for k in grads:
            grads[k] += chunk_grads[k]
    return total_loss / w_sum, grads


def forward(params: dict, config: PolicyConfig, obs: Observation,
            rec: RecurrentState | None = None, encoder: ObsEncoder | None = None):
    """Single-step forward: returns (logits (A,), value, RecurrentState')."""
    encoder = encoder or ObsEncoder(config)
    step = encoder.encode_step(obs)
    seq = encoder.build_sequence([[step]])
    logits, values, h, _ = forward_sequence(params, config, seq, rec)
    return logits[0, 0], float(values[0, 0]), h


# ---------------------------------------------------------------------------
# Checkpoint IO (header JSON + little-endian float64 tensors)
# ---------------------------------------------------------------------------

_MAGIC = b"SLCKPT1\n"


def save_params(path, config: PolicyConfig, params: dict[str, np.ndarray]) -> None:
    names = sorted(params)
    header = {
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "tensors": [[name, list(params[name].shape)] for name in names],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in names:
            f.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_params(path, expected_config: PolicyConfig | None = None):
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode())
        config = PolicyConfig.from_dict(header["config"])
        if header["config_hash"] != config_hash(config):
            raise CheckpointError("checkpoint config hash mismatch (corrupt header)")
        if expected_config is not None and config_hash(expected_config) != header["config_hash"]:
            raise CheckpointError(
                f"checkpoint config hash {header['config_hash']} does not match "
                f"expected {config_hash(expected_config)}")
        params = {}
        for name, shape in header["tensors"]:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(count * 8), dtype="<f8").copy()
            params[name] = data.reshape(shape)
    return config, params

"""Command-line entry point orchestrating the full pipeline.

Every subcommand derives its randomness from a single ``--seed`` flag
(sub-seeds via sha256 of (seed, command, salt)), writes its outputs under a
``--out`` directory, and drops a ``manifest.json`` recording the command,
the configuration snapshot, the seeds used, and content hashes of its
inputs so runs are reproducible from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import demos as demos_mod
from . import metrics, policy, tasks, teleop, train_bc, train_rl, world


# ---------------------------------------------------------------------------
# Manifests and seeds
# ---------------------------------------------------------------------------


def sub_seed(seed: int, *salt) -> int:
    """Stable sub-seed: sha256 over the repr of (seed, *salt)."""
    digest = hashlib.sha256(repr((seed,) + salt).encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)


def _file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    sub_seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)
    created: float = field(default_factory=time.time)

    def add_input(self, path) -> None:
        p = Path(path)
        if p.is_file():
            self.inputs[str(p)] = _file_hash(p)
        elif p.is_dir():
            for f in sorted(p.rglob("*")):
                if f.is_file():
                    self.inputs[str(f)] = _file_hash(f)

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "manifest.json", "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)


def _manifest(args, command: str, **extra) -> RunManifest:
    config = {k: v for k, v in vars(args).items()
              if k not in ("func", "config") and not k.startswith("_")}
    config.update(extra)
    return RunManifest(command=command, config=_jsonable(config),
                       seed=getattr(args, "seed", 0))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# Artifact loading
# ---------------------------------------------------------------------------


def load_scene_dir(path) -> dict[str, world.Scene]:
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob("*.json"))
    files = [f for f in files if f.name != "manifest.json"]
    scenes = {}
    for f in files:
        scene = world.load_scene(f)
        scenes[scene.id] = scene
    if not scenes:
        raise FileNotFoundError(f"no scene files under {path}")
    return scenes


def load_episode_files(path) -> list[tasks.Episode]:
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob("*.jsonl"))
    episodes = []
    for f in files:
        episodes.extend(tasks.load_episodes(f))
    if not episodes:
        raise FileNotFoundError(f"no episodes under {path}")
    return episodes


def load_demo_files(path) -> list[demos_mod.Demonstration]:
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob("*.jsonl"))
    out = []
    for f in files:
        loaded, diagnostics = demos_mod.load_demos(f)
        for lineno, message in diagnostics:
            print(f"warning: {f}:{lineno}: {message}", file=sys.stderr)
        out.extend(loaded)
    if not out:
        raise FileNotFoundError(f"no demonstrations under {path}")
    return out


def _records(demos, episodes_by_id, scenes):
    records = []
    for demo in demos:
        episode = episodes_by_id[demo.episode_id]
        scene = scenes[episode.scene_id]
        records.append(metrics.record_from_demo(scene, episode, demo))
    return records


def _corpus(demos, episodes_by_id, scenes):
    return [(scenes[episodes_by_id[d.episode_id].scene_id],
             episodes_by_id[d.episode_id], d) for d in demos]


# ---------------------------------------------------------------------------
# SVG plotting (no hard matplotlib dependency)
# ---------------------------------------------------------------------------


def write_svg_bars(path, pairs: list[tuple[str, float]], title: str) -> None:
    """Minimal standalone SVG bar chart."""
    width, height, pad = 640, 360, 48
    top = max((v for _, v in pairs), default=1.0) or 1.0
    n = max(len(pairs), 1)
    bar_w = (width - 2 * pad) / n
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width / 2}" y="20" text-anchor="middle" '
             f'font-family="sans-serif" font-size="14">{title}</text>']
    for i, (label, value) in enumerate(pairs):
        h = (height - 2 * pad) * value / top
        x = pad + i * bar_w
        y = height - pad - h
        parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w * 0.85:.1f}" '
                     f'height="{h:.1f}" fill="#4878a8"/>')
        parts.append(f'<text x="{x + bar_w * 0.42:.1f}" y="{height - pad + 14}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="9">{label}</text>')
    parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
                 f'y2="{height - pad}" stroke="#333"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def write_svg_line(path, points: list[tuple[float, float]], title: str,
                   x_label: str = "", y_label: str = "") -> None:
    width, height, pad = 640, 360, 48
    if not points:
        points = [(0.0, 0.0)]
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs) or 1.0
    y0, y1 = min(ys + [0.0]), max(ys) or 1.0
    sx = lambda x: pad + (width - 2 * pad) * (x - x0) / max(x1 - x0, 1e-12)
    sy = lambda y: height - pad - (height - 2 * pad) * (y - y0) / max(y1 - y0, 1e-12)
    poly = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in points)
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
           f'<text x="{width / 2}" y="20" text-anchor="middle" '
           f'font-family="sans-serif" font-size="14">{title}</text>'
           f'<polyline points="{poly}" fill="none" stroke="#a84848" stroke-width="2"/>'
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>'
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>'
           f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" '
           f'font-family="sans-serif" font-size="11">{x_label}</text>'
           f'<text x="14" y="{height / 2}" text-anchor="middle" font-family="sans-serif" '
           f'font-size="11" transform="rotate(-90 14 {height / 2})">{y_label}</text>'
           "</svg>")
    Path(path).write_text(svg)


def write_csv(path, header: list[str], rows: list[tuple]) -> None:
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen_scenes(args) -> int:
    out = Path(args.out) / "scenes"
    out.mkdir(parents=True, exist_ok=True)
    config = world.SceneConfig(
        grid_rows=args.rows, grid_cols=args.cols,
        room_count_range=tuple(args.rooms), object_count_range=tuple(args.objects))
    manifest = _manifest(args, "gen-scenes")
    for i in range(args.count):
        seed = sub_seed(args.seed, "scene", i)
        scene = world.generate_scene(seed, config)
        path = out / f"scene-{i:04d}.json"
        world.save_scene(scene, path)
        manifest.sub_seeds[f"scene-{i:04d}"] = seed
        manifest.outputs.append(str(path))
    manifest.write(out)
    print(f"wrote {args.count} scenes to {out}")
    return 0


def cmd_gen_episodes(args) -> int:
    scenes = load_scene_dir(args.scenes)
    out = Path(args.out) / "episodes"
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, "gen-episodes")
    manifest.add_input(args.scenes)
    total = 0
    for i, (scene_id, scene) in enumerate(sorted(scenes.items())):
        seed = sub_seed(args.seed, "episodes", scene_id)
        _, episodes = tasks.generate_episodes(scene, args.task, args.per_scene, seed=seed)
        path = out / f"episodes-{i:04d}.jsonl"
        tasks.save_episodes(episodes, path)
        manifest.sub_seeds[scene_id] = seed
        manifest.outputs.append(str(path))
        total += len(episodes)
    manifest.write(out)
    print(f"wrote {total} episodes to {out}")
    return 0


def cmd_gen_demos(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = load_episode_files(args.episodes)
    out = Path(args.out) / "demos"
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, "gen-demos")
    manifest.add_input(args.scenes)
    manifest.add_input(args.episodes)
    path = out / f"{args.source}.jsonl"
    generated = []
    for i, episode in enumerate(episodes):
        scene = scenes[episode.scene_id]
        if args.source == "shortest":
            demo = demos_mod.shortest_path_demo(scene, episode)
        else:
            seed = sub_seed(args.seed, "demo", episode.id)
            manifest.sub_seeds[episode.id] = seed
            demo = demos_mod.scripted_explorer_demo(scene, episode, seed=seed)
        if demo.success or not args.successes_only:
            generated.append(demo)
    demos_mod.store_demos(generated, path)
    manifest.outputs.append(str(path))
    manifest.write(out)
    ok = sum(d.success for d in generated)
    print(f"wrote {len(generated)} {args.source} demos ({ok} successful) to {path}")
    return 0


def cmd_serve_teleop(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = load_episode_files(args.episodes)
    items = [(scenes[e.scene_id], e) for e in episodes
             if not args.task or e.task.variant == args.task]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    service = teleop.TeleopService({args.dataset: items}, out / "human.jsonl")
    app = teleop.create_app(service)
    import uvicorn

    print(f"serving {len(items)} episodes as dataset {args.dataset!r} "
          f"on port {args.port}")
    uvicorn.run(app, host="0.0.0.0", port=args.port, log_level="warning")
    return 0


def _policy_config_for(scenes: dict[str, world.Scene], variant: str,
                       hidden: int, seed: int) -> policy.PolicyConfig:
    categories = sorted({o.category for s in scenes.values() for o in s.objects})
    return policy.config_for_scene_catalog(variant, categories,
                                           rnn_hidden=hidden, seed=seed)


def cmd_train_bc(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = {e.id: e for e in load_episode_files(args.episodes)}
    demos = load_demo_files(args.demos)
    if args.max_demos:
        demos = demos[: args.max_demos]
    corpus = _corpus(demos, episodes, scenes)
    variant = corpus[0][1].task.variant
    eval_set = None
    if args.eval_episodes:
        eval_eps = load_episode_files(args.eval_episodes)
        eval_scenes = load_scene_dir(args.eval_scenes) if args.eval_scenes else scenes
        eval_set = [(eval_scenes[e.scene_id], e) for e in eval_eps]
    pc = _policy_config_for(scenes, variant, args.hidden, sub_seed(args.seed, "init"))
    bc = train_bc.BCConfig(epochs=args.epochs, batch_episodes=args.batch,
                           learning_rate=args.lr, workers=args.bc_workers,
                           inflection_weighting=not args.no_inflection,
                           seed=sub_seed(args.seed, "bc"))
    result = train_bc.train(corpus, bc, pc, eval_set=eval_set, log_fn=print)
    out = Path(args.out) / "checkpoints"
    out.mkdir(parents=True, exist_ok=True)
    policy.save_params(out / "bc-best.ckpt", pc, result.best_params)
    policy.save_params(out / "bc-final.ckpt", pc, result.final_params)
    write_csv(out / "bc-curve.csv", ["step", "loss"], result.loss_curve)
    write_csv(out / "bc-eval.csv", ["step", "success", "spl"], result.eval_curve)
    write_svg_line(out / "bc-loss.svg", [(s, l) for s, l in result.loss_curve],
                   "training loss", "optimizer step", "loss")
    manifest = _manifest(args, "train-bc", coefficient=result.coefficient)
    for p in (args.scenes, args.episodes, args.demos):
        manifest.add_input(p)
    manifest.outputs = [str(out / "bc-best.ckpt"), str(out / "bc-final.ckpt")]
    manifest.write(out)
    print(f"best eval success {result.best_eval_success:.3f}; "
          f"checkpoints under {out}")
    return 0


def cmd_train_rl(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = load_episode_files(args.episodes)
    train_set = [(scenes[e.scene_id], e) for e in episodes]
    variant = episodes[0].task.variant
    eval_set = None
    if args.eval_episodes:
        eval_eps = load_episode_files(args.eval_episodes)
        eval_scenes = load_scene_dir(args.eval_scenes) if args.eval_scenes else scenes
        eval_set = [(eval_scenes[e.scene_id], e) for e in eval_eps]
    pc = _policy_config_for(scenes, variant, args.hidden, sub_seed(args.seed, "init"))
    reward = train_rl.RewardConfig()
    trainer = train_rl.TrainerConfig(
        workers=args.workers, max_env_steps=args.max_env_steps,
        max_wall_seconds=args.max_seconds, seed=sub_seed(args.seed, "rl"),
        eval_every_updates=args.eval_every)
    result = train_rl.rl_train(train_set, reward, trainer, pc,
                               eval_set=eval_set, log_fn=print)
    out = Path(args.out) / "checkpoints"
    out.mkdir(parents=True, exist_ok=True)
    policy.save_params(out / "rl-final.ckpt", pc, result.params)
    write_csv(out / "rl-reward.csv", ["env_steps", "mean_return"], result.reward_curve)
    write_csv(out / "rl-grab-rate.csv", ["env_steps", "grabs_per_episode"],
              result.grab_rate_curve)
    write_csv(out / "rl-eval.csv", ["env_steps", "success", "spl"], result.eval_curve)
    with open(out / "reward-config.json", "w") as f:
        json.dump(asdict(reward), f, indent=2)
    write_svg_line(out / "rl-reward.svg", result.reward_curve,
                   "mean episodic return", "env steps", "return")
    manifest = _manifest(args, "train-rl")
    for p in (args.scenes, args.episodes):
        manifest.add_input(p)
    manifest.outputs = [str(out / "rl-final.ckpt")]
    manifest.write(out)
    print(f"trained for {result.env_steps} env steps "
          f"({result.updates} updates) in {result.wall_seconds:.0f}s")
    return 0


def cmd_eval(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = load_episode_files(args.episodes)
    config, params = policy.load_params(args.checkpoint)
    eval_set = [(scenes[e.scene_id], e) for e in episodes]
    result = train_bc.evaluate_policy(params, config, eval_set,
                                      seed=sub_seed(args.seed, "eval"))
    out = Path(args.out) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    report = {"episodes": len(eval_set), "success": result.success_rate,
              "spl": result.spl, "env_steps": result.env_steps}
    with open(out / "eval.json", "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    manifest = _manifest(args, "eval")
    manifest.add_input(args.checkpoint)
    manifest.write(out)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_stats(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = {e.id: e for e in load_episode_files(args.episodes)}
    demos = load_demo_files(args.demos)
    records = _records(demos, episodes, scenes)
    scene_of = {e.id: e.scene_id for e in episodes.values()}
    stats = metrics.dataset_stats(records, scenes=scenes, scene_of=scene_of)
    out = Path(args.out) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "stats.json", "w") as f:
        json.dump(stats.to_dict(), f, indent=2, sort_keys=True)
    write_csv(out / "stats.csv",
              ["episodes", "success_rate", "mean_spl", "mean_oc", "mean_sc"],
              [(stats.episodes, stats.success_rate, stats.mean_spl,
                stats.mean_oc, stats.mean_sc)])
    length_bins = sorted(stats.episode_length_histogram.items())
    write_svg_bars(out / "episode-lengths.svg",
                   [(str(k), float(v)) for k, v in length_bins],
                   "episode length histogram")
    write_svg_bars(out / "actions.svg",
                   [(k, float(v)) for k, v in sorted(stats.action_histogram.items())],
                   "action histogram")
    manifest = _manifest(args, "stats")
    manifest.add_input(args.demos)
    manifest.write(out)
    print(json.dumps(stats.to_dict()["per_source_spl"], sort_keys=True))
    print(f"success {stats.success_rate:.3f} spl {stats.mean_spl:.3f} "
          f"oc {stats.mean_oc:.3f} sc {stats.mean_sc:.3f}")
    return 0


def cmd_behaviors(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = {e.id: e for e in load_episode_files(args.episodes)}
    demos = load_demo_files(args.demos)
    out = Path(args.out) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for demo in demos:
        episode = episodes[demo.episode_id]
        scene = scenes[episode.scene_id]
        record = metrics.record_from_demo(scene, episode, demo)
        report = metrics.detect_behaviors(record, scene)
        rows.append((episode.id, demo.source, report.oc, report.sc, report.grts,
                     report.peeks, report.pt, report.beeline, report.es))
    write_csv(out / "behaviors.csv",
              ["episode", "source", "oc", "sc", "grts", "peeks", "pt",
               "beeline", "es"], rows)
    manifest = _manifest(args, "behaviors")
    manifest.add_input(args.demos)
    manifest.write(out)
    print(f"wrote {len(rows)} behavior rows to {out / 'behaviors.csv'}")
    return 0


def cmd_time_estimate(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = {e.id: e for e in load_episode_files(args.episodes)}
    demos = load_demo_files(args.demos)
    out = Path(args.out) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for demo in demos:
        episode = episodes[demo.episode_id]
        scene = scenes[episode.scene_id]
        record = metrics.record_from_demo(scene, episode, demo)
        rows.append((episode.id, demo.source, len(demo.steps),
                     metrics.estimate_real_time(record)))
    write_csv(out / "time-estimate.csv",
              ["episode", "source", "steps", "estimated_seconds"], rows)
    total = sum(r[3] for r in rows)
    manifest = _manifest(args, "time-estimate")
    manifest.add_input(args.demos)
    manifest.write(out)
    print(f"total estimated robot time {total:.1f}s over {len(rows)} demos")
    return 0


def cmd_sweep(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = {e.id: e for e in load_episode_files(args.episodes)}
    demos = load_demo_files(args.demos)
    eval_eps = load_episode_files(args.eval_episodes)
    eval_scenes = load_scene_dir(args.eval_scenes) if args.eval_scenes else scenes
    eval_set = [(eval_scenes[e.scene_id], e) for e in eval_eps]
    sizes = [int(s) for s in args.sizes.split(",")]
    out = Path(args.out) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    variant = episodes[demos[0].episode_id].task.variant
    pc = _policy_config_for(scenes, variant, args.hidden, sub_seed(args.seed, "init"))
    rows = []
    for size in sizes:
        corpus = _corpus(demos[:size], episodes, scenes)
        bc = train_bc.BCConfig(epochs=args.epochs, learning_rate=args.lr,
                               workers=args.bc_workers,
                               seed=sub_seed(args.seed, "sweep", size))
        result = train_bc.train(corpus, bc, pc, eval_set=eval_set)
        success = result.best_eval_success
        rows.append((size, success))
        print(f"size {size}: success {success:.3f}")
    write_csv(out / "sweep.csv", ["corpus_size", "success"], rows)
    write_svg_line(out / "sweep.svg", [(float(s), v) for s, v in rows],
                   "success vs corpus size", "demonstrations", "success")
    manifest = _manifest(args, "sweep")
    manifest.add_input(args.demos)
    manifest.write(out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _int_pair(text: str) -> list[int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated integers")
    return parts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="searchlab",
        description="Desk-scale embodied object-search laboratory.")
    parser.add_argument("--config", help="JSON file whose values override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory root")

    p = sub.add_parser("gen-scenes", help="generate procedural scenes")
    common(p)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--rows", type=int, default=48)
    p.add_argument("--cols", type=int, default=48)
    p.add_argument("--rooms", type=_int_pair, default=[4, 7])
    p.add_argument("--objects", type=_int_pair, default=[8, 14])
    p.set_defaults(func=cmd_gen_scenes)

    p = sub.add_parser("gen-episodes", help="sample episodes on scenes")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--task", choices=[tasks.OBJECTNAV, tasks.PICKPLACE],
                   default=tasks.OBJECTNAV)
    p.add_argument("--per-scene", type=int, default=20)
    p.set_defaults(func=cmd_gen_episodes)

    p = sub.add_parser("gen-demos", help="generate demonstrations")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--source", choices=["shortest", "scripted"], required=True)
    p.add_argument("--successes-only", action="store_true")
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("serve-teleop", help="serve the teleoperation protocol")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--task", default="")
    p.add_argument("--dataset", default="default")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve_teleop)

    p = sub.add_parser("train-bc", help="behavior cloning")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--eval-episodes")
    p.add_argument("--eval-scenes")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--bc-workers", type=int, default=1)
    p.add_argument("--max-demos", type=int, default=0)
    p.add_argument("--no-inflection", action="store_true")
    p.set_defaults(func=cmd_train_bc)

    p = sub.add_parser("train-rl", help="actor-critic with shaped rewards")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--eval-episodes")
    p.add_argument("--eval-scenes")
    p.add_argument("--workers", type=int, default=16)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--max-env-steps", type=int, default=100_000)
    p.add_argument("--max-seconds", type=float, default=None)
    p.add_argument("--eval-every", type=int, default=0)
    p.set_defaults(func=cmd_train_rl)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="corpus statistics")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--demos", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("behaviors", help="behavior detection per demo")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--demos", required=True)
    p.set_defaults(func=cmd_behaviors)

    p = sub.add_parser("time-estimate", help="real-robot time estimates")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--demos", required=True)
    p.set_defaults(func=cmd_time_estimate)

    p = sub.add_parser("sweep", help="dataset-size ablation")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--eval-episodes", required=True)
    p.add_argument("--eval-scenes")
    p.add_argument("--sizes", default="250,500,1000,2000")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--bc-workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as f:
            overrides = json.load(f)
        for key, value in overrides.items():
            setattr(args, key.replace("-", "_"), value)
    try:
        return args.func(args)
    except (world.GenerationError, world.PreconditionError, tasks.ProtocolError,
            FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

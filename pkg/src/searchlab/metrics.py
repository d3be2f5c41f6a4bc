"""Evaluation and behavior characterization.

Works over TrajectoryRecords (episode outcome + per-step pose/action trace),
which are built from demonstrations or policy rollouts.  Coverage uses
2.5 m x 2.5 m top-down patches (the planar reduction of the cubic voxels used
for the original 3D environments).
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import demos as demos_mod
from . import tasks, world
from .tasks import Episode, OBJECTNAV, PICKPLACE
from .world import AgentPose, Scene

PATCH_SIZE_M = 2.5

# LoCoBot motion model: time to rotate phi degrees / translate x meters.
ROTATE_COEFFS = (0.000358, 0.108, 2.23)
TRANSLATE_COEFFS = (4.2, 0.362)
GRAB_EQUIVALENT_FORWARD_M = 0.15

PEEK_MAX_STEPS = 10
PT_MIN_RUN = 6
PT_MIN_SWEEP_DEG = 180.0
BEELINE_WINDOW = 15
BEELINE_MIN_FORWARD = 10
ES_MIN_SIGHT_COVERAGE = 0.75


@dataclass
class TrajectoryRecord:
    episode_id: str
    variant: str  # objectnav | pickplace
    source: str
    poses: list[AgentPose]  # start pose followed by one pose per step
    actions: list[int]  # len(poses) - 1
    success: bool
    shortest_path_length: float  # geodesic l
    path_length: float  # agent path p
    goal_position: tuple[float, float] | None = None
    user: str | None = None

    @property
    def num_steps(self) -> int:
        return len(self.actions)


@dataclass
class BehaviorReport:
    oc: float
    sc: float
    grts: float
    peeks: int
    pt: int
    beeline: bool
    es: bool


def record_from_demo(scene: Scene, episode: Episode,
                     demo: demos_mod.Demonstration) -> TrajectoryRecord:
    poses = [episode.start_pose] + [s.pose for s in demo.steps]
    return TrajectoryRecord(
        episode_id=episode.id,
        variant=episode.task.variant,
        source=demo.source,
        poses=poses,
        actions=[s.action for s in demo.steps],
        success=demo.success,
        shortest_path_length=shortest_path_length(scene, episode),
        path_length=demo.path_length,
        goal_position=_goal_position(scene, episode),
        user=demo.user,
    )


def _goal_position(scene: Scene, episode: Episode) -> tuple[float, float] | None:
    task = episode.task
    if task.variant == OBJECTNAV:
        goals = scene.objects_of_category(task.goal_category)
        if not goals:
            return None
        start = (episode.start_pose.x, episode.start_pose.y)
        return min(goals, key=lambda o: math.hypot(o.position[0] - start[0],
                                                   o.position[1] - start[1])).position
    return scene.object_by_id(task.object_id).position


def shortest_path_length(scene: Scene, episode: Episode) -> float:
    """Geodesic l for SPL: start to the goal viewpoint set (ObjectNav), or the
    object leg plus the object-to-receptacle leg (Pick&Place)."""
    start = (episode.start_pose.x, episode.start_pose.y)
    task = episode.task
    if task.variant == OBJECTNAV:
        goals = scene.objects_of_category(task.goal_category)
        viewpoints = []
        for obj in goals:
            viewpoints.extend(world.goal_viewpoints(scene, obj, episode.success_radius))
        targets = viewpoints or [o.position for o in goals]
        return world.geodesic_distance(scene, start, targets)
    obj = scene.object_by_id(task.object_id)
    recep = scene.object_by_id(task.receptacle_id)
    leg1 = world.geodesic_distance(scene, start, [obj.position])
    if not np.isfinite(leg1):
        return leg1
    leg2 = world.geodesic_distance(scene, obj.position, [recep.position])
    return leg1 + leg2


# ---------------------------------------------------------------------------
# Headline metrics
# ---------------------------------------------------------------------------


def spl(records: list[TrajectoryRecord]) -> float:
    """Success weighted by path length: mean of S * l / max(p, l)."""
    if not records:
        raise ValueError("spl of an empty record set")
    total = 0.0
    n = 0
    for rec in records:
        if not np.isfinite(rec.shortest_path_length):
            warnings.warn(f"episode {rec.episode_id}: infinite shortest path, excluded")
            continue
        n += 1
        if rec.success and rec.shortest_path_length > 0:
            total += rec.shortest_path_length / max(rec.path_length, rec.shortest_path_length)
    if n == 0:
        raise ValueError("no records with finite shortest path")
    return total / n


def _patch_of(x: float, y: float) -> tuple[int, int]:
    return int(math.floor(x / PATCH_SIZE_M)), int(math.floor(y / PATCH_SIZE_M))


def navigable_patches(scene: Scene) -> set:
    out = set()
    for (r, c) in scene.navigable_cells():
        x, y = scene.cell_center(r, c)
        out.add(_patch_of(x, y))
    return out


def occupancy_coverage(record: TrajectoryRecord, scene: Scene) -> float:
    """Fraction of navigable 2.5 m patches the agent's position visited."""
    denom = navigable_patches(scene)
    visited = {_patch_of(p.x, p.y) for p in record.poses} & denom
    return len(visited) / len(denom)


def sight_coverage(record: TrajectoryRecord, scene: Scene,
                   sensors: tasks.SensorConfig | None = None) -> float:
    """Fraction of navigable cells crossed by any cast ray over the whole
    trajectory (start scan included); uses the simulator's raycaster."""
    sensors = sensors or tasks.SensorConfig()
    seen = np.zeros(scene.grid.shape, dtype=bool)
    for pose in record.poses:
        scan = world.raycast(scene, pose, fov_deg=sensors.fov_deg,
                             k=sensors.num_rays, max_range=sensors.max_range)
        angles = world.ray_angles(pose.heading, sensors.fov_deg, sensors.num_rays)
        seen |= world.ray_cells_mask(scene, (pose.x, pose.y), angles, scan.depths)
    seen &= ~scene.grid
    return float(seen.sum()) / float((~scene.grid).sum())


def _goal_room(scene: Scene, goal_position) -> world.Room | None:
    if goal_position is None:
        return None
    return scene.room_at(*goal_position)


def goal_room_time(record: TrajectoryRecord, scene: Scene) -> float:
    """Fraction of steps spent inside the goal object's room bounding box."""
    room = _goal_room(scene, record.goal_position)
    if room is None or record.num_steps == 0:
        return 0.0
    inside = sum(1 for p in record.poses[1:] if room.contains(p.x, p.y))
    return inside / record.num_steps


def room_time_histogram(record: TrajectoryRecord, scene: Scene) -> dict[str, int]:
    hist: Counter = Counter()
    for pose in record.poses[1:]:
        room = scene.room_at(pose.x, pose.y)
        hist[room.label if room else "none"] += 1
    return dict(hist)


# ---------------------------------------------------------------------------
# Behavior detectors
# ---------------------------------------------------------------------------

_TURNS = (tasks.TURN_LEFT, tasks.TURN_RIGHT)


def _room_runs(record: TrajectoryRecord, scene: Scene) -> list[tuple[int, int]]:
    """Compressed (room_index, steps) runs; doorway steps stick to the room
    last occupied."""
    runs: list[list[int]] = []
    current = None
    for pose in record.poses[1:]:
        room = scene.room_at(pose.x, pose.y)
        idx = scene.rooms.index(room) if room is not None else current
        if idx is None:
            continue
        if runs and runs[-1][0] == idx:
            runs[-1][1] += 1
        else:
            runs.append([idx, 1])
        current = idx
    return [(a, b) for a, b in runs]


def count_peeks(record: TrajectoryRecord, scene: Scene) -> int:
    runs = _room_runs(record, scene)
    peeks = 0
    for i in range(len(runs) - 2):
        a, _ = runs[i]
        b, nb = runs[i + 1]
        a2, _ = runs[i + 2]
        if a == a2 and b != a and nb <= PEEK_MAX_STEPS:
            peeks += 1
    return peeks


def count_panoramic_turns(record: TrajectoryRecord) -> int:
    turn_deg = (tasks.OBJECTNAV_TURN_DEG if record.variant == OBJECTNAV
                else tasks.PICKPLACE_TURN_DEG)
    count = 0
    i = 0
    actions = record.actions
    while i < len(actions):
        if actions[i] not in _TURNS:
            i += 1
            continue
        j = i
        while j < len(actions) and actions[j] in _TURNS:
            j += 1
        run = actions[i:j]
        if len(run) >= PT_MIN_RUN:
            both = tasks.TURN_LEFT in run and tasks.TURN_RIGHT in run
            if both or len(run) * turn_deg >= PT_MIN_SWEEP_DEG:
                count += 1
        i = j
    return count


def is_beeline(record: TrajectoryRecord) -> bool:
    if not record.success:
        return False
    tail = record.actions[-BEELINE_WINDOW:]
    best = run = 0
    for a in tail:
        run = run + 1 if a == tasks.MOVE_FORWARD else 0
        best = max(best, run)
    return best >= BEELINE_MIN_FORWARD


def detect_behaviors(record: TrajectoryRecord, scene: Scene,
                     sensors: tasks.SensorConfig | None = None) -> BehaviorReport:
    sc = sight_coverage(record, scene, sensors)
    return BehaviorReport(
        oc=occupancy_coverage(record, scene),
        sc=sc,
        grts=goal_room_time(record, scene),
        peeks=count_peeks(record, scene),
        pt=count_panoramic_turns(record),
        beeline=is_beeline(record),
        es=sc >= ES_MIN_SIGHT_COVERAGE,
    )


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------


@dataclass
class DatasetStats:
    episodes: int
    success_rate: float
    mean_spl: float
    mean_oc: float
    mean_sc: float
    episode_length_histogram: dict[int, int]
    action_histogram: dict[str, int]
    per_source_spl: dict[str, float]
    per_user_spl: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "mean_spl": self.mean_spl,
            "mean_oc": self.mean_oc,
            "mean_sc": self.mean_sc,
            "episode_length_histogram": {str(k): v for k, v in
                                         sorted(self.episode_length_histogram.items())},
            "action_histogram": self.action_histogram,
            "per_source_spl": self.per_source_spl,
            "per_user_spl": self.per_user_spl,
        }


def dataset_stats(records: list[TrajectoryRecord], scenes: dict[str, Scene] | None = None,
                  scene_of: dict[str, str] | None = None,
                  include_coverage: bool = True) -> DatasetStats:
    """Aggregate corpus statistics.  ``scenes``/``scene_of`` map episode ids to
    their scenes for the coverage columns; without them (or with
    include_coverage=False) OC/SC are reported as NaN."""
    if not records:
        raise ValueError("dataset_stats of an empty corpus")
    lengths = Counter(r.num_steps for r in records)
    actions: Counter = Counter()
    for rec in records:
        for a in rec.actions:
            actions[tasks.ACTION_NAMES[a]] += 1
    oc_vals, sc_vals = [], []
    if include_coverage and scenes is not None and scene_of is not None:
        for rec in records:
            scene = scenes[scene_of[rec.episode_id]]
            oc_vals.append(occupancy_coverage(rec, scene))
            sc_vals.append(sight_coverage(rec, scene))
    by_source: dict[str, list] = {}
    by_user: dict[str, list] = {}
    for rec in records:
        by_source.setdefault(rec.source, []).append(rec)
        if rec.user is not None:
            by_user.setdefault(rec.user, []).append(rec)
    return DatasetStats(
        episodes=len(records),
        success_rate=sum(r.success for r in records) / len(records),
        mean_spl=spl(records),
        mean_oc=float(np.mean(oc_vals)) if oc_vals else float("nan"),
        mean_sc=float(np.mean(sc_vals)) if sc_vals else float("nan"),
        episode_length_histogram=dict(lengths),
        action_histogram=dict(actions),
        per_source_spl={k: spl(v) for k, v in by_source.items()},
        per_user_spl={k: spl(v) for k, v in by_user.items()},
    )


# ---------------------------------------------------------------------------
# Real-world time estimation (LoCoBot motion model)
# ---------------------------------------------------------------------------


def rotation_time(phi_deg: float) -> float:
    a, b, c = ROTATE_COEFFS
    return a * phi_deg * phi_deg + b * phi_deg + c


def translation_time(x_m: float) -> float:
    a, b = TRANSLATE_COEFFS
    return a * x_m + b


def estimate_real_time(record: TrajectoryRecord) -> float:
    """Seconds a LoCoBot would take to execute the action sequence.  Turns and
    look actions use the rotation polynomial at their angular magnitude;
    forward/backward use the translation line; grab/release and no-op count as
    0.15 m forward steps; STOP is free."""
    variant = record.variant
    turn = tasks.OBJECTNAV_TURN_DEG if variant == OBJECTNAV else tasks.PICKPLACE_TURN_DEG
    fwd = tasks.OBJECTNAV_FORWARD_M if variant == OBJECTNAV else tasks.PICKPLACE_FORWARD_M
    total = 0.0
    for a in record.actions:
        if a in (tasks.TURN_LEFT, tasks.TURN_RIGHT, tasks.LOOK_UP, tasks.LOOK_DOWN):
            total += rotation_time(turn)
        elif a in (tasks.MOVE_FORWARD, tasks.MOVE_BACKWARD):
            total += translation_time(fwd)
        elif a in (tasks.GRAB_RELEASE, tasks.NO_OP):
            total += translation_time(GRAB_EQUIVALENT_FORWARD_M)
        # STOP: 0
    return total

"""Demonstration generation, persistence, and deterministic replay.

Sources:
  - ``shortest``: greedy one-step-lookahead follower of the geodesic field.
  - ``scripted``: frontier-based explorer with panoramic turns and corner
    checks that beelines to the goal the moment a ray labels it.
  - ``human``: recorded by the teleoperation service (same schema).

Every demonstration replays exactly: actions applied through ``tasks.Sim``
reproduce each logged pose to 1e-9 m and the logged success flag.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import tasks, world
from .tasks import (
    Episode,
    GRAB_RELEASE,
    LOOK_DOWN,
    LOOK_UP,
    MOVE_FORWARD,
    OBJECTNAV,
    PICKPLACE,
    STOP,
    Sim,
    TURN_LEFT,
    TURN_RIGHT,
)
from .world import AgentPose, GenerationError, Scene

SCHEMA_VERSION = "demov1"
TICK_MS = 50

# Follower targets sit slightly inside the success disc so cell-center
# quantization cannot push the final pose past the radius.
VIEWPOINT_MARGIN_M = 0.15


class ReplayError(Exception):
    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


class SchemaVersionError(Exception):
    pass


@dataclass
class DemoStep:
    action: int
    pose: AgentPose
    held: int | None
    tick_ms: int


@dataclass
class Demonstration:
    episode_id: str
    source: str  # human | shortest | scripted
    steps: list[DemoStep]
    success: bool
    path_length: float
    user: str | None = None

    @property
    def actions(self) -> list[int]:
        return [s.action for s in self.steps]


# ---------------------------------------------------------------------------
# Greedy geodesic follower
# ---------------------------------------------------------------------------


class GreedyFollower:
    """Picks among {FORWARD, LEFT, RIGHT} the action minimizing post-action
    geodesic distance to a target cell set (one-step simulated lookahead,
    ties broken FORWARD > LEFT > RIGHT).  Blocked moves score +inf."""

    def __init__(self, scene: Scene, target_cells: list[tuple[int, int]],
                 escape: bool = True):
        self.scene = scene
        self.field = world.distance_field(scene, target_cells, no_corner_cut=True)
        self.escape = escape
        self._fruitless_turns = 0
        self._pending: list[int] = []

    def pose_distance(self, pose: AgentPose) -> float:
        """Continuous extension of the cell distance field: min over the 3x3
        neighborhood of field[c] + straight-line distance to the cell center."""
        scene = self.scene
        r0, c0 = scene.cell_of(pose.x, pose.y)
        best = math.inf
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r, c = r0 + dr, c0 + dc
                if not scene.in_bounds(r, c) or scene.grid[r, c]:
                    continue
                if dr != 0 and dc != 0:
                    # Match the field's no-corner-cut rule: a diagonal
                    # neighbor counts only if both orthogonal cells are open,
                    # otherwise the score would leak through a wall corner.
                    if scene.grid[r0, c] or scene.grid[r, c0]:
                        continue
                d = self.field[r, c]
                if not np.isfinite(d):
                    continue
                cx, cy = scene.cell_center(r, c)
                best = min(best, d + math.hypot(pose.x - cx, pose.y - cy))
        return best

    def choose_action(self, sim: Sim) -> int:
        if self._pending:
            return self._pending.pop(0)
        pose = sim.state.pose
        task = sim.episode.task
        candidates = []
        for action in (MOVE_FORWARD, TURN_LEFT, TURN_RIGHT):
            score = self._lookahead_score(pose, action, task)
            if score is None:
                continue
            candidates.append((score, action))
        cur = self.pose_distance(pose)
        improving = [(s, a) for s, a in candidates if s < cur - 1e-9]
        if not improving:
            # Sweep headings until some forward helps.  A whole spin with no
            # progress means the pose is wedged (e.g. a doorway the footprint
            # only clears from a slightly different offset); plan a short
            # detour that is allowed to get worse before it gets better.
            self._fruitless_turns += 1
            if self._fruitless_turns <= 360 / task.turn_deg():
                return TURN_LEFT
            self._fruitless_turns = 0
            if self.escape:
                plan = self._escape_plan(pose, task, cur)
                if plan:
                    self._pending = plan[1:]
                    return plan[0]
            if candidates:
                return min(candidates, key=lambda t: t[0])[1]
            return TURN_LEFT
        self._fruitless_turns = 0
        best = min(improving, key=lambda t: t[0])
        for score, action in improving:  # preserve F > L > R order on ties
            if score <= best[0] + 1e-9:
                return action
        return best[1]

    def _lookahead_score(self, pose: AgentPose, action: int, task) -> float | None:
        """Geodesic distance after the action.  Turns do not move the agent, so
        a turn is scored by the pose after turn-then-forward (otherwise turning
        could never look better than standing still); a turn whose follow-up
        forward is blocked scores the current distance."""
        if action == MOVE_FORWARD:
            nxt = self._forward(pose, task)
            return None if nxt is None else self.pose_distance(nxt)
        turned = pose.turned(task.turn_deg() if action == TURN_LEFT else -task.turn_deg())
        nxt = self._forward(turned, task)
        return self.pose_distance(turned if nxt is None else nxt)

    def _forward(self, pose: AgentPose, task) -> AgentPose | None:
        rad = math.radians(pose.heading)
        nx = pose.x + task.forward_m() * math.cos(rad)
        ny = pose.y + task.forward_m() * math.sin(rad)
        if not self.scene.is_pose_navigable(nx, ny):
            return None
        return AgentPose(nx, ny, pose.heading, pose.pitch)

    _ESCAPE_MAX_NODES = 6000
    _ESCAPE_MAX_STEPS = 50
    _ESCAPE_GAIN = 0.2  # required distance improvement over the wedged pose

    def _escape_plan(self, start: AgentPose, task, wedge_g: float) -> list[int]:
        """A* over the discrete pose graph for an action sequence ending
        strictly closer to the targets than the wedged pose.  Used only when
        greedy descent stalls, so the search stays tiny in practice."""
        import heapq
        import itertools

        dist_cache: dict[tuple[float, float], float] = {}

        def g_of(pose: AgentPose) -> float:
            key = (round(pose.x, 4), round(pose.y, 4))
            if key not in dist_cache:
                dist_cache[key] = self.pose_distance(pose)
            return dist_cache[key]

        goal_g = wedge_g - self._ESCAPE_GAIN
        counter = itertools.count()
        frontier = [(g_of(start), next(counter), 0, start, [])]
        seen = set()
        nodes = 0
        while frontier and nodes < self._ESCAPE_MAX_NODES:
            _, _, steps, pose, path = heapq.heappop(frontier)
            key = (round(pose.x, 3), round(pose.y, 3), round(pose.heading, 1))
            if key in seen:
                continue
            seen.add(key)
            nodes += 1
            if g_of(pose) <= goal_g:
                return path
            if steps >= self._ESCAPE_MAX_STEPS:
                continue
            succ = [(TURN_LEFT, pose.turned(task.turn_deg())),
                    (TURN_RIGHT, pose.turned(-task.turn_deg()))]
            fwd = self._forward(pose, task)
            if fwd is not None:
                succ.insert(0, (MOVE_FORWARD, fwd))
            for action, nxt in succ:
                cost = g_of(nxt) + 0.05 * (steps + 1)
                heapq.heappush(frontier, (cost, next(counter), steps + 1, nxt,
                                          path + [action]))
        return []


def _viewpoint_cells(scene: Scene, objs, radius: float,
                     robust: bool = False) -> list[tuple[int, int]]:
    cells = set()
    for obj in objs:
        for (x, y) in world.goal_viewpoints(scene, obj, radius):
            if robust and not _los_robust(scene, (x, y), obj.position):
                continue
            cells.add(scene.cell_of(x, y))
    if robust and not cells:  # all sight lines are grazing; fall back
        return _viewpoint_cells(scene, objs, radius, robust=False)
    return sorted(cells)


_LOS_JITTER_M = 0.12  # the agent can stop anywhere inside the target cell


def _los_robust(scene: Scene, point: tuple[float, float], target) -> bool:
    """LOS to target from every corner of a small square around point, so a
    pose slightly off the cell center cannot lose sight behind a wall edge."""
    x, y = point
    j = _LOS_JITTER_M
    return all(
        world.segment_clear(scene, (x + dx, y + dy), target)
        for dx in (-j, j) for dy in (-j, j)
    )


class _Recorder:
    """Drives a Sim while logging poses/actions into a Demonstration."""

    def __init__(self, scene: Scene, episode: Episode, source: str):
        self.sim = Sim(scene, episode)
        self.state, self.obs = self.sim.reset()
        self.steps: list[DemoStep] = []
        self.path_length = 0.0
        self.outcome = None
        self.source = source
        self.episode = episode

    @property
    def done(self) -> bool:
        return self.state.done

    def apply(self, action: int):
        before = self.state.pose
        self.state, self.obs, self.outcome = self.sim.step(action)
        after = self.state.pose
        self.path_length += math.hypot(after.x - before.x, after.y - before.y)
        self.steps.append(
            DemoStep(
                action=action,
                pose=after,
                held=self.state.held_object,
                tick_ms=TICK_MS * len(self.steps) + TICK_MS,
            )
        )
        return self.obs

    def finish(self) -> Demonstration:
        success = bool(self.state.succeeded)
        return Demonstration(
            episode_id=self.episode.id,
            source=self.source,
            steps=self.steps,
            success=success,
            path_length=self.path_length,
        )


# ---------------------------------------------------------------------------
# Shortest-path demonstrations
# ---------------------------------------------------------------------------


def shortest_path_demo(scene: Scene, episode: Episode) -> Demonstration:
    """Greedy geodesic follower; PickPlace chains object approach, grab,
    receptacle approach, release.  Never emits BACKWARD or NO_OP."""
    if episode.task.variant == OBJECTNAV:
        return _shortest_objectnav(scene, episode)
    return _shortest_pickplace(scene, episode)


def _shortest_objectnav(scene: Scene, episode: Episode) -> Demonstration:
    goals = scene.objects_of_category(episode.task.goal_category)
    radius = max(episode.success_radius - VIEWPOINT_MARGIN_M, scene.cell_size)
    targets = _viewpoint_cells(scene, goals, radius, robust=True)
    if not targets:
        raise GenerationError(f"episode {episode.id}: goal has no reachable viewpoints")
    rec = _Recorder(scene, episode, "shortest")
    follower = GreedyFollower(scene, targets)
    if not np.isfinite(follower.pose_distance(rec.state.pose)):
        raise GenerationError(f"episode {episode.id}: goal unreachable from start")
    _objectnav_follow(rec, scene, episode, goals, follower, radius)
    return rec.finish()


def _objectnav_follow(rec: _Recorder, scene: Scene, episode: Episode, goals,
                      follower: GreedyFollower, radius: float) -> None:
    """Drive the recorder to ObjectNav success (or an honest failure) with the
    greedy follower, retargeting tighter viewpoint rings when a grazing sight
    line keeps the success check from firing."""
    guard = {}
    stalled = 0
    while not rec.done:
        pose = rec.state.pose
        if pose.pitch != 0.0:
            rec.apply(LOOK_UP if pose.pitch < 0 else LOOK_DOWN)
            continue
        if tasks.objectnav_success(scene, rec.state, episode):
            rec.apply(STOP)
            break
        if follower.pose_distance(pose) < 0.1:
            stalled += 1
            if stalled >= 3:
                radius = max(radius - 0.2, scene.cell_size)
                follower = GreedyFollower(
                    scene, _viewpoint_cells(scene, goals, radius, robust=True))
                stalled = 0
        key = (scene.cell_of(pose.x, pose.y), round(pose.heading, 3))
        guard[key] = guard.get(key, 0) + 1
        if guard[key] > 4 or len(rec.steps) >= episode.step_limit - 1:
            rec.apply(STOP)  # stuck or out of budget; fail honestly
            break
        rec.apply(follower.choose_action(rec.sim))


def _face_and_pitch(rec: _Recorder, target_obj_id: int, scene: Scene) -> bool:
    """Heuristic planner: turn so the object is at the crosshair, adjust pitch
    to its height band, return True when the center ray hits it in range."""
    task = rec.episode.task
    for _ in range(int(360 / task.turn_deg()) + 8):
        if rec.done:
            return False
        objs = tasks.effective_objects(scene, rec.state)
        target = next((o for o in objs if o.id == target_obj_id), None)
        if target is None:
            return False
        pose = rec.state.pose
        # Pitch to the object's band first (mid is visible at any pitch).
        if target.height_band == "low" and pose.pitch >= 0:
            rec.apply(LOOK_DOWN)
            continue
        if target.height_band == "high" and pose.pitch <= 0:
            rec.apply(LOOK_UP)
            continue
        bearing = math.degrees(math.atan2(target.position[1] - pose.y,
                                          target.position[0] - pose.x))
        err = (bearing - pose.heading + 180.0) % 360.0 - 180.0
        if abs(err) > task.turn_deg() / 2.0 + 1e-9:
            rec.apply(TURN_LEFT if err > 0 else TURN_RIGHT)
            continue
        kind, depth, hit = world.center_ray_hit(scene, rec.state.pose, objects=objs)
        if kind == "object" and hit is not None and hit.id == target_obj_id \
                and depth <= tasks.GRAB_RANGE_M:
            return True
        if kind == "object" and hit is not None and hit.id == target_obj_id:
            rec.apply(MOVE_FORWARD)  # in the crosshair but out of reach
            continue
        rec.apply(MOVE_FORWARD)  # occluded; close in and retry
    return False


def _navigate_to(rec: _Recorder, scene: Scene, obj, approach_radius: float,
                 max_steps: int) -> bool:
    targets = _viewpoint_cells(scene, [obj], approach_radius, robust=True)
    if not targets:
        return False
    follower = GreedyFollower(scene, targets)
    stalled = 0
    radius = approach_radius
    for _ in range(max_steps):
        if rec.done:
            return False
        pose = rec.state.pose
        d = math.hypot(obj.position[0] - pose.x, obj.position[1] - pose.y)
        if d <= approach_radius and world.segment_clear(scene, (pose.x, pose.y), obj.position):
            return True
        if follower.pose_distance(pose) < 0.1:
            # At a viewpoint but the range/LOS check still fails (grazing
            # sight line); retarget a tighter ring until it passes.
            stalled += 1
            if stalled >= 3:
                radius = max(radius - 0.2, scene.cell_size)
                follower = GreedyFollower(
                    scene, _viewpoint_cells(scene, [obj], radius, robust=True))
                stalled = 0
        rec.apply(follower.choose_action(rec.sim))
    return False


def _acquire(rec: _Recorder, scene: Scene, target, budget: int) -> bool:
    """Navigate within reach of target and get it onto the crosshair.  When
    facing fails (a wall corner or another object clips the sight line),
    re-approach at a tighter radius and retry."""
    approach = min(tasks.GRAB_RANGE_M - 0.3, 1.2)
    for _ in range(4):
        remaining = budget - len(rec.steps)
        if remaining <= 0 or rec.done:
            return False
        if not _navigate_to(rec, scene, target, approach, remaining):
            return False
        if _face_and_pitch(rec, target.id, scene):
            return True
        approach = max(approach - 0.25, 0.35)
    return False


def _shortest_pickplace(scene: Scene, episode: Episode) -> Demonstration:
    task = episode.task
    obj = scene.object_by_id(task.object_id)
    recep = scene.object_by_id(task.receptacle_id)
    rec = _Recorder(scene, episode, "shortest")
    budget = episode.step_limit - 2

    if _acquire(rec, scene, obj, budget) and not rec.done:
        rec.apply(GRAB_RELEASE)
    if rec.state.held_object == obj.id and not rec.done:
        recep_now = tasks.object_state(scene, rec.state, recep.id)
        if _acquire(rec, scene, recep_now, budget) and not rec.done:
            rec.apply(GRAB_RELEASE)
    if not rec.done:
        rec.apply(STOP)
    return rec.finish()


# ---------------------------------------------------------------------------
# Scripted explorer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplorerProfile:
    panoramic_prob: float = 0.7
    corner_check_prob: float = 0.03
    frontier_tie_break: str = "nearest"  # nearest | random | far
    frontier_lease_steps: int = 30  # steps before re-picking a frontier
    # How far away a ray-swept cell counts as "explored".  Sensors see 5 m,
    # but a thorough profile only checks areas off as explored when they were
    # seen up close, which makes the explorer physically walk into them.
    seen_range_m: float = 5.0


class _SeenMap:
    """Navigable cells swept by any cast ray so far (the sight-coverage map)."""

    def __init__(self, scene: Scene, sensors: tasks.SensorConfig,
                 seen_range_m: float | None = None):
        self.scene = scene
        self.sensors = sensors
        self.seen_range = seen_range_m if seen_range_m is not None else sensors.max_range
        self.seen = np.zeros(scene.grid.shape, dtype=bool)

    def update(self, pose: AgentPose, scan: world.RayScan) -> None:
        angles = world.ray_angles(pose.heading, self.sensors.fov_deg, len(scan))
        depths = np.minimum(scan.depths, self.seen_range)
        self.seen |= world.ray_cells_mask(
            self.scene, (pose.x, pose.y), angles, depths) & ~self.scene.grid

    def unseen_cells(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(~self.scene.grid & ~self.seen)
        return list(zip(rows.tolist(), cols.tolist()))


def scripted_explorer_demo(scene: Scene, episode: Episode, seed: int,
                           profile: ExplorerProfile | None = None) -> Demonstration:
    """Frontier-style exploration until the goal enters a ray, then beeline.

    Deterministic per (seed, profile).  Exceeding the step budget yields a
    demonstration with success = False (kept, matching failed human runs).
    """
    profile = profile or ExplorerProfile()
    rng = world._derive_rng(seed, "explorer", episode.id)
    rec = _Recorder(scene, episode, "scripted")
    sensors = rec.sim.sensors
    seen = _SeenMap(scene, sensors, seen_range_m=profile.seen_range_m)
    seen.update(rec.state.pose, rec.obs.rays)

    task = episode.task
    if task.variant == OBJECTNAV:
        goal_cat = task.goal_category
        goal_objs = scene.objects_of_category(goal_cat)
    else:
        goal_cat = scene.object_by_id(task.object_id).category
        goal_objs = [scene.object_by_id(task.object_id)]

    turn_steps = int(round(360.0 / task.turn_deg()))
    pending: list[int] = []
    follower: GreedyFollower | None = None
    follower_steps_left = 0
    last_room = scene.room_at(rec.state.pose.x, rec.state.pose.y)
    budget = episode.step_limit - 2

    def goal_sighted(obs) -> bool:
        return any(lab == goal_cat for lab in obs.rays.labels)

    goal_band = goal_objs[0].height_band if goal_objs else "mid"

    def panoramic_actions() -> list[int]:
        # Sweep a full turn with gaze pitched into the sought category's band
        # (low and high objects never enter a level gaze), then level off.
        turns = [TURN_LEFT] * turn_steps
        if goal_band == "low":
            return [LOOK_DOWN] + turns + [LOOK_UP]
        if goal_band == "high":
            return [LOOK_UP] + turns + [LOOK_DOWN]
        return turns

    sighted = goal_sighted(rec.obs)
    while not rec.done and len(rec.steps) < budget:
        if sighted:
            break
        if pending:
            action = pending.pop(0)
        elif follower is not None and follower_steps_left > 0:
            action = follower.choose_action(rec.sim)
            follower_steps_left -= 1
        else:
            unseen = seen.unseen_cells()
            if not unseen:
                action = TURN_LEFT if rng.random() < 0.5 else MOVE_FORWARD
            else:
                here = scene.cell_of(rec.state.pose.x, rec.state.pose.y)
                from_here = world.distance_field(scene, [here], no_corner_cut=True)
                reachable = [cell for cell in unseen if np.isfinite(from_here[cell])]
                if not reachable:
                    action = TURN_LEFT
                else:
                    if profile.frontier_tie_break == "random":
                        target = reachable[int(rng.integers(0, len(reachable)))]
                    elif profile.frontier_tie_break == "far":
                        target = max(reachable, key=lambda cc: from_here[cc])
                    else:
                        target = min(reachable, key=lambda cc: from_here[cc])
                    follower = GreedyFollower(scene, [target], escape=False)
                    follower_steps_left = profile.frontier_lease_steps
                    action = follower.choose_action(rec.sim)
                    follower_steps_left -= 1
        obs = rec.apply(action)
        seen.update(rec.state.pose, obs.rays)
        if goal_sighted(obs):
            sighted = True
            break
        room = scene.room_at(rec.state.pose.x, rec.state.pose.y)
        if room is not None and room is not last_room:
            last_room = room
            if rng.random() < profile.panoramic_prob:
                pending = panoramic_actions()
                follower = None
        elif not pending and rng.random() < profile.corner_check_prob:
            pending = [LOOK_DOWN, TURN_LEFT, TURN_LEFT, LOOK_UP]

    if rec.done:
        return rec.finish()

    # Beeline: same machinery as the shortest-path source.
    if task.variant == OBJECTNAV:
        radius = max(episode.success_radius - VIEWPOINT_MARGIN_M, scene.cell_size)
        targets = _viewpoint_cells(scene, goal_objs, radius, robust=True)
        if targets:
            bee = GreedyFollower(scene, targets)
            _objectnav_follow(rec, scene, episode, goal_objs, bee, radius)
        if not rec.done:
            rec.apply(STOP)
    else:
        obj = scene.object_by_id(task.object_id)
        recep = scene.object_by_id(task.receptacle_id)
        budget = episode.step_limit - 2
        if _acquire(rec, scene, obj, budget) and not rec.done:
            rec.apply(GRAB_RELEASE)
        if rec.state.held_object == obj.id and not rec.done:
            recep_now = tasks.object_state(scene, rec.state, recep.id)
            if _acquire(rec, scene, recep_now, budget) and not rec.done:
                rec.apply(GRAB_RELEASE)
        if not rec.done:
            rec.apply(STOP)
    return rec.finish()


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


@dataclass
class ReplayResult:
    final_state: tasks.SimState
    success: bool
    pose_trace: list[AgentPose]
    observations: list[tasks.Observation]
    divergences: list[int]


POSE_TOLERANCE = 1e-9


def replay(scene: Scene, episode: Episode, demo: Demonstration,
           strict: bool = True, collect_observations: bool = False) -> ReplayResult:
    """Re-execute a demonstration through tasks.step and verify each logged
    pose to 1e-9 m / degrees.  Human demos replay with the step cap lifted
    (teleoperation has no step limit)."""
    if demo.episode_id != episode.id:
        raise world.PreconditionError(
            f"demo for {demo.episode_id} replayed against {episode.id}")
    if demo.source == "human" and len(demo.steps) >= episode.step_limit:
        episode = Episode(
            id=episode.id, scene_id=episode.scene_id, start_pose=episode.start_pose,
            task=episode.task, step_limit=len(demo.steps) + 1,
            success_radius=episode.success_radius,
        )
    sim = Sim(scene, episode)
    state, obs = sim.reset()
    trace = [state.pose]
    observations = [obs] if collect_observations else []
    divergences = []
    for i, step in enumerate(demo.steps):
        state, obs, _ = sim.step(step.action)
        trace.append(state.pose)
        if collect_observations:
            observations.append(obs)
        logged = step.pose
        diff = max(
            abs(state.pose.x - logged.x),
            abs(state.pose.y - logged.y),
            abs((state.pose.heading - logged.heading + 180.0) % 360.0 - 180.0),
            abs(state.pose.pitch - logged.pitch),
        )
        if diff > POSE_TOLERANCE or state.held_object != step.held:
            divergences.append(i)
            if strict:
                raise ReplayError(f"replay diverged at step {i} (delta {diff:g})", i)
        if state.done:
            break
    success = bool(state.succeeded)
    if success != demo.success:
        divergences.append(len(demo.steps))
        if strict:
            raise ReplayError(
                f"replayed success {success} != logged {demo.success}", len(demo.steps))
    return ReplayResult(
        final_state=state, success=success, pose_trace=trace,
        observations=observations, divergences=divergences,
    )


# ---------------------------------------------------------------------------
# Persistence (JSON Lines, schema "demov1")
# ---------------------------------------------------------------------------


def demo_to_dict(demo: Demonstration) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "episode_id": demo.episode_id,
        "source": demo.source,
        "user": demo.user,
        "success": demo.success,
        "path_length": demo.path_length,
        "steps": [
            [s.action, s.pose.x, s.pose.y, s.pose.heading, s.pose.pitch, s.held, s.tick_ms]
            for s in demo.steps
        ],
    }


def demo_from_dict(data: dict) -> Demonstration:
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported demo schema {version!r} (expected {SCHEMA_VERSION!r})")
    steps = [
        DemoStep(
            action=int(a),
            pose=AgentPose(x, y, heading, pitch),
            held=held,
            tick_ms=int(tick),
        )
        for (a, x, y, heading, pitch, held, tick) in data["steps"]
    ]
    return Demonstration(
        episode_id=data["episode_id"],
        source=data["source"],
        steps=steps,
        success=bool(data["success"]),
        path_length=float(data["path_length"]),
        user=data.get("user"),
    )


def store_demos(demos: list[Demonstration], path, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode) as f:
        for demo in demos:
            f.write(json.dumps(demo_to_dict(demo)) + "\n")


def append_demo(demo: Demonstration, path) -> None:
    store_demos([demo], path, append=True)


def load_demos(path) -> tuple[list[Demonstration], list[tuple[int, str]]]:
    """Load a JSONL corpus.  Returns (demos, diagnostics); diagnostics carry
    (1-based line number, message) for malformed lines.  A recognizably wrong
    schema version raises SchemaVersionError."""
    demos = []
    diagnostics = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                diagnostics.append((lineno, f"malformed JSON: {e}"))
                continue
            try:
                demos.append(demo_from_dict(data))
            except SchemaVersionError:
                raise
            except (KeyError, TypeError, ValueError) as e:
                diagnostics.append((lineno, f"bad record: {e}"))
    return demos, diagnostics

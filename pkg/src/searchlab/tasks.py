"""ObjectNav and Pick&Place episode semantics.

Action ids are stable small integers shared by the episode files, the
demonstration logs, and the wire protocol:

    0 STOP   1 MOVE_FORWARD   2 TURN_LEFT   3 TURN_RIGHT
    4 LOOK_UP   5 LOOK_DOWN   6 MOVE_BACKWARD*   7 GRAB_RELEASE*   8 NO_OP*

(* Pick&Place only.)  ObjectNav moves 0.25 m and turns/looks in 30 degree
increments; Pick&Place moves 0.15 m and turns/looks in 5 degree increments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import world
from .world import (
    AgentPose,
    GenerationError,
    ObjectInstance,
    PreconditionError,
    RayScan,
    Scene,
)

STOP = 0
MOVE_FORWARD = 1
TURN_LEFT = 2
TURN_RIGHT = 3
LOOK_UP = 4
LOOK_DOWN = 5
MOVE_BACKWARD = 6
GRAB_RELEASE = 7
NO_OP = 8

ACTION_NAMES = {
    STOP: "STOP",
    MOVE_FORWARD: "MOVE_FORWARD",
    TURN_LEFT: "TURN_LEFT",
    TURN_RIGHT: "TURN_RIGHT",
    LOOK_UP: "LOOK_UP",
    LOOK_DOWN: "LOOK_DOWN",
    MOVE_BACKWARD: "MOVE_BACKWARD",
    GRAB_RELEASE: "GRAB_RELEASE",
    NO_OP: "NO_OP",
}
ACTION_IDS = {v: k for k, v in ACTION_NAMES.items()}

OBJECTNAV = "objectnav"
PICKPLACE = "pickplace"

OBJECTNAV_ACTIONS = (STOP, MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, LOOK_UP, LOOK_DOWN)
PICKPLACE_ACTIONS = OBJECTNAV_ACTIONS + (MOVE_BACKWARD, GRAB_RELEASE, NO_OP)

OBJECTNAV_FORWARD_M = 0.25
OBJECTNAV_TURN_DEG = 30.0
PICKPLACE_FORWARD_M = 0.15
PICKPLACE_TURN_DEG = 5.0

OBJECTNAV_STEP_LIMIT = 500
PICKPLACE_STEP_LIMIT = 1500
OBJECTNAV_SUCCESS_RADIUS = 1.0
PICKPLACE_SUCCESS_RADIUS = 0.7
GRAB_RANGE_M = 1.5
PLACE_HEIGHT_OFFSET = 0.1
DROP_AHEAD_M = 1.0


class ProtocolError(Exception):
    """Raised on illegal action use (wrong variant, step after done, ...)."""


@dataclass(frozen=True)
class TaskSpec:
    variant: str  # OBJECTNAV | PICKPLACE
    goal_category: str | None = None  # ObjectNav
    object_id: int | None = None  # Pick&Place
    receptacle_id: int | None = None  # Pick&Place
    instruction: tuple[str, ...] = ()

    def actions(self) -> tuple[int, ...]:
        return OBJECTNAV_ACTIONS if self.variant == OBJECTNAV else PICKPLACE_ACTIONS

    def forward_m(self) -> float:
        return OBJECTNAV_FORWARD_M if self.variant == OBJECTNAV else PICKPLACE_FORWARD_M

    def turn_deg(self) -> float:
        return OBJECTNAV_TURN_DEG if self.variant == OBJECTNAV else PICKPLACE_TURN_DEG


@dataclass(frozen=True)
class Episode:
    id: str
    scene_id: str
    start_pose: AgentPose
    task: TaskSpec
    step_limit: int
    success_radius: float


@dataclass
class SimState:
    pose: AgentPose
    held_object: int | None = None
    # object id -> (x, y, center_height) overrides of scene positions
    object_positions: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    step_count: int = 0
    done: bool = False
    collided_last: bool = False
    succeeded: bool = False

    def copy(self) -> "SimState":
        return SimState(
            pose=self.pose,
            held_object=self.held_object,
            object_positions=dict(self.object_positions),
            step_count=self.step_count,
            done=self.done,
            collided_last=self.collided_last,
            succeeded=self.succeeded,
        )


@dataclass
class Observation:
    rays: RayScan
    sge: float
    gps: tuple[float, float]
    compass: float
    pitch: float
    goal: str | tuple[str, ...]
    held: int | None
    prev_action: int | None


@dataclass(frozen=True)
class StepOutcome:
    status: str  # continuing | success | failure
    reason: str = ""

    @property
    def continuing(self) -> bool:
        return self.status == "continuing"


@dataclass(frozen=True)
class SensorConfig:
    fov_deg: float = world.DEFAULT_FOV_DEG
    num_rays: int = world.DEFAULT_NUM_RAYS
    max_range: float = world.DEFAULT_MAX_RANGE


def effective_objects(scene: Scene, state: SimState) -> list[ObjectInstance]:
    """Scene objects with simulator overrides applied; a held object is
    absent from the world."""
    out = []
    for obj in scene.objects:
        if obj.id == state.held_object:
            continue
        if obj.id in state.object_positions:
            x, y, h = state.object_positions[obj.id]
            obj = replace_position(obj, x, y, h)
        out.append(obj)
    return out


def replace_position(obj: ObjectInstance, x: float, y: float, h: float) -> ObjectInstance:
    return ObjectInstance(
        id=obj.id,
        category=obj.category,
        position=(x, y),
        height_band=obj.height_band,
        center_height=h,
        footprint_radius=obj.footprint_radius,
        is_receptacle=obj.is_receptacle,
    )


def object_state(scene: Scene, state: SimState, object_id: int) -> ObjectInstance:
    obj = scene.object_by_id(object_id)
    if object_id in state.object_positions:
        x, y, h = state.object_positions[object_id]
        obj = replace_position(obj, x, y, h)
    return obj


def sge_target_category(scene: Scene, state: SimState, task: TaskSpec) -> str:
    """Category whose rays count toward SGE: the goal category for ObjectNav;
    for Pick&Place the task object until it is held, then the receptacle."""
    if task.variant == OBJECTNAV:
        return task.goal_category
    if state.held_object == task.object_id:
        return scene.object_by_id(task.receptacle_id).category
    return scene.object_by_id(task.object_id).category


def make_observation(scene: Scene, state: SimState, episode: Episode,
                     start_pose: AgentPose, prev_action: int | None,
                     sensors: SensorConfig) -> Observation:
    pose = state.pose
    scan = world.raycast(
        scene, pose, fov_deg=sensors.fov_deg, k=sensors.num_rays,
        max_range=sensors.max_range, objects=effective_objects(scene, state),
    )
    target_cat = sge_target_category(scene, state, episode.task)
    sge = sum(1 for lab in scan.labels if lab == target_cat) / len(scan.labels)
    gps = (pose.x - start_pose.x, pose.y - start_pose.y)
    compass = (pose.heading - start_pose.heading) % 360.0
    goal = (
        episode.task.goal_category
        if episode.task.variant == OBJECTNAV
        else tuple(episode.task.instruction)
    )
    return Observation(
        rays=scan,
        sge=sge,
        gps=gps,
        compass=compass,
        pitch=pose.pitch,
        goal=goal,
        held=state.held_object,
        prev_action=prev_action,
    )


class Sim:
    """Single-episode state machine over an immutable scene."""

    def __init__(self, scene: Scene, episode: Episode, sensors: SensorConfig | None = None):
        if episode.scene_id != scene.id:
            raise PreconditionError(
                f"episode {episode.id} references scene {episode.scene_id}, got {scene.id}"
            )
        self._validate_task(scene, episode.task)
        self.scene = scene
        self.episode = episode
        self.sensors = sensors or SensorConfig()
        self.state: SimState | None = None
        self._prev_action: int | None = None

    @staticmethod
    def _validate_task(scene: Scene, task: TaskSpec) -> None:
        if task.variant == OBJECTNAV:
            if not scene.objects_of_category(task.goal_category):
                raise PreconditionError(
                    f"goal category {task.goal_category!r} absent from scene {scene.id}"
                )
        elif task.variant == PICKPLACE:
            scene.object_by_id(task.object_id)
            scene.object_by_id(task.receptacle_id)
        else:
            raise PreconditionError(f"unknown task variant {task.variant!r}")

    def reset(self) -> tuple[SimState, Observation]:
        self.state = SimState(pose=self.episode.start_pose)
        self._prev_action = None
        return self.state, self._observe()

    def _observe(self) -> Observation:
        return make_observation(
            self.scene, self.state, self.episode, self.episode.start_pose,
            self._prev_action, self.sensors,
        )

    def step(self, action: int) -> tuple[SimState, Observation, StepOutcome]:
        if self.state is None:
            raise ProtocolError("step before reset")
        if self.state.done:
            raise ProtocolError("step after episode done")
        task = self.episode.task
        if action not in task.actions():
            raise ProtocolError(
                f"action {ACTION_NAMES.get(action, action)} illegal for {task.variant}"
            )
        st = self.state
        st.collided_last = False
        pose = st.pose

        if action == MOVE_FORWARD or action == MOVE_BACKWARD:
            sign = 1.0 if action == MOVE_FORWARD else -1.0
            dist = task.forward_m() * sign
            rad = math.radians(pose.heading)
            nx = pose.x + dist * math.cos(rad)
            ny = pose.y + dist * math.sin(rad)
            if self.scene.is_pose_navigable(nx, ny):
                st.pose = AgentPose(nx, ny, pose.heading, pose.pitch)
            else:
                st.collided_last = True
        elif action == TURN_LEFT:
            st.pose = pose.turned(task.turn_deg())
        elif action == TURN_RIGHT:
            st.pose = pose.turned(-task.turn_deg())
        elif action == LOOK_UP:
            st.pose = pose.pitched(task.turn_deg())
        elif action == LOOK_DOWN:
            st.pose = pose.pitched(-task.turn_deg())
        elif action == GRAB_RELEASE:
            self.grab_release()
        # NO_OP and STOP change no pose state here.

        st.step_count += 1
        outcome = StepOutcome("continuing")
        if action == STOP:
            st.done = True
            ok = evaluate_success(self.scene, st, self.episode)
            st.succeeded = ok
            if ok:
                outcome = StepOutcome("success")
            else:
                outcome = StepOutcome("failure", reason=self._failure_reason())
        elif st.step_count >= self.episode.step_limit:
            st.done = True
            outcome = StepOutcome("failure", reason="step_limit")
        self._prev_action = action
        return st, self._observe(), outcome

    def _failure_reason(self) -> str:
        if self.episode.task.variant == OBJECTNAV:
            goals = _goal_instances(self.scene, self.state, self.episode.task)
            nearest = nearest_goal_by_geodesic(self.scene, self.state.pose, goals)
            if nearest is None:
                return "no_goal"
            d = math.hypot(nearest.position[0] - self.state.pose.x,
                           nearest.position[1] - self.state.pose.y)
            if d > self.episode.success_radius:
                return "too_far"
            return "no_line_of_sight"
        return "not_placed"

    # -- Pick&Place grab/release -------------------------------------------

    def grab_release(self) -> SimState:
        if self.episode.task.variant != PICKPLACE:
            raise ProtocolError("grab_release outside Pick&Place")
        st = self.state
        objs = effective_objects(self.scene, st)
        if st.held_object is None:
            kind, depth, obj = world.center_ray_hit(
                self.scene, st.pose, max_range=self.sensors.max_range, objects=objs)
            if kind == "object" and obj is not None and depth <= GRAB_RANGE_M and not obj.is_receptacle:
                st.held_object = obj.id
            return st

        held_id = st.held_object
        kind, depth, hit_obj = world.center_ray_hit(
            self.scene, st.pose, max_range=self.sensors.max_range, objects=objs)
        rad = math.radians(st.pose.heading)
        if kind != "none" and depth <= GRAB_RANGE_M:
            # Pull the hit point back a hair so it sits on the navigable side.
            t = max(depth - 1e-6, 0.0)
            hx = st.pose.x + t * math.cos(rad)
            hy = st.pose.y + t * math.sin(rad)
            recep = self._receptacle_at(objs, hx, hy)
            if recep is not None:
                st.object_positions[held_id] = (hx, hy, recep.center_height + PLACE_HEIGHT_OFFSET)
            else:
                st.object_positions[held_id] = (hx, hy, 0.0)
        else:
            tx = st.pose.x + DROP_AHEAD_M * math.cos(rad)
            ty = st.pose.y + DROP_AHEAD_M * math.sin(rad)
            tx, ty = self._clamp_navigable(tx, ty)
            st.object_positions[held_id] = (tx, ty, 0.0)
        st.held_object = None
        return st

    @staticmethod
    def _receptacle_at(objs: list[ObjectInstance], x: float, y: float) -> ObjectInstance | None:
        best = None
        for obj in objs:
            if not obj.is_receptacle:
                continue
            d = math.hypot(obj.position[0] - x, obj.position[1] - y)
            # The query point is a ray hit pulled back a hair off the rim, so
            # allow a small tolerance beyond the footprint itself.
            if d <= obj.footprint_radius + 1e-3 and (best is None or d < best[0]):
                best = (d, obj)
        return best[1] if best else None

    def _clamp_navigable(self, x: float, y: float) -> tuple[float, float]:
        if self.scene.is_navigable_point(x, y):
            return x, y
        best = None
        for r, c in self.scene.navigable_cells():
            cx, cy = self.scene.cell_center(r, c)
            d = (cx - x) ** 2 + (cy - y) ** 2
            if best is None or d < best[0]:
                best = (d, cx, cy)
        return (best[1], best[2]) if best else (x, y)


def _goal_instances(scene: Scene, state: SimState, task: TaskSpec) -> list[ObjectInstance]:
    return [o for o in effective_objects(scene, state) if o.category == task.goal_category]


def nearest_goal_by_geodesic(scene: Scene, pose: AgentPose,
                             goals: list[ObjectInstance]) -> ObjectInstance | None:
    if not goals:
        return None
    if not scene.is_navigable_point(pose.x, pose.y):
        # Fall back to Euclidean if the pose cell is somehow off-grid.
        return min(goals, key=lambda o: math.hypot(o.position[0] - pose.x,
                                                   o.position[1] - pose.y))
    field = world.distance_field(scene, [scene.cell_of(pose.x, pose.y)])
    best = None
    for obj in goals:
        r, c = scene.cell_of(*obj.position)
        d = float(field[r, c])
        if best is None or d < best[0]:
            best = (d, obj)
    return best[1]


def objectnav_success(scene: Scene, state: SimState, episode: Episode) -> bool:
    goals = _goal_instances(scene, state, episode.task)
    if not goals:
        return False
    # Cheap reject: if no instance is even within Euclidean reach, the
    # geodesically-nearest one cannot be either.
    pose0 = state.pose
    if min(math.hypot(o.position[0] - pose0.x, o.position[1] - pose0.y)
           for o in goals) > episode.success_radius:
        return False
    nearest = nearest_goal_by_geodesic(scene, state.pose, goals)
    if nearest is None:
        return False
    pose = state.pose
    d = math.hypot(nearest.position[0] - pose.x, nearest.position[1] - pose.y)
    if d > episode.success_radius:
        return False
    return world.segment_clear(scene, (pose.x, pose.y), nearest.position)


def pickplace_success(scene: Scene, state: SimState, episode: Episode) -> bool:
    task = episode.task
    if state.held_object == task.object_id:
        return False
    obj = object_state(scene, state, task.object_id)
    recep = object_state(scene, state, task.receptacle_id)
    d = math.hypot(obj.position[0] - recep.position[0], obj.position[1] - recep.position[1])
    return d <= episode.success_radius and obj.center_height > recep.center_height


def evaluate_success(scene: Scene, state: SimState, episode: Episode) -> bool:
    """Success rule at episode end.  ObjectNav: within success_radius of the
    geodesically-nearest goal instance with wall-free line of sight.
    Pick&Place: task object within success_radius of the receptacle center and
    strictly above the receptacle height."""
    if not state.done:
        raise ProtocolError("evaluate_success before episode done")
    if episode.task.variant == OBJECTNAV:
        return objectnav_success(scene, state, episode)
    return pickplace_success(scene, state, episode)


# ---------------------------------------------------------------------------
# Episode generation
# ---------------------------------------------------------------------------

MIN_START_GEODESIC_M = 1.5


def generate_episodes(scene: Scene, variant: str, n: int, seed: int,
                      insert_random_goals: bool = False,
                      step_limit: int | None = None) -> tuple[Scene, list[Episode]]:
    """Deterministically sample ``n`` episodes on a scene.

    Returns (scene', episodes): with ``insert_random_goals`` the returned
    scene carries extra goal-category instances placed at random navigable
    cells (the augmented scene gets a derived id and is what the episodes
    reference).
    """
    rng = world._derive_rng(seed, "episodes", scene.id, variant)
    if variant == OBJECTNAV:
        goal_cats = sorted({o.category for o in scene.objects if not o.is_receptacle})
        if not goal_cats:
            raise GenerationError(f"scene {scene.id} has no ObjectNav goal objects")
    else:
        graspable = [o for o in scene.objects if not o.is_receptacle]
        receptacles = [o for o in scene.objects if o.is_receptacle]
        if not graspable or not receptacles:
            raise GenerationError(
                f"scene {scene.id} lacks a graspable object / receptacle pair")

    if insert_random_goals and variant == OBJECTNAV:
        scene = _with_random_goal_inserts(scene, rng)

    nav = [
        (r, c) for (r, c) in scene.navigable_cells()
        if scene.is_pose_navigable(*scene.cell_center(r, c))
    ]
    limit = step_limit or (OBJECTNAV_STEP_LIMIT if variant == OBJECTNAV else PICKPLACE_STEP_LIMIT)
    radius = OBJECTNAV_SUCCESS_RADIUS if variant == OBJECTNAV else PICKPLACE_SUCCESS_RADIUS

    episodes = []
    attempts = 0
    while len(episodes) < n:
        attempts += 1
        if attempts > 200 * max(n, 1):
            raise GenerationError(
                f"could not sample {n} valid {variant} episodes on scene {scene.id}")
        if variant == OBJECTNAV:
            cat = goal_cats[int(rng.integers(0, len(goal_cats)))]
            task = TaskSpec(variant=OBJECTNAV, goal_category=cat)
            goal_positions = [o.position for o in scene.objects_of_category(cat)]
        else:
            obj = graspable[int(rng.integers(0, len(graspable)))]
            recep = receptacles[int(rng.integers(0, len(receptacles)))]
            task = TaskSpec(
                variant=PICKPLACE, object_id=obj.id, receptacle_id=recep.id,
                instruction=("place", "the", obj.category, "on", "the", recep.category),
            )
            goal_positions = [obj.position]
        r, c = nav[int(rng.integers(0, len(nav)))]
        x, y = scene.cell_center(r, c)
        heading = float(rng.integers(0, 12) * 30.0)
        d = world.geodesic_distance(scene, (x, y), goal_positions)
        if not np.isfinite(d) or d < MIN_START_GEODESIC_M:
            continue
        if variant == PICKPLACE:
            dr = world.geodesic_distance(scene, (x, y), [recep.position])
            if not np.isfinite(dr):
                continue
        episodes.append(
            Episode(
                id=f"ep-{scene.id}-{variant}-{seed}-{len(episodes)}",
                scene_id=scene.id,
                start_pose=AgentPose(x, y, heading, 0.0),
                task=task,
                step_limit=limit,
                success_radius=radius,
            )
        )
    return scene, episodes


def _with_random_goal_inserts(scene: Scene, rng: np.random.Generator) -> Scene:
    """Copy of the scene with 1-3 extra instances of a random goal category
    dropped onto random navigable cells (augmentation stand-in)."""
    goal_cats = sorted({o.category for o in scene.objects if not o.is_receptacle})
    cat = goal_cats[int(rng.integers(0, len(goal_cats)))]
    template = scene.objects_of_category(cat)[0]
    nav = scene.navigable_cells()
    new_objects = list(scene.objects)
    next_id = max(o.id for o in scene.objects) + 1 if scene.objects else 0
    for _ in range(int(rng.integers(1, 4))):
        r, c = nav[int(rng.integers(0, len(nav)))]
        x, y = scene.cell_center(r, c)
        new_objects.append(
            ObjectInstance(
                id=next_id, category=cat, position=(x, y),
                height_band=template.height_band,
                center_height=template.center_height,
                footprint_radius=template.footprint_radius,
                is_receptacle=False,
            )
        )
        next_id += 1
    return Scene(
        id=f"{scene.id}-aug", cell_size=scene.cell_size, grid=scene.grid,
        rooms=scene.rooms, objects=new_objects, rng_seed=scene.rng_seed,
    )


# ---------------------------------------------------------------------------
# Episode serialization (JSON Lines)
# ---------------------------------------------------------------------------


def episode_to_dict(ep: Episode) -> dict:
    task = {
        "variant": ep.task.variant,
        "goal_category": ep.task.goal_category,
        "object_id": ep.task.object_id,
        "receptacle_id": ep.task.receptacle_id,
        "instruction": list(ep.task.instruction),
    }
    return {
        "id": ep.id,
        "scene_id": ep.scene_id,
        "start_pose": {
            "x": ep.start_pose.x, "y": ep.start_pose.y,
            "heading": ep.start_pose.heading, "pitch": ep.start_pose.pitch,
        },
        "task": task,
        "step_limit": ep.step_limit,
        "success_radius": ep.success_radius,
    }


def episode_from_dict(data: dict) -> Episode:
    sp = data["start_pose"]
    t = data["task"]
    return Episode(
        id=data["id"],
        scene_id=data["scene_id"],
        start_pose=AgentPose(sp["x"], sp["y"], sp["heading"], sp["pitch"]),
        task=TaskSpec(
            variant=t["variant"],
            goal_category=t.get("goal_category"),
            object_id=t.get("object_id"),
            receptacle_id=t.get("receptacle_id"),
            instruction=tuple(t.get("instruction") or ()),
        ),
        step_limit=data["step_limit"],
        success_radius=data["success_radius"],
    )


def save_episodes(episodes: list[Episode], path) -> None:
    with open(path, "w") as f:
        for ep in episodes:
            f.write(json.dumps(episode_to_dict(ep)) + "\n")


def load_episodes(path) -> list[Episode]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(episode_from_dict(json.loads(line)))
    return out

"""Procedural 2D multi-room worlds with occupancy grids, semantic raycasting,
and geodesic distance queries.

Coordinates are in meters; the occupancy grid stores square cells of
``cell_size`` meters ('.' navigable, '#' wall).  Headings are degrees,
0 = +x, counter-clockwise.  Scenes are immutable after generation; all
queries here are pure functions.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

# Default sensing / motion geometry (all overridable per call or per config).
DEFAULT_FOV_DEG = 90.0
DEFAULT_NUM_RAYS = 64
DEFAULT_MAX_RANGE = 5.0
AGENT_RADIUS = 0.1

SQRT2 = math.sqrt(2.0)

ROOM_LABELS = ["kitchen", "bedroom", "living_room", "bathroom", "office", "hallway"]

LABEL_NONE = "none"
LABEL_WALL = "wall"


class GenerationError(Exception):
    """Raised when a scene/episode configuration cannot be satisfied."""


class PreconditionError(Exception):
    """Raised when an operation is called outside its contract."""


@dataclass(frozen=True)
class Room:
    label: str
    # Axis-aligned bbox in meters: (x0, y0, x1, y1), x1 > x0, y1 > y0.
    bbox: tuple[float, float, float, float]

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bbox
        return x0 <= x < x1 and y0 <= y < y1


@dataclass
class ObjectInstance:
    id: int
    category: str
    position: tuple[float, float]
    height_band: str  # low | mid | high
    center_height: float
    footprint_radius: float
    is_receptacle: bool = False


@dataclass(frozen=True)
class AgentPose:
    x: float
    y: float
    heading: float  # degrees in [0, 360)
    pitch: float = 0.0  # degrees in [-30, +30]

    def moved(self, dx: float, dy: float) -> "AgentPose":
        return replace(self, x=self.x + dx, y=self.y + dy)

    def turned(self, delta_deg: float) -> "AgentPose":
        return replace(self, heading=(self.heading + delta_deg) % 360.0)

    def pitched(self, delta_deg: float, limit: float = 30.0) -> "AgentPose":
        return replace(self, pitch=max(-limit, min(limit, self.pitch + delta_deg)))


@dataclass
class RayScan:
    depths: np.ndarray  # (K,) float64, in (0, max_range]
    labels: list[str]  # (K,) "wall" | "none" | object category

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class Scene:
    id: str
    cell_size: float
    grid: np.ndarray  # (rows, cols) bool, True = wall
    rooms: list[Room]
    objects: list[ObjectInstance]
    rng_seed: int

    # -- geometry helpers ---------------------------------------------------

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def cols(self) -> int:
        return self.grid.shape[1]

    @property
    def width_m(self) -> float:
        return self.cols * self.cell_size

    @property
    def height_m(self) -> float:
        return self.rows * self.cell_size

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(y / self.cell_size)), int(math.floor(x / self.cell_size))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def is_wall_cell(self, row: int, col: int) -> bool:
        if not self.in_bounds(row, col):
            return True
        return bool(self.grid[row, col])

    def is_navigable_point(self, x: float, y: float) -> bool:
        row, col = self.cell_of(x, y)
        return self.in_bounds(row, col) and not self.grid[row, col]

    def is_pose_navigable(self, x: float, y: float, radius: float = AGENT_RADIUS) -> bool:
        """True if the agent's square footprint of half-width ``radius`` lies on
        navigable cells (square footprint is a conservative stand-in for the disc)."""
        r0, c0 = self.cell_of(x - radius, y - radius)
        r1, c1 = self.cell_of(x + radius, y + radius)
        for row in range(r0, r1 + 1):
            for col in range(c0, c1 + 1):
                if self.is_wall_cell(row, col):
                    return False
        return True

    def room_at(self, x: float, y: float) -> Room | None:
        for room in self.rooms:
            if room.contains(x, y):
                return room
        return None

    def object_by_id(self, object_id: int) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(f"no object with id {object_id}")

    def objects_of_category(self, category: str) -> list[ObjectInstance]:
        return [o for o in self.objects if o.category == category]

    def navigable_cells(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(~self.grid)
        return list(zip(rows.tolist(), cols.tolist()))


# ---------------------------------------------------------------------------
# Scene generation
# ---------------------------------------------------------------------------

# Catalog entry: (category, height_band, center_height, footprint_radius, is_receptacle)
DEFAULT_CATALOG = [
    ("ball", "mid", 0.3, 0.15, False),
    ("plant", "mid", 0.4, 0.20, False),
    ("lamp", "mid", 0.5, 0.15, False),
    ("cup", "mid", 0.3, 0.12, False),
    ("book", "low", 0.1, 0.12, False),
    ("clock", "high", 1.6, 0.12, False),
    ("table", "mid", 0.5, 0.40, True),
    ("counter", "mid", 0.6, 0.40, True),
]


@dataclass(frozen=True)
class SceneConfig:
    grid_rows: int = 24
    grid_cols: int = 24
    cell_size: float = 0.25
    room_count_range: tuple[int, int] = (3, 5)
    object_count_range: tuple[int, int] = (6, 10)
    min_room_cells: int = 5  # minimum interior width/height of a room, in cells
    door_width_cells: int = 2
    catalog: tuple = tuple(DEFAULT_CATALOG)


def _derive_rng(seed: int, *salt) -> np.random.Generator:
    """Generator seeded from (seed, salt) via stable hashing (process-independent)."""
    import hashlib

    digest = hashlib.sha256(repr((seed,) + salt).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def generate_scene(seed: int, config: SceneConfig | None = None) -> Scene:
    """Deterministically generate a multi-room scene.

    Rooms come from recursive axis splits of the interior; every split wall is
    punched with one doorway, so the navigable area is connected by
    construction.  Raises :class:`GenerationError` when the requested room
    count cannot fit.
    """
    cfg = config or SceneConfig()
    rng = _derive_rng(seed, "scene")
    rows, cols = cfg.grid_rows, cfg.grid_cols
    min_span = cfg.min_room_cells

    if rows < min_span + 2 or cols < min_span + 2:
        raise GenerationError(
            f"grid {rows}x{cols} too small for min_room_cells={min_span} plus border walls"
        )

    grid = np.zeros((rows, cols), dtype=bool)
    grid[0, :] = grid[-1, :] = True
    grid[:, 0] = grid[:, -1] = True

    n_rooms = int(rng.integers(cfg.room_count_range[0], cfg.room_count_range[1] + 1))

    # Leaves are interior rects [r0, r1) x [c0, c1) excluding walls.
    leaves = [(1, rows - 1, 1, cols - 1)]
    while len(leaves) < n_rooms:
        # Split the largest leaf that can still be split.
        order = sorted(range(len(leaves)), key=lambda i: -_leaf_area(leaves[i]))
        split_done = False
        for idx in order:
            r0, r1, c0, c1 = leaves[idx]
            can_h = (r1 - r0) >= 2 * min_span + 1
            can_v = (c1 - c0) >= 2 * min_span + 1
            if not (can_h or can_v):
                continue
            if can_h and can_v:
                horizontal = bool(rng.integers(0, 2))
            else:
                horizontal = can_h
            if horizontal:
                line = int(rng.integers(r0 + min_span, r1 - min_span))
                grid[line, c0:c1] = True
                door = int(rng.integers(c0, c1 - cfg.door_width_cells + 1))
                grid[line, door : door + cfg.door_width_cells] = False
                leaves[idx] = (r0, line, c0, c1)
                leaves.append((line + 1, r1, c0, c1))
            else:
                line = int(rng.integers(c0 + min_span, c1 - min_span))
                grid[r0:r1, line] = True
                door = int(rng.integers(r0, r1 - cfg.door_width_cells + 1))
                grid[door : door + cfg.door_width_cells, line] = False
                leaves[idx] = (r0, r1, c0, line)
                leaves.append((r0, r1, line + 1, c1))
            split_done = True
            break
        if not split_done:
            raise GenerationError(
                f"cannot split grid {rows}x{cols} into {n_rooms} rooms with "
                f"min_room_cells={min_span}"
            )

    cs = cfg.cell_size
    rooms = []
    for r0, r1, c0, c1 in leaves:
        label = ROOM_LABELS[int(rng.integers(0, len(ROOM_LABELS)))]
        rooms.append(Room(label=label, bbox=(c0 * cs, r0 * cs, c1 * cs, r1 * cs)))

    n_objects = int(rng.integers(cfg.object_count_range[0], cfg.object_count_range[1] + 1))
    catalog = list(cfg.catalog)
    objects: list[ObjectInstance] = []
    if n_objects > 0 and not catalog:
        raise GenerationError("object catalog is empty but object count > 0")
    nav_cells = [
        (r, c)
        for r in range(rows)
        for c in range(cols)
        if not grid[r, c]
    ]
    used_cells: set[tuple[int, int]] = set()
    # Guarantee both task families are instantiable: the first two picks are a
    # receptacle and a non-receptacle whenever the catalog offers them.
    receptacles = [e for e in catalog if e[4]]
    graspables = [e for e in catalog if not e[4]]
    for obj_id in range(n_objects):
        if obj_id == 0 and receptacles and n_objects >= 2:
            entry = receptacles[int(rng.integers(0, len(receptacles)))]
        elif obj_id == 1 and graspables:
            entry = graspables[int(rng.integers(0, len(graspables)))]
        else:
            entry = catalog[int(rng.integers(0, len(catalog)))]
        cat, band, height, radius, is_recep = entry

        def far_enough(cell) -> bool:
            x0, y0 = (cell[1] + 0.5) * cs, (cell[0] + 0.5) * cs
            return all(
                math.hypot(o.position[0] - x0, o.position[1] - y0)
                > o.footprint_radius + radius + 0.05
                for o in objects
            )

        # Keep footprints disjoint so no object can sit occluded inside
        # another's circle (which would make it ungrabbable).
        free = [cell for cell in nav_cells
                if cell not in used_cells and far_enough(cell)]
        if not free:
            raise GenerationError("not enough navigable cells to place objects")
        r, c = free[int(rng.integers(0, len(free)))]
        used_cells.add((r, c))
        x, y = (c + 0.5) * cs, (r + 0.5) * cs
        objects.append(
            ObjectInstance(
                id=obj_id,
                category=cat,
                position=(x, y),
                height_band=band,
                center_height=height,
                footprint_radius=radius,
                is_receptacle=is_recep,
            )
        )

    return Scene(
        id=f"scene-{seed}",
        cell_size=cs,
        grid=grid,
        rooms=rooms,
        objects=objects,
        rng_seed=seed,
    )


def _leaf_area(leaf) -> int:
    r0, r1, c0, c1 = leaf
    return (r1 - r0) * (c1 - c0)


# ---------------------------------------------------------------------------
# Raycasting
# ---------------------------------------------------------------------------


def visible_bands(pitch: float) -> frozenset:
    """Height bands visible at a given camera pitch (degrees)."""
    if pitch < -1e-9:
        return frozenset(("low", "mid"))
    if pitch > 1e-9:
        return frozenset(("mid", "high"))
    return frozenset(("mid",))


def ray_angles(heading: float, fov_deg: float, k: int) -> np.ndarray:
    if k == 1:
        return np.array([heading], dtype=np.float64)
    i = np.arange(k, dtype=np.float64)
    return heading - fov_deg / 2.0 + i * fov_deg / (k - 1)


def _crossing_grid(scene: Scene, origin: tuple[float, float], angles_deg: np.ndarray,
                   n_axis: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form Amanatides-Woo boundary crossings for a fan of rays.

    Returns ``(t, row, col, in_bounds)``, each of shape ``(k, 2 * n_axis)``,
    where column ``j`` describes the ``j``-th cell-boundary crossing of each
    ray in increasing parametric order (x-crossings first at exact ties, to
    match the scalar walker).  ``row``/``col`` are the indices of the cell
    entered at each crossing.
    """
    x0, y0 = origin
    cs = scene.cell_size
    rad = np.radians(np.asarray(angles_deg, dtype=np.float64))
    dx, dy = np.cos(rad), np.sin(rad)
    row0 = int(math.floor(y0 / cs))
    col0 = int(math.floor(x0 / cs))
    step_c = np.where(dx > 0, 1, -1).astype(np.int64)
    step_r = np.where(dy > 0, 1, -1).astype(np.int64)
    with np.errstate(divide="ignore"):
        t0x = np.where(dx != 0, ((col0 + (dx > 0)) * cs - x0) / dx, np.inf)
        t0y = np.where(dy != 0, ((row0 + (dy > 0)) * cs - y0) / dy, np.inf)
        dtx = np.where(dx != 0, np.abs(cs / dx), 0.0)
        dty = np.where(dy != 0, np.abs(cs / dy), 0.0)
    i = np.arange(n_axis, dtype=np.float64)
    tx = t0x[:, None] + i * dtx[:, None]
    ty = t0y[:, None] + i * dty[:, None]
    t = np.concatenate([tx, ty], axis=1)
    k, width = t.shape
    # Stable sort keeps x-crossings ahead of equal-t y-crossings; the first
    # n_axis source columns are the x-crossings, so is_x = order < n_axis.
    order = np.argsort(t, axis=1, kind="stable")
    t = t.ravel()[order + (np.arange(k) * width)[:, None]]
    is_x = order < n_axis
    n_x = np.cumsum(is_x, axis=1)
    n_y = np.arange(1, width + 1) - n_x
    col = col0 + n_x * step_c[:, None]
    row = row0 + n_y * step_r[:, None]
    in_b = ((row >= 0) & (row < scene.rows) & (col >= 0) & (col < scene.cols))
    return t, row, col, in_b


def wall_distances(scene: Scene, origin: tuple[float, float], angles_deg: np.ndarray,
                   max_range: float) -> np.ndarray:
    """Distance along each ray to the first wall cell (inf if none within
    max_range).  Vectorized Amanatides-Woo grid marching."""
    x0, y0 = origin
    cs = scene.cell_size
    angles_deg = np.asarray(angles_deg, dtype=np.float64)
    k = len(angles_deg)

    # Starting inside a wall cell counts as an immediate hit.
    if scene.is_wall_cell(int(math.floor(y0 / cs)), int(math.floor(x0 / cs))):
        return np.zeros(k)

    n_axis = min(int(math.ceil(max_range / cs)) + 2, scene.rows + scene.cols + 2)
    t, row, col, in_b = _crossing_grid(scene, origin, angles_deg, n_axis)
    beyond = t > max_range
    r_idx = np.where(in_b, row, 0)
    c_idx = np.where(in_b, col, 0)
    wall = in_b & scene.grid[r_idx, c_idx]
    event = beyond | ~in_b | wall
    has = event.any(axis=1)
    first = np.argmax(event, axis=1)
    rng = np.arange(k)
    t_first = t[rng, first]
    # Priority at the first event: range exceeded -> inf; wall -> hit distance;
    # otherwise the ray left the grid.
    result = np.where(beyond[rng, first], np.inf,
                      np.where(wall[rng, first], t_first,
                               np.minimum(t_first, max_range)))
    result[~has] = np.inf
    return result


def raycast(scene: Scene, pose: AgentPose, fov_deg: float = DEFAULT_FOV_DEG,
            k: int = DEFAULT_NUM_RAYS, max_range: float = DEFAULT_MAX_RANGE,
            objects: list[ObjectInstance] | None = None) -> RayScan:
    """Egocentric semantic ray scan.

    Each ray reports the nearest hit among walls and objects whose height band
    is visible at the current pitch.  Rays with no hit within ``max_range``
    report depth ``max_range`` and label "none".  ``objects`` overrides the
    scene object list (used by the simulator for moved/held objects).
    """
    if k < 1:
        raise PreconditionError("k must be >= 1")
    if not (0.0 < fov_deg <= 360.0):
        raise PreconditionError("fov_deg must be in (0, 360]")

    angles = ray_angles(pose.heading, fov_deg, k)
    origin = (pose.x, pose.y)
    t_wall = wall_distances(scene, origin, angles, max_range)

    ang = np.radians(angles)
    dx = np.cos(ang)
    dy = np.sin(ang)

    best_t = np.minimum(t_wall, np.inf)
    labels = [LABEL_WALL if t_wall[i] <= max_range else LABEL_NONE for i in range(k)]
    depths = np.where(t_wall <= max_range, t_wall, max_range)
    best_obj_t = np.full(k, np.inf)

    bands = visible_bands(pose.pitch)
    obj_list = scene.objects if objects is None else objects
    for obj in obj_list:
        if obj.height_band not in bands:
            continue
        ox = obj.position[0] - pose.x
        oy = obj.position[1] - pose.y
        # Ray/circle intersection: t^2 - 2 t (d.o) + |o|^2 - r^2 = 0, |d| = 1.
        b = dx * ox + dy * oy
        c = ox * ox + oy * oy - obj.footprint_radius**2
        if c < 0:
            continue  # standing inside the footprint: look past, not at, it
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_enter = b - sq
        t_exit = b + sq
        t_hit = np.where(t_enter >= 0, t_enter, 0.0)
        visible = ok & (t_exit > 0) & (t_hit <= max_range) & (t_hit < t_wall) & (t_hit < best_obj_t)
        idx = np.nonzero(visible)[0]
        if idx.size:
            best_obj_t[idx] = t_hit[idx]
            for i in idx:
                labels[i] = obj.category
                depths[i] = t_hit[i]
    return RayScan(depths=depths, labels=labels)


def center_ray_hit(scene: Scene, pose: AgentPose, max_range: float = DEFAULT_MAX_RANGE,
                   objects: list[ObjectInstance] | None = None):
    """Nearest hit along the crosshair ray (straight ahead at current pitch).

    Returns (kind, depth, object_or_none) where kind is 'wall', 'object', or
    'none'.
    """
    scan = raycast(scene, pose, fov_deg=1.0, k=1, max_range=max_range, objects=objects)
    label = scan.labels[0]
    depth = float(scan.depths[0])
    if label == LABEL_WALL:
        return "wall", depth, None
    if label == LABEL_NONE:
        return "none", depth, None
    # Identify which instance was hit: closest eligible of that category.
    bands = visible_bands(pose.pitch)
    obj_list = scene.objects if objects is None else objects
    best = None
    for obj in obj_list:
        if obj.category != label or obj.height_band not in bands:
            continue
        d = math.hypot(obj.position[0] - pose.x, obj.position[1] - pose.y)
        if best is None or d < best[0]:
            best = (d, obj)
    return "object", depth, best[1] if best else None


def segment_clear(scene: Scene, p: tuple[float, float], q: tuple[float, float]) -> bool:
    """True if the segment p->q crosses no wall cell (line-of-sight test)."""
    dist = math.hypot(q[0] - p[0], q[1] - p[1])
    if dist < 1e-12:
        return not scene.is_wall_cell(*scene.cell_of(*p))
    angle = math.degrees(math.atan2(q[1] - p[1], q[0] - p[0]))
    t = wall_distances(scene, p, np.array([angle]), dist)
    return bool(t[0] > dist - 1e-9)


def ray_cells(scene: Scene, origin: tuple[float, float], angle_deg: float,
              t_max: float) -> list[tuple[int, int]]:
    """All grid cells crossed by a ray segment of length ``t_max`` (exact
    Amanatides-Woo walk, including the starting cell)."""
    x0, y0 = origin
    cs = scene.cell_size
    rad = math.radians(angle_deg)
    dx, dy = math.cos(rad), math.sin(rad)
    row, col = scene.cell_of(x0, y0)
    cells = []
    if scene.in_bounds(row, col):
        cells.append((row, col))
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    t0x = ((col + (1 if dx > 0 else 0)) * cs - x0) / dx if dx != 0 else math.inf
    t0y = ((row + (1 if dy > 0 else 0)) * cs - y0) / dy if dy != 0 else math.inf
    t_delta_x = abs(cs / dx) if dx != 0 else 0.0
    t_delta_y = abs(cs / dy) if dy != 0 else 0.0
    nx = ny = 0
    while True:
        # Closed-form crossing times keep this walk bit-identical to the
        # vectorized fan in ray_cells_mask.
        t_max_x = t0x + nx * t_delta_x
        t_max_y = t0y + ny * t_delta_y
        if t_max_x <= t_max_y:
            t_cross = t_max_x
            col += step_c
            nx += 1
        else:
            t_cross = t_max_y
            row += step_r
            ny += 1
        if t_cross > t_max or not scene.in_bounds(row, col):
            break
        cells.append((row, col))
        if scene.grid[row, col]:
            break
    return cells


def ray_cells_mask(scene: Scene, origin: tuple[float, float],
                   angles_deg: np.ndarray, t_max: np.ndarray) -> np.ndarray:
    """Boolean grid of cells crossed by a fan of ray segments.

    Vectorized Amanatides-Woo over all rays at once; cell-for-cell identical
    to the union of :func:`ray_cells` over the individual rays.
    """
    angles_deg = np.asarray(angles_deg, dtype=float)
    t_max = np.broadcast_to(np.asarray(t_max, dtype=float), angles_deg.shape).copy()
    out = np.zeros(scene.grid.shape, dtype=bool)
    row0, col0 = scene.cell_of(*origin)
    if scene.in_bounds(row0, col0):
        out[row0, col0] = True
    t_cap = float(np.max(t_max)) if len(t_max) else 0.0
    if math.isfinite(t_cap):
        n_axis = min(int(math.ceil(t_cap / scene.cell_size)) + 2,
                     scene.rows + scene.cols + 2)
    else:
        n_axis = scene.rows + scene.cols + 2
    t, row, col, in_b = _crossing_grid(scene, origin, angles_deg, n_axis)
    valid = (t <= t_max[:, None]) & in_b
    r_idx = np.where(in_b, row, 0)
    c_idx = np.where(in_b, col, 0)
    wall = valid & scene.grid[r_idx, c_idx]
    # A crossing is kept up to and including the first wall cell entered.
    prior_wall = (np.cumsum(wall, axis=1) - wall) > 0
    keep = valid & ~prior_wall
    out[row[keep], col[keep]] = True
    return out


# ---------------------------------------------------------------------------
# Geodesic distances
# ---------------------------------------------------------------------------

_NEIGHBORS_8 = [
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
]


def distance_field(scene: Scene, sources: list[tuple[int, int]],
                   no_corner_cut: bool = False) -> np.ndarray:
    """Multi-source Dijkstra over navigable cells, 8-connected, axial cost
    cell_size and diagonal cost cell_size*sqrt(2).  Returns an array of
    distances in meters (inf = unreachable).

    With ``no_corner_cut`` a diagonal move additionally requires both shared
    orthogonal neighbors to be navigable (used by motion planning so followed
    paths stay physically traversable).
    """
    cs = scene.cell_size
    dist = np.full(scene.grid.shape, np.inf)
    heap = []
    for r, c in sources:
        if scene.in_bounds(r, c) and not scene.grid[r, c]:
            dist[r, c] = 0.0
            heapq.heappush(heap, (0.0, r, c))
    grid = scene.grid
    rows, cols = grid.shape
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for dr, dc, w in _NEIGHBORS_8:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= rows or nc < 0 or nc >= cols or grid[nr, nc]:
                continue
            if no_corner_cut and dr != 0 and dc != 0:
                if grid[r + dr, c] or grid[r, c + dc]:
                    continue
            nd = d + w * cs
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return dist


def geodesic_distance(scene: Scene, frm: tuple[float, float],
                      to_set: list[tuple[float, float]]) -> float:
    """Shortest 8-connected grid path length from the cell of ``frm`` to the
    nearest cell of ``to_set``; +inf if unreachable."""
    if not to_set:
        raise PreconditionError("to_set must be non-empty")
    if not scene.is_navigable_point(*frm):
        raise PreconditionError(f"from point {frm} is not navigable")
    targets = [scene.cell_of(x, y) for (x, y) in to_set]
    field = distance_field(scene, targets)
    r, c = scene.cell_of(*frm)
    return float(field[r, c])


def goal_viewpoints(scene: Scene, obj: ObjectInstance, radius: float) -> list[tuple[float, float]]:
    """Navigable cell centers within Euclidean ``radius`` of the object that
    have wall-free line of sight to the object position.  May be empty."""
    if radius <= 0:
        raise PreconditionError("radius must be > 0")
    ox, oy = obj.position
    out = []
    cs = scene.cell_size
    r_lo = max(0, int(math.floor((oy - radius) / cs)))
    r_hi = min(scene.rows - 1, int(math.floor((oy + radius) / cs)))
    c_lo = max(0, int(math.floor((ox - radius) / cs)))
    c_hi = min(scene.cols - 1, int(math.floor((ox + radius) / cs)))
    for r in range(r_lo, r_hi + 1):
        for c in range(c_lo, c_hi + 1):
            if scene.grid[r, c]:
                continue
            x, y = scene.cell_center(r, c)
            if math.hypot(x - ox, y - oy) > radius:
                continue
            if segment_clear(scene, (x, y), (ox, oy)):
                out.append((x, y))
    return out


# ---------------------------------------------------------------------------
# Serialization (scene JSON; round-trips losslessly)
# ---------------------------------------------------------------------------


def scene_to_dict(scene: Scene) -> dict:
    return {
        "id": scene.id,
        "cell_size": scene.cell_size,
        "grid": ["".join("#" if w else "." for w in row) for row in scene.grid],
        "rooms": [{"label": r.label, "bbox": list(r.bbox)} for r in scene.rooms],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "position": list(o.position),
                "height_band": o.height_band,
                "center_height": o.center_height,
                "footprint_radius": o.footprint_radius,
                "is_receptacle": o.is_receptacle,
            }
            for o in scene.objects
        ],
        "rng_seed": scene.rng_seed,
    }


def scene_from_dict(data: dict) -> Scene:
    grid = np.array([[ch == "#" for ch in row] for row in data["grid"]], dtype=bool)
    rooms = [Room(label=r["label"], bbox=tuple(r["bbox"])) for r in data["rooms"]]
    objects = [
        ObjectInstance(
            id=o["id"],
            category=o["category"],
            position=tuple(o["position"]),
            height_band=o["height_band"],
            center_height=o["center_height"],
            footprint_radius=o["footprint_radius"],
            is_receptacle=o["is_receptacle"],
        )
        for o in data["objects"]
    ]
    return Scene(
        id=data["id"],
        cell_size=data["cell_size"],
        grid=grid,
        rooms=rooms,
        objects=objects,
        rng_seed=data["rng_seed"],
    )


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f)


def load_scene(path) -> Scene:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def scene_invariant_errors(scene: Scene) -> list[str]:
    """Check all Scene invariants; returns a list of violations (empty = ok)."""
    errors = []
    for room in scene.rooms:
        x0, y0, x1, y1 = room.bbox
        if x1 <= x0 or y1 <= y0:
            errors.append(f"room {room.label} bbox has non-positive area")
        if x0 < 0 or y0 < 0 or x1 > scene.width_m or y1 > scene.height_m:
            errors.append(f"room {room.label} bbox exceeds grid bounds")
    for a_idx in range(len(scene.rooms)):
        for b_idx in range(a_idx + 1, len(scene.rooms)):
            if _boxes_overlap(scene.rooms[a_idx].bbox, scene.rooms[b_idx].bbox):
                errors.append(f"rooms {a_idx} and {b_idx} overlap")
    for obj in scene.objects:
        if not scene.is_navigable_point(*obj.position):
            errors.append(f"object {obj.id} not on a navigable cell")
        if obj.footprint_radius <= 0:
            errors.append(f"object {obj.id} footprint_radius <= 0")
        if obj.center_height < 0:
            errors.append(f"object {obj.id} center_height < 0")
    if scene.objects:
        first = scene.cell_of(*scene.objects[0].position)
        field = distance_field(scene, [first])
        for obj in scene.objects[1:]:
            r, c = scene.cell_of(*obj.position)
            if not np.isfinite(field[r, c]):
                errors.append(f"object {obj.id} disconnected from object 0")
    return errors


def _boxes_overlap(a, b) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1

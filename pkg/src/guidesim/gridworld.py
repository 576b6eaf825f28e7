"""Synthetic world model and online cost mapping.

A World is a ground-truth occupancy grid with annotated points of interest,
loaded from an ASCII map plus a YAML POI document. The robot never sees the
World directly: a ray-cast sensor reveals cells into its CostMap, and
obstacle inflation assigns traversal costs around revealed obstacles.

Conventions: cells are (row, col); world x runs along columns, y along rows;
cell (r, c) covers [origin + c*res, origin + (c+1)*res) in x. Headings are
radians in (-pi, pi], 0 pointing +x, positive counterclockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import yaml

from . import kernels
from .kernels import FREE, OCCUPIED, UNKNOWN

WORLD_FREE = 0
WORLD_OCCUPIED = 1

# along-ray sample spacing as a fraction of cell size; fine enough that a
# ray cannot step over a full cell
SAMPLE_STEP_FRACTION = 1.0 / 3.0


class MalformedMap(ValueError):
    """Map or POI document text violates the file format."""


class MalformedPoiDoc(MalformedMap):
    pass


class PoiOutOfBounds(ValueError):
    pass


class DuplicatePoiId(ValueError):
    pass


class PoseOutOfBounds(ValueError):
    pass


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class Poi:
    id: str
    name: str
    category: str = ""
    anchor: tuple[float, float] = (0.0, 0.0)
    facts: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()


class Side(Enum):
    FRONT = "front"
    LEFT = "left"
    RIGHT = "right"
    BEHIND = "behind"


@dataclass(frozen=True)
class PoiSighting:
    poi: Poi
    distance: float
    bearing: float  # relative to current heading, (-pi, pi]
    side: Side


@dataclass(frozen=True)
class SensorConfig:
    range: float = 10.0
    angular_step: float = math.radians(1.0)
    fov: float = 2.0 * math.pi

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("sensor range must be > 0")
        if not (0 < self.angular_step <= self.fov):
            raise ValueError("need 0 < angular_step <= fov")


@dataclass
class World:
    """Ground-truth grid; immutable after load except for the simulation
    owner's transient obstacle overlay."""

    grid: np.ndarray  # uint8, WORLD_FREE / WORLD_OCCUPIED
    resolution: float
    origin: tuple[float, float]
    pois: list[Poi]
    start_pose: Pose

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    def cell_at(self, x: float, y: float) -> tuple[int, int]:
        ox, oy = self.origin
        return (int(math.floor((y - oy) / self.resolution)),
                int(math.floor((x - ox) / self.resolution)))

    def cell_center(self, r: int, c: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (c + 0.5) * self.resolution, oy + (r + 0.5) * self.resolution)

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free_xy(self, x: float, y: float) -> bool:
        r, c = self.cell_at(x, y)
        return self.in_bounds(r, c) and self.grid[r, c] == WORLD_FREE


@dataclass
class CostMap:
    """The robot's incrementally revealed view of the world.

    state holds UNKNOWN / FREE / OCCUPIED; cost holds 0-255 traversal cost
    for FREE cells. revision strictly increases on every content change and
    identifies snapshots handed to readers.
    """

    state: np.ndarray  # uint8
    cost: np.ndarray  # uint8
    resolution: float
    origin: tuple[float, float]
    revision: int = 0

    @classmethod
    def for_world(cls, world: World) -> "CostMap":
        shape = world.grid.shape
        return cls(
            state=np.full(shape, UNKNOWN, dtype=np.uint8),
            cost=np.zeros(shape, dtype=np.uint8),
            resolution=world.resolution,
            origin=world.origin,
        )

    @property
    def height(self) -> int:
        return self.state.shape[0]

    @property
    def width(self) -> int:
        return self.state.shape[1]

    def cell_at(self, x: float, y: float) -> tuple[int, int]:
        ox, oy = self.origin
        return (int(math.floor((y - oy) / self.resolution)),
                int(math.floor((x - ox) / self.resolution)))

    def cell_center(self, r: int, c: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (c + 0.5) * self.resolution, oy + (r + 0.5) * self.resolution)

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width

    def traversable_mask(self) -> np.ndarray:
        """Revealed-free cells below the lethal cost."""
        return (self.state == FREE) & (self.cost < 255)

    def snapshot(self) -> "CostMap":
        return CostMap(self.state.copy(), self.cost.copy(),
                       self.resolution, self.origin, self.revision)


def _parse_pois(poi_doc: str, world_w: float, world_h: float,
                origin: tuple[float, float]) -> list[Poi]:
    if not poi_doc or not poi_doc.strip():
        return []
    try:
        data = yaml.safe_load(poi_doc)
    except yaml.YAMLError as e:
        raise MalformedPoiDoc(f"POI document is not valid YAML: {e}") from e
    if isinstance(data, dict):
        data = data.get("pois", [])
    if data is None:
        return []
    if not isinstance(data, list):
        raise MalformedPoiDoc("POI document must be a list of records")
    pois: list[Poi] = []
    seen: set[str] = set()
    ox, oy = origin
    for rec in data:
        if not isinstance(rec, dict) or "id" not in rec or "name" not in rec:
            raise MalformedPoiDoc(f"POI record needs id and name: {rec!r}")
        pid = str(rec["id"])
        name = str(rec["name"])
        if not name:
            raise MalformedPoiDoc(f"POI {pid} has an empty name")
        if pid in seen:
            raise DuplicatePoiId(pid)
        seen.add(pid)
        anchor = rec.get("anchor")
        if (not isinstance(anchor, (list, tuple)) or len(anchor) != 2
                or not all(isinstance(v, (int, float)) for v in anchor)):
            raise MalformedPoiDoc(f"POI {pid} anchor must be [x, y] in meters")
        ax, ay = float(anchor[0]), float(anchor[1])
        if not (ox <= ax < ox + world_w and oy <= ay < oy + world_h):
            raise PoiOutOfBounds(f"POI {pid} anchor ({ax}, {ay}) outside grid")
        pois.append(Poi(
            id=pid,
            name=name,
            category=str(rec.get("category", "")),
            anchor=(ax, ay),
            facts=tuple(str(f) for f in rec.get("facts", []) or []),
            tags=tuple(str(t) for t in rec.get("tags", []) or []),
        ))
    return pois


def load_world(map_text: str, poi_doc: str = "") -> World:
    """Parse the ASCII map format plus the POI annotation document.

    First non-blank line must be ``res=<float>``; remaining lines are grid
    rows of '#' (occupied), '.' (free), and exactly one 'S' (free start).
    """
    lines = [ln for ln in map_text.splitlines() if ln.strip() != ""]
    if not lines:
        raise MalformedMap("empty map text")
    header = lines[0].strip()
    if not header.startswith("res="):
        raise MalformedMap("first line must be a res=<float> header")
    try:
        resolution = float(header[4:])
    except ValueError as e:
        raise MalformedMap(f"bad resolution in header: {header!r}") from e
    if resolution <= 0:
        raise MalformedMap("resolution must be > 0")
    rows = lines[1:]
    if not rows:
        raise MalformedMap("map has no grid rows")
    width = len(rows[0])
    grid = np.zeros((len(rows), width), dtype=np.uint8)
    start_cell: tuple[int, int] | None = None
    for r, row in enumerate(rows):
        if len(row) != width:
            raise MalformedMap(f"ragged row {r}: {len(row)} != {width}")
        for c, ch in enumerate(row):
            if ch == "#":
                grid[r, c] = WORLD_OCCUPIED
            elif ch == ".":
                grid[r, c] = WORLD_FREE
            elif ch == "S":
                if start_cell is not None:
                    raise MalformedMap("multiple 'S' start cells")
                start_cell = (r, c)
                grid[r, c] = WORLD_FREE
            else:
                raise MalformedMap(f"unknown map char {ch!r} at row {r} col {c}")
    if start_cell is None:
        raise MalformedMap("map has no 'S' start cell")
    origin = (0.0, 0.0)
    sr, sc = start_cell
    start = Pose(origin[0] + (sc + 0.5) * resolution,
                 origin[1] + (sr + 0.5) * resolution, 0.0)
    pois = _parse_pois(poi_doc, width * resolution, len(rows) * resolution, origin)
    return World(grid=grid, resolution=resolution, origin=origin,
                 pois=pois, start_pose=start)


def _ray_angles(pose_heading: float, sensor: SensorConfig) -> np.ndarray:
    full_circle = sensor.fov >= 2.0 * math.pi - 1e-12
    if full_circle:
        n = max(1, int(round(2.0 * math.pi / sensor.angular_step)))
        return pose_heading - math.pi + np.arange(n) * sensor.angular_step
    n = int(math.floor(sensor.fov / sensor.angular_step + 1e-12)) + 1
    return pose_heading - sensor.fov / 2.0 + np.arange(n) * sensor.angular_step


def reveal(world: World, pose: Pose, sensor: SensorConfig, costmap: CostMap) -> CostMap:
    """Cast sensor rays from pose, revealing world cells into the cost map.

    Traversed free cells become FREE (cost 0 when newly revealed); the first
    occupied cell on each ray becomes OCCUPIED and blocks it. The revision
    is bumped iff any cell changed.
    """
    r, c = world.cell_at(pose.x, pose.y)
    if not world.in_bounds(r, c):
        raise PoseOutOfBounds(f"pose ({pose.x}, {pose.y}) outside grid")
    if world.grid[r, c] != WORLD_FREE:
        raise PoseOutOfBounds(f"pose ({pose.x}, {pose.y}) on an occupied cell")
    angles = _ray_angles(pose.heading, sensor)
    step = world.resolution * SAMPLE_STEP_FRACTION
    n_steps = int(math.floor(sensor.range / step + 1e-12))
    dists = np.arange(n_steps + 1) * step
    changed = kernels.cast_rays(
        world.grid, costmap.state, costmap.cost,
        np.cos(angles), np.sin(angles), dists,
        float(pose.x), float(pose.y),
        world.origin[0], world.origin[1], world.resolution,
    )
    if changed:
        costmap.revision += 1
    return costmap


def inflate(costmap: CostMap, radius: float) -> CostMap:
    """Assign costs around revealed obstacles.

    A free cell whose center lies at distance d < radius from the nearest
    occupied cell center gets cost round(255 * (1 - d/radius)); cost is 0 at
    and beyond the radius. Unknown cells are untouched.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return costmap
    res = costmap.resolution
    reach = int(math.ceil(radius / res))
    offs = [(dr, dc) for dr in range(-reach, reach + 1)
            for dc in range(-reach, reach + 1)]
    off_r = np.array([o[0] for o in offs], dtype=np.int64)
    off_c = np.array([o[1] for o in offs], dtype=np.int64)
    off_d = np.hypot(off_r.astype(np.float64), off_c.astype(np.float64)) * res
    occ = costmap.state == OCCUPIED
    dist = kernels.min_obstacle_distance(occ, off_r, off_c, off_d)
    ramp = np.rint(255.0 * (1.0 - dist / radius))
    new_cost = np.where((costmap.state == FREE) & (dist < radius),
                        ramp, 0.0).astype(np.uint8)
    if not np.array_equal(new_cost, costmap.cost):
        costmap.cost = new_cost
        costmap.revision += 1
    return costmap


def side_of(bearing: float) -> Side:
    """Partition a relative bearing into front/left/right/behind."""
    if abs(bearing) <= math.pi / 4:
        return Side.FRONT
    if math.pi / 4 < bearing <= 3 * math.pi / 4:
        return Side.LEFT
    if -3 * math.pi / 4 <= bearing < -math.pi / 4:
        return Side.RIGHT
    return Side.BEHIND


def visible_pois(world: World, pose: Pose, sensor: SensorConfig) -> list[PoiSighting]:
    """POIs within sensor range whose anchor is not occluded, sorted by
    distance then id."""
    step = world.resolution * SAMPLE_STEP_FRACTION
    out: list[PoiSighting] = []
    for poi in world.pois:
        dx = poi.anchor[0] - pose.x
        dy = poi.anchor[1] - pose.y
        distance = math.hypot(dx, dy)
        if distance > sensor.range:
            continue
        if not kernels.line_of_sight(
                world.grid, float(pose.x), float(pose.y),
                float(poi.anchor[0]), float(poi.anchor[1]),
                world.origin[0], world.origin[1], world.resolution, step):
            continue
        bearing = normalize_angle(math.atan2(dy, dx) - pose.heading)
        out.append(PoiSighting(poi=poi, distance=distance,
                               bearing=bearing, side=side_of(bearing)))
    out.sort(key=lambda s: (s.distance, s.poi.id))
    return out

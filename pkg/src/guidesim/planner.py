"""Grid path planning and kinematic motion toward the active waypoint.

Paths are minimum-cost (geometric length plus scaled cell costs) over the
8-connected revealed free cells, found with deterministic A*; diagonal steps
require both adjacent cardinal cells to be traversable so the interpolated
pose never enters a blocked cell. Motion advances the pose along the path
polyline at speed*dt with the heading snapped to the segment tangent, and
pauses for a released handle or an obstacle within the stop window.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .gridworld import FREE, OCCUPIED, CostMap, Pose

ARRIVAL_TOLERANCE = 0.3
STOP_DISTANCE = 0.7


class Unreachable(Exception):
    """Goal cell is unknown, occupied, lethal, or disconnected."""


class MotionStatus(Enum):
    IDLE = "idle"
    NAVIGATING = "navigating"
    PAUSED = "paused"
    ARRIVED = "arrived"


class PauseReason(Enum):
    OBSTACLE_AHEAD = "obstacle_ahead"
    HANDLE_RELEASED = "handle_released"
    CONVERSATION_ACTIVE = "conversation_active"


@dataclass(frozen=True)
class MotionState:
    pose: Pose
    speed: float = 0.5
    hold: bool = True
    status: MotionStatus = MotionStatus.IDLE
    pause_reason: PauseReason | None = None
    progress: float = 0.0  # arc length consumed along the active path

    def __post_init__(self):
        if not 0.0 <= self.speed <= 1.0:
            raise ValueError("speed must lie in [0, 1]")


@dataclass(frozen=True)
class Path:
    waypoints: tuple[tuple[float, float], ...]
    total_length: float
    goal: tuple[float, float]
    _cum: tuple[float, ...] = field(default=(), repr=False)

    @classmethod
    def from_points(cls, pts: list[tuple[float, float]]) -> "Path":
        cum = [0.0]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            cum.append(cum[-1] + math.hypot(x1 - x0, y1 - y0))
        return cls(waypoints=tuple(pts), total_length=cum[-1],
                   goal=pts[-1], _cum=tuple(cum))

    def point_at(self, s: float) -> tuple[float, float, float | None]:
        """Position and tangent heading at arc length s (clamped).

        Heading is None for a degenerate single-point path.
        """
        pts, cum = self.waypoints, self._cum
        if len(pts) == 1:
            return pts[0][0], pts[0][1], None
        s = min(max(s, 0.0), self.total_length)
        # find segment containing s
        i = 1
        while i < len(cum) - 1 and cum[i] < s:
            i += 1
        (x0, y0), (x1, y1) = pts[i - 1], pts[i]
        seg = cum[i] - cum[i - 1]
        t = 0.0 if seg == 0.0 else (s - cum[i - 1]) / seg
        return (x0 + (x1 - x0) * t, y0 + (y1 - y0) * t,
                math.atan2(y1 - y0, x1 - x0))

    def project(self, x: float, y: float) -> float:
        """Arc length of the closest point on the path to (x, y); earliest
        on ties."""
        pts, cum = self.waypoints, self._cum
        if len(pts) == 1:
            return 0.0
        best_d2 = math.inf
        best_s = 0.0
        for i in range(1, len(pts)):
            (x0, y0), (x1, y1) = pts[i - 1], pts[i]
            dx, dy = x1 - x0, y1 - y0
            seg2 = dx * dx + dy * dy
            t = 0.0 if seg2 == 0.0 else max(0.0, min(1.0, ((x - x0) * dx + (y - y0) * dy) / seg2))
            px, py = x0 + dx * t, y0 + dy * t
            d2 = (x - px) ** 2 + (y - py) ** 2
            if d2 < best_d2 - 1e-15:
                best_d2 = d2
                best_s = cum[i - 1] + math.sqrt(seg2) * t
        return best_s


def _traversable(costmap: CostMap, r: int, c: int) -> bool:
    return (costmap.in_bounds(r, c) and costmap.state[r, c] == FREE
            and costmap.cost[r, c] < 255)


_STEPS = ((-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
          (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)),
          (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2)))


def plan_path(costmap: CostMap, from_pt: tuple[float, float],
              to_pt: tuple[float, float]) -> Path:
    """Deterministic A* from the cell under from_pt to the cell under to_pt.

    Edge cost = step length + (cell cost / 255) * resolution of the entered
    cell; heap ties break on flat cell index.
    """
    res = costmap.resolution
    sr, sc = costmap.cell_at(*from_pt)
    if not _traversable(costmap, sr, sc):
        raise ValueError(f"start {from_pt} not on a revealed traversable cell")
    gr, gc = costmap.cell_at(*to_pt)
    if not _traversable(costmap, gr, gc):
        raise Unreachable(f"goal {to_pt} is unknown, occupied, or lethal")
    h, w = costmap.state.shape
    start = sr * w + sc
    goal = gr * w + gc
    gx, gy = costmap.cell_center(gr, gc)

    def heur(r: int, c: int) -> float:
        x, y = costmap.cell_center(r, c)
        return math.hypot(x - gx, y - gy)

    gscore = np.full(h * w, np.inf)
    parent = np.full(h * w, -1, dtype=np.int64)
    closed = np.zeros(h * w, dtype=bool)
    gscore[start] = 0.0
    heap: list[tuple[float, int]] = [(heur(sr, sc), start)]
    while heap:
        f, node = heapq.heappop(heap)
        if closed[node]:
            continue
        closed[node] = True
        if node == goal:
            break
        r, c = divmod(node, w)
        for dr, dc, steplen in _STEPS:
            nr, nc = r + dr, c + dc
            if not _traversable(costmap, nr, nc):
                continue
            if dr != 0 and dc != 0:
                # no corner cutting: both cardinals must be open
                if not (_traversable(costmap, r, nc) and _traversable(costmap, nr, c)):
                    continue
            nxt = nr * w + nc
            if closed[nxt]:
                continue
            ng = gscore[node] + steplen * res + (costmap.cost[nr, nc] / 255.0) * res
            if ng < gscore[nxt]:
                gscore[nxt] = ng
                parent[nxt] = node
                heapq.heappush(heap, (ng + heur(nr, nc), nxt))
    if not closed[goal]:
        raise Unreachable(f"no path from {from_pt} to {to_pt}")
    cells = [goal]
    while cells[-1] != start:
        cells.append(int(parent[cells[-1]]))
    cells.reverse()
    pts = [costmap.cell_center(*divmod(n, w)) for n in cells]
    return Path.from_points(pts)


def path_cost(costmap: CostMap, path: Path) -> float:
    """Planner objective value of a path (for oracle comparison)."""
    res = costmap.resolution
    total = 0.0
    for (x0, y0), (x1, y1) in zip(path.waypoints, path.waypoints[1:]):
        r, c = costmap.cell_at(x1, y1)
        total += math.hypot(x1 - x0, y1 - y0) + (costmap.cost[r, c] / 255.0) * res
    return total


def obstacle_ahead(costmap: CostMap, pose: Pose, path: Path,
                   stop_dist: float, progress: float | None = None) -> bool:
    """True iff an occupied cell lies on the path within stop_dist of the
    robot's position along it."""
    if stop_dist < 0:
        raise ValueError("stop_dist must be >= 0")
    if progress is None:
        progress = path.project(pose.x, pose.y)
    step = costmap.resolution / 3.0
    s = progress
    end = min(progress + stop_dist, path.total_length)
    while True:
        x, y, _ = path.point_at(s)
        r, c = costmap.cell_at(x, y)
        if costmap.in_bounds(r, c) and costmap.state[r, c] == OCCUPIED:
            return True
        if s >= end:
            return False
        s = min(s + step, end)


def step_motion(state: MotionState, path: Path | None, dt: float,
                costmap: CostMap, stop_dist: float = STOP_DISTANCE,
                arrival_tol: float = ARRIVAL_TOLERANCE) -> MotionState:
    """Advance one tick of motion along the path.

    Order of checks: conversation pause is sticky (cleared externally), a
    released handle pauses, an obstacle within stop_dist pauses, otherwise
    the pose advances speed*dt along the polyline and arrives when the
    remaining distance is within tolerance.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if (state.status is MotionStatus.PAUSED
            and state.pause_reason is PauseReason.CONVERSATION_ACTIVE):
        return state
    if not state.hold:
        return replace(state, status=MotionStatus.PAUSED,
                       pause_reason=PauseReason.HANDLE_RELEASED)
    if path is None or not path.waypoints:
        return replace(state, status=MotionStatus.IDLE, pause_reason=None)
    if obstacle_ahead(costmap, state.pose, path, stop_dist, progress=state.progress):
        return replace(state, status=MotionStatus.PAUSED,
                       pause_reason=PauseReason.OBSTACLE_AHEAD)
    progress = min(state.progress + state.speed * dt, path.total_length)
    x, y, heading = path.point_at(progress)
    pose = Pose(x, y, state.pose.heading if heading is None else heading)
    remaining = path.total_length - progress
    if remaining <= arrival_tol:
        return replace(state, pose=pose, progress=progress,
                       status=MotionStatus.ARRIVED, pause_reason=None)
    return replace(state, pose=pose, progress=progress,
                   status=MotionStatus.NAVIGATING, pause_reason=None)

"""Waypoint detection and goal selection on the revealed cost map.

Pipeline: thin the traversable free space to a skeleton, take skeleton
branch points as corridor intersections, merge nearby branch points with
DBSCAN and use cluster centers as candidates, add four 3 m fallback offsets
around the robot, then keep candidates between 1 m and 50 m. Selection
prefers candidates in a forward cone around the robot's initial orientation,
falling back to the smallest absolute angle from the current orientation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .gridworld import FREE, CostMap, Pose, normalize_angle

FALLBACK_DISTANCE = 3.0
MIN_WP_DISTANCE = 1.0
MAX_WP_DISTANCE = 50.0
FORWARD_CONE_HALF_ANGLE = math.radians(45.0)
VISITED_EXCLUSION_RADIUS = 1.0


class NoCandidates(Exception):
    """Waypoint detection produced nothing after filtering."""


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 0.5
    min_pts: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


class WaypointSource(Enum):
    SKELETON_INTERSECTION = "skeleton_intersection"
    FALLBACK_FRONT = "fallback_front"
    FALLBACK_BACK = "fallback_back"
    FALLBACK_LEFT = "fallback_left"
    FALLBACK_RIGHT = "fallback_right"


@dataclass(frozen=True)
class SkeletonMask:
    cells: np.ndarray  # bool, same shape as the cost map
    source_revision: int


@dataclass(frozen=True)
class Waypoint:
    position: tuple[float, float]
    source: WaypointSource
    distance: float
    bearing_current: float
    bearing_initial: float


def skeletonize(costmap: CostMap) -> SkeletonMask:
    """Thin the traversable mask (revealed free, cost < 255) to a one-cell
    medial structure; empty traversable set yields an empty skeleton."""
    mask = costmap.traversable_mask()
    return SkeletonMask(cells=kernels.thin_mask(mask),
                        source_revision=costmap.revision)


def branch_points(skel: SkeletonMask) -> list[tuple[int, int]]:
    """Skeleton cells with >= 3 skeleton neighbors, in row-major order."""
    m = skel.cells
    if not m.any():
        return []
    p = np.pad(m, 1, constant_values=False).astype(np.int8)
    count = (p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
             + p[1:-1, :-2] + p[1:-1, 2:]
             + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:])
    rs, cs = np.nonzero(m & (count >= 3))
    return list(zip(rs.tolist(), cs.tolist()))


def cluster_centers(points: list[tuple[float, float]],
                    params: ClusterParams = ClusterParams()) -> list[tuple[float, float]]:
    """DBSCAN over Euclidean distance; returns cluster means sorted by
    (x, y). Noise points (neighborhoods below min_pts) are dropped."""
    if not points:
        return []
    pts = sorted(points)
    arr = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    diff = arr[:, None, :] - arr[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    eps2 = params.eps * params.eps
    neigh = [np.nonzero(d2[i] <= eps2)[0] for i in range(n)]
    core = [len(neigh[i]) >= params.min_pts for i in range(n)]
    label = [-1] * n
    cid = 0
    for i in range(n):
        if label[i] != -1 or not core[i]:
            continue
        label[i] = cid
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in neigh[j]:
                if label[k] == -1:
                    label[k] = cid
                    if core[k]:
                        queue.append(k)
        cid += 1
    centers = []
    for c in range(cid):
        members = arr[[i for i in range(n) if label[i] == c]]
        centers.append((float(members[:, 0].mean()), float(members[:, 1].mean())))
    return sorted(centers)


def _bearings(pose: Pose, initial_heading: float,
              x: float, y: float) -> tuple[float, float, float]:
    dx, dy = x - pose.x, y - pose.y
    dist = math.hypot(dx, dy)
    angle = math.atan2(dy, dx)
    return (dist,
            normalize_angle(angle - pose.heading),
            normalize_angle(angle - initial_heading))


_FALLBACKS = (
    (0.0, WaypointSource.FALLBACK_FRONT),
    (math.pi, WaypointSource.FALLBACK_BACK),
    (math.pi / 2, WaypointSource.FALLBACK_LEFT),
    (-math.pi / 2, WaypointSource.FALLBACK_RIGHT),
)


def fallback_candidates(pose: Pose, costmap: CostMap,
                        initial_heading: float | None = None) -> list[Waypoint]:
    """3 m offsets in front, behind, and to the sides of the robot; offsets
    landing on unknown or non-free cells are dropped."""
    if initial_heading is None:
        initial_heading = pose.heading
    out = []
    for off, source in _FALLBACKS:
        ang = pose.heading + off
        x = pose.x + FALLBACK_DISTANCE * math.cos(ang)
        y = pose.y + FALLBACK_DISTANCE * math.sin(ang)
        r, c = costmap.cell_at(x, y)
        if not costmap.in_bounds(r, c) or costmap.state[r, c] != FREE:
            continue
        dist, b_cur, b_init = _bearings(pose, initial_heading, x, y)
        out.append(Waypoint((x, y), source, dist, b_cur, b_init))
    return out


def filter_candidates(cands: list[Waypoint], pose: Pose) -> list[Waypoint]:
    """Keep candidates between 1 m and 50 m from the robot, order preserved."""
    return [c for c in cands if MIN_WP_DISTANCE <= c.distance <= MAX_WP_DISTANCE]


def detect_waypoints(costmap: CostMap, pose: Pose,
                     params: ClusterParams = ClusterParams(),
                     initial_heading: float | None = None) -> list[Waypoint]:
    """Full candidate pipeline; deterministic order: cluster centers sorted
    by (x, y), then fallbacks front/back/left/right."""
    if initial_heading is None:
        initial_heading = pose.heading
    skel = skeletonize(costmap)
    pts = [costmap.cell_center(r, c) for r, c in branch_points(skel)]
    cands: list[Waypoint] = []
    for x, y in cluster_centers(pts, params):
        r, c = costmap.cell_at(x, y)
        if not costmap.in_bounds(r, c) or costmap.state[r, c] != FREE:
            continue  # cluster mean can land off the free space; drop it
        dist, b_cur, b_init = _bearings(pose, initial_heading, x, y)
        cands.append(Waypoint((x, y), WaypointSource.SKELETON_INTERSECTION,
                              dist, b_cur, b_init))
    cands.extend(fallback_candidates(pose, costmap, initial_heading))
    cands = filter_candidates(cands, pose)
    if not cands:
        raise NoCandidates("no waypoint candidates after distance filtering")
    return cands


def select_waypoint(cands: list[Waypoint], pose: Pose, initial_heading: float,
                    visited: list[tuple[float, float]] | tuple = (),
                    forward_cone_half_angle: float = FORWARD_CONE_HALF_ANGLE,
                    visited_radius: float = VISITED_EXCLUSION_RADIUS) -> Waypoint:
    """Pick the next goal.

    Candidates near visited points are deprioritized. Among the rest,
    forward-cone candidates (|bearing from initial heading| within the cone)
    win by smallest such bearing; otherwise smallest |bearing from current
    heading| wins. Ties: greater distance, then lexicographic position.
    Bearings are recomputed from positions, so the choice is a pure function
    of geometry and is invariant to candidate order.
    """
    if not cands:
        raise ValueError("select_waypoint requires at least one candidate")

    def geom(c: Waypoint):
        return _bearings(pose, initial_heading, c.position[0], c.position[1])

    def is_visited(c: Waypoint) -> bool:
        return any(math.hypot(c.position[0] - vx, c.position[1] - vy) <= visited_radius
                   for vx, vy in visited)

    pool = [c for c in cands if not is_visited(c)] or list(cands)
    in_cone = [c for c in pool if abs(geom(c)[2]) <= forward_cone_half_angle]
    if in_cone:
        return min(in_cone, key=lambda c: (abs(geom(c)[2]), -geom(c)[0],
                                           c.position[0], c.position[1]))
    return min(pool, key=lambda c: (abs(geom(c)[1]), -geom(c)[0],
                                    c.position[0], c.position[1]))

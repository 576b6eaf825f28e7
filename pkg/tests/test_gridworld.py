"""World loading, ray-cast reveal, inflation, and POI visibility."""

import math
import random

import numpy as np
import pytest

import guidesim.gridworld as gw
from guidesim.gridworld import (FREE, OCCUPIED, UNKNOWN, CostMap,
                                DuplicatePoiId, MalformedMap, Poi,
                                PoiOutOfBounds, Pose, PoseOutOfBounds,
                                SensorConfig, Side, inflate, load_world,
                                normalize_angle, reveal, visible_pois)

from conftest import random_world, world_from_rows


# ------------------------------------------------------------- load_world --

def test_load_minimal_box():
    w = load_world("res=1.0\n###\n#S#\n###")
    assert w.grid.shape == (3, 3)
    assert (w.grid == 1).sum() == 8
    assert w.start_pose == Pose(1.5, 1.5, 0.0)


def test_load_rejects_two_starts():
    with pytest.raises(MalformedMap):
        load_world("res=1.0\n#####\n#S.S#\n#####")


def test_load_rejects_missing_start():
    with pytest.raises(MalformedMap):
        load_world("res=1.0\n###\n#.#\n###")


def test_load_rejects_ragged_rows():
    with pytest.raises(MalformedMap):
        load_world("res=1.0\n####\n#S#\n####")


def test_load_rejects_unknown_char():
    with pytest.raises(MalformedMap):
        load_world("res=1.0\n###\n#SX\n###")


def test_load_rejects_bad_header():
    with pytest.raises(MalformedMap):
        load_world("###\n#S#\n###")
    with pytest.raises(MalformedMap):
        load_world("res=-2\n###\n#S#\n###")


def test_load_corridor_with_pois():
    rows = ["#" * 20, "#S" + "." * 17 + "#", "#" + "." * 18 + "#",
            "#" + "." * 18 + "#", "#" * 20]
    pois = """
pois:
  - {id: a, name: left sign, category: sign, anchor: [2.0, 0.2]}
  - {id: b, name: bench, category: seating, anchor: [15.0, 3.0]}
"""
    w = load_world("res=1.0\n" + "\n".join(rows), pois)
    # counted by construction: 18 + 18 + 18 free interior cells
    assert (w.grid == 0).sum() == 54
    assert (w.grid == 1).sum() == 20 * 5 - 54
    assert [p.id for p in w.pois] == ["a", "b"]


def test_poi_out_of_bounds():
    with pytest.raises(PoiOutOfBounds):
        load_world("res=1.0\n###\n#S#\n###",
                   "pois:\n  - {id: x, name: far, anchor: [99.0, 1.0]}")


def test_duplicate_poi_id():
    doc = ("pois:\n  - {id: x, name: one, anchor: [1.0, 1.0]}\n"
           "  - {id: x, name: two, anchor: [1.2, 1.2]}")
    with pytest.raises(DuplicatePoiId):
        load_world("res=1.0\n###\n#S#\n###", doc)


# ----------------------------------------------------------------- reveal --

def open_room(n=21, res=1.0):
    rows = ["." * n for _ in range(n)]
    mid = n // 2
    rows[mid] = "." * mid + "S" + "." * (n - mid - 1)
    return world_from_rows(rows, res=res)


def test_reveal_open_room_within_range():
    w = open_room(21, res=1.0)
    cm = CostMap.for_world(w)
    reveal(w, w.start_pose, SensorConfig(range=10.0), cm)
    px, py = w.start_pose.x, w.start_pose.y
    for r in range(w.height):
        for c in range(w.width):
            x, y = w.cell_center(r, c)
            d = math.hypot(x - px, y - py)
            if d <= 10.0 - 0.5:
                assert cm.state[r, c] == FREE, (r, c, d)
            elif d > 10.0 + 0.75:
                assert cm.state[r, c] == UNKNOWN, (r, c, d)
    assert cm.revision == 1


def test_reveal_wall_occludes():
    # vertical wall 2 m ahead of the robot; cells behind it stay unknown
    rows = []
    for r in range(11):
        row = ["."] * 11
        if r != 0 and r != 10:
            row[7] = "#"
        rows.append("".join(row))
    rows[5] = rows[5][:2] + "S" + rows[5][3:]
    w = world_from_rows(rows, res=1.0)
    cm = CostMap.for_world(w)
    reveal(w, Pose(2.5, 5.5, 0.0), SensorConfig(range=8.0), cm)
    assert cm.state[5, 7] == OCCUPIED  # wall cell straight ahead
    assert cm.state[5, 8] == UNKNOWN   # directly behind the wall
    assert cm.state[5, 9] == UNKNOWN


def test_reveal_rejects_bad_pose():
    w = open_room(11)
    cm = CostMap.for_world(w)
    with pytest.raises(PoseOutOfBounds):
        reveal(w, Pose(-5.0, -5.0, 0.0), SensorConfig(), cm)


def reveal_oracle(world, pose, sensor):
    """Independent ray-march (pure python sets) mirroring the reveal
    contract; returns (free_cells, occupied_cells)."""
    res = world.resolution
    step = res / 3.0
    n_rays = int(round(2 * math.pi / sensor.angular_step))
    free, occ = set(), set()
    for i in range(n_rays):
        ang = pose.heading - math.pi + i * sensor.angular_step
        k = 0
        while k * step <= sensor.range + 1e-12:
            d = k * step
            if d > sensor.range:
                break
            x = pose.x + math.cos(ang) * d
            y = pose.y + math.sin(ang) * d
            r = math.floor(y / res)
            c = math.floor(x / res)
            if not (0 <= r < world.height and 0 <= c < world.width):
                break
            if world.grid[r, c] == 1:
                occ.add((r, c))
                break
            free.add((r, c))
            k += 1
        # (loop advances k inside; occupied/oob break out)
    return free, occ


def test_reveal_matches_oracle_on_l_corridor():
    rows = [
        "##########",
        "#S.......#",
        "#######..#",
        "#######..#",
        "#######..#",
        "#######..#",
        "#######..#",
        "#######..#",
        "#######..#",
        "##########",
    ]
    w = world_from_rows(rows, res=1.0)
    sensor = SensorConfig(range=12.0, angular_step=math.radians(1.0))
    cm = CostMap.for_world(w)
    reveal(w, w.start_pose, sensor, cm)
    free, occ = reveal_oracle(w, w.start_pose, sensor)
    got_free = set(zip(*map(list, np.nonzero(cm.state == FREE))))
    got_occ = set(zip(*map(list, np.nonzero(cm.state == OCCUPIED))))
    assert got_free == free
    assert got_occ == occ
    # around-the-corner cells are unknown until the robot turns the corner
    assert cm.state[8, 7] == UNKNOWN


def test_reveal_monotone_and_truthful():
    rng = random.Random(17)
    for _ in range(5):
        w = random_world(rng, 20, 20)
        cm = CostMap.for_world(w)
        sensor = SensorConfig(range=4.0, angular_step=math.radians(3.0))
        known_prev = set()
        free_cells = [tuple(rc) for rc in zip(*np.nonzero(w.grid == 0))]
        for _ in range(8):
            r, c = free_cells[rng.randint(0, len(free_cells) - 1)]
            pose = Pose(*w.cell_center(r, c), rng.uniform(-3, 3))
            reveal(w, pose, sensor, cm)
            known = set(zip(*map(list, np.nonzero(cm.state != UNKNOWN))))
            assert known_prev <= known, "revelation must be monotone"
            known_prev = known
            for (rr, cc) in known:
                truth = OCCUPIED if w.grid[rr, cc] == 1 else FREE
                assert cm.state[rr, cc] == truth


# ---------------------------------------------------------------- inflate --

def test_inflate_radius_zero_is_identity():
    w = open_room(9)
    cm = CostMap.for_world(w)
    reveal(w, w.start_pose, SensorConfig(range=20.0), cm)
    before = cm.cost.copy()
    rev = cm.revision
    inflate(cm, 0.0)
    np.testing.assert_array_equal(cm.cost, before)
    assert cm.revision == rev


def test_inflate_single_obstacle_matches_brute_force():
    rows = ["........." for _ in range(9)]
    rows[4] = "....#...."
    rows[8] = "S" + rows[8][1:]
    w = world_from_rows(rows, res=0.1)
    cm = CostMap.for_world(w)
    cm.state = np.where(w.grid == 1, OCCUPIED, FREE).astype(np.uint8)
    radius = 0.3
    inflate(cm, radius)
    occ = [(r, c) for r in range(9) for c in range(9) if w.grid[r, c] == 1]
    for r in range(9):
        for c in range(9):
            if w.grid[r, c] == 1:
                continue
            d = min(math.hypot(r - orr, c - occ_c) * 0.1 for orr, occ_c in occ)
            expected = round(255 * (1 - d / radius)) if d < radius else 0
            assert cm.cost[r, c] == expected, (r, c)
            if d < radius:
                assert cm.cost[r, c] > 0


def test_inflate_all_free_zero_cost():
    w = open_room(9)
    cm = CostMap.for_world(w)
    reveal(w, w.start_pose, SensorConfig(range=20.0), cm)
    inflate(cm, 0.5)
    assert cm.cost.max() == 0


def test_inflate_idempotent():
    rng = random.Random(31)
    for _ in range(5):
        w = random_world(rng, 15, 15)
        cm = CostMap.for_world(w)
        reveal(w, w.start_pose, SensorConfig(range=6.0), cm)
        inflate(cm, 0.4)
        once = cm.cost.copy()
        rev = cm.revision
        inflate(cm, 0.4)
        np.testing.assert_array_equal(cm.cost, once)
        assert cm.revision == rev  # no content change, no revision bump


# ------------------------------------------------------------ visible_pois --

def room_with_pois(pois):
    rows = ["." * 21 for _ in range(21)]
    rows[10] = "." * 10 + "S" + "." * 10
    return load_world("res=1.0\n" + "\n".join(rows), pois)


def test_poi_dead_ahead():
    w = room_with_pois("pois:\n  - {id: p, name: statue, anchor: [15.5, 10.5]}")
    sights = visible_pois(w, w.start_pose, SensorConfig(range=10.0))
    assert len(sights) == 1
    s = sights[0]
    assert s.side is Side.FRONT
    assert abs(s.bearing) < 1e-9
    assert abs(s.distance - 5.0) < 1e-9


def test_poi_behind_wall_not_sighted():
    rows = [list("." * 21) for _ in range(21)]
    for r in range(5, 16):
        rows[r][13] = "#"
    rows[10][10] = "S"
    w = load_world("res=1.0\n" + "\n".join("".join(r) for r in rows),
                   "pois:\n  - {id: p, name: statue, anchor: [16.5, 10.5]}")
    assert visible_pois(w, w.start_pose, SensorConfig(range=10.0)) == []


def test_pois_left_right_ordering():
    doc = """
pois:
  - {id: b, name: right thing, anchor: [10.5, 7.5]}
  - {id: a, name: left thing, anchor: [10.5, 13.5]}
"""
    w = room_with_pois(doc)
    sights = visible_pois(w, w.start_pose, SensorConfig(range=10.0))
    assert [s.poi.id for s in sights] == ["a", "b"]  # equal distance, id order
    assert sights[0].side is Side.LEFT
    assert sights[1].side is Side.RIGHT
    again = visible_pois(w, w.start_pose, SensorConfig(range=10.0))
    assert again == sights


# ------------------------------------------------------------------ angles --

def test_normalize_angle_range():
    rng = random.Random(2)
    for _ in range(500):
        a = rng.uniform(-50, 50)
        n = normalize_angle(a)
        assert -math.pi < n <= math.pi
        assert abs(math.sin(n - a)) < 1e-9
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi

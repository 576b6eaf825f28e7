import math
import pathlib

import numpy as np
import pytest

from guidesim.gridworld import (FREE, OCCUPIED, CostMap, World, WORLD_FREE,
                                inflate, load_world)

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# true junction centers (m) of the junction fixtures, by construction:
# corridor centerlines cross at cell (16, 16), center (4.125, 4.125)
JUNCTION_CENTERS = {
    "plus": [(4.125, 4.125)],
    "tee": [(4.125, 4.125)],
    "ell": [(4.125, 4.125)],
    "corridor": [],
    "room": [],
    "closet": [],
}


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


def load_fixture_world(name: str, pois: str = "") -> World:
    return load_world(fixture_text(f"{name}.map"), pois)


def fully_reveal(world: World, inflation_radius: float = 0.3) -> CostMap:
    """Cost map with ground truth fully revealed (skips the sensor), for
    tests that target the geometry pipeline rather than the sensing."""
    cm = CostMap.for_world(world)
    cm.state = np.where(world.grid == WORLD_FREE, FREE, OCCUPIED).astype(np.uint8)
    cm.revision = 1
    inflate(cm, inflation_radius)
    return cm


def world_from_rows(rows: list[str], res: float = 0.25) -> World:
    return load_world(f"res={res}\n" + "\n".join(rows))


def components(mask: np.ndarray) -> list[set]:
    """8-connected components of a boolean mask (plain BFS; test oracle)."""
    seen = set()
    comps = []
    h, w = mask.shape
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or (r, c) in seen:
                continue
            comp = set()
            stack = [(r, c)]
            seen.add((r, c))
            while stack:
                cr, cc = stack.pop()
                comp.add((cr, cc))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        nr, nc = cr + dr, cc + dc
                        if (0 <= nr < h and 0 <= nc < w and mask[nr, nc]
                                and (nr, nc) not in seen):
                            seen.add((nr, nc))
                            stack.append((nr, nc))
            comps.append(comp)
    return comps


def has_2x2_block(mask: np.ndarray) -> bool:
    return bool((mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]).any())


def random_world(rng, h: int = 30, w: int = 30, res: float = 0.25,
                 n_obstacles: int = 6) -> World:
    """Bordered random world with rectangular obstacles and a guaranteed
    free start cell."""
    rows = [["." for _ in range(w)] for _ in range(h)]
    for r in range(h):
        rows[r][0] = rows[r][w - 1] = "#"
    for c in range(w):
        rows[0][c] = rows[h - 1][c] = "#"
    for _ in range(n_obstacles):
        rh = rng.randint(1, max(1, h // 5))
        rw = rng.randint(1, max(1, w // 5))
        r0 = rng.randint(1, h - rh - 1)
        c0 = rng.randint(1, w - rw - 1)
        for r in range(r0, r0 + rh):
            for c in range(c0, c0 + rw):
                rows[r][c] = "#"
    free = [(r, c) for r in range(1, h - 1) for c in range(1, w - 1)
            if rows[r][c] == "."]
    if not free:
        rows[h // 2][w // 2] = "."
        free = [(h // 2, w // 2)]
    sr, sc = free[rng.randint(0, len(free) - 1)]
    rows[sr][sc] = "S"
    return load_world(f"res={res}\n" + "\n".join("".join(r) for r in rows))

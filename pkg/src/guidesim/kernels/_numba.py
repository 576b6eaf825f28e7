"""Numba-compiled kernel implementations.

Cell conventions shared with the numpy backend: world grids hold 0 (free) /
1 (occupied); cost-map state arrays hold 0 (unknown) / 1 (free) / 2
(occupied). World coordinates are metres; cells are addressed (row, col)
with row = floor((y - oy) / res).
"""

import math

import numpy as np
from numba import njit

WORLD_OCCUPIED = 1
UNKNOWN = 0
FREE = 1
OCCUPIED = 2


@njit(cache=True)
def cast_rays(world, state, cost, cos_a, sin_a, dists, x0, y0, ox, oy, res):
    """March every ray through the sample distances, revealing cells.

    Free cells along a ray are revealed FREE (cost reset to 0 on the state
    change only); the first occupied world cell blocks the ray and is
    revealed OCCUPIED. Returns the number of cells whose state changed.
    """
    h, w = world.shape
    changed = 0
    for i in range(cos_a.shape[0]):
        ux = cos_a[i]
        uy = sin_a[i]
        for k in range(dists.shape[0]):
            d = dists[k]
            x = x0 + ux * d
            y = y0 + uy * d
            r = int(math.floor((y - oy) / res))
            c = int(math.floor((x - ox) / res))
            if r < 0 or r >= h or c < 0 or c >= w:
                break
            if world[r, c] == WORLD_OCCUPIED:
                if state[r, c] != OCCUPIED:
                    state[r, c] = OCCUPIED
                    changed += 1
                break
            if state[r, c] != FREE:
                state[r, c] = FREE
                cost[r, c] = 0
                changed += 1
    return changed


@njit(cache=True)
def line_of_sight(world, x0, y0, x1, y1, ox, oy, res, step):
    """True iff no occupied world cell lies on the segment before the
    destination cell (the destination cell itself never blocks)."""
    h, w = world.shape
    dx = x1 - x0
    dy = y1 - y0
    dist = math.sqrt(dx * dx + dy * dy)
    if dist == 0.0:
        return True
    tr = int(math.floor((y1 - oy) / res))
    tc = int(math.floor((x1 - ox) / res))
    ux = dx / dist
    uy = dy / dist
    n = int(math.floor(dist / step))
    for k in range(n + 1):
        d = k * step
        x = x0 + ux * d
        y = y0 + uy * d
        r = int(math.floor((y - oy) / res))
        c = int(math.floor((x - ox) / res))
        if r == tr and c == tc:
            return True
        if r < 0 or r >= h or c < 0 or c >= w:
            return False
        if world[r, c] == WORLD_OCCUPIED:
            return False
    return True


@njit(cache=True)
def min_obstacle_distance(occ, off_r, off_c, off_d):
    """Per-cell distance (m) to the nearest occupied cell within the offset
    window; +inf where none is in range."""
    h, w = occ.shape
    dist = np.full((h, w), np.inf, dtype=np.float64)
    for r in range(h):
        for c in range(w):
            if not occ[r, c]:
                continue
            for k in range(off_r.shape[0]):
                tr = r + off_r[k]
                tc = c + off_c[k]
                if tr < 0 or tr >= h or tc < 0 or tc >= w:
                    continue
                if off_d[k] < dist[tr, tc]:
                    dist[tr, tc] = off_d[k]
    return dist


@njit(cache=True, inline="always")
def _deletable(m, r, c, sub):
    # m is padded by one cell of False on every side
    n = m[r - 1, c]
    ne = m[r - 1, c + 1]
    e = m[r, c + 1]
    se = m[r + 1, c + 1]
    s = m[r + 1, c]
    sw = m[r + 1, c - 1]
    w_ = m[r, c - 1]
    nw = m[r - 1, c - 1]
    b = int(n) + int(ne) + int(e) + int(se) + int(s) + int(sw) + int(w_) + int(nw)
    if b < 2 or b > 6:
        return False
    a = 0
    if not n and ne:
        a += 1
    if not ne and e:
        a += 1
    if not e and se:
        a += 1
    if not se and s:
        a += 1
    if not s and sw:
        a += 1
    if not sw and w_:
        a += 1
    if not w_ and nw:
        a += 1
    if not nw and n:
        a += 1
    if a != 1:
        return False
    if sub == 0:
        return (not (n and e and s)) and (not (e and s and w_))
    return (not (n and e and w_)) and (not (n and s and w_))


@njit(cache=True)
def _collect_deletable(m, sub, rows, cols):
    h2, w2 = m.shape
    cnt = 0
    for r in range(1, h2 - 1):
        for c in range(1, w2 - 1):
            if m[r, c] and _deletable(m, r, c, sub):
                rows[cnt] = r
                cols[cnt] = c
                cnt += 1
    return cnt


@njit(cache=True, inline="always")
def _simple(m, r, c):
    n = m[r - 1, c]
    ne = m[r - 1, c + 1]
    e = m[r, c + 1]
    se = m[r + 1, c + 1]
    s = m[r + 1, c]
    sw = m[r + 1, c - 1]
    w_ = m[r, c - 1]
    nw = m[r - 1, c - 1]
    b = int(n) + int(ne) + int(e) + int(se) + int(s) + int(sw) + int(w_) + int(nw)
    if b < 2:
        return False
    a = 0
    if not n and ne:
        a += 1
    if not ne and e:
        a += 1
    if not e and se:
        a += 1
    if not se and s:
        a += 1
    if not s and sw:
        a += 1
    if not sw and w_:
        a += 1
    if not w_ and nw:
        a += 1
    if not nw and n:
        a += 1
    return a == 1


@njit(cache=True)
def thin_mask(mask_in):
    """Two-subcycle morphological thinning to fixpoint.

    Each subcycle selects its candidates on a snapshot (classic directional
    split, so a 3-wide ribbon loses one boundary per subcycle and keeps its
    centerline) and deletes them in row-major order with a live simple-point
    recheck, so every removed pixel is simple at removal time and component
    connectivity is preserved even where the parallel rule would erase a
    whole small component. A final sweep clears leftover 2x2 solid blocks by
    deleting one simple pixel per block.
    """
    h, w = mask_in.shape
    m = np.zeros((h + 2, w + 2), dtype=np.bool_)
    m[1:h + 1, 1:w + 1] = mask_in
    rows = np.empty(h * w, dtype=np.int64)
    cols = np.empty(h * w, dtype=np.int64)
    changed = True
    while changed:
        changed = False
        for sub in range(2):
            snapshot = m.copy()
            cnt = _collect_deletable(snapshot, sub, rows, cols)
            for k in range(cnt):
                r, c = rows[k], cols[k]
                if _simple(m, r, c):
                    m[r, c] = False
                    changed = True
    progress = True
    while progress:
        progress = False
        for r in range(1, h):
            for c in range(1, w):
                if m[r, c] and m[r, c + 1] and m[r + 1, c] and m[r + 1, c + 1]:
                    if _simple(m, r, c):
                        m[r, c] = False
                        progress = True
                    elif _simple(m, r, c + 1):
                        m[r, c + 1] = False
                        progress = True
                    elif _simple(m, r + 1, c):
                        m[r + 1, c] = False
                        progress = True
                    elif _simple(m, r + 1, c + 1):
                        m[r + 1, c + 1] = False
                        progress = True
    return m[1:h + 1, 1:w + 1].copy()

"""Ray and line traversal kernels shared by the sensor and the scoring raycasts.

Rays are walked by sampling points every quarter cell along the ray
direction, starting at the origin cell's center. A sample at distance d
along direction (dx, dy) lands in the cell

    (origin.x + floor(0.5 + d*dx), origin.y + floor(0.5 + d*dy))

so the visited-cell pattern is identical from every origin cell and can be
precomputed per (ray count, range) as integer offset tables. The step of
0.25 is a power of two, so the sample distances k*STEP are exact in float64
and the walk is bit-reproducible. Consecutive duplicate cells are flagged
via a "new cell" mask so per-cell accumulation counts each traversed cell
once per ray.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grid import GridPose

STEP = 0.25  # sample spacing along a ray, in cells

# Absorbs division noise in range/STEP so an integral number of cells of
# range yields the full sample count.
_COUNT_GUARD = 1e-9


@lru_cache(maxsize=32)
def unit_ray_directions(n_rays: int) -> np.ndarray:
    """(n_rays, 2) unit vectors, evenly spaced over 360°, angle 0 = +x."""
    angles = np.arange(n_rays, dtype=np.float64) * (2.0 * np.pi / n_rays)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


@lru_cache(maxsize=32)
def sample_distances(range_cells: float) -> np.ndarray:
    """Sample distances 0, STEP, 2*STEP, ... covering `range_cells`."""
    n = int(np.floor(range_cells / STEP + _COUNT_GUARD)) + 1
    return np.arange(n, dtype=np.float64) * STEP


@lru_cache(maxsize=8)
def ray_offset_table(n_rays: int, range_cells: float):
    """Cached per-sample cell offsets (offx, offy, newcell), each
    (n_rays, n_samples). Sample 0 is the origin cell (offset 0, 0)."""
    dirs = unit_ray_directions(n_rays)
    dist = sample_distances(range_cells)
    offx = np.floor(0.5 + dirs[:, 0:1] * dist[None, :]).astype(np.int32)
    offy = np.floor(0.5 + dirs[:, 1:2] * dist[None, :]).astype(np.int32)
    new = np.ones(offx.shape, dtype=bool)
    new[:, 1:] = (offx[:, 1:] != offx[:, :-1]) | (offy[:, 1:] != offy[:, :-1])
    return offx, offy, new


def ray_cell_table(origin: GridPose, n_rays: int, range_cells: float, shape):
    """Sampled cells for all rays from the center of `origin`.

    Returns (cx, cy, inbounds, newcell), each of shape (n_rays, n_samples).
    `inbounds` is a prefix mask per ray (a ray never re-enters the grid),
    `newcell` marks samples that land in a different cell than the previous
    sample.
    """
    h, w = shape
    offx, offy, new = ray_offset_table(n_rays, float(range_cells))
    cx = origin.x + offx
    cy = origin.y + offy
    inb = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    np.logical_and.accumulate(inb, axis=1, out=inb)
    return cx, cy, inb, new


def gather_values(cells: np.ndarray, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """cells[cy, cx] with out-of-bounds indices clamped (mask them yourself)."""
    flat = cy.astype(np.int64) * cells.shape[1] + cx
    np.clip(flat, 0, cells.size - 1, out=flat)
    return cells.ravel()[flat]


def first_true_index(mask: np.ndarray):
    """Per-row index of the first True, and whether the row has any True."""
    has = mask.any(axis=1)
    idx = np.argmax(mask, axis=1)
    return idx, has


def bresenham_line(a: GridPose, b: GridPose) -> list[GridPose]:
    """8-connected cell chain from a to b, inclusive of both ends.

    The chain has no diagonal gaps wider than one step, so it acts as a
    barrier to a 4-connected flood fill.
    """
    x0, y0 = a
    x1, y1 = b
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    cells = []
    while True:
        cells.append(GridPose(x0, y0))
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x0 += sx
        if e2 < dx:
            err += dx
            y0 += sy
    return cells

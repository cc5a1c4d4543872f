"""Vehicle measurement simulation: perimeter routes around buildings and
arc-length sampling of the global field at configurable time intervals.

Routes are canonical and deterministic: the exterior free-cell ring of each
building region is traced clockwise starting at its topmost-leftmost cell,
loops are concatenated in label order, and consecutive loops are joined by a
breadth-first shortest free path. Without buildings the map border is the
route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .propagation import BitmapEncoding, RadioMap
from .scenario import BuildingLayout

STANDARD_INTERVALS = (1, 2, 4, 6, 8, 10)

# noise stream tags, mixed with the caller's seed
_SAMPLE_TAG = 0x5A3C
_EXTRA_TAG = 0xAD01

# clockwise Moore scan order with the origin at the top-left (y grows down)
_CLOCKWISE = ((0, -1), (-1, -1), (-1, 0), (-1, 1),
              (0, 1), (1, 1), (1, 0), (1, -1))


class RouteError(RuntimeError):
    """No valid measurement route exists for the layout."""


@dataclass
class Route:
    """Ordered free-cell centers (meters) the vehicle drives through."""

    waypoints: list[tuple[float, float]]
    total_length: float

    def cumulative_lengths(self) -> np.ndarray:
        pts = np.asarray(self.waypoints, dtype=np.float64)
        if len(pts) < 2:
            return np.zeros(max(len(pts), 1))
        steps = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        return np.concatenate([[0.0], np.cumsum(steps)])


@dataclass
class SampleSet:
    """Sparse measurements {(S_j, rss_j)}; exact duplicate positions merged.

    interval_s is None for sets not produced by interval sampling (the
    uniform-random baseline); route-based sets record the interval used.
    """

    positions: np.ndarray    # (J, 2) float, (x, y) meters
    values: np.ndarray       # (J,) dBm
    interval_s: float | None
    speed: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if len(self.positions) != len(self.values):
            raise ValueError("positions and values must have equal length")
        if len(self.values) < 1:
            raise ValueError("a sample set needs at least one sample")
        if self.interval_s is not None and self.interval_s <= 0:
            raise ValueError("interval_s must be positive")
        if self.speed <= 0:
            raise ValueError("speed must be positive")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SampledMap:
    values: np.ndarray  # uint8 bitmap, 0 where unsampled
    mask: np.ndarray    # uint8, 1 on sampled cells


def _trace_ring(ring: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor trace of a ring mask, clockwise, closed back to start."""
    h, w = ring.shape

    def scan(cell, backtrack):
        # directions clockwise, beginning just after the backtrack direction
        di, dj = backtrack[0] - cell[0], backtrack[1] - cell[1]
        k0 = _CLOCKWISE.index((di, dj))
        for step in range(1, 9):
            di, dj = _CLOCKWISE[(k0 + step) % 8]
            ni, nj = cell[0] + di, cell[1] + dj
            if 0 <= ni < h and 0 <= nj < w and ring[ni, nj]:
                prev = _CLOCKWISE[(k0 + step - 1) % 8]
                return (ni, nj), (cell[0] + prev[0], cell[1] + prev[1])
        return None, None

    first_back = (start[0], start[1] - 1)
    loop = [start]
    cell, back = scan(start, first_back)
    if cell is None:
        return [start, start]  # isolated ring cell
    second = cell
    second_back = back
    guard = 8 * int(ring.sum()) + 16
    while guard > 0:
        guard -= 1
        loop.append(cell)
        if cell == start:
            nxt, nback = scan(cell, back)
            if nxt == second and nback == second_back:
                return loop
        cell, back = scan(cell, back)
        if cell is None:
            return loop + [start]
    raise RouteError("ring trace did not close")


def _bfs_path(free: np.ndarray, start: tuple[int, int],
              goal: tuple[int, int]) -> list[tuple[int, int]]:
    """Deterministic 8-neighborhood BFS shortest path over free cells."""
    if start == goal:
        return [start]
    h, w = free.shape
    prev = {start: None}
    frontier = [start]
    neigh = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    while frontier:
        nxt = []
        for i, j in frontier:
            for di, dj in neigh:
                ni, nj = i + di, j + dj
                if 0 <= ni < h and 0 <= nj < w and free[ni, nj] and (ni, nj) not in prev:
                    prev[(ni, nj)] = (i, j)
                    if (ni, nj) == goal:
                        path = [(ni, nj)]
                        while path[-1] != start:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    nxt.append((ni, nj))
        frontier = nxt
    raise RouteError(f"no free path from {start} to {goal}")


def _border_loop(h: int, w: int) -> list[tuple[int, int]]:
    loop = [(0, j) for j in range(w)]
    loop += [(i, w - 1) for i in range(1, h)]
    loop += [(h - 1, j) for j in range(w - 2, -1, -1)]
    loop += [(i, 0) for i in range(h - 2, 0, -1)]
    loop.append((0, 0))
    return loop


def build_routes(layout: BuildingLayout) -> Route:
    """Canonical measurement route around every reachable building."""
    occ = layout.cells
    free = occ == 0
    if not free.any():
        raise RouteError("layout has no free cells")
    h, w = occ.shape

    if not occ.any():
        cells = _border_loop(h, w)
    else:
        structure = np.ones((3, 3), dtype=bool)
        region_labels, n_regions = ndimage.label(occ, structure=structure)
        free_labels, _ = ndimage.label(free, structure=structure)
        border = np.concatenate([free_labels[0, :], free_labels[-1, :],
                                 free_labels[:, 0], free_labels[:, -1]])
        outside = np.isin(free_labels, np.unique(border[border > 0]))
        # visit regions in (bbox top, left) order, same as component labeling
        slices = ndimage.find_objects(region_labels)
        order = sorted(range(1, n_regions + 1),
                       key=lambda k: (slices[k - 1][0].start, slices[k - 1][1].start))
        cells = []
        for rid in order:
            region = region_labels == rid
            ring = ndimage.binary_dilation(region, structure=structure) & free & outside
            if not ring.any():
                raise RouteError(f"building region {rid} is unreachable")
            ys, xs = np.nonzero(ring)
            k = np.lexsort((xs, ys))[0]
            start = (int(ys[k]), int(xs[k]))
            loop = _trace_ring(ring, start)
            if cells:
                bridge = _bfs_path(outside, cells[-1], loop[0])
                cells.extend(bridge[1:])
            cells.extend(loop if not cells or cells[-1] != loop[0] else loop[1:])

    waypoints = [(j + 0.5, i + 0.5) for i, j in cells]
    pts = np.asarray(waypoints)
    length = float(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1])).sum()) if len(pts) > 1 else 0.0
    return Route(waypoints=waypoints, total_length=length)


def _point_along(route: Route, cum: np.ndarray, arc: float) -> tuple[float, float]:
    pts = route.waypoints
    if arc <= 0:
        return pts[0]
    if arc >= cum[-1]:
        return pts[-1]
    k = int(np.searchsorted(cum, arc, side="right")) - 1
    seg = cum[k + 1] - cum[k]
    frac = (arc - cum[k]) / seg
    x0, y0 = pts[k]
    x1, y1 = pts[k + 1]
    return (x0 + frac * (x1 - x0), y0 + frac * (y1 - y0))


def _merge_duplicates(positions, values) -> tuple[np.ndarray, np.ndarray]:
    seen: dict[tuple[float, float], list[float]] = {}
    order: list[tuple[float, float]] = []
    for (x, y), v in zip(positions, values):
        key = (float(x), float(y))
        if key not in seen:
            seen[key] = []
            order.append(key)
        seen[key].append(float(v))
    merged_pos = np.asarray(order, dtype=np.float64)
    merged_val = np.asarray([np.mean(seen[k]) for k in order])
    return merged_pos, merged_val


def sample_along(route: Route, global_map: RadioMap, interval_s: float,
                 speed: float = 1.0, noise_sigma: float = 0.0,
                 seed: int = 0) -> SampleSet:
    """Measure at arc-length multiples of interval_s * speed from the start.

    The reading is the field value at the containing cell's center plus
    optional Gaussian noise; positions themselves are exact. Larger intervals
    mean fewer samples.
    """
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")
    if global_map.unit != "dbm":
        raise ValueError("sampling needs the dBm global map")
    cum = route.cumulative_lengths()
    step = interval_s * speed
    count = int(math.floor((cum[-1] + 1e-9) / step)) + 1
    positions = np.empty((count, 2))
    values = np.empty(count)
    grid = global_map.values
    for k in range(count):
        x, y = _point_along(route, cum, k * step)
        positions[k] = (x, y)
        values[k] = grid[int(math.floor(y)), int(math.floor(x))]
    if noise_sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF,
                                                            _SAMPLE_TAG]))
        values = values + rng.normal(0.0, noise_sigma, size=count)
    positions, values = _merge_duplicates(positions, values)
    return SampleSet(positions=positions, values=values, interval_s=interval_s,
                     speed=speed, noise_sigma=noise_sigma, seed=int(seed))


def sample_uniform(layout: BuildingLayout, global_map: RadioMap, n_samples: int,
                   noise_sigma: float = 0.0, seed: int = 0) -> SampleSet:
    """Uniform-random baseline: n positions drawn over free cells.

    Exists as a comparison switch against route sampling; same reading
    convention (field value at the containing cell center).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if global_map.unit != "dbm":
        raise ValueError("sampling needs the dBm global map")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF,
                                                        _SAMPLE_TAG, 1]))
    free = np.argwhere(layout.cells == 0)
    if len(free) == 0:
        raise ValueError("layout has no free cells")
    picks = free[rng.integers(0, len(free), size=n_samples)]
    offsets = rng.random((n_samples, 2))
    positions = np.column_stack([picks[:, 1] + offsets[:, 0],
                                 picks[:, 0] + offsets[:, 1]])
    values = global_map.values[picks[:, 0], picks[:, 1]].astype(np.float64)
    if noise_sigma > 0:
        values = values + rng.normal(0.0, noise_sigma, size=n_samples)
    positions, values = _merge_duplicates(positions, values)
    return SampleSet(positions=positions, values=values, interval_s=None,
                     noise_sigma=noise_sigma, seed=int(seed))


def add_noise(sample_set: SampleSet, sigma: float, seed: int) -> SampleSet:
    """Independent zero-mean Gaussian perturbation per sample, values only."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return SampleSet(positions=sample_set.positions.copy(),
                         values=sample_set.values.copy(),
                         interval_s=sample_set.interval_s, speed=sample_set.speed,
                         noise_sigma=sample_set.noise_sigma, seed=sample_set.seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF,
                                                        _EXTRA_TAG]))
    values = sample_set.values + rng.normal(0.0, sigma, size=len(sample_set))
    return SampleSet(positions=sample_set.positions.copy(), values=values,
                     interval_s=sample_set.interval_s, speed=sample_set.speed,
                     noise_sigma=sigma, seed=int(seed))


def to_sampled_map(sample_set: SampleSet, layout: BuildingLayout,
                   enc: BitmapEncoding | None = None) -> SampledMap:
    """Rasterize samples onto the grid; same-cell readings merge by dB mean."""
    enc = enc or BitmapEncoding()
    sums = np.zeros((layout.height, layout.width))
    counts = np.zeros((layout.height, layout.width), dtype=np.int64)
    for (x, y), v in zip(sample_set.positions, sample_set.values):
        i, j = int(math.floor(y)), int(math.floor(x))
        sums[i, j] += v
        counts[i, j] += 1
    mask = (counts > 0).astype(np.uint8)
    values = np.zeros((layout.height, layout.width), dtype=np.uint8)
    hit = counts > 0
    values[hit] = enc.encode(sums[hit] / counts[hit])
    return SampledMap(values=values, mask=mask)

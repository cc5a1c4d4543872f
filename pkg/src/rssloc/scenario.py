"""World model: rasterized building layouts and continuous transmitter placements.

Coordinate convention used throughout the package: x runs along grid columns,
y along grid rows, origin at the top-left corner, 1 pixel = 1 meter. A
continuous point (x, y) falls into cell (row=floor(y), col=floor(x)); cell
(i, j) has its center at (j + 0.5, i + 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_SOURCES = 16
DEFAULT_TX_POWER_DBM = 24.0
DEFAULT_ANTENNA_GAIN_DBI = 10.0


class LayoutError(RuntimeError):
    """Layout generation could not satisfy its constraints."""


class PlacementError(RuntimeError):
    """Rejection sampling ran out of attempts while placing sources."""


@dataclass
class BuildingLayout:
    """Binary occupancy grid; 1 = building interior, 0 = free space."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise ValueError("layout grid must be 2D")
        if cells.shape[0] < 8 or cells.shape[1] < 8:
            raise ValueError("layout must be at least 8x8 cells")
        if not np.isin(cells, (0, 1)).all():
            raise ValueError("occupancy values must be exactly 0 or 1")
        self.cells = cells.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def is_free(self, x: float, y: float) -> bool:
        i, j = int(math.floor(y)), int(math.floor(x))
        if not (0 <= i < self.height and 0 <= j < self.width):
            return False
        return self.cells[i, j] == 0

    def free_fraction(self) -> float:
        return 1.0 - float(self.cells.mean())


@dataclass
class Source:
    """A transmitter at a continuous in-map position."""

    x: float
    y: float
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM
    gain_dbi: float = DEFAULT_ANTENNA_GAIN_DBI

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class Scenario:
    """A layout plus the ground-truth sources placed on it."""

    layout: BuildingLayout
    sources: list[Source]
    id: str
    rng_seed: int

    def __post_init__(self):
        if not 1 <= len(self.sources) <= MAX_SOURCES:
            raise ValueError(f"source count must be in [1, {MAX_SOURCES}]")
        for s in self.sources:
            if not (0 <= s.x < self.layout.width and 0 <= s.y < self.layout.height):
                raise ValueError(f"source ({s.x}, {s.y}) outside the map")
            if not self.layout.is_free(s.x, s.y):
                raise ValueError(f"source ({s.x}, {s.y}) lies inside a building")

    @property
    def m(self) -> int:
        return len(self.sources)

    def true_points(self) -> list[tuple[float, float]]:
        return [s.position for s in self.sources]


def generate_layout(width: int, height: int, n_buildings: int, seed,
                    min_side: int = 8, max_side: int = 48,
                    min_free_fraction: float = 0.3,
                    max_retries: int = 1000) -> BuildingLayout:
    """Drop axis-aligned rectangles (union; overlaps allowed) onto a free grid.

    A 1-cell free margin is kept at the border so routes always exist; the
    whole placement is retried until at least ``min_free_fraction`` of the
    grid stays free.
    """
    if n_buildings < 0:
        raise ValueError("n_buildings must be >= 0")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        cells = np.zeros((height, width), dtype=np.uint8)
        for _ in range(n_buildings):
            bw = min(int(rng.integers(min_side, max_side + 1)), width - 2)
            bh = min(int(rng.integers(min_side, max_side + 1)), height - 2)
            j0 = int(rng.integers(1, width - 1 - bw + 1))
            i0 = int(rng.integers(1, height - 1 - bh + 1))
            cells[i0:i0 + bh, j0:j0 + bw] = 1
        layout = BuildingLayout(cells)
        if layout.free_fraction() >= min_free_fraction:
            return layout
    raise LayoutError(
        f"could not reach {min_free_fraction:.0%} free cells with "
        f"{n_buildings} buildings after {max_retries} retries")


def disk_pixels(x: float, y: float, r: float, layout: BuildingLayout,
                free_only: bool = True) -> set[tuple[int, int]]:
    """In-bounds cells whose center lies within r meters of (x, y)."""
    out = set()
    i0 = max(0, int(math.floor(y - r - 0.5)))
    i1 = min(layout.height - 1, int(math.ceil(y + r)))
    j0 = max(0, int(math.floor(x - r - 0.5)))
    j1 = min(layout.width - 1, int(math.ceil(x + r)))
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            if (j + 0.5 - x) ** 2 + (i + 0.5 - y) ** 2 <= r * r:
                if not free_only or layout.cells[i, j] == 0:
                    out.add((i, j))
    return out


def _connected8(cells: set[tuple[int, int]]) -> bool:
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        i, j = stack.pop()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                nb = (i + di, j + dj)
                if nb in cells and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
    return len(seen) == len(cells)


def _adjacent8(a: set[tuple[int, int]], b: set[tuple[int, int]]) -> bool:
    for i, j in a:
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if (i + di, j + dj) in b:
                    return True
    return False


def _disk_ok(x, y, r, layout, others: list[set]) -> set | None:
    """Validity check for one candidate source; returns its disk or None.

    The free pixels of the candidate's radius-r disk must be non-empty and
    8-connected (so the rasterized local area is a single component), and the
    disk must not touch any previously placed source's disk.
    """
    disk = disk_pixels(x, y, r, layout, free_only=True)
    if not disk or not _connected8(disk):
        return None
    for other in others:
        if _adjacent8(disk, other):
            return None
    return disk


def place_sources(layout: BuildingLayout, m: int, min_spacing: float, seed,
                  clear_radius: float | None = None,
                  max_attempts: int = 10000) -> list[Source]:
    """Rejection-sample m sources on free cells, pairwise >= min_spacing apart.

    Coordinates are uniform within the chosen free cell. When clear_radius is
    given, each source's rasterized radius disk must additionally be a single
    8-connected free region, pairwise non-adjacent between sources, so the
    local areas stay separable.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    free = np.argwhere(layout.cells == 0)
    if len(free) == 0:
        raise PlacementError("layout has no free cells")
    rng = np.random.default_rng(seed)
    placed: list[Source] = []
    disks: list[set] = []
    attempts = 0
    while len(placed) < m:
        attempts += 1
        if attempts > max_attempts:
            raise PlacementError(
                f"placed {len(placed)}/{m} sources after {max_attempts} attempts")
        i, j = free[int(rng.integers(0, len(free)))]
        x = float(j) + float(rng.random())
        y = float(i) + float(rng.random())
        if any(math.hypot(x - s.x, y - s.y) < min_spacing for s in placed):
            continue
        if clear_radius is not None:
            disk = _disk_ok(x, y, clear_radius, layout, disks)
            if disk is None:
                continue
            disks.append(disk)
        placed.append(Source(x, y))
    return placed


def place_sources_dense(layout: BuildingLayout, m: int, seed,
                        pair_spacing: float = 3.0, min_spacing: float = 5.0,
                        r: float = 2.0, max_attempts: int = 20000) -> list[Source]:
    """Place m sources where exactly sources 0 and 1 sit pair_spacing apart.

    The close pair is constructed so that its two rasterized radius-r disks
    are fully free, merge into one 8-connected region, and stay clear of all
    other sources' disks; the remaining sources follow the in-distribution
    rules. This reproduces the overlapping-local-area failure regime.
    """
    if m < 2:
        raise ValueError("dense placement needs m >= 2")
    if pair_spacing >= 2 * r:
        raise ValueError("pair_spacing must be < 2r for the disks to overlap")
    rng = np.random.default_rng(seed)
    free = np.argwhere(layout.cells == 0)
    full_disk = sum(1 for di in range(-int(r), int(r) + 1)
                    for dj in range(-int(r), int(r) + 1)
                    if di * di + dj * dj <= r * r)
    attempts = 0
    while True:
        attempts += 1
        if attempts > max_attempts:
            raise PlacementError(f"no valid dense pair after {max_attempts} attempts")
        i, j = free[int(rng.integers(0, len(free)))]
        ax = float(j) + float(rng.random())
        ay = float(i) + float(rng.random())
        theta = float(rng.random()) * 2 * math.pi
        bx = ax + pair_spacing * math.cos(theta)
        by = ay + pair_spacing * math.sin(theta)
        if not layout.is_free(ax, ay) or not layout.is_free(bx, by):
            continue
        disk_a = disk_pixels(ax, ay, r, layout, free_only=True)
        disk_b = disk_pixels(bx, by, r, layout, free_only=True)
        # fully free unclipped disks keep the merged area comfortably above
        # the single-disk flagging threshold
        if len(disk_a) < full_disk or len(disk_b) < full_disk:
            continue
        union = disk_a | disk_b
        if not _connected8(union):
            continue
        pair = [Source(ax, ay), Source(bx, by)]
        rest: list[Source] = []
        rest_disks: list[set] = []
        ok = True
        for _ in range(m - 2):
            placed_one = False
            for _ in range(2000):
                fi, fj = free[int(rng.integers(0, len(free)))]
                x = float(fj) + float(rng.random())
                y = float(fi) + float(rng.random())
                if any(math.hypot(x - s.x, y - s.y) < min_spacing
                       for s in pair + rest):
                    continue
                disk = _disk_ok(x, y, r, layout, [union] + rest_disks)
                if disk is None:
                    continue
                rest.append(Source(x, y))
                rest_disks.append(disk)
                placed_one = True
                break
            if not placed_one:
                ok = False
                break
        if ok:
            return pair + rest


def generate_scenario(width: int, height: int, n_buildings: int, m: int, seed: int,
                      min_spacing: float = 5.0, clear_radius: float | None = 2.0,
                      scenario_id: str | None = None,
                      dense_pair_spacing: float | None = None) -> Scenario:
    """One-call scenario synthesis: layout plus sources, fully seed-determined."""
    layout_seed = np.random.SeedSequence([int(seed), 1])
    source_seed = np.random.SeedSequence([int(seed), 2])
    layout = generate_layout(width, height, n_buildings, layout_seed)
    if dense_pair_spacing is not None:
        sources = place_sources_dense(layout, m, source_seed,
                                      pair_spacing=dense_pair_spacing,
                                      min_spacing=min_spacing,
                                      r=clear_radius if clear_radius else 2.0)
    else:
        sources = place_sources(layout, m, min_spacing, source_seed,
                                clear_radius=clear_radius)
    return Scenario(layout=layout, sources=sources,
                    id=scenario_id or f"s{seed}", rng_seed=int(seed))

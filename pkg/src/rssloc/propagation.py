"""Received-power model and radio-map rasterization.

Per-source power follows a log-distance path-loss law plus a per-meter
penetration penalty accumulated along the straight ray through building
cells (an exact grid traversal, not ray tracing). Multi-source RSS is
aggregated in linear milliwatts. Maps exist in two encodings: dBm float
grids and 8-bit bitmaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import BuildingLayout, Scenario, Source

MAP_KINDS = ("global", "local", "binarized", "single_source")

# stream tag for shadowing draws, mixed with (scenario seed, source index)
_SHADOW_TAG = 0x5AD0


@dataclass
class PropagationParams:
    """Channel constants; sigma_shadow = 0 gives a fully deterministic field."""

    l0: float = 38.5              # dB at the reference distance
    d0: float = 1.0               # m
    eta: float = 3.0              # path-loss exponent
    sigma_shadow: float = 0.0     # dB, combined shadowing std
    beta_penetration: float = 2.0  # dB per meter of building interior
    penetration_cap: float = 60.0  # dB

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.sigma_shadow < 0 or self.beta_penetration < 0:
            raise ValueError("sigma_shadow and beta_penetration must be >= 0")


@dataclass
class BitmapEncoding:
    """Affine dBm -> [0, 255] quantization, round half up."""

    p_min: float = -110.0
    p_max: float = 0.0

    def __post_init__(self):
        if not self.p_min < self.p_max:
            raise ValueError("p_min must be < p_max")

    def encode(self, dbm) -> np.ndarray:
        t = (np.asarray(dbm, dtype=np.float64) - self.p_min) / (self.p_max - self.p_min)
        t = np.clip(t, 0.0, 1.0)
        return np.floor(255.0 * t + 0.5).astype(np.uint8)


@dataclass
class RadioMap:
    """A 2D scalar field over the grid, in dBm ('dbm') or 8-bit ('bitmap') form."""

    values: np.ndarray
    kind: str
    unit: str

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError("map values must be 2D")
        if self.kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {self.kind!r}")
        if self.unit == "bitmap":
            if not np.issubdtype(v.dtype, np.integer):
                raise ValueError("bitmap values must be integers")
            if v.min() < 0 or v.max() > 255:
                raise ValueError("bitmap values must lie in [0, 255]")
            if self.kind == "binarized" and not np.isin(v, (0, 255)).all():
                raise ValueError("binarized maps may only contain 0 and 255")
        elif self.unit != "dbm":
            raise ValueError(f"unknown map unit {self.unit!r}")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def path_loss(d, params: PropagationParams):
    """Log-distance loss in dB; d is clamped to d0 below the reference distance."""
    d = np.maximum(np.asarray(d, dtype=np.float64), params.d0)
    out = params.l0 + 10.0 * params.eta * np.log10(d / params.d0)
    return float(out) if out.ndim == 0 else out


def segment_building_lengths(start, ends, cells: np.ndarray) -> np.ndarray:
    """Exact meters of building interior crossed by each segment start->ends[k].

    Each segment is split at its column crossings (one slab per column, in
    traversal order by construction, so no sorting is needed); the occupied
    row span inside a slab comes from per-column cumulative occupancy, which
    is exact because occupancy is constant on unit cells. Vectorized over all
    segments at once.
    """
    a = np.asarray(start, dtype=np.float64).reshape(2)
    b = np.atleast_2d(np.asarray(ends, dtype=np.float64))
    n = b.shape[0]
    h, w = cells.shape
    dx = b[:, 0] - a[0]
    dy = b[:, 1] - a[1]
    seg_len = np.hypot(dx, dy)

    # column-boundary crossings per segment, ascending in the ray parameter
    lo = np.minimum(a[0], b[:, 0])
    hi = np.maximum(a[0], b[:, 0])
    m0 = np.ceil(lo)
    counts = np.where(dx == 0.0, 0,
                      np.maximum((np.floor(hi) - m0 + 1).astype(np.int64), 0))
    total = int(counts.sum())
    ray = np.repeat(np.arange(n), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    down = np.repeat(dx < 0, counts)
    lines = np.where(down,
                     np.repeat(np.floor(hi), counts) - offsets,
                     np.repeat(m0, counts) + offsets)
    tc = np.clip((lines - a[0]) / np.repeat(np.where(dx == 0.0, 1.0, dx), counts),
                 0.0, 1.0)

    # slab boundaries: 0, crossings..., 1 per segment, already in order
    bound_counts = counts + 2
    starts = np.cumsum(bound_counts) - bound_counts
    ts = np.empty(total + 2 * n)
    ts[starts] = 0.0
    ts[starts + bound_counts - 1] = 1.0
    inner = np.ones(total + 2 * n, dtype=bool)
    inner[starts] = False
    inner[starts + bound_counts - 1] = False
    ts[inner] = tc

    pair = np.ones(total + 2 * n, dtype=bool)
    pair[starts + bound_counts - 1] = False   # no slab begins at the last boundary
    ta = ts[pair]
    tb = ts[np.nonzero(pair)[0] + 1]
    slab_ray = np.repeat(np.arange(n), bound_counts - 1)
    dt = tb - ta

    # column of each slab from its midpoint; rows via cumulative occupancy
    tm = 0.5 * (ta + tb)
    cj = np.clip(np.floor(a[0] + tm * dx[slab_ray]).astype(np.int64), 0, w - 1)
    ya = a[1] + ta * dy[slab_ray]
    yb = a[1] + tb * dy[slab_ray]
    ia = np.clip(np.floor(ya).astype(np.int64), 0, h - 1)
    ib = np.clip(np.floor(yb).astype(np.int64), 0, h - 1)
    csum = np.zeros((h + 1, w))
    np.cumsum(cells, axis=0, out=csum[1:])
    occ_a = cells[ia, cj].astype(np.float64)
    occ_b = cells[ib, cj].astype(np.float64)
    fa = csum[ia, cj] + occ_a * (ya - ia)
    fb = csum[ib, cj] + occ_b * (yb - ib)
    span = yb - ya
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(span != 0.0, (fb - fa) / span, occ_a)
    lengths = np.where(dt > 0.0, dt * seg_len[slab_ray] * frac, 0.0)
    return np.bincount(slab_ray, weights=lengths, minlength=n)


def penetration_loss(a, b, layout: BuildingLayout, params: PropagationParams) -> float:
    """Capped per-meter penalty for the building interior crossed by a->b."""
    length = float(segment_building_lengths(a, [b], layout.cells)[0])
    return min(params.penetration_cap, params.beta_penetration * length)


def received_power(source: Source, point, layout: BuildingLayout,
                   params: PropagationParams, rng=None) -> float:
    """Per-source RSS in dBm at a point; deterministic when sigma_shadow = 0."""
    d = math.hypot(point[0] - source.x, point[1] - source.y)
    val = (source.tx_power_dbm + source.gain_dbi
           - path_loss(d, params)
           - penetration_loss(source.position, point, layout, params))
    if params.sigma_shadow > 0:
        if rng is None:
            raise ValueError("sigma_shadow > 0 requires an rng")
        val -= float(rng.normal(0.0, params.sigma_shadow))
    return float(val)


def aggregate_rss(powers, mode: str = "linear") -> float:
    """Total RSS of simultaneous per-source powers (dBm).

    'linear' sums in milliwatts, which is the physical aggregation and the
    package default; 'dbm-sum' adds the dBm values directly and exists only
    for comparison.
    """
    p = np.asarray(powers, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("cannot aggregate an empty power list")
    if mode == "linear":
        # factored around the max so the dominance bounds
        # max <= total <= max + 10 log10(n) hold exactly in floating point
        pmax = float(p.max())
        return pmax + float(10.0 * np.log10(np.sum(10.0 ** ((p - pmax) / 10.0))))
    if mode == "dbm-sum":
        return float(p.sum())
    raise ValueError(f"unknown aggregation mode {mode!r}")


def _shadow_grid(scenario: Scenario, source_index: int, sigma: float,
                 shape: tuple[int, int]) -> np.ndarray:
    # one stream per (scenario seed, source index); cells consumed row-major
    ss = np.random.SeedSequence([scenario.rng_seed & 0xFFFFFFFFFFFFFFFF,
                                 _SHADOW_TAG, source_index])
    return np.random.default_rng(ss).normal(0.0, sigma, size=shape)


def _per_source_linear(scenario: Scenario, params: PropagationParams,
                       rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Linear-milliwatt field of each source at the given cell centers.

    Returns an (M, len(rows)) array; the caller picks the cells (all free
    cells for global maps, a disk union for local ones).
    """
    cx = cols.astype(np.float64) + 0.5
    cy = rows.astype(np.float64) + 0.5
    ends = np.column_stack([cx, cy])
    out = np.empty((len(scenario.sources), len(rows)))
    for k, src in enumerate(scenario.sources):
        d = np.hypot(cx - src.x, cy - src.y)
        pen = np.minimum(params.penetration_cap,
                         params.beta_penetration
                         * segment_building_lengths(src.position, ends,
                                                    scenario.layout.cells))
        rx = src.tx_power_dbm + src.gain_dbi - path_loss(d, params) - pen
        if params.sigma_shadow > 0:
            shape = (scenario.layout.height, scenario.layout.width)
            rx = rx - _shadow_grid(scenario, k, params.sigma_shadow, shape)[rows, cols]
        out[k] = 10.0 ** (rx / 10.0)
    return out


def rasterize_global(scenario: Scenario, params: PropagationParams,
                     enc: BitmapEncoding | None = None) -> RadioMap:
    """Aggregate dBm field at every free cell center; building interiors get p_min."""
    enc = enc or BitmapEncoding()
    layout = scenario.layout
    vals = np.full((layout.height, layout.width), enc.p_min, dtype=np.float64)
    rows, cols = np.nonzero(layout.cells == 0)
    linear = _per_source_linear(scenario, params, rows, cols)
    vals[rows, cols] = 10.0 * np.log10(linear.sum(axis=0))
    return RadioMap(vals, "global", "dbm")


def local_disk_mask(scenario: Scenario, r: float) -> np.ndarray:
    """Boolean mask of cells whose center is within r of at least one source."""
    layout = scenario.layout
    mask = np.zeros((layout.height, layout.width), dtype=bool)
    for src in scenario.sources:
        i0 = max(0, int(math.floor(src.y - r - 0.5)))
        i1 = min(layout.height - 1, int(math.ceil(src.y + r)))
        j0 = max(0, int(math.floor(src.x - r - 0.5)))
        j1 = min(layout.width - 1, int(math.ceil(src.x + r)))
        if i1 < i0 or j1 < j0:
            continue
        jj, ii = np.meshgrid(np.arange(j0, j1 + 1), np.arange(i0, i1 + 1))
        within = ((jj + 0.5 - src.x) ** 2 + (ii + 0.5 - src.y) ** 2) <= r * r
        mask[i0:i1 + 1, j0:j1 + 1] |= within
    return mask


def ground_truth_local(scenario: Scenario, params: PropagationParams, r: float,
                       enc: BitmapEncoding | None = None,
                       global_map: RadioMap | None = None) -> RadioMap:
    """Bitmap of the global field zeroed outside the union of radius-r source disks.

    When no precomputed global map is supplied, the field is evaluated only at
    the in-disk cells, which is equivalent and much cheaper.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    enc = enc or BitmapEncoding()
    layout = scenario.layout
    mask = local_disk_mask(scenario, r)
    bitmap = np.zeros((layout.height, layout.width), dtype=np.uint8)
    if global_map is not None:
        if global_map.unit != "dbm":
            raise ValueError("global map must be in dBm")
        bitmap[mask] = enc.encode(global_map.values[mask])
        return RadioMap(bitmap, "local", "bitmap")
    rows, cols = np.nonzero(mask & (layout.cells == 0))
    if len(rows):
        linear = _per_source_linear(scenario, params, rows, cols)
        bitmap[rows, cols] = enc.encode(10.0 * np.log10(linear.sum(axis=0)))
    return RadioMap(bitmap, "local", "bitmap")


def to_bitmap(radio_map: RadioMap, enc: BitmapEncoding | None = None) -> RadioMap:
    """Quantize a dBm map to its 8-bit encoding, preserving the map kind."""
    enc = enc or BitmapEncoding()
    if radio_map.unit != "dbm":
        raise ValueError("to_bitmap expects a dBm map")
    return RadioMap(enc.encode(radio_map.values), radio_map.kind, "bitmap")

"""Multi-source separation on local radio maps.

Binarize the 8-bit map at a fixed threshold, label the foreground's
connected components (two-pass union-find), cut one single-source map per
component, and flag components whose area says two local areas merged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .propagation import RadioMap

DEFAULT_GAMMA = 127
DEFAULT_CONNECTIVITY = 8
DEFAULT_AREA_FACTOR = 1.6


@dataclass
class Component:
    id: int
    area: int
    bbox: tuple[int, int, int, int]  # top, left, bottom, right (inclusive)
    centroid: tuple[float, float]    # intensity-weighted, (x, y) meters


@dataclass
class Labeling:
    """Label grid (0 = background) plus per-component stats, ordered by bbox."""

    labels: np.ndarray
    components: list[Component]


@dataclass
class SeparationResult:
    single_source_maps: list[RadioMap]
    labeling: Labeling
    merged_flags: list[bool] = field(default_factory=list)


def _grid(map_or_values) -> np.ndarray:
    if isinstance(map_or_values, RadioMap):
        return map_or_values.values
    return np.asarray(map_or_values)


def binarize(bitmap, gamma: int = DEFAULT_GAMMA) -> RadioMap:
    """255 where the pixel exceeds gamma, 0 otherwise (gamma itself maps to 0)."""
    vals = _grid(bitmap)
    out = np.where(vals > gamma, 255, 0).astype(np.uint8)
    return RadioMap(out, "binarized", "bitmap")


def connected_components(binary, connectivity: int = DEFAULT_CONNECTIVITY) -> Labeling:
    """Label foreground regions; any nonzero pixel counts as foreground.

    Components are renumbered 1..n ordered by (top, left) of their bounding
    boxes so downstream output is stable regardless of scan order.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    vals = _grid(binary)
    fg = vals != 0
    h, w = fg.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent: list[int] = [0]

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    if connectivity == 8:
        back = ((-1, -1), (-1, 0), (-1, 1), (0, -1))
    else:
        back = ((-1, 0), (0, -1))

    pixels = np.argwhere(fg).tolist()
    for i, j in pixels:
        neigh = []
        for di, dj in back:
            ni, nj = i + di, j + dj
            if 0 <= ni < h and 0 <= nj < w and labels[ni, nj]:
                neigh.append(find(labels[ni, nj]))
        if not neigh:
            parent.append(len(parent))
            labels[i, j] = len(parent) - 1
        else:
            root = min(neigh)
            labels[i, j] = root
            for other in neigh:
                parent[other] = root

    # second pass: resolve every provisional label to its root, vectorized
    resolved = np.array([find(k) for k in range(len(parent))], dtype=np.int32)
    labels = resolved[labels]

    ii, jj = np.nonzero(labels)
    if len(ii) == 0:
        return Labeling(labels=labels, components=[])
    lab = labels[ii, jj]
    nroot = len(parent)
    area = np.bincount(lab, minlength=nroot)
    weights = vals[ii, jj].astype(np.float64)
    sw = np.bincount(lab, weights=weights, minlength=nroot)
    swx = np.bincount(lab, weights=weights * (jj + 0.5), minlength=nroot)
    swy = np.bincount(lab, weights=weights * (ii + 0.5), minlength=nroot)
    top = np.full(nroot, h, dtype=np.int64)
    left = np.full(nroot, w, dtype=np.int64)
    bottom = np.full(nroot, -1, dtype=np.int64)
    right = np.full(nroot, -1, dtype=np.int64)
    np.minimum.at(top, lab, ii)
    np.minimum.at(left, lab, jj)
    np.maximum.at(bottom, lab, ii)
    np.maximum.at(right, lab, jj)

    roots = np.nonzero(area)[0]
    order = sorted(roots, key=lambda k: (top[k], left[k]))
    remap = np.zeros(nroot, dtype=np.int32)
    components = []
    for new_id, root in enumerate(order, 1):
        remap[root] = new_id
        components.append(Component(
            id=new_id, area=int(area[root]),
            bbox=(int(top[root]), int(left[root]), int(bottom[root]), int(right[root])),
            centroid=(float(swx[root] / sw[root]), float(swy[root] / sw[root]))))
    return Labeling(labels=remap[labels], components=components)


def extract_single_source_maps(i_ms, labeling: Labeling) -> SeparationResult:
    """Mask the multi-source map down to one map per connected component."""
    vals = _grid(i_ms)
    maps = []
    for comp in labeling.components:
        single = np.where(labeling.labels == comp.id, vals, 0).astype(vals.dtype)
        maps.append(RadioMap(single, "single_source", "bitmap"))
    return SeparationResult(single_source_maps=maps, labeling=labeling,
                            merged_flags=[False] * len(maps))


def expected_disk_area(r: float) -> int:
    """Pixel count of a radius-r disk centered on a pixel center."""
    n = int(math.floor(r))
    return sum(1 for di in range(-n, n + 1) for dj in range(-n, n + 1)
               if di * di + dj * dj <= r * r)


def flag_merged(labeling: Labeling, r: float,
                area_factor: float = DEFAULT_AREA_FACTOR) -> list[bool]:
    """Flag components whose area exceeds area_factor times a single local area."""
    if r <= 0:
        raise ValueError("r must be positive")
    threshold = area_factor * expected_disk_area(r)
    return [comp.area > threshold for comp in labeling.components]


def separate_sources(i_ms, gamma: int = DEFAULT_GAMMA,
                     connectivity: int = DEFAULT_CONNECTIVITY,
                     r: float = 2.0,
                     area_factor: float = DEFAULT_AREA_FACTOR) -> SeparationResult:
    """Full separation pass: binarize, label, extract, flag merged components."""
    labeling = connected_components(binarize(i_ms, gamma), connectivity)
    result = extract_single_source_maps(i_ms, labeling)
    result.merged_flags = flag_merged(labeling, r, area_factor)
    return result

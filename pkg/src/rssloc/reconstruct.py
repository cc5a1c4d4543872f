"""Dense radio-map reconstruction from sparse samples.

The Reconstructor interface is the seam where a learned samples-to-map model
would plug in; the implementations here are non-learned references: inverse
distance weighting and ordinary kriging with a fixed exponential variogram.
proxy_local_map turns any dense reconstruction into a local-area bitmap by
iterative peak thresholding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .propagation import (BitmapEncoding, PropagationParams, RadioMap,
                          ground_truth_local)
from .sampling import SampleSet
from .scenario import BuildingLayout, Scenario

DEFAULT_BUILDING_FILL_DBM = -110.0
_CHUNK = 4096


class ReconstructionError(RuntimeError):
    """The interpolation system could not be solved."""


@dataclass
class VariogramParams:
    """Exponential variogram gamma(d) = nugget + sill * (1 - exp(-3d/range))."""

    nugget: float = 0.0
    sill: float = 25.0
    range_m: float = 30.0
    model: str = "exponential"

    def __post_init__(self):
        if self.model != "exponential":
            raise ValueError("only the exponential model is supported")
        if self.nugget < 0 or self.sill <= 0 or self.range_m <= 0:
            raise ValueError("need nugget >= 0, sill > 0, range_m > 0")

    def __call__(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        g = self.nugget + self.sill * (1.0 - np.exp(-3.0 * d / self.range_m))
        return np.where(d <= 0.0, 0.0, g)


def _cell_centers(layout: BuildingLayout) -> np.ndarray:
    jj, ii = np.meshgrid(np.arange(layout.width), np.arange(layout.height))
    return np.column_stack([(jj + 0.5).ravel(), (ii + 0.5).ravel()])


def idw_predict(positions: np.ndarray, values: np.ndarray, query: np.ndarray,
                power: float = 2.0) -> np.ndarray:
    """Inverse-distance-weighted interpolation; exact at the sample positions."""
    query = np.atleast_2d(query)
    out = np.empty(len(query))
    for lo in range(0, len(query), _CHUNK):
        q = query[lo:lo + _CHUNK]
        d = np.hypot(q[:, None, 0] - positions[None, :, 0],
                     q[:, None, 1] - positions[None, :, 1])
        exact = d < 1e-12
        with np.errstate(divide="ignore"):
            wgt = d ** (-power)
        wgt[exact] = 0.0
        block = (wgt * values[None, :]).sum(axis=1) / wgt.sum(axis=1)
        hit_q, hit_s = np.nonzero(exact)
        block[hit_q] = values[hit_s]
        out[lo:lo + _CHUNK] = block
    return out


def _kriging_matrix(positions: np.ndarray, variogram: VariogramParams) -> np.ndarray:
    j = len(positions)
    d = np.hypot(positions[:, None, 0] - positions[None, :, 0],
                 positions[:, None, 1] - positions[None, :, 1])
    k = np.zeros((j + 1, j + 1))
    k[:j, :j] = variogram(d)
    k[:j, j] = 1.0
    k[j, :j] = 1.0
    return k


def _check_samples(positions: np.ndarray):
    if len(positions) < 2:
        raise ReconstructionError("ordinary kriging needs at least two samples")
    seen = set()
    for x, y in positions:
        key = (float(x), float(y))
        if key in seen:
            raise ReconstructionError(
                "duplicate sample positions make the kriging system singular; "
                "merge them upstream")
        seen.add(key)


def kriging_weights(positions: np.ndarray, query_point,
                    variogram: VariogramParams | None = None) -> tuple[np.ndarray, float]:
    """Ordinary-kriging weights and Lagrange multiplier for one query point."""
    variogram = variogram or VariogramParams()
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    _check_samples(positions)
    k = _kriging_matrix(positions, variogram)
    q = np.asarray(query_point, dtype=np.float64)
    rhs = np.empty(len(positions) + 1)
    rhs[:-1] = variogram(np.hypot(positions[:, 0] - q[0], positions[:, 1] - q[1]))
    rhs[-1] = 1.0
    try:
        sol = np.linalg.solve(k, rhs)
    except np.linalg.LinAlgError as exc:
        raise ReconstructionError(f"kriging system is singular: {exc}") from exc
    return sol[:-1], float(sol[-1])


def kriging_predict(positions: np.ndarray, values: np.ndarray, query: np.ndarray,
                    variogram: VariogramParams | None = None) -> np.ndarray:
    """Ordinary-kriging prediction in dual form: one solve, O(J) per query."""
    variogram = variogram or VariogramParams()
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    values = np.asarray(values, dtype=np.float64).ravel()
    _check_samples(positions)
    k = _kriging_matrix(positions, variogram)
    rhs = np.concatenate([values, [0.0]])
    try:
        alpha = np.linalg.solve(k, rhs)
    except np.linalg.LinAlgError as exc:
        raise ReconstructionError(f"kriging system is singular: {exc}") from exc
    query = np.atleast_2d(query)
    out = np.empty(len(query))
    for lo in range(0, len(query), _CHUNK):
        q = query[lo:lo + _CHUNK]
        d = np.hypot(q[:, None, 0] - positions[None, :, 0],
                     q[:, None, 1] - positions[None, :, 1])
        out[lo:lo + _CHUNK] = variogram(d) @ alpha[:-1] + alpha[-1]
    return out


def _as_dense_map(field_values: np.ndarray, layout: BuildingLayout,
                  building_fill: float) -> RadioMap:
    vals = field_values.reshape(layout.height, layout.width).copy()
    vals[layout.cells != 0] = building_fill
    return RadioMap(vals, "global", "dbm")


def idw_reconstruct(sample_set: SampleSet, layout: BuildingLayout,
                    power: float = 2.0,
                    building_fill: float = DEFAULT_BUILDING_FILL_DBM) -> RadioMap:
    """Dense dBm map by inverse distance weighting of the samples."""
    field = idw_predict(sample_set.positions, sample_set.values,
                        _cell_centers(layout), power)
    return _as_dense_map(field, layout, building_fill)


def kriging_reconstruct(sample_set: SampleSet, layout: BuildingLayout,
                        variogram: VariogramParams | None = None,
                        building_fill: float = DEFAULT_BUILDING_FILL_DBM) -> RadioMap:
    """Dense dBm map by ordinary kriging; raises on a singular system."""
    field = kriging_predict(sample_set.positions, sample_set.values,
                            _cell_centers(layout), variogram)
    return _as_dense_map(field, layout, building_fill)


def oracle_reconstruct(scenario: Scenario, params: PropagationParams, r: float,
                       enc: BitmapEncoding | None = None) -> RadioMap:
    """Ground-truth local map, for validating downstream stages in isolation."""
    return ground_truth_local(scenario, params, r, enc)


def proxy_local_map(dense: RadioMap, delta_db: float = 9.0,
                    enc: BitmapEncoding | None = None, r: float = 2.0,
                    max_peaks: int = 64) -> RadioMap:
    """Carve a local-area bitmap out of a dense reconstruction.

    Iteratively take the strongest unsuppressed pixel as a peak candidate,
    keep the pixels within 3r of it that lie within delta_db of its value,
    then suppress its 3r disk; stop once remaining peaks fall more than
    delta_db below the map maximum. Kept pixels are bitmap-encoded, the rest
    zeroed. A stand-in for a learned local-map model, not a faithful one.
    """
    if dense.unit != "dbm":
        raise ValueError("proxy_local_map expects a dBm map")
    enc = enc or BitmapEncoding()
    vals = dense.values.astype(np.float64)
    if vals.max() - vals.min() < 1e-12:
        raise ValueError("degenerate (constant) dense map")
    h, w = vals.shape
    work = vals.copy()
    keep = np.zeros((h, w), dtype=bool)
    floor = vals.max() - delta_db
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    for _ in range(max_peaks):
        flat = int(np.argmax(work))
        pi, pj = flat // w, flat % w
        peak = work[pi, pj]
        if not np.isfinite(peak) or peak < floor:
            break
        disk = (jj - pj) ** 2 + (ii - pi) ** 2 <= (3.0 * r) ** 2
        keep |= disk & (vals >= peak - delta_db)
        work[disk] = -np.inf
    bitmap = np.where(keep, enc.encode(vals), 0).astype(np.uint8)
    return RadioMap(bitmap, "local", "bitmap")


class Reconstructor:
    """Samples-in, dense-dBm-map-out interface; implementations register below."""

    name = "abstract"

    def reconstruct(self, sample_set: SampleSet, layout: BuildingLayout) -> RadioMap:
        raise NotImplementedError


class IdwReconstructor(Reconstructor):
    name = "idw"

    def __init__(self, power: float = 2.0):
        self.power = power

    def reconstruct(self, sample_set, layout):
        return idw_reconstruct(sample_set, layout, self.power)


class KrigingReconstructor(Reconstructor):
    name = "kriging"

    def __init__(self, variogram: VariogramParams | None = None):
        self.variogram = variogram or VariogramParams()

    def reconstruct(self, sample_set, layout):
        return kriging_reconstruct(sample_set, layout, self.variogram)


RECONSTRUCTORS = {
    "idw": IdwReconstructor,
    "kriging": KrigingReconstructor,
}

"""Static PPM (P6) renders: grayscale field, buildings in blue, ground truth
as green crosses, predictions as red crosses. Byte-deterministic output.
"""

from __future__ import annotations

import math

import numpy as np

BUILDING_COLOR = (40, 60, 220)
TRUTH_COLOR = (0, 230, 0)
PRED_COLOR = (255, 40, 40)
CROSS_ARM = 3


def _draw_cross(rgb: np.ndarray, x: float, y: float, color):
    h, w = rgb.shape[:2]
    ci, cj = int(math.floor(y)), int(math.floor(x))
    for d in range(-CROSS_ARM, CROSS_ARM + 1):
        if 0 <= ci + d < h and 0 <= cj < w:
            rgb[ci + d, cj] = color
        if 0 <= ci < h and 0 <= cj + d < w:
            rgb[ci, cj + d] = color


def render_map(bitmap: np.ndarray, layout_cells: np.ndarray,
               truths=(), preds=()) -> np.ndarray:
    """Compose the overlay image as an (H, W, 3) uint8 array."""
    bitmap = np.asarray(bitmap)
    layout_cells = np.asarray(layout_cells)
    if bitmap.shape != layout_cells.shape:
        raise ValueError(f"map {bitmap.shape} and layout {layout_cells.shape} "
                         "dimensions disagree")
    rgb = np.repeat(bitmap.astype(np.uint8)[:, :, None], 3, axis=2)
    rgb[layout_cells != 0] = BUILDING_COLOR
    for x, y in truths:
        _draw_cross(rgb, x, y, TRUTH_COLOR)
    for x, y in preds:
        _draw_cross(rgb, x, y, PRED_COLOR)
    return rgb


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("PPM expects an (H, W, 3) array")
    h, w = rgb.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes()

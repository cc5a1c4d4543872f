"""Dataset generation and every on-disk format the toolkit speaks.

Formats: binary PGM (P5) for bitmaps and label grids, a small float32 grid
container for dBm fields (magic LRMF), CSV for samples and predictions, JSON
for scenarios and the dataset index. Generation is a pure function of
(config, master seed) and regenerates byte-identically.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .propagation import BitmapEncoding, PropagationParams, RadioMap, \
    ground_truth_local, rasterize_global
from .sampling import SampleSet, build_routes, sample_along
from .scenario import BuildingLayout, Scenario, Source, generate_layout, \
    place_sources, place_sources_dense
from .separation import Labeling

AUGMENTATIONS = ("identity", "flip_h", "flip_v", "rot90", "rot180", "rot270")

_WHITESPACE = b" \t\n\r\x0b\x0c"


class PgmError(ValueError):
    """Malformed PGM data; messages carry the offending byte offset."""


class LrmfError(ValueError):
    """Malformed LRMF grid file."""


# ---------------------------------------------------------------- PGM (P5)

def encode_pgm(grid: np.ndarray) -> bytes:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("PGM grids must be 2D")
    if grid.dtype == np.uint8:
        maxval, payload = 255, grid.tobytes()
    elif grid.dtype == np.uint16:
        maxval, payload = 65535, grid.astype(">u2").tobytes()
    else:
        raise ValueError("PGM grids must be uint8 or uint16")
    header = f"P5\n{grid.shape[1]} {grid.shape[0]}\n{maxval}\n".encode()
    return header + payload


def _pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        c = data[pos:pos + 1]
        if c in (b" ", b"\t", b"\n", b"\r", b"\x0b", b"\x0c"):
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PgmError(f"unterminated comment starting at byte {pos}")
            pos = nl + 1
        else:
            break
    if pos >= len(data):
        raise PgmError(f"unexpected end of header at byte {pos}")
    start = pos
    while pos < len(data) and data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r",
                                                        b"\x0b", b"\x0c"):
        pos += 1
    return data[start:pos], pos


def decode_pgm(data: bytes) -> np.ndarray:
    magic, pos = _pgm_token(data, 0)
    if magic != b"P5":
        raise PgmError(f"expected P5 magic at byte 0, found {magic!r}")
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _pgm_token(data, pos)
        if not token.isdigit():
            raise PgmError(f"invalid {name} token {token!r} at byte {pos - len(token)}")
        fields.append(int(token))
    width, height, maxval = fields
    if maxval not in (255, 65535):
        raise PgmError(f"unsupported maxval {maxval} at byte {pos - len(str(maxval))}")
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise PgmError(f"expected single whitespace before raster at byte {pos}")
    raster = data[pos + 1:]
    bpp = 1 if maxval == 255 else 2
    expected = width * height * bpp
    if len(raster) != expected:
        raise PgmError(
            f"raster at byte {pos + 1}: expected {expected} bytes, found {len(raster)}")
    if bpp == 1:
        return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()
    return np.frombuffer(raster, dtype=">u2").astype(np.uint16).reshape(height, width)


def write_pgm(path, grid: np.ndarray):
    Path(path).write_bytes(encode_pgm(grid))


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


# ---------------------------------------------------------- LRMF float grid

def encode_lrmf(grid: np.ndarray) -> bytes:
    grid = np.asarray(grid, dtype=np.float32)
    if grid.ndim != 2:
        raise ValueError("LRMF grids must be 2D")
    h, w = grid.shape
    return b"LRMF" + struct.pack("<II", w, h) + grid.astype("<f4").tobytes()


def decode_lrmf(data: bytes) -> np.ndarray:
    if data[:4] != b"LRMF":
        raise LrmfError(f"expected LRMF magic at byte 0, found {data[:4]!r}")
    if len(data) < 12:
        raise LrmfError(f"truncated header: {len(data)} bytes, need 12")
    w, h = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * w * h
    if len(data) != expected:
        raise LrmfError(f"raster at byte 12: expected {expected - 12} bytes, "
                        f"found {len(data) - 12}")
    return np.frombuffer(data[12:], dtype="<f4").astype(np.float32).reshape(h, w)


def write_lrmf(path, grid: np.ndarray):
    Path(path).write_bytes(encode_lrmf(grid))


def read_lrmf(path) -> np.ndarray:
    return decode_lrmf(Path(path).read_bytes())


# ----------------------------------------------------------------- CSV / JSON

def samples_to_csv(sample_set: SampleSet) -> str:
    lines = ["x_m,y_m,rss_dbm"]
    for (x, y), v in zip(sample_set.positions, sample_set.values):
        lines.append(f"{x:.6f},{y:.6f},{v:.6f}")
    return "\n".join(lines) + "\n"


def samples_from_csv(text: str, interval_s: float, speed: float = 1.0,
                     noise_sigma: float = 0.0, seed: int = 0) -> SampleSet:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "x_m,y_m,rss_dbm":
        raise ValueError("bad samples CSV header")
    rows = [ln.split(",") for ln in lines[1:]]
    positions = np.array([[float(r[0]), float(r[1])] for r in rows])
    values = np.array([float(r[2]) for r in rows])
    return SampleSet(positions=positions, values=values, interval_s=interval_s,
                     speed=speed, noise_sigma=noise_sigma, seed=seed)


def predictions_to_csv(component_ids, points, flags) -> str:
    lines = ["component_id,x_m,y_m,flagged"]
    for cid, (x, y), flag in zip(component_ids, points, flags):
        lines.append(f"{cid},{x:.6f},{y:.6f},{int(flag)}")
    return "\n".join(lines) + "\n"


def predictions_from_csv(text: str):
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "component_id,x_m,y_m,flagged":
        raise ValueError("bad predictions CSV header")
    ids, points, flags = [], [], []
    for ln in lines[1:]:
        cid, x, y, flag = ln.split(",")
        ids.append(int(cid))
        points.append((float(x), float(y)))
        flags.append(bool(int(flag)))
    return ids, points, flags


def scenario_to_dict(scenario: Scenario, layout_ref: str | None = None,
                     sampling: dict | None = None) -> dict:
    doc = {
        "id": scenario.id,
        "width": scenario.layout.width,
        "height": scenario.layout.height,
        "seed": scenario.rng_seed,
        "sources": [{"x": s.x, "y": s.y, "tx_power_dbm": s.tx_power_dbm,
                     "gain_dbi": s.gain_dbi} for s in scenario.sources],
    }
    if layout_ref is not None:
        doc["layout"] = layout_ref
    if sampling is not None:
        doc["sampling"] = sampling
    return doc


def scenario_from_dict(doc: dict, layout: BuildingLayout) -> Scenario:
    sources = [Source(s["x"], s["y"], s["tx_power_dbm"], s["gain_dbi"])
               for s in doc["sources"]]
    return Scenario(layout=layout, sources=sources, id=doc["id"],
                    rng_seed=int(doc["seed"]))


def dumps_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def labeling_to_files(labeling: Labeling) -> tuple[bytes, str]:
    """Label grid as a 16-bit PGM plus a JSON component-stats sidecar."""
    grid = labeling.labels.astype(np.uint16)
    stats = [{"id": c.id, "area": c.area,
              "bbox": list(c.bbox), "centroid": list(c.centroid)}
             for c in labeling.components]
    return encode_pgm(grid), dumps_json({"components": stats})


# -------------------------------------------------------------- augmentation

def augment_grid(grid: np.ndarray, aug: str) -> np.ndarray:
    if aug == "identity":
        return grid.copy()
    if aug == "flip_h":
        return np.fliplr(grid).copy()
    if aug == "flip_v":
        return np.flipud(grid).copy()
    if aug in ("rot90", "rot180", "rot270"):
        if grid.shape[0] != grid.shape[1]:
            raise ValueError("rotations need a square grid")
        k = {"rot90": 1, "rot180": 2, "rot270": 3}[aug]
        return np.rot90(grid, k).copy()
    raise ValueError(f"unknown augmentation {aug!r}")


def augment_points(points, aug: str, width: int, height: int):
    """Transform continuous (x, y) coordinates consistently with augment_grid."""
    out = []
    for x, y in points:
        if aug == "identity":
            out.append((x, y))
        elif aug == "flip_h":
            out.append((width - x, y))
        elif aug == "flip_v":
            out.append((x, height - y))
        elif aug == "rot90":
            out.append((y, width - x))
        elif aug == "rot180":
            out.append((width - x, height - y))
        elif aug == "rot270":
            out.append((height - y, x))
        else:
            raise ValueError(f"unknown augmentation {aug!r}")
    return out


def augment(grid: np.ndarray, points, aug: str):
    """Jointly transform a map grid and source coordinates."""
    h, w = np.asarray(grid).shape
    return augment_grid(grid, aug), augment_points(points, aug, w, h)


def augment_scenario(scenario: Scenario, aug: str) -> Scenario:
    cells, pts = augment(scenario.layout.cells,
                         [s.position for s in scenario.sources], aug)
    sources = [Source(x, y, s.tx_power_dbm, s.gain_dbi)
               for (x, y), s in zip(pts, scenario.sources)]
    return Scenario(layout=BuildingLayout(cells), sources=sources,
                    id=f"{scenario.id}_{aug}", rng_seed=scenario.rng_seed)


# ---------------------------------------------------------- dataset generation

@dataclass
class DatasetConfig:
    width: int = 200
    height: int = 200
    n_layouts: int = 2
    n_buildings: int = 6
    source_counts: tuple = (1, 3)
    placements_per_count: int = 2
    intervals: tuple = (1, 2, 4, 6, 8, 10)
    speed: float = 1.0
    noise_sigma: float = 0.0
    min_spacing: float = 5.0
    clear_radius: float | None = 2.0
    r: float = 2.0
    seed: int = 0
    dense_pair_spacing: float | None = None
    split: dict = field(default_factory=lambda: {"train": 1, "val": 0, "test": 1})

    def __post_init__(self):
        self.source_counts = tuple(int(m) for m in self.source_counts)
        self.intervals = tuple(self.intervals)
        if sum(self.split.values()) != self.n_layouts:
            raise ValueError("split layout counts must sum to n_layouts")

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height,
            "n_layouts": self.n_layouts, "n_buildings": self.n_buildings,
            "source_counts": list(self.source_counts),
            "placements_per_count": self.placements_per_count,
            "intervals": list(self.intervals), "speed": self.speed,
            "noise_sigma": self.noise_sigma, "min_spacing": self.min_spacing,
            "clear_radius": self.clear_radius, "r": self.r, "seed": self.seed,
            "dense_pair_spacing": self.dense_pair_spacing,
            "split": dict(self.split),
        }


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def _layout_splits(config: DatasetConfig) -> list[str]:
    out = []
    for name in ("train", "val", "test"):
        out.extend([name] * config.split.get(name, 0))
    return out


def generate_dataset(config: DatasetConfig, out_dir) -> dict:
    """Generate every scenario, map, and sample file, then write the tree.

    Files are produced fully in memory first so a failing scenario leaves no
    partial dataset behind; the raised error names the failing scenario.
    """
    params = PropagationParams()
    enc = BitmapEncoding()
    splits = _layout_splits(config)
    files: list[tuple[str, bytes]] = []
    entries = []
    for li in range(config.n_layouts):
        layout = generate_layout(config.width, config.height, config.n_buildings,
                                 np.random.SeedSequence([config.seed, 1, li]))
        route = build_routes(layout)
        layout_name = f"l{li:02d}"
        files.append((f"layouts/{layout_name}.pgm", encode_pgm(layout.cells)))
        for m in config.source_counts:
            for pi in range(config.placements_per_count):
                sid = f"{layout_name}m{m:02d}p{pi:02d}"
                seed = _derived_seed(config.seed, 2, li, m, pi)
                try:
                    if config.dense_pair_spacing is not None:
                        sources = place_sources_dense(
                            layout, m, seed,
                            pair_spacing=config.dense_pair_spacing,
                            min_spacing=config.min_spacing,
                            r=config.clear_radius or config.r)
                    else:
                        sources = place_sources(layout, m, config.min_spacing,
                                                seed, config.clear_radius)
                    scenario = Scenario(layout=layout, sources=sources,
                                        id=sid, rng_seed=seed)
                    global_map = rasterize_global(scenario, params, enc)
                    local_map = ground_truth_local(scenario, params, config.r,
                                                   enc, global_map=global_map)
                except Exception as exc:
                    raise RuntimeError(f"scenario {sid} failed: {exc}") from exc
                sampling_meta = {"intervals": list(config.intervals),
                                 "speed": config.speed,
                                 "noise_sigma": config.noise_sigma,
                                 "seed": seed}
                files.append((f"scenarios/{sid}.json",
                              dumps_json(scenario_to_dict(
                                  scenario, layout_ref=f"layouts/{layout_name}.pgm",
                                  sampling=sampling_meta)).encode()))
                files.append((f"maps/global/{sid}.lrmf",
                              encode_lrmf(global_map.values)))
                files.append((f"maps/local/{sid}.pgm", encode_pgm(local_map.values)))
                sample_paths = {}
                for ki, interval in enumerate(config.intervals):
                    sset = sample_along(route, global_map, interval, config.speed,
                                        config.noise_sigma,
                                        seed=_derived_seed(config.seed, 3, li, m, pi, ki))
                    rel = f"samples/{interval}/{sid}.csv"
                    files.append((rel, samples_to_csv(sset).encode()))
                    sample_paths[str(interval)] = rel
                entries.append({
                    "id": sid, "split": splits[li], "m": m,
                    "layout": f"layouts/{layout_name}.pgm",
                    "scenario": f"scenarios/{sid}.json",
                    "global_map": f"maps/global/{sid}.lrmf",
                    "local_map": f"maps/local/{sid}.pgm",
                    "samples": sample_paths,
                })
    index = {"config": config.to_dict(), "entries": entries}
    files.append(("index.json", dumps_json(index).encode()))

    out = Path(out_dir)
    for rel, payload in files:
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    return index


def read_dataset_index(dataset_dir) -> dict:
    index_path = Path(dataset_dir) / "index.json"
    if not index_path.is_file():
        raise FileNotFoundError(f"no index.json in {dataset_dir}")
    return json.loads(index_path.read_text())


def load_scenario(dataset_dir, entry: dict) -> Scenario:
    base = Path(dataset_dir)
    layout = BuildingLayout(read_pgm(base / entry["layout"]))
    doc = json.loads((base / entry["scenario"]).read_text())
    return scenario_from_dict(doc, layout)

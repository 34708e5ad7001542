"""Tiled detector panel: impact binning, receptor binding and load reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from irvd.dispersion import FlightOutcome, Impact
from irvd.errors import check

# Receptors per tile for the surveyed reflector designs; "table2" is the simulated default.
RECEPTOR_PRESETS = {"table2": 160, "dai": 565, "li": 726, "naqvi": 48}


@dataclass(frozen=True)
class PanelGeometry:
    """Panel on the wall plane; center offsets are relative to the emitter."""

    width: float = 2.0
    height: float = 1.0
    tile_cols: int = 40
    tile_rows: int = 20
    center_y: float = 0.0
    center_z: float = 0.0

    def __post_init__(self):
        check(self.width > 0, "panel.width", "must be > 0", self.width)
        check(self.height > 0, "panel.height", "must be > 0", self.height)
        check(int(self.tile_cols) == self.tile_cols and self.tile_cols >= 1, "panel.tile_cols",
              "must be an integer >= 1", self.tile_cols)
        check(int(self.tile_rows) == self.tile_rows and self.tile_rows >= 1, "panel.tile_rows",
              "must be an integer >= 1", self.tile_rows)

    @property
    def tile_size(self) -> tuple[float, float]:
        return self.width / self.tile_cols, self.height / self.tile_rows

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(y_min, y_max, z_min, z_max)."""
        return (self.center_y - self.width / 2, self.center_y + self.width / 2,
                self.center_z - self.height / 2, self.center_z + self.height / 2)


@dataclass(frozen=True)
class TileHitMap:
    """Impact counts; row 0 is the lowest row of tiles, column 0 the most negative y."""

    counts: np.ndarray
    total_impacts_on_panel: int


@dataclass(frozen=True)
class BindingConfig:
    receptors_per_tile: int = 160
    p_bind: float = 0.8
    seed: int = 0
    preset: Optional[str] = None

    def __post_init__(self):
        if self.preset is not None:
            check(self.preset in RECEPTOR_PRESETS, "binding.preset",
                  f"must be one of {sorted(RECEPTOR_PRESETS)}", self.preset)
            object.__setattr__(self, "receptors_per_tile", RECEPTOR_PRESETS[self.preset])
        check(int(self.receptors_per_tile) == self.receptors_per_tile and self.receptors_per_tile >= 1,
              "binding.receptors_per_tile", "must be a positive integer", self.receptors_per_tile)
        check(0.0 <= self.p_bind <= 1.0, "binding.p_bind", "must lie in [0, 1]", self.p_bind)
        check(0 <= self.seed < 2**64, "binding.seed", "must fit in 64 unsigned bits", self.seed)


@dataclass(frozen=True)
class BoundState:
    bound: np.ndarray
    capacity: int


@dataclass(frozen=True)
class PanelLoad:
    load_fraction: float
    detected: bool
    density_code: int


def tile_index(y: float, z: float, geom: PanelGeometry) -> Optional[tuple[int, int]]:
    """(row, col) of the tile containing (y, z), or None when off the panel.

    Tiles are half-open except along the panel's far edges, which belong to
    the last row and column.
    """
    y0, y1, z0, z1 = geom.bounds
    if not (y0 <= y <= y1 and z0 <= z <= z1):
        return None
    tw, th = geom.tile_size
    col = min(int(math.floor((y - y0) / tw)), geom.tile_cols - 1)
    row = min(int(math.floor((z - z0) / th)), geom.tile_rows - 1)
    return row, col


def deposit(outcomes: Sequence[FlightOutcome], geom: PanelGeometry) -> TileHitMap:
    counts = np.zeros((geom.tile_rows, geom.tile_cols), dtype=np.int64)
    for o in outcomes:
        if isinstance(o, Impact):
            idx = tile_index(o.y, o.z, geom)
            if idx is not None:
                counts[idx] += 1
    return TileHitMap(counts, int(counts.sum()))


@numba.njit(cache=True)
def _bind_sequence(u, capacity, p_bind):
    bound = 0
    for x in u:
        if x * capacity < p_bind * (capacity - bound):
            bound += 1
    return bound


def bind_tile(hits: int, capacity: int, p_bind: float, rng: np.random.Generator) -> int:
    """Sequential saturating Bernoulli binding for one tile.

    Each arriving droplet occupies one more receptor with probability
    ``p_bind * free / capacity``.
    """
    if hits == 0:
        return 0
    return int(_bind_sequence(rng.random(hits), capacity, p_bind))


def bind(hits: TileHitMap, cfg: BindingConfig) -> BoundState:
    counts = hits.counts
    bound = np.zeros_like(counts)
    cap = cfg.receptors_per_tile
    for flat, h in enumerate(counts.ravel()):
        if h:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(flat,))))
            bound.flat[flat] = bind_tile(int(h), cap, cfg.p_bind, rng)
    return BoundState(bound, cap)


def expected_bound(hits: int, capacity: int, p_bind: float) -> float:
    """Closed-form mean of :func:`bind_tile`.

    The expected free count shrinks by the factor ``1 - p_bind/capacity`` per
    droplet because the binding probability is linear in the free count.
    """
    return capacity * (1.0 - (1.0 - p_bind / capacity) ** hits)


def summarize_load(state: BoundState) -> PanelLoad:
    total = int(state.bound.sum())
    fraction = total / (state.capacity * state.bound.size)
    return PanelLoad(fraction, total >= 1, min(int(math.floor(fraction * 8)), 7))


def write_grid_csv(path, grid: np.ndarray, geom: PanelGeometry, distance: float):
    """Write a tile grid with the top row (highest z) first, as it appears on the wall."""
    rows, cols = grid.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"# rows={rows} cols={cols} width={geom.width!r} height={geom.height!r} "
                 f"distance={float(distance)!r}\n")
        for r in range(rows - 1, -1, -1):
            fh.write(",".join(str(int(v)) for v in grid[r]) + "\n")


def read_grid_csv(path) -> tuple[np.ndarray, dict]:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# rows=... cols=...' header")
        meta = {}
        for item in header[1:].split():
            key, _, value = item.partition("=")
            meta[key] = int(value) if key in ("rows", "cols") else float(value)
        rows = [[int(v) for v in line.split(",")] for line in fh if line.strip()]
    grid = np.array(rows[::-1], dtype=np.int64).reshape(meta["rows"], meta["cols"])
    return grid, meta

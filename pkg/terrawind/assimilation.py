"""Sparse-observation assimilation into the conditioning field.

Observations are spread over the grid by inverse-distance weighting, each station gets
an impact radius grown one cell at a time while local terrain and wind variability stay
below thresholds, and a truncated Gaussian soft mask blends the observation field into
the upsampled simulation. The blended composite then conditions diffusion sampling.
"""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .diffusion import Conditioning, NoisePredictor, NoiseSchedule, sample
from .exceptions import DuplicateStation, NoStations, ShapeMismatch, StationOutOfBounds
from .grid import Field2D, GridSpec, upsample_bilinear
from .synthetic import StationObs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiusConfig:
    min_radius: int = 1
    max_radius: int = 6
    t1: float = 50.0  # terrain std threshold, m
    t2: float = 1.0  # wind-speed std threshold, m/s
    kernel_sigma_fraction: float = 0.5
    fixed_radius: Optional[int] = None
    idw_power: float = 2.0

    def validate(self) -> None:
        if not 1 <= self.min_radius <= self.max_radius:
            raise ValueError(f"need 1 <= min_radius <= max_radius, got {self.min_radius}, {self.max_radius}")
        if not (self.t1 > 0 and self.t2 > 0 and self.kernel_sigma_fraction > 0 and self.idw_power > 0):
            raise ValueError("thresholds, kernel_sigma_fraction and idw_power must be positive")
        if self.fixed_radius is not None and not self.min_radius <= self.fixed_radius <= self.max_radius:
            raise ValueError(f"fixed_radius {self.fixed_radius} outside [{self.min_radius}, {self.max_radius}]")


@dataclass(frozen=True, eq=False)
class SoftMask:
    weights: Field2D

    def __post_init__(self) -> None:
        values = self.weights.values
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("soft mask weights must lie in [0, 1]")


class Composite(NamedTuple):
    obs_field: Field2D
    sim_upsampled: Field2D
    mask: SoftMask
    radii: List[int]
    composite: Field2D


def check_stations(stations: Sequence[StationObs], rows: int, cols: int) -> None:
    if not stations:
        raise NoStations()
    seen = set()
    for station in stations:
        if not (0 <= station.row < rows and 0 <= station.col < cols):
            raise StationOutOfBounds(station.id, station.row, station.col, (rows, cols))
        if station.cell in seen:
            raise DuplicateStation(station.row, station.col)
        seen.add(station.cell)


def _squared_distance(rows: int, cols: int, center: Tuple[int, int]) -> np.ndarray:
    rr, cc = np.ogrid[:rows, :cols]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2


def interpolate_observations(stations: Sequence[StationObs], spec: GridSpec, power: float = 2.0) -> Field2D:
    """Inverse-distance-weighted field through the station values, exact at station cells."""
    rows, cols, cell_size_km = spec
    check_stations(stations, rows, cols)
    speeds = np.array([s.speed_mps for s in stations])
    if len(stations) == 1:
        return Field2D(np.full((rows, cols), speeds[0]), cell_size_km)

    station_rows = np.array([s.row for s in stations])
    station_cols = np.array([s.col for s in stations])
    rr, cc = np.mgrid[:rows, :cols]
    d2 = (rr[..., None] - station_rows) ** 2 + (cc[..., None] - station_cols) ** 2
    weights = np.zeros(d2.shape)
    away = d2 > 0
    weights[away] = d2[away].astype(np.float64) ** (-power / 2.0)
    field = (weights * speeds).sum(axis=-1) / weights.sum(axis=-1)
    field[station_rows, station_cols] = speeds
    return Field2D(field, cell_size_km)


def dynamic_impact_radius(p: Tuple[int, int], terrain: Field2D, sim_wind: Field2D, cfg: RadiusConfig) -> int:
    """Grows the radius from min_radius while the disc around `p` stays homogeneous.

    The disc is {q : |q - p|^2 <= r^2} clipped to the grid; growth stops as soon as the
    population standard deviation of terrain reaches `t1` or that of wind reaches `t2`.
    """
    if terrain.shape != sim_wind.shape:
        raise ShapeMismatch(terrain.shape, sim_wind.shape, "simulated wind")
    row, col = p
    if not (0 <= row < terrain.rows and 0 <= col < terrain.cols):
        raise StationOutOfBounds(f"{p}", row, col, terrain.shape)
    d2 = _squared_distance(terrain.rows, terrain.cols, (row, col))
    r = cfg.min_radius
    while r < cfg.max_radius:
        area = d2 <= r * r
        sigma_h = terrain.values[area].std()
        sigma_s = sim_wind.values[area].std()
        if sigma_h < cfg.t1 and sigma_s < cfg.t2:
            r += 1
        else:
            break
    return r


def impact_radii(
    stations: Sequence[StationObs], terrain: Field2D, sim_wind: Field2D, cfg: RadiusConfig
) -> List[int]:
    """Per-station radius: `cfg.fixed_radius` when set, otherwise the dynamic radius."""
    if cfg.fixed_radius is not None:
        return [cfg.fixed_radius] * len(stations)
    radii = [dynamic_impact_radius(s.cell, terrain, sim_wind, cfg) for s in stations]
    logger.debug("[assimilation.impact_radii] %s", dict(zip((s.id for s in stations), radii)))
    return radii


def build_soft_mask(
    stations: Sequence[StationObs], radii: Sequence[int], spec: GridSpec, cfg: RadiusConfig
) -> SoftMask:
    rows, cols, cell_size_km = spec
    if len(radii) != len(stations):
        raise ValueError(f"got {len(radii)} radii for {len(stations)} stations")
    weights = np.zeros((rows, cols))
    for station, radius in zip(stations, radii):
        if not cfg.min_radius <= radius <= cfg.max_radius:
            raise ValueError(f"radius {radius} of station {station.id} outside [{cfg.min_radius}, {cfg.max_radius}]")
        sigma = cfg.kernel_sigma_fraction * radius
        d2 = _squared_distance(rows, cols, station.cell)
        kernel = np.where(d2 <= radius * radius, np.exp(-d2 / (2.0 * sigma * sigma)), 0.0)
        kernel[station.row, station.col] = 1.0
        weights = np.maximum(weights, kernel)
    return SoftMask(Field2D(np.clip(weights, 0.0, 1.0), cell_size_km))


def blend(obs_field: Field2D, sim_field: Field2D, mask: SoftMask) -> Field2D:
    """Composite = m * obs + (1 - m) * sim, elementwise."""
    for other, what in ((sim_field, "simulation"), (mask.weights, "mask")):
        if other.shape != obs_field.shape:
            raise ShapeMismatch(obs_field.shape, other.shape, what)
    m = mask.weights.values
    obs, sim = obs_field.values, sim_field.values
    composite = m * obs + (1.0 - m) * sim
    # rounding must not leave the pixelwise hull of the two inputs
    composite = np.clip(composite, np.minimum(obs, sim), np.maximum(obs, sim))
    return Field2D(composite, sim_field.cell_size_km)


def build_composite(
    lr_sim: Field2D, terrain: Field2D, stations: Sequence[StationObs], cfg: RadiusConfig
) -> Composite:
    """Upsamples the simulation to the terrain grid and blends the observations into it."""
    cfg.validate()
    factor = terrain.rows // lr_sim.rows
    expected = (lr_sim.rows * factor, lr_sim.cols * factor)
    if terrain.shape != expected:
        raise ShapeMismatch(expected, terrain.shape, "terrain")
    sim_up = upsample_bilinear(lr_sim, factor)
    if not stations:
        empty = SoftMask(sim_up.like(np.zeros(sim_up.shape)))
        return Composite(sim_up, sim_up, empty, [], sim_up)

    obs_field = interpolate_observations(stations, sim_up.spec, cfg.idw_power)
    radii = impact_radii(stations, terrain, sim_up, cfg)
    mask = build_soft_mask(stations, radii, sim_up.spec, cfg)
    return Composite(obs_field, sim_up, mask, radii, blend(obs_field, sim_up, mask))


def assimilated_downscale(
    model: NoisePredictor,
    sched: NoiseSchedule,
    lr_sim: Field2D,
    terrain: Field2D,
    stations: Sequence[StationObs],
    cfg: RadiusConfig,
    seed: int,
    *,
    patch_id: int = 0,
    progress: bool = False,
) -> Field2D:
    """Blends observations into the upsampled simulation and samples conditioned on it.

    With no stations the composite is the upsampled simulation itself, so the result is
    plain conditional super-resolution.
    """
    composite = build_composite(lr_sim, terrain, stations, cfg)
    use_terrain = getattr(model, "use_terrain", True)
    cond = Conditioning.from_fields(composite.composite, terrain if use_terrain else None, model.norm_stats)
    return sample(model, cond, sched, seed, patch_id=patch_id, progress=progress)

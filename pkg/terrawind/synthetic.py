"""Reproducible synthetic scenes: terrain, a terrain-coupled "truth" wind field, a
biased and blurred "simulation" counterpart, and sparse station samples.

Every generator is a pure function of its inputs and the configured seed. Independent
random streams are derived from ``(seed, stream id)`` so changing one component never
perturbs another.
"""
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .exceptions import ShapeMismatch
from .grid import Field2D

_TERRAIN_STREAM = 0
_SYNOPTIC_STREAM = 1
_BIAS_STREAM = 2

# power-spectrum exponent of the synoptic component (steep: only the largest scales survive)
_SYNOPTIC_EXPONENT = 5.0
# terrain is smoothed before taking slopes so speed-up follows ridges, not pixel noise
_SLOPE_SMOOTHING_CELLS = 2.0


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    size: int = 128
    terrain_roughness: float = 2.0
    terrain_amplitude_m: float = 800.0
    wind_mean_mps: float = 8.0
    wind_synoptic_amplitude_mps: float = 4.0
    terrain_coupling: float = 0.4
    bias_amplitude_mps: float = 1.5
    bias_length_scale_cells: float = 32.0
    blur_radius_cells: int = 2
    cell_size_km: float = 2.0

    def validate(self, factor: Optional[int] = None) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if self.size < 32:
            raise ValueError(f"size must be >= 32, got {self.size}")
        if factor is not None and self.size % factor:
            raise ValueError(f"size {self.size} is not divisible by factor {factor}")
        amplitudes = (
            self.terrain_amplitude_m,
            self.wind_synoptic_amplitude_mps,
            self.bias_amplitude_mps,
            self.bias_length_scale_cells,
            self.blur_radius_cells,
        )
        if min(amplitudes) < 0:
            raise ValueError("amplitudes, length scales and blur radius must be nonnegative")
        if not 0.0 <= self.terrain_coupling <= 1.0:
            raise ValueError(f"terrain_coupling must lie in [0, 1], got {self.terrain_coupling}")
        if not self.cell_size_km > 0:
            raise ValueError(f"cell_size_km must be positive, got {self.cell_size_km}")


@dataclass(frozen=True)
class StationObs:
    """A point observation at a grid cell."""

    id: str
    row: int
    col: int
    height_m: float
    speed_mps: float

    def __post_init__(self) -> None:
        if self.row < 0 or self.col < 0:
            raise ValueError(f"Station {self.id} has negative grid index ({self.row}, {self.col})")
        if not self.height_m > 0:
            raise ValueError(f"Station {self.id} height must be positive, got {self.height_m}")
        if not self.speed_mps >= 0:
            raise ValueError(f"Station {self.id} speed must be nonnegative, got {self.speed_mps}")

    @property
    def cell(self) -> tuple:
        return (self.row, self.col)


class Scene(NamedTuple):
    terrain: Field2D
    truth: Field2D
    sim: Field2D


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _standardize(values: np.ndarray) -> np.ndarray:
    std = values.std()
    if std == 0:
        return np.zeros_like(values)
    return (values - values.mean()) / std


def spectral_noise(size: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    """White noise shaped to a radial power spectrum proportional to k ** -exponent.

    The zero-wavenumber mode is removed, so the result has zero mean.
    """
    white = rng.standard_normal((size, size))
    ky, kx = np.meshgrid(np.fft.fftfreq(size), np.fft.fftfreq(size), indexing="ij")
    k = np.hypot(ky, kx)
    amplitude = np.zeros_like(k)
    nonzero = k > 0
    amplitude[nonzero] = k[nonzero] ** (-exponent / 2.0)
    return np.fft.ifft2(np.fft.fft2(white) * amplitude).real


def gen_terrain(cfg: SynthConfig) -> Field2D:
    cfg.validate()
    if cfg.terrain_amplitude_m == 0:
        return Field2D(np.zeros((cfg.size, cfg.size)), cfg.cell_size_km)
    normalized = _standardize(spectral_noise(cfg.size, cfg.terrain_roughness, _stream(cfg.seed, _TERRAIN_STREAM)))
    span = normalized.max() - normalized.min()
    elevation = (normalized - normalized.min()) / span * cfg.terrain_amplitude_m
    return Field2D(elevation, cfg.cell_size_km)


def terrain_slope(terrain: Field2D) -> Field2D:
    """Gradient magnitude (m per m) of the lightly smoothed terrain."""
    smoothed = ndimage.gaussian_filter(terrain.values, sigma=_SLOPE_SMOOTHING_CELLS, mode="nearest")
    gy, gx = np.gradient(smoothed, terrain.cell_size_km * 1000.0)
    return terrain.like(np.hypot(gy, gx))


def gen_truth_wind(terrain: Field2D, cfg: SynthConfig) -> Field2D:
    """Hub-height wind: mean flow + large-scale synoptic pattern + terrain speed-up."""
    cfg.validate()
    if terrain.shape != (cfg.size, cfg.size):
        raise ShapeMismatch((cfg.size, cfg.size), terrain.shape, "terrain")
    wind = np.full(terrain.shape, cfg.wind_mean_mps)
    if cfg.wind_synoptic_amplitude_mps > 0:
        synoptic = spectral_noise(cfg.size, _SYNOPTIC_EXPONENT, _stream(cfg.seed, _SYNOPTIC_STREAM))
        wind += cfg.wind_synoptic_amplitude_mps * _standardize(synoptic)
    if cfg.terrain_coupling > 0:
        speed_up = _standardize(terrain_slope(terrain).values)
        wind += cfg.terrain_coupling * cfg.wind_mean_mps * speed_up
    return terrain.like(np.maximum(wind, 0.0))


def make_biased_sim(truth: Field2D, cfg: SynthConfig) -> Field2D:
    """Emulates a coarse, biased simulation: blurred truth plus a smooth additive bias."""
    cfg.validate()
    sim = np.array(truth.values)
    if cfg.blur_radius_cells > 0:
        sim = ndimage.gaussian_filter(sim, sigma=cfg.blur_radius_cells, mode="nearest")
    if cfg.bias_amplitude_mps > 0:
        white = _stream(cfg.seed, _BIAS_STREAM).standard_normal(truth.shape)
        smooth = ndimage.gaussian_filter(white, sigma=cfg.bias_length_scale_cells, mode="wrap")
        sim = sim + cfg.bias_amplitude_mps * _standardize(smooth)
    return truth.like(np.maximum(sim, 0.0))


def sample_stations(truth: Field2D, k: int, seed: int, height_m: float = 80.0) -> List[StationObs]:
    """Draws k distinct cells uniformly without replacement and reads truth there."""
    n_cells = truth.rows * truth.cols
    if not 1 <= k <= n_cells:
        raise ValueError(f"k must lie in [1, {n_cells}], got {k}")
    rng = np.random.default_rng(seed)
    flat = rng.choice(n_cells, size=k, replace=False)
    stations = []
    for i, index in enumerate(flat):
        row, col = divmod(int(index), truth.cols)
        stations.append(StationObs(f"S{i:03d}", row, col, height_m, float(truth.values[row, col])))
    return stations


def generate_scene(cfg: SynthConfig) -> Scene:
    terrain = gen_terrain(cfg)
    truth = gen_truth_wind(terrain, cfg)
    return Scene(terrain=terrain, truth=truth, sim=make_biased_sim(truth, cfg))

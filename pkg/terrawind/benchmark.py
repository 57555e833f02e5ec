"""Desk-scale synthetic benchmarks.

Four comparisons are run on held-out synthetic scenes:

* assimilation on vs off, scored by RMSE at held-out station pixels;
* dynamic impact radius vs fixed radii of 2, 4 and 6, reported per terrain class on a
  mix of flat and rough patches;
* pooled wind-speed deciles of truth, plain sampling and assimilated sampling per
  terrain class;
* diffusion super-resolution (with and without terrain) vs the bicubic baseline.

Training scenes use synth seeds ``seed, seed + 1, ...``; evaluation scenes start at
``seed + TEST_SCENE_OFFSET`` so they never overlap.
"""
import logging
from dataclasses import replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .denoiser import TrainResult, train
from .engines.diffusion import DiffusionClient, DiffusionDownscaler
from .engines.interp import InterpClient, InterpDownscaler
from .grid import Field2D, PatchPair, coarsen, extract_patches, make_patch_pair
from .metrics import DECILES, bias_reduction, cdf_table, mae_rmse, psnr, ssim, terrain_class
from .synthetic import StationObs, SynthConfig, generate_scene, sample_stations

logger = logging.getLogger(__name__)

TEST_SCENE_OFFSET = 10_000
DYNAMIC = "dynamic"
FIXED_RADII = (2, 4, 6)
# the acceptance comparison pits the dynamic radius against this fixed one
FIXED_RADIUS_BASELINE = 2
CDF_SERIES = ("truth", "no-da", "da")
# flat half of the mixed-terrain benchmarks
FLAT_TERRAIN_AMPLITUDE_M = 20.0


class EvalPatch(NamedTuple):
    truth: Field2D
    sim: Field2D
    terrain: Field2D
    lr_sim: Field2D


class AssimilationResult(NamedTuple):
    rmse_without: List[float]
    rmse_with: List[float]

    @property
    def reduction_percent(self) -> float:
        return bias_reduction(float(np.mean(self.rmse_without)), float(np.mean(self.rmse_with)))


def radius_setting(radius: Optional[int]) -> str:
    return DYNAMIC if radius is None else f"fixed-{radius}"


class RadiusResult(NamedTuple):
    """Per-patch errors keyed by radius setting ("dynamic", "fixed-2", ...), with each patch's terrain class."""

    mae: Dict[str, List[float]]
    rmse: Dict[str, List[float]]
    classes: List[str]

    def mean_errors(self, setting: str, terrain: Optional[str] = None) -> Tuple[float, float]:
        picks = [i for i, label in enumerate(self.classes) if terrain is None or label == terrain]
        if not picks:
            raise ValueError(f"no {terrain} patches in this result")
        return (
            float(np.mean([self.mae[setting][i] for i in picks])),
            float(np.mean([self.rmse[setting][i] for i in picks])),
        )

    def table(self) -> Dict[str, Dict[str, Tuple[float, float]]]:
        """Mean (MAE, RMSE) per setting, over all patches and per terrain class."""
        groups = ["all"] + sorted(set(self.classes))
        return {
            setting: {group: self.mean_errors(setting, None if group == "all" else group) for group in groups}
            for setting in self.mae
        }

    @property
    def dynamic_wins(self) -> bool:
        return self.mean_errors(DYNAMIC)[0] <= self.mean_errors(radius_setting(FIXED_RADIUS_BASELINE))[0]


class CdfComparison(NamedTuple):
    quantiles: Dict[str, Dict[str, List[float]]]  # terrain class -> series -> quantiles
    probs: List[float]


class QualityScores(NamedTuple):
    psnr_db: float
    ssim: float


class SuperResolutionResult(NamedTuple):
    diffusion: QualityScores
    diffusion_no_terrain: QualityScores
    bicubic: QualityScores


def scene_patches(truth: Field2D, terrain: Field2D, cfg: RunConfig) -> List[PatchPair]:
    """Truth/terrain training pairs tiled from one scene."""
    data = cfg.data
    truths = extract_patches(truth, data.patch, data.stride)
    terrains = extract_patches(terrain, data.patch, data.stride)
    return [make_patch_pair(hr, ter, data.factor) for hr, ter in zip(truths, terrains)]


def training_set(cfg: RunConfig) -> List[PatchPair]:
    pairs: List[PatchPair] = []
    for s in range(cfg.data.scenes):
        scene = generate_scene(replace(cfg.synth, seed=cfg.synth.seed + s))
        pairs.extend(scene_patches(scene.truth, scene.terrain, cfg))
    return pairs


def train_model(cfg: RunConfig, use_terrain: Optional[bool] = None, progress: bool = False) -> TrainResult:
    model_config = cfg.model if use_terrain is None else replace(cfg.model, use_terrain=use_terrain)
    return train(training_set(cfg), cfg.train_config(), model_config, progress=progress)


def eval_patch(cfg: RunConfig, index: int, synth: Optional[SynthConfig] = None) -> EvalPatch:
    """A random patch of a held-out scene; the low-resolution input is the coarsened simulation."""
    synth = replace(synth or cfg.synth, seed=cfg.synth.seed + TEST_SCENE_OFFSET + index)
    scene = generate_scene(synth)
    rng = np.random.default_rng([synth.seed, index])
    size = cfg.data.patch
    row, col = rng.integers(0, synth.size - size + 1, size=2)
    window = (slice(row, row + size), slice(col, col + size))
    terrain, truth, sim = (Field2D(f.values[window], f.cell_size_km) for f in scene)
    return EvalPatch(truth, sim, terrain, coarsen(sim, cfg.data.factor))


def split_stations(truth: Field2D, cfg: RunConfig, seed: int) -> Tuple[List[StationObs], List[StationObs]]:
    """Samples assimilated and held-out stations at distinct pixels."""
    total = cfg.data.da_stations + cfg.data.holdout_stations
    stations = sample_stations(truth, total, seed, cfg.profile.hub_height_m)
    return stations[: cfg.data.da_stations], stations[cfg.data.da_stations :]


def _downscaler(result: TrainResult, cfg: RunConfig) -> DiffusionDownscaler:
    return DiffusionDownscaler(DiffusionClient(result.model, result.schedule), cfg.data.factor)


def assimilation_benchmark(cfg: RunConfig, result: TrainResult, n_seeds: int = 20) -> AssimilationResult:
    """RMSE at held-out station pixels, with and without assimilation, same sampling seed."""
    downscaler = _downscaler(result, cfg)
    without, with_da = [], []
    for i in range(n_seeds):
        patch = eval_patch(cfg, i)
        da, holdout = split_stations(patch.truth, cfg, cfg.seeds.stations + i)
        pixels = [s.cell for s in holdout]
        seed = cfg.seeds.sample + i
        plain = downscaler.downscale(patch.lr_sim, patch.terrain, seed=seed)
        corrected = downscaler.assimilate(patch.lr_sim, patch.terrain, da, cfg.assimilation, seed=seed)
        without.append(mae_rmse(plain, patch.truth, pixels)[1])
        with_da.append(mae_rmse(corrected, patch.truth, pixels)[1])
        logger.info("[benchmark.assimilation] seed %d rmse %.3f -> %.3f", i, without[-1], with_da[-1])
    return AssimilationResult(without, with_da)


def _mixed_patch(cfg: RunConfig, index: int) -> EvalPatch:
    # even indices draw from nearly flat terrain, odd ones from the configured relief
    flat = replace(cfg.synth, terrain_amplitude_m=FLAT_TERRAIN_AMPLITUDE_M)
    return eval_patch(cfg, index, flat if index % 2 == 0 else cfg.synth)


def radius_benchmark(
    cfg: RunConfig, result: TrainResult, n_seeds: int = 20, fixed_radii: Sequence[int] = FIXED_RADII
) -> RadiusResult:
    """Full-patch MAE/RMSE of dynamic-radius assimilation and of each fixed radius.

    Every setting sees the same patches, stations and sampling seed.
    """
    downscaler = _downscaler(result, cfg)
    settings = {DYNAMIC: replace(cfg.assimilation, fixed_radius=None)}
    for radius in fixed_radii:
        settings[radius_setting(radius)] = replace(cfg.assimilation, fixed_radius=radius)
    mae: Dict[str, List[float]] = {name: [] for name in settings}
    rmse: Dict[str, List[float]] = {name: [] for name in settings}
    classes: List[str] = []
    for i in range(n_seeds):
        patch = _mixed_patch(cfg, i)
        da, _ = split_stations(patch.truth, cfg, cfg.seeds.stations + i)
        seed = cfg.seeds.sample + i
        for name, radius_cfg in settings.items():
            pred = downscaler.assimilate(patch.lr_sim, patch.terrain, da, radius_cfg, seed=seed)
            errors = mae_rmse(pred, patch.truth)
            mae[name].append(errors[0])
            rmse[name].append(errors[1])
        classes.append(terrain_class(patch.terrain))
        logger.info("[benchmark.radius] seed %d (%s) dynamic mae %.3f", i, classes[-1], mae[DYNAMIC][-1])
    return RadiusResult(mae, rmse, classes)


def cdf_benchmark(cfg: RunConfig, result: TrainResult, n_seeds: int = 20) -> CdfComparison:
    """Pooled wind-speed deciles of truth, plain sampling and assimilated sampling per terrain class."""
    downscaler = _downscaler(result, cfg)
    pooled: Dict[str, Dict[str, List[np.ndarray]]] = {}
    for i in range(n_seeds):
        patch = _mixed_patch(cfg, i)
        da, _ = split_stations(patch.truth, cfg, cfg.seeds.stations + i)
        seed = cfg.seeds.sample + i
        series = {
            "truth": patch.truth,
            "no-da": downscaler.downscale(patch.lr_sim, patch.terrain, seed=seed),
            "da": downscaler.assimilate(patch.lr_sim, patch.terrain, da, cfg.assimilation, seed=seed),
        }
        group = pooled.setdefault(terrain_class(patch.terrain), {name: [] for name in CDF_SERIES})
        for name, field in series.items():
            group[name].append(field.values.ravel())
    quantiles = {
        label: cdf_table({name: Field2D(np.concatenate(arrays)[None, :]) for name, arrays in group.items()})
        for label, group in pooled.items()
    }
    return CdfComparison(quantiles, list(DECILES))


def _scores(preds: List[Field2D], truths: List[Field2D]) -> QualityScores:
    psnrs, ssims = [], []
    for pred, truth in zip(preds, truths):
        data_range = float(truth.values.max() - truth.values.min())
        psnrs.append(psnr(pred, truth, data_range))
        ssims.append(ssim(pred, truth, data_range))
    return QualityScores(float(np.mean(psnrs)), float(np.mean(ssims)))


def super_resolution_benchmark(
    cfg: RunConfig,
    with_terrain: TrainResult,
    without_terrain: TrainResult,
    n_patches: int = 50,
    workers: int = 1,
) -> SuperResolutionResult:
    """PSNR/SSIM against truth for inputs coarsened from the truth itself."""
    patches = [eval_patch(cfg, i) for i in range(n_patches)]
    truths = [p.truth for p in patches]
    lrs = [coarsen(p.truth, cfg.data.factor) for p in patches]
    terrains = [p.terrain for p in patches]
    seed = cfg.seeds.sample
    bicubic = InterpDownscaler(InterpClient(), "bicubic", cfg.data.factor)
    return SuperResolutionResult(
        diffusion=_scores(_downscaler(with_terrain, cfg).downscale_many(lrs, terrains, seed=seed, workers=workers), truths),
        diffusion_no_terrain=_scores(
            _downscaler(without_terrain, cfg).downscale_many(lrs, None, seed=seed, workers=workers), truths
        ),
        bicubic=_scores(bicubic.downscale_many(lrs), truths),
    )

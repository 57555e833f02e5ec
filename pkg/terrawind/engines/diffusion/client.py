import logging
from typing import Optional, Sequence

from ...assimilation import RadiusConfig, assimilated_downscale
from ...diffusion import Conditioning, NoisePredictor, NoiseSchedule, sample
from ...grid import Field2D
from ...synthetic import StationObs
from ..utils import PathLike

logger = logging.getLogger(__name__)


class DiffusionClient:
    """Runs a trained noise predictor through the ancestral sampler."""

    def __init__(self, model: NoisePredictor, schedule: NoiseSchedule, progress: bool = False) -> None:
        self.model = model
        self.schedule = schedule
        self.progress = progress

    @classmethod
    def from_checkpoint(cls, path: PathLike, progress: bool = False) -> "DiffusionClient":
        from ...io import load_checkpoint

        model, schedule = load_checkpoint(path)
        logger.info("[DiffusionClient.from_checkpoint] loaded %s (T=%d)", path, schedule.T)
        return cls(model, schedule, progress)

    @property
    def use_terrain(self) -> bool:
        return getattr(self.model, "use_terrain", True)

    def sample(self, lr_upsampled: Field2D, terrain: Optional[Field2D], seed: int, patch_id: int = 0) -> Field2D:
        cond = Conditioning.from_fields(lr_upsampled, terrain if self.use_terrain else None, self.model.norm_stats)
        return sample(self.model, cond, self.schedule, seed, patch_id=patch_id, progress=self.progress)

    def assimilate(
        self,
        lr_sim: Field2D,
        terrain: Field2D,
        stations: Sequence[StationObs],
        cfg: RadiusConfig,
        seed: int,
        patch_id: int = 0,
    ) -> Field2D:
        return assimilated_downscale(
            self.model, self.schedule, lr_sim, terrain, stations, cfg, seed, patch_id=patch_id, progress=self.progress
        )

from typing import List, Optional, Sequence

from ...assimilation import RadiusConfig
from ...downscaler import AbstractDownscaler, Method
from ...exceptions import ShapeMismatch
from ...grid import Field2D, upsample_bilinear
from ...synthetic import StationObs
from . import DiffusionClient


class DiffusionDownscaler(AbstractDownscaler):
    @classmethod
    def supported_methods(cls) -> List[Method]:
        return ["diffusion"]

    def __init__(self, client: DiffusionClient, factor: int = 4) -> None:
        super().__init__(factor)
        self._client = client

    def _check_terrain(self, lr: Field2D, terrain: Optional[Field2D]) -> None:
        if terrain is None:
            if self._client.use_terrain:
                raise ValueError("terrain-conditioned model needs a terrain field")
            return
        expected = (lr.rows * self.factor, lr.cols * self.factor)
        if terrain.shape != expected:
            raise ShapeMismatch(expected, terrain.shape, "terrain")

    def downscale(self, lr: Field2D, terrain: Optional[Field2D] = None, *, seed: int = 0, patch_id: int = 0) -> Field2D:
        """Plain conditional super-resolution of `lr`, no observations."""
        self._check_terrain(lr, terrain)
        return self._client.sample(upsample_bilinear(lr, self.factor), terrain, seed, patch_id)

    def assimilate(
        self,
        lr: Field2D,
        terrain: Field2D,
        stations: Sequence[StationObs],
        radius_cfg: RadiusConfig = RadiusConfig(),
        *,
        seed: int = 0,
        patch_id: int = 0,
    ) -> Field2D:
        """Super-resolution conditioned on the simulation with station observations blended in."""
        if terrain is None:
            raise ValueError("assimilation needs terrain to size the impact radii")
        self._check_terrain(lr, terrain)
        return self._client.assimilate(lr, terrain, stations, radius_cfg, seed, patch_id)

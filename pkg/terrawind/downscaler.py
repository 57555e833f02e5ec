import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Sequence, Union

from .engines.utils import PathLike
from .grid import Field2D

logger = logging.getLogger(__name__)

Method = Union[Literal["bilinear"], Literal["bicubic"], Literal["diffusion"]]


class AbstractDownscaler(ABC):
    """Abstract class (ABC) for downscaling backends: low-resolution wind in, high-resolution wind out."""

    def __init__(self, factor: int):
        self.factor = factor

    @classmethod
    @abstractmethod
    def supported_methods(cls) -> List[Method]:
        """Returns the downscaling methods a concrete engine can run."""
        pass

    @abstractmethod
    def downscale(self, lr: Field2D, terrain: Optional[Field2D] = None, *, seed: int = 0, patch_id: int = 0) -> Field2D:
        """Maps a low-resolution field to a grid `factor` times finer."""
        pass

    def downscale_to_file(
        self, lr: Field2D, path: PathLike, terrain: Optional[Field2D] = None, *, seed: int = 0
    ) -> Field2D:
        from .io import write_grid

        result = self.downscale(lr, terrain, seed=seed)
        write_grid(result, path)
        return result

    def downscale_many(
        self,
        lrs: Sequence[Field2D],
        terrains: Optional[Sequence[Field2D]] = None,
        *,
        seed: int = 0,
        workers: int = 1,
    ) -> List[Field2D]:
        """Downscales independent patches; patch i draws from the private stream (seed, i).

        Results come back in input order and do not depend on `workers`.
        """
        if terrains is not None and len(terrains) != len(lrs):
            raise ValueError(f"got {len(terrains)} terrain patches for {len(lrs)} inputs")
        terrain_list: Sequence[Optional[Field2D]] = terrains if terrains is not None else [None] * len(lrs)

        def run(i: int) -> Field2D:
            return self.downscale(lrs[i], terrain_list[i], seed=seed, patch_id=i)

        if workers <= 1:
            return [run(i) for i in range(len(lrs))]
        logger.info("[AbstractDownscaler.downscale_many] %d patches on %d workers", len(lrs), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, range(len(lrs))))

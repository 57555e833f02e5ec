from typing import List, Optional

from ...downscaler import AbstractDownscaler, Method
from ...exceptions import UnsupportedMethod
from ...grid import Field2D
from . import InterpClient


class InterpDownscaler(AbstractDownscaler):
    """Interpolation baseline; terrain and seed are accepted and ignored."""

    @classmethod
    def supported_methods(cls) -> List[Method]:
        return ["bicubic", "bilinear"]

    def __init__(self, client: InterpClient, method: str = "bicubic", factor: int = 4) -> None:
        if method not in self.supported_methods():
            raise UnsupportedMethod(method, self.__class__.__name__)
        super().__init__(factor)
        self._client = client
        self.method = method

    def downscale(self, lr: Field2D, terrain: Optional[Field2D] = None, *, seed: int = 0, patch_id: int = 0) -> Field2D:
        return self._client.resample(lr, self.factor, self.method)

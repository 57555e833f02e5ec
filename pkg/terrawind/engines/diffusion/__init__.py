from .client import DiffusionClient
from .diffusion import DiffusionDownscaler

__all__ = ["DiffusionClient", "DiffusionDownscaler"]

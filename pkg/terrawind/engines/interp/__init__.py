from .client import InterpClient
from .interp import InterpDownscaler

__all__ = ["InterpClient", "InterpDownscaler"]

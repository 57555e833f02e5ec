from ...exceptions import ModuleNotInstalled
from ...grid import SPLINE_ORDERS, Field2D, upsample_coordinates

try:
    from scipy import ndimage
except ImportError:
    ndimage = None  # type: ignore


class InterpClient:
    """Spline resampling backend (scipy.ndimage)."""

    def __init__(self) -> None:
        if ndimage is None:
            raise ModuleNotInstalled("scipy")

    def resample(self, field: Field2D, factor: int, method: str) -> Field2D:
        coordinates = upsample_coordinates(field, factor)
        values = ndimage.map_coordinates(field.values, coordinates, order=SPLINE_ORDERS[method], mode="nearest")
        return Field2D(values, field.cell_size_km / factor)

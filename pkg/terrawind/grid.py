from dataclasses import dataclass
from typing import Any, List, NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .exceptions import DimensionNotDivisible, InvalidFactor, PatchTooLarge, ShapeMismatch


class GridSpec(NamedTuple):
    rows: int
    cols: int
    cell_size_km: float


@dataclass(frozen=True, eq=False)
class Field2D:
    """A rectangular grid of real values (wind speed in m/s or elevation in m).

    Values are stored row-major with row 0 at the southern edge and column 0 at the
    western edge. The array is copied on construction and made read-only.

    @param values: 2-D array of finite values, shape (rows, cols)
    @param cell_size_km: physical size of one cell
    """

    values: np.ndarray
    cell_size_km: float = 1.0

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"Field2D needs a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Field2D values must be finite")
        if not self.cell_size_km > 0:
            raise ValueError(f"cell_size_km must be positive, got {self.cell_size_km}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cell_size_km", float(self.cell_size_km))

    def __array__(self, dtype: Any = None, copy: Optional[bool] = None) -> np.ndarray:
        if dtype is not None:
            return self.values.astype(dtype)
        return self.values.copy() if copy else self.values

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.rows, self.cols, self.cell_size_km)

    def like(self, values: Any) -> "Field2D":
        """Returns a new field on this field's grid holding `values`."""
        field = Field2D(values, self.cell_size_km)
        if field.shape != self.shape:
            raise ShapeMismatch(self.shape, field.shape)
        return field

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True, eq=False)
class PatchPair:
    """Paired high/low-resolution training sample with its terrain."""

    hr: Field2D
    lr: Field2D
    terrain: Field2D

    def __post_init__(self) -> None:
        if self.terrain.shape != self.hr.shape:
            raise ShapeMismatch(self.hr.shape, self.terrain.shape, "terrain")
        factor = max(self.hr.rows // self.lr.rows, 2)
        expected = (self.lr.rows * factor, self.lr.cols * factor)
        if self.hr.shape != expected:
            raise ShapeMismatch(expected, self.hr.shape, "hr")

    @property
    def factor(self) -> int:
        return self.hr.rows // self.lr.rows


SPLINE_ORDERS = {"bilinear": 1, "bicubic": 3}


def _check_factor(factor: int) -> None:
    if int(factor) != factor or factor < 2:
        raise InvalidFactor(factor)


def _source_positions(n_out: int, n_in: int, ratio: float) -> np.ndarray:
    # cell-center alignment: destination center (i + 0.5) * ratio in source cell units
    positions = (np.arange(n_out, dtype=np.float64) + 0.5) * ratio - 0.5
    return np.clip(positions, 0.0, n_in - 1)


def _coordinates(row_pos: np.ndarray, col_pos: np.ndarray) -> List[np.ndarray]:
    return list(np.meshgrid(row_pos, col_pos, indexing="ij"))


def _resample(values: np.ndarray, coordinates: List[np.ndarray], order: int) -> np.ndarray:
    return ndimage.map_coordinates(values, coordinates, order=order, mode="nearest")


def coarsen(field: Field2D, factor: int) -> Field2D:
    """Block-mean coarsening; each output cell averages a factor x factor block."""
    _check_factor(factor)
    if field.rows % factor or field.cols % factor:
        raise DimensionNotDivisible(field.rows, field.cols, factor)
    blocks = field.values.reshape(field.rows // factor, factor, field.cols // factor, factor)
    return Field2D(blocks.mean(axis=(1, 3)), field.cell_size_km * factor)


def upsample_coordinates(field: Field2D, factor: int) -> List[np.ndarray]:
    """Source (row, col) positions of every destination cell center, clamped to the source grid.

    The result is the coordinate argument of ``scipy.ndimage.map_coordinates``.
    """
    _check_factor(factor)
    row_pos = _source_positions(field.rows * factor, field.rows, 1.0 / factor)
    col_pos = _source_positions(field.cols * factor, field.cols, 1.0 / factor)
    return _coordinates(row_pos, col_pos)


def upsample_bilinear(field: Field2D, factor: int) -> Field2D:
    """Bilinear upsampling with cell-center alignment and clamped borders."""
    values = _resample(field.values, upsample_coordinates(field, factor), SPLINE_ORDERS["bilinear"])
    return Field2D(values, field.cell_size_km / factor)


def upsample_bicubic(field: Field2D, factor: int) -> Field2D:
    """Cubic-spline upsampling on the same alignment as `upsample_bilinear`."""
    values = _resample(field.values, upsample_coordinates(field, factor), SPLINE_ORDERS["bicubic"])
    return Field2D(values, field.cell_size_km / factor)


def regrid(src: Field2D, dst_rows: int, dst_cols: int, dst_cell_km: float) -> Field2D:
    """Bilinear resampling of `src` onto another grid sharing its south-west corner.

    Destination cells beyond the source extent take the clamped border values.
    """
    if dst_rows < 1 or dst_cols < 1:
        raise ValueError(f"Destination grid must be non-empty, got {dst_rows}x{dst_cols}")
    if not dst_cell_km > 0:
        raise ValueError(f"dst_cell_km must be positive, got {dst_cell_km}")
    ratio = dst_cell_km / src.cell_size_km
    row_pos = _source_positions(dst_rows, src.rows, ratio)
    col_pos = _source_positions(dst_cols, src.cols, ratio)
    return Field2D(_resample(src.values, _coordinates(row_pos, col_pos), SPLINE_ORDERS["bilinear"]), dst_cell_km)


def extract_patches(field: Field2D, patch: int, stride: int) -> List[Field2D]:
    """Returns every full patch x patch window in row-major scan order."""
    if patch < 1:
        raise ValueError(f"patch must be >= 1, got {patch}")
    if patch > min(field.rows, field.cols):
        raise PatchTooLarge(patch, field.rows, field.cols)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    patches = []
    for r in range(0, field.rows - patch + 1, stride):
        for c in range(0, field.cols - patch + 1, stride):
            patches.append(Field2D(field.values[r : r + patch, c : c + patch], field.cell_size_km))
    return patches


def make_patch_pair(hr: Field2D, terrain: Field2D, factor: int) -> PatchPair:
    return PatchPair(hr=hr, lr=coarsen(hr, factor), terrain=terrain)

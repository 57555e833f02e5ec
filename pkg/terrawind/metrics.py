"""Error, correlation and image-quality metrics for comparing wind fields."""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .exceptions import ShapeMismatch, ZeroVariance
from .grid import Field2D

logger = logging.getLogger(__name__)

DECILES = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
# gaussian_filter keeps int(truncate * sigma + 0.5) taps per side: 5 for an 11-wide window
_SSIM_TRUNCATE = 3.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

Mask = Union[np.ndarray, Sequence[Tuple[int, int]]]


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    pearson_r: float
    psnr_db: float  # math.inf for identical inputs
    ssim: float
    n_pixels: int
    data_range: float

    FIELDS = ("mae", "rmse", "pearson_r", "psnr_db", "ssim", "n_pixels", "data_range")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_text(self) -> str:
        """Flat ``key=value`` record, one pair per line."""
        return "".join(f"{key}={value!r}\n" for key, value in self.to_dict().items())

    def csv_row(self) -> List[str]:
        return [repr(getattr(self, key)) for key in self.FIELDS]


def _pair(a: Field2D, b: Field2D) -> Tuple[np.ndarray, np.ndarray]:
    a_arr, b_arr = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a_arr.shape != b_arr.shape:
        raise ShapeMismatch(a_arr.shape, b_arr.shape)
    return a_arr, b_arr


def mask_array(mask: Mask, shape: Tuple[int, int]) -> np.ndarray:
    """Boolean pixel mask from either a boolean array or a list of (row, col) pixels."""
    if isinstance(mask, np.ndarray) and mask.dtype == bool:
        if mask.shape != shape:
            raise ShapeMismatch(shape, mask.shape, "mask")
        selected = mask
    else:
        selected = np.zeros(shape, dtype=bool)
        for row, col in mask:
            if not (0 <= row < shape[0] and 0 <= col < shape[1]):
                raise ValueError(f"mask pixel ({row}, {col}) outside grid {shape}")
            selected[row, col] = True
    if not selected.any():
        raise ValueError("mask selects no pixels")
    return selected


def mae_rmse(a: Field2D, b: Field2D, mask: Optional[Mask] = None) -> Tuple[float, float]:
    a_arr, b_arr = _pair(a, b)
    diff = a_arr - b_arr
    if mask is not None:
        diff = diff[mask_array(mask, a_arr.shape)]
    return float(np.mean(np.abs(diff))), float(np.sqrt(np.mean(diff * diff)))


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    saa, sbb = float(np.sum(da * da)), float(np.sum(db * db))
    if saa == 0.0:
        raise ZeroVariance("first field")
    if sbb == 0.0:
        raise ZeroVariance("second field")
    r = float(np.sum(da * db)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def pearson(a: Field2D, b: Field2D) -> float:
    """Sample Pearson correlation, two-pass."""
    a_arr, b_arr = _pair(a, b)
    return _pearson(a_arr.ravel(), b_arr.ravel())


def _psnr_from_mse(mse: float, data_range: float) -> float:
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(data_range) - 10.0 * math.log10(mse)


def psnr(a: Field2D, b: Field2D, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``math.inf``."""
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    a_arr, b_arr = _pair(a, b)
    return _psnr_from_mse(float(np.mean((a_arr - b_arr) ** 2)), data_range)


def _local_mean(x: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(x, sigma=SSIM_SIGMA, truncate=_SSIM_TRUNCATE, mode="reflect")


def ssim(a: Field2D, b: Field2D, data_range: float) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Local statistics are averaged only where the whole window lies inside the field.
    """
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    x, y = _pair(a, b)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs fields of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    mu_x, mu_y = _local_mean(x), _local_mean(y)
    sigma_xx = _local_mean(x * x) - mu_x * mu_x
    sigma_yy = _local_mean(y * y) - mu_y * mu_y
    sigma_xy = _local_mean(x * y) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_xx + sigma_yy + c2)
    pad = SSIM_WINDOW // 2
    ssim_map = (numerator / denominator)[pad:-pad, pad:-pad]
    return float(ssim_map.mean())


def cdf_quantiles(field: Field2D, probs: Sequence[float]) -> List[float]:
    """Empirical quantiles, linear interpolation between order statistics."""
    values = np.asarray(field, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot take quantiles of an empty field")
    probs_arr = np.asarray(probs, dtype=np.float64)
    if np.any((probs_arr < 0.0) | (probs_arr > 1.0)):
        raise ValueError(f"probabilities must lie in [0, 1], got {list(probs)}")
    return [float(q) for q in np.quantile(values, probs_arr, method="linear")]


def cdf_table(fields: Mapping[str, Field2D], probs: Sequence[float] = DECILES) -> Dict[str, List[float]]:
    return {name: cdf_quantiles(field, probs) for name, field in fields.items()}


def terrain_class(terrain: Field2D, threshold_m: float = 50.0) -> str:
    """Labels a patch "flat" or "complex" by its elevation standard deviation."""
    return "complex" if float(np.std(terrain.values)) >= threshold_m else "flat"


def bias_reduction(err_without: float, err_with: float) -> float:
    """Percent error reduction achieved by assimilation: 100 * (1 - with / without)."""
    if not err_without > 0:
        raise ValueError(f"reference error must be positive, got {err_without}")
    return 100.0 * (1.0 - err_with / err_without)


def evaluate(
    pred: Field2D, truth: Field2D, mask: Optional[Mask] = None, data_range: Optional[float] = None
) -> EvalReport:
    """All metrics for one prediction.

    Pixel metrics (MAE, RMSE, Pearson, PSNR) honour `mask`; SSIM always uses the full field.
    `data_range` defaults to max - min of `truth`.
    """
    pred_arr, truth_arr = _pair(pred, truth)
    if data_range is None:
        data_range = float(truth_arr.max() - truth_arr.min())
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}; pass one for constant truth fields")
    selected = np.ones(truth_arr.shape, dtype=bool) if mask is None else mask_array(mask, truth_arr.shape)
    mae, rmse = mae_rmse(pred, truth, selected)
    try:
        r = _pearson(pred_arr[selected], truth_arr[selected])
    except ZeroVariance as e:
        logger.warning("[metrics.evaluate] %s", e)
        r = math.nan
    mse = float(np.mean((pred_arr[selected] - truth_arr[selected]) ** 2))
    return EvalReport(
        mae=mae,
        rmse=rmse,
        pearson_r=r,
        psnr_db=_psnr_from_mse(mse, data_range),
        ssim=ssim(pred, truth, data_range),
        n_pixels=int(selected.sum()),
        data_range=data_range,
    )

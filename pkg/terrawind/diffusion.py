"""Denoising-diffusion machinery: schedules, forward noising, the noise-prediction
objective and the conditional ancestral sampler.

Steps are 1-based (``1 <= t <= T``) everywhere in the public API; schedule arrays are
stored 0-based, so step ``t`` reads index ``t - 1``. Functions accept plain arrays or
:class:`~terrawind.grid.Field2D`; a Field2D input yields a Field2D output.
"""
import logging
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Protocol, Union

import numpy as np
from tqdm import tqdm

from .exceptions import InvalidSchedule, ShapeMismatch, StepOutOfRange
from .grid import Field2D

logger = logging.getLogger(__name__)

Steps = Union[int, np.ndarray]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    posterior_var: np.ndarray
    beta_start: float
    beta_end: float

    @property
    def T(self) -> int:
        return len(self.beta)

    def check_step(self, t: Steps) -> np.ndarray:
        steps = np.asarray(t, dtype=np.int64)
        bad = steps[(steps < 1) | (steps > self.T)]
        if bad.size:
            raise StepOutOfRange(int(bad.flat[0]), self.T)
        return steps - 1


@dataclass(frozen=True)
class NormStats:
    """Dataset statistics used to standardize model inputs and de-normalize samples."""

    wind_mean: float = 0.0
    wind_std: float = 1.0
    terrain_mean: float = 0.0
    terrain_std: float = 1.0


@dataclass(frozen=True, eq=False)
class Conditioning:
    """Normalized conditioning channels, shaped like the high-resolution target.

    Arrays are (H, W) for a single patch or (B, H, W) for a batch. `terrain` is None
    for terrain-free models.
    """

    lr_upsampled: np.ndarray
    terrain: Optional[np.ndarray] = None
    cell_size_km: float = 1.0

    @property
    def shape(self) -> tuple:
        return np.shape(self.lr_upsampled)

    @classmethod
    def from_fields(cls, lr_upsampled: Field2D, terrain: Optional[Field2D], stats: NormStats) -> "Conditioning":
        lr = (lr_upsampled.values - stats.wind_mean) / stats.wind_std
        if terrain is None:
            return cls(lr, None, lr_upsampled.cell_size_km)
        if terrain.shape != lr_upsampled.shape:
            raise ShapeMismatch(lr_upsampled.shape, terrain.shape, "terrain")
        terr = (terrain.values - stats.terrain_mean) / stats.terrain_std
        return cls(lr, terr, lr_upsampled.cell_size_km)


class NoisePredictor(Protocol):
    norm_stats: NormStats

    def predict_noise(self, xt: np.ndarray, cond: Conditioning, t: Steps) -> np.ndarray:
        ...


def make_linear_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    if T < 2:
        raise InvalidSchedule(f"T must be >= 2, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise InvalidSchedule(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    alpha_bar_prev = np.append(1.0, alpha_bar[:-1])
    posterior_var = beta * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    for array in (beta, alpha, alpha_bar, posterior_var):
        array.setflags(write=False)
    return NoiseSchedule(beta, alpha, alpha_bar, posterior_var, float(beta_start), float(beta_end))


def _as_array(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _like_input(template: Any, values: np.ndarray) -> Any:
    if isinstance(template, Field2D):
        return template.like(values)
    return values


def _per_sample(coef: np.ndarray, ndim: int) -> np.ndarray:
    # scalar coefficients broadcast as-is; per-sample (B,) coefficients over (B, H, W)
    if coef.ndim == 0:
        return coef
    return coef.reshape(coef.shape + (1,) * (ndim - coef.ndim))


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(a.shape, b.shape, what)


def forward_sample(x0: Any, t: Steps, eps: Any, sched: NoiseSchedule) -> Any:
    """Closed-form marginal q(x_t | x_0): sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * eps."""
    x0_arr, eps_arr = _as_array(x0), _as_array(eps)
    _check_same_shape(x0_arr, eps_arr, "eps")
    ab = _per_sample(sched.alpha_bar[sched.check_step(t)], x0_arr.ndim)
    return _like_input(x0, np.sqrt(ab) * x0_arr + np.sqrt(1.0 - ab) * eps_arr)


def iterated_forward(
    x0: Any, t: int, rng_stream: Union[np.random.Generator, Iterable[Any]], sched: NoiseSchedule
) -> Any:
    """Applies the one-step transition q(x_s | x_{s-1}) for s = 1..t.

    `rng_stream` is either a generator (fresh standard-normal draws) or an iterable of
    injected noise arrays, one per step.
    """
    sched.check_step(t)
    x = _as_array(x0)
    draws = None if isinstance(rng_stream, np.random.Generator) else iter(rng_stream)
    for s in range(1, int(t) + 1):
        if draws is None:
            eps = rng_stream.standard_normal(x.shape)
        else:
            eps = _as_array(next(draws))
            _check_same_shape(x, eps, "eps")
        beta = sched.beta[s - 1]
        x = np.sqrt(1.0 - beta) * x + np.sqrt(beta) * eps
    return _like_input(x0, x)


def training_loss(
    model: NoisePredictor, x0: Any, cond: Conditioning, t: Steps, eps: Any, sched: NoiseSchedule
) -> float:
    """Mean squared error between the injected noise and the model's prediction."""
    xt = _as_array(forward_sample(_as_array(x0), t, eps, sched))
    predicted = _as_array(model.predict_noise(xt, cond, t))
    eps_arr = _as_array(eps)
    _check_same_shape(eps_arr, predicted, "predicted noise")
    return float(np.mean((eps_arr - predicted) ** 2))


def reverse_step(
    model: NoisePredictor, xt: Any, t: Steps, cond: Conditioning, z: Optional[Any], sched: NoiseSchedule
) -> Any:
    """One ancestral step x_t -> x_{t-1} with the posterior variance of the schedule."""
    index = sched.check_step(t)
    xt_arr = _as_array(xt)
    eps_hat = _as_array(model.predict_noise(xt_arr, cond, t))
    _check_same_shape(xt_arr, eps_hat, "predicted noise")
    beta = _per_sample(sched.beta[index], xt_arr.ndim)
    ab = _per_sample(sched.alpha_bar[index], xt_arr.ndim)
    mean = (xt_arr - beta / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(1.0 - beta)
    sigma = np.sqrt(_per_sample(sched.posterior_var[index], xt_arr.ndim))
    if z is None:
        return _like_input(xt, mean)
    z_arr = _as_array(z)
    _check_same_shape(xt_arr, z_arr, "z")
    return _like_input(xt, mean + sigma * z_arr)


def denormalize_wind(x: np.ndarray, stats: NormStats) -> np.ndarray:
    return x * stats.wind_std + stats.wind_mean


def sample(
    model: NoisePredictor,
    cond: Conditioning,
    sched: NoiseSchedule,
    seed: int,
    *,
    patch_id: int = 0,
    progress: bool = False,
) -> Field2D:
    """Generates a high-resolution wind field by ancestral sampling from pure noise.

    The random stream is private to ``(seed, patch_id)``, so calls are reproducible and
    independent of each other.
    """
    rng = np.random.default_rng([seed, patch_id])
    shape = cond.shape
    x = rng.standard_normal(shape)
    steps = tqdm(range(sched.T, 0, -1), desc="sampling", total=sched.T, disable=not progress)
    for t in steps:
        z = rng.standard_normal(shape) if t > 1 else None
        x = reverse_step(model, x, t, cond, z, sched)
    logger.debug("[diffusion.sample] seed=%d patch=%d finished %d steps", seed, patch_id, sched.T)
    wind = np.maximum(denormalize_wind(x, model.norm_stats), 0.0)
    return Field2D(wind, cond.cell_size_km)

"""A small convolutional noise-prediction network with manual backpropagation.

The network is a flat stack of same-padded convolutions. Every layer but the last is
followed by a SiLU; a learned per-step embedding is added to the first layer's
pre-activation. Input channels are ``[x_t, upsampled LR]`` plus terrain when the model
is terrain-conditioned; the single output channel is the predicted noise.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, NamedTuple, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit
from tqdm import tqdm

from .diffusion import Conditioning, NoiseSchedule, NormStats, Steps, forward_sample, make_linear_schedule
from .exceptions import EmptyDataset, ShapeMismatch, StepOutOfRange, TrainingDiverged
from .grid import Field2D, PatchPair, upsample_bilinear

logger = logging.getLogger(__name__)

Padding = Literal["zeros", "wrap"]
PADDINGS = ("zeros", "wrap")


@dataclass
class ConvLayer:
    weight: np.ndarray  # (out, in, k, k)
    bias: np.ndarray  # (out,)

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[-1]


@dataclass
class DenoiserModel:
    layers: List[ConvLayer]
    time_embedding: np.ndarray  # (T, channels out of the first layer)
    norm_stats: NormStats = field(default_factory=NormStats)
    padding: Padding = "zeros"

    @property
    def in_channels(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def use_terrain(self) -> bool:
        return self.in_channels == 3

    @property
    def T(self) -> int:
        return self.time_embedding.shape[0]

    def parameters(self) -> Dict[str, np.ndarray]:
        """Returns every trainable array by name; the arrays are the model's own storage."""
        params = {}
        for i, layer in enumerate(self.layers):
            params[f"layers.{i}.weight"] = layer.weight
            params[f"layers.{i}.bias"] = layer.bias
        params["time_embedding"] = self.time_embedding
        return params

    def copy(self) -> "DenoiserModel":
        layers = [ConvLayer(layer.weight.copy(), layer.bias.copy()) for layer in self.layers]
        return DenoiserModel(layers, self.time_embedding.copy(), self.norm_stats, self.padding)

    def predict_noise(self, xt: np.ndarray, cond: Conditioning, t: Steps) -> np.ndarray:
        return forward(self, xt, cond, t)


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 4
    hidden_channels: int = 32
    kernel_size: int = 3
    padding: Padding = "zeros"
    use_terrain: bool = True

    def validate(self) -> None:
        if self.layers < 1 or self.hidden_channels < 1:
            raise ValueError("layers and hidden_channels must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.padding not in PADDINGS:
            raise ValueError(f"padding must be one of {PADDINGS}, got {self.padding!r}")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    batch_size: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    log_every: int = 100

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("batch_size must be >= 1 and iterations >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ValueError("invalid adaptive-moment hyperparameters")


class TrainingBatch(NamedTuple):
    x0: np.ndarray  # (B, H, W), normalized
    cond: Conditioning  # (B, H, W) channels
    t: np.ndarray  # (B,) steps in [1, T]
    eps: np.ndarray  # (B, H, W)


class TrainResult(NamedTuple):
    model: DenoiserModel
    losses: List[float]
    schedule: NoiseSchedule


def init_model(
    T: int,
    config: ModelConfig = ModelConfig(),
    norm_stats: NormStats = NormStats(),
    seed: int = 0,
) -> DenoiserModel:
    """He-initialized conv stack; the output layer starts small so early predictions are near zero."""
    config.validate()
    rng = np.random.default_rng([seed, 0])
    in_channels = 3 if config.use_terrain else 2
    widths = [in_channels] + [config.hidden_channels] * (config.layers - 1) + [1]
    k = config.kernel_size
    layers = []
    for i, (c_in, c_out) in enumerate(zip(widths[:-1], widths[1:])):
        scale = np.sqrt(2.0 / (c_in * k * k))
        if i == config.layers - 1:
            scale *= 0.1
        layers.append(ConvLayer(rng.standard_normal((c_out, c_in, k, k)) * scale, np.zeros(c_out)))
    time_embedding = rng.standard_normal((T, widths[1])) * 0.1
    return DenoiserModel(layers, time_embedding, norm_stats, config.padding)


def _silu(z: np.ndarray) -> np.ndarray:
    return z * expit(z)


def _silu_grad(z: np.ndarray) -> np.ndarray:
    s = expit(z)
    return s + z * s * (1.0 - s)


def _pad(x: np.ndarray, p: int, padding: str) -> np.ndarray:
    if p == 0:
        return x
    mode = "wrap" if padding == "wrap" else "constant"
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode=mode)


def _unpad_grad(dxp: np.ndarray, p: int, padding: str, H: int, W: int) -> np.ndarray:
    if p == 0:
        return dxp
    if padding != "wrap":
        return dxp[:, :, p : p + H, p : p + W]
    # fold the halo back onto the cells it was copied from
    row_index = (np.arange(H + 2 * p) - p) % H
    col_index = (np.arange(W + 2 * p) - p) % W
    rows = np.zeros(dxp.shape[:2] + (H, W + 2 * p))
    np.add.at(rows, (slice(None), slice(None), row_index), dxp)
    dx = np.zeros(dxp.shape[:2] + (H, W))
    np.add.at(dx, (slice(None), slice(None), slice(None), col_index), rows)
    return dx


def _conv_forward(x: np.ndarray, layer: ConvLayer, padding: str) -> Tuple[np.ndarray, np.ndarray]:
    B, C, H, W = x.shape
    c_out, _, k, _ = layer.weight.shape
    windows = sliding_window_view(_pad(x, k // 2, padding), (k, k), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(B * H * W, C * k * k)
    out = cols @ layer.weight.reshape(c_out, -1).T + layer.bias
    return out.reshape(B, H, W, c_out).transpose(0, 3, 1, 2), cols


def _conv_backward(
    dout: np.ndarray, cols: np.ndarray, x_shape: tuple, layer: ConvLayer, padding: str
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    B, C, H, W = x_shape
    c_out, _, k, _ = layer.weight.shape
    p = k // 2
    dflat = dout.transpose(0, 2, 3, 1).reshape(B * H * W, c_out)
    dweight = (dflat.T @ cols).reshape(layer.weight.shape)
    dbias = dflat.sum(axis=0)
    dcols = (dflat @ layer.weight.reshape(c_out, -1)).reshape(B, H, W, C, k, k)
    dxp = np.zeros((B, C, H + 2 * p, W + 2 * p))
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + H, j : j + W] += dcols[..., i, j].transpose(0, 3, 1, 2)
    return _unpad_grad(dxp, p, padding, H, W), dweight, dbias


def stack_channels(model: DenoiserModel, xt: np.ndarray, cond: Conditioning) -> np.ndarray:
    """Stacks [x_t, lr, (terrain)] into a (B, C, H, W) input tensor."""
    xt = np.asarray(xt, dtype=np.float64)
    if xt.ndim == 2:
        xt = xt[None]
    channels = [xt, cond.lr_upsampled]
    if model.use_terrain:
        if cond.terrain is None:
            raise ValueError("terrain-conditioned model needs a terrain channel")
        channels.append(cond.terrain)
    stacked = []
    for channel in channels:
        channel = np.asarray(channel, dtype=np.float64)
        if channel.shape[-2:] != xt.shape[-2:]:
            raise ShapeMismatch(xt.shape[-2:], channel.shape[-2:], "conditioning")
        stacked.append(np.broadcast_to(channel, xt.shape))
    return np.stack(stacked, axis=1)


def _step_index(model: DenoiserModel, t: Steps, batch: int) -> np.ndarray:
    steps = np.broadcast_to(np.asarray(t, dtype=np.int64), (batch,))
    if steps.min() < 1 or steps.max() > model.T:
        raise StepOutOfRange(int(steps.min() if steps.min() < 1 else steps.max()), model.T)
    return steps - 1


def _run(model: DenoiserModel, x: np.ndarray, t_index: np.ndarray) -> Tuple[np.ndarray, list]:
    cache = []
    h = x
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        z, cols = _conv_forward(h, layer, model.padding)
        if i == 0:
            z = z + model.time_embedding[t_index][:, :, None, None]
        cache.append((h.shape, cols, z))
        h = z if i == last else _silu(z)
    return h[:, 0], cache


def forward(model: DenoiserModel, xt: Any, cond: Conditioning, t: Steps) -> Any:
    """Predicted noise for x_t; output has the spatial (and batch) shape of `xt`."""
    x = stack_channels(model, xt, cond)
    predicted, _ = _run(model, x, _step_index(model, t, x.shape[0]))
    if isinstance(xt, Field2D):
        return xt.like(predicted[0])
    return predicted[0] if np.ndim(xt) == 2 else predicted


def backward(
    model: DenoiserModel, batch: TrainingBatch, sched: NoiseSchedule
) -> Tuple[Dict[str, np.ndarray], float]:
    """Gradients of the batch-mean noise-prediction loss for every parameter, and the loss."""
    x0 = np.asarray(batch.x0, dtype=np.float64)
    eps = np.asarray(batch.eps, dtype=np.float64)
    if x0.ndim == 2:
        x0, eps = x0[None], eps[None]
    t = np.broadcast_to(np.asarray(batch.t, dtype=np.int64), (x0.shape[0],))
    xt = forward_sample(x0, t, eps, sched)
    x = stack_channels(model, xt, batch.cond)
    t_index = _step_index(model, t, x.shape[0])
    predicted, cache = _run(model, x, t_index)

    diff = predicted - eps
    loss = float(np.mean(diff**2))
    grad = (2.0 / diff.size) * diff[:, None]

    grads: Dict[str, np.ndarray] = {}
    last = len(model.layers) - 1
    for i in range(last, -1, -1):
        x_shape, cols, z = cache[i]
        if i != last:
            grad = grad * _silu_grad(z)
        if i == 0:
            embedding_grad = np.zeros_like(model.time_embedding)
            np.add.at(embedding_grad, t_index, grad.sum(axis=(2, 3)))
            grads["time_embedding"] = embedding_grad
        grad, grads[f"layers.{i}.weight"], grads[f"layers.{i}.bias"] = _conv_backward(
            grad, cols, x_shape, model.layers[i], model.padding
        )
    return grads, loss


class AdamOptimizer:
    """Adaptive-moment optimizer with bias correction; updates parameters in place."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, param in params.items():
            g = grads[name]
            m = self._m.setdefault(name, np.zeros_like(param))
            v = self._v.setdefault(name, np.zeros_like(param))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)


def compute_norm_stats(dataset: Sequence[PatchPair]) -> NormStats:
    wind = np.concatenate([pair.hr.values.ravel() for pair in dataset])
    terrain = np.concatenate([pair.terrain.values.ravel() for pair in dataset])
    wind_std = float(wind.std()) or 1.0
    terrain_std = float(terrain.std()) or 1.0
    return NormStats(float(wind.mean()), wind_std, float(terrain.mean()), terrain_std)


def _training_arrays(dataset: Sequence[PatchPair], stats: NormStats) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    shape = dataset[0].hr.shape
    for pair in dataset:
        if pair.hr.shape != shape:
            raise ShapeMismatch(shape, pair.hr.shape, "training patch")
    x0 = np.stack([pair.hr.values for pair in dataset])
    lr = np.stack([upsample_bilinear(pair.lr, pair.factor).values for pair in dataset])
    terrain = np.stack([pair.terrain.values for pair in dataset])
    return (
        (x0 - stats.wind_mean) / stats.wind_std,
        (lr - stats.wind_mean) / stats.wind_std,
        (terrain - stats.terrain_mean) / stats.terrain_std,
    )


def train(
    dataset: Sequence[PatchPair],
    cfg: TrainConfig = TrainConfig(),
    model_config: ModelConfig = ModelConfig(),
    *,
    progress: bool = False,
) -> TrainResult:
    """Stochastic training loop: sample patches, steps and noise, then take an Adam step.

    Deterministic for a fixed `cfg.seed` in single-threaded execution.
    """
    if not dataset:
        raise EmptyDataset()
    cfg.validate()
    sched = make_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    stats = compute_norm_stats(dataset)
    x0_all, lr_all, terrain_all = _training_arrays(dataset, stats)
    cell_size_km = dataset[0].hr.cell_size_km

    model = init_model(cfg.T, model_config, stats, cfg.seed)
    optimizer = AdamOptimizer(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    rng = np.random.default_rng([cfg.seed, 1])
    n, height, width = x0_all.shape
    losses: List[float] = []

    logger.info("[denoiser.train] %d patches of %dx%d, %d iterations", n, height, width, cfg.iterations)
    for iteration in tqdm(range(cfg.iterations), desc="training", disable=not progress):
        index = rng.integers(0, n, size=cfg.batch_size)
        t = rng.integers(1, cfg.T + 1, size=cfg.batch_size)
        eps = rng.standard_normal((cfg.batch_size, height, width))
        terrain = terrain_all[index] if model.use_terrain else None
        batch = TrainingBatch(x0_all[index], Conditioning(lr_all[index], terrain, cell_size_km), t, eps)

        grads, loss = backward(model, batch, sched)
        optimizer.step(model.parameters(), grads)
        if not all(np.all(np.isfinite(p)) for p in model.parameters().values()):
            raise TrainingDiverged(iteration + 1)
        losses.append(loss)
        if cfg.log_every and (iteration + 1) % cfg.log_every == 0:
            recent = float(np.mean(losses[-cfg.log_every :]))
            logger.info("[denoiser.train] iteration %d/%d loss %.5f", iteration + 1, cfg.iterations, recent)
    return TrainResult(model, losses, sched)

import os
from typing import Callable
from unittest.mock import MagicMock

import numpy as np
import pytest

from terrawind import Field2D, ModelConfig, NormStats, StationObs, init_model, make_linear_schedule, upsample_bilinear
from terrawind.io import GRID_HEADER


class Helpers:
    @staticmethod
    def check_grid_file(path, rows, cols):
        assert os.path.exists(path), f"{path} does not exists"
        assert os.path.getsize(path) == GRID_HEADER.size + rows * cols * 4
        with open(path, "rb") as f:
            assert f.read(4) == b"WSRG"

    @staticmethod
    def create_tmp_filename(tmp_dir, filename):
        if not os.path.exists(tmp_dir):
            os.makedirs(tmp_dir)
        return os.path.join(tmp_dir, filename)

    @staticmethod
    def random_field(rng, rows, cols, low=0.0, high=10.0, cell_size_km=1.0):
        return Field2D(rng.uniform(low, high, size=(rows, cols)), cell_size_km)

    @staticmethod
    def station(row, col, speed=5.0, height=80.0, id=None):
        return StationObs(id or f"S{row}_{col}", row, col, height, speed)


@pytest.fixture(scope="session")
def helpers():
    return Helpers


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="module")
def tiny_schedule():
    return make_linear_schedule(10)


@pytest.fixture()
def tiny_model():
    return init_model(10, ModelConfig(layers=2, hidden_channels=4), NormStats(), seed=0)


@pytest.fixture()
def stub_predictor():
    """A noise predictor that always predicts zero noise."""
    predictor = MagicMock()
    predictor.norm_stats = NormStats()
    predictor.use_terrain = True
    predictor.predict_noise.side_effect = lambda xt, cond, t: np.zeros(np.shape(xt))
    return predictor


@pytest.fixture()
def client():
    """Backend stand-in shared by the engine tests: resampling and sampling are cheap and deterministic."""
    client = MagicMock()
    client.use_terrain = True
    client.resample.side_effect = lambda field, factor, method: upsample_bilinear(field, factor)
    client.sample.side_effect = lambda lr_up, terrain, seed, patch_id=0: lr_up.like(lr_up.values + seed + 0.5 * patch_id)
    client.assimilate.side_effect = lambda lr, terrain, stations, cfg, seed, patch_id=0: terrain.like(
        np.full(terrain.shape, float(len(stations)))
    )
    return client


@pytest.fixture()
def downscaler(downscaler_cls, client):
    if isinstance(client, Callable) and not isinstance(client, MagicMock):
        client = client()
    return downscaler_cls(client=client)

import numpy as np
import pytest

from terrawind import DiffusionClient, DiffusionDownscaler, Field2D, ModelConfig, RadiusConfig, init_model
from terrawind import make_linear_schedule, upsample_bilinear
from terrawind import io
from terrawind.exceptions import ShapeMismatch

from . import BaseDownscalerTest, lr_patches, terrain_patches


def create_client(use_terrain=True):
    model = init_model(4, ModelConfig(layers=2, hidden_channels=3, use_terrain=use_terrain), seed=5)
    return DiffusionClient(model, make_linear_schedule(4))


@pytest.mark.parametrize("downscaler_cls", [DiffusionDownscaler])
class TestDiffusionOffline(BaseDownscalerTest):
    def test_conditions_on_the_upsampled_field(self, downscaler, client):
        (lr,), (terrain,) = lr_patches(1), terrain_patches(1)
        downscaler.downscale(lr, terrain, seed=2, patch_id=1)
        lr_up, passed_terrain, seed, patch_id = client.sample.call_args[0]
        np.testing.assert_array_equal(lr_up.values, upsample_bilinear(lr, 4).values)
        assert passed_terrain is terrain and (seed, patch_id) == (2, 1)

    def test_patch_ids_follow_input_order(self, downscaler):
        results = downscaler.downscale_many(lr_patches(3), terrain_patches(3), seed=0, workers=2)
        for i, (lr, out) in enumerate(zip(lr_patches(3), results)):
            np.testing.assert_allclose(out.values, upsample_bilinear(lr, 4).values + 0.5 * i)

    def test_assimilate_forwards_stations(self, downscaler, helpers):
        (lr,), (terrain,) = lr_patches(1), terrain_patches(1)
        out = downscaler.assimilate(lr, terrain, [helpers.station(1, 1), helpers.station(5, 5)])
        assert np.all(out.values == 2.0)


@pytest.mark.parametrize("downscaler_cls,client", [(DiffusionDownscaler, create_client)])
class TestDiffusionModel(BaseDownscalerTest):
    def test_no_stations_matches_plain_downscale(self, downscaler):
        (lr,), (terrain,) = lr_patches(1), terrain_patches(1)
        plain = downscaler.downscale(lr, terrain, seed=11)
        assimilated = downscaler.assimilate(lr, terrain, [], RadiusConfig(), seed=11)
        np.testing.assert_array_equal(plain.values, assimilated.values)

    def test_reproducible(self, downscaler):
        (lr,), (terrain,) = lr_patches(1), terrain_patches(1)
        first = downscaler.downscale(lr, terrain, seed=1)
        np.testing.assert_array_equal(first.values, downscaler.downscale(lr, terrain, seed=1).values)
        assert not np.array_equal(first.values, downscaler.downscale(lr, terrain, seed=2).values)
        assert first.values.min() >= 0.0

    def test_terrain_required(self, downscaler):
        (lr,) = lr_patches(1)
        with pytest.raises(ValueError):
            downscaler.downscale(lr)

    def test_terrain_shape(self, downscaler):
        (lr,) = lr_patches(1)
        with pytest.raises(ShapeMismatch):
            downscaler.downscale(lr, Field2D(np.zeros((12, 12))))


def test_terrain_free_model_runs_without_terrain():
    downscaler = DiffusionDownscaler(create_client(use_terrain=False))
    (lr,) = lr_patches(1)
    assert downscaler.downscale(lr, seed=0).shape == (16, 16)


def test_from_checkpoint(tmp_path):
    client = create_client()
    path = tmp_path / "model.wsrm"
    io.save_checkpoint(client.model, client.schedule, path)
    loaded = DiffusionClient.from_checkpoint(path)
    (lr,), (terrain,) = lr_patches(1), terrain_patches(1)
    expected = DiffusionDownscaler(client).downscale(lr, terrain, seed=4)
    np.testing.assert_array_equal(DiffusionDownscaler(loaded).downscale(lr, terrain, seed=4).values, expected.values)

import os

import numpy as np
import pytest

from terrawind import Field2D


def lr_patches(n, size=4, seed=0):
    rng = np.random.default_rng(seed)
    return [Field2D(rng.uniform(2, 12, size=(size, size)), 4.0) for _ in range(n)]


def terrain_patches(n, size=16, seed=1):
    rng = np.random.default_rng(seed)
    return [Field2D(rng.uniform(0, 400, size=(size, size)), 1.0) for _ in range(n)]


class BaseDownscalerTest:
    def test_downscale_to_file(self, downscaler, helpers, tmp_path):
        file_path = helpers.create_tmp_filename(tmp_path, "hr.wsrg")
        assert not os.path.exists(file_path)
        (lr,) = lr_patches(1)
        (terrain,) = terrain_patches(1)
        result = downscaler.downscale_to_file(lr, file_path, terrain, seed=3)
        helpers.check_grid_file(file_path, 16, 16)
        assert result.shape == (16, 16)

    def test_supported_methods(self, downscaler):
        methods = downscaler.supported_methods()
        assert methods
        assert set(methods) <= {"bilinear", "bicubic", "diffusion"}

    def test_parallel_matches_sequential(self, downscaler):
        lrs, terrains = lr_patches(5), terrain_patches(5)
        sequential = downscaler.downscale_many(lrs, terrains, seed=7)
        parallel = downscaler.downscale_many(lrs, terrains, seed=7, workers=3)
        assert len(parallel) == 5
        for a, b in zip(sequential, parallel):
            np.testing.assert_array_equal(a.values, b.values)

    def test_terrain_count_mismatch(self, downscaler):
        pytest.raises(ValueError, lambda: downscaler.downscale_many(lr_patches(2), terrain_patches(1)))

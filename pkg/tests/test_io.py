import json
import struct

import numpy as np
import pytest

from terrawind import EvalReport, Field2D, ModelConfig, RunConfig, init_model, make_linear_schedule
from terrawind import io
from terrawind.diffusion import NormStats
from terrawind.exceptions import BadMagic, CheckpointError, DuplicateStation, GridFormatError, TruncatedPayload
from terrawind.exceptions import VersionMismatch


class TestGridFormat:
    def test_round_trip(self, tmp_path, helpers, rng):
        field = Field2D(rng.uniform(0, 20, size=(5, 7)).astype(np.float32), 2.5)
        path = tmp_path / "field.wsrg"
        io.write_grid(field, path)
        helpers.check_grid_file(path, 5, 7)
        loaded = io.read_grid(path)
        np.testing.assert_array_equal(loaded.values, field.values)
        assert loaded.cell_size_km == 2.5

    def test_header_layout(self):
        data = io.grid_to_bytes(Field2D(np.ones((2, 3)), 4.0))
        assert io.GRID_HEADER.size == 22
        assert struct.unpack_from("<4sHIId", data) == (b"WSRG", 1, 2, 3, 4.0)
        assert np.frombuffer(data[22:], dtype="<f4").tolist() == [1.0] * 6

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            io.grid_from_bytes(b"NOPE" + bytes(30))

    def test_version_mismatch(self):
        data = bytearray(io.grid_to_bytes(Field2D(np.ones((2, 2)))))
        data[4:6] = struct.pack("<H", 2)
        with pytest.raises(VersionMismatch):
            io.grid_from_bytes(bytes(data))

    def test_truncated(self):
        data = io.grid_to_bytes(Field2D(np.ones((3, 3))))
        with pytest.raises(TruncatedPayload):
            io.grid_from_bytes(data[:-1])
        with pytest.raises(TruncatedPayload):
            io.grid_from_bytes(data[:10])

    def test_trailing_bytes(self):
        with pytest.raises(GridFormatError):
            io.grid_from_bytes(io.grid_to_bytes(Field2D(np.ones((2, 2)))) + b"\x00")

    def test_write_is_atomic(self, tmp_path):
        path = tmp_path / "nested" / "out.wsrg"
        io.write_grid(Field2D(np.zeros((2, 2))), path)
        assert [p.name for p in path.parent.iterdir()] == ["out.wsrg"]


class TestStations:
    def test_round_trip(self, tmp_path, helpers):
        stations = [helpers.station(1, 2, 5.25), helpers.station(7, 0, 0.1, height=10.0, id="mast")]
        path = tmp_path / "stations.csv"
        io.write_stations(stations, path)
        assert path.read_text().splitlines()[0] == "id,row,col,height_m,speed_mps"
        assert io.read_stations(path) == stations

    def test_header_only_is_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        io.write_stations([], path)
        assert io.read_stations(path) == []

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("row,col,speed\n1,2,3\n")
        with pytest.raises(GridFormatError):
            io.read_stations(path)

    def test_duplicate_cell(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("id,row,col,height_m,speed_mps\na,1,1,80,5\nb,1,1,80,6\n")
        with pytest.raises(DuplicateStation):
            io.read_stations(path)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        model = init_model(6, ModelConfig(layers=3, hidden_channels=4, padding="wrap"), NormStats(7.0, 2.0, 100.0, 50.0))
        sched = make_linear_schedule(6, 2e-4, 0.03)
        path = tmp_path / "model.wsrm"
        io.save_checkpoint(model, sched, path)
        loaded, loaded_sched = io.load_checkpoint(path)
        assert loaded.padding == "wrap"
        assert loaded.norm_stats == model.norm_stats
        assert loaded_sched.T == 6 and loaded_sched.beta_end == 0.03
        np.testing.assert_array_equal(loaded_sched.beta, sched.beta)
        for name, p in model.parameters().items():
            np.testing.assert_array_equal(loaded.parameters()[name], p)

    def test_terrain_free_model(self, tmp_path):
        model = init_model(4, ModelConfig(layers=2, hidden_channels=2, use_terrain=False))
        path = tmp_path / "model.wsrm"
        io.save_checkpoint(model, make_linear_schedule(4), path)
        assert not io.load_checkpoint(path)[0].use_terrain

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "grid.wsrg"
        io.write_grid(Field2D(np.ones((2, 2))), path)
        with pytest.raises(CheckpointError):
            io.load_checkpoint(path)

    def test_truncated_payload(self, tmp_path, tiny_model, tiny_schedule):
        path = tmp_path / "model.wsrm"
        io.save_checkpoint(tiny_model, tiny_schedule, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CheckpointError):
            io.load_checkpoint(path)


def test_write_losses(tmp_path):
    path = tmp_path / "loss.csv"
    io.write_losses([1.5, 0.25], path)
    assert path.read_text() == "iteration,loss\n1,1.5\n2,0.25\n"


def test_report_round_trip(tmp_path):
    report = EvalReport(0.5, 0.75, 0.9, float("inf"), 0.95, 4, 10.0)
    path = tmp_path / "report.csv"
    io.write_report(report, path)
    assert io.read_report(path) == report
    assert "psnr_db=inf" in (tmp_path / "report.txt").read_text()


def test_metadata(tmp_path):
    path = tmp_path / "run.meta.json"
    config = RunConfig().to_dict()
    io.write_metadata(path, "gen", ["gen", "--out", "data"], config, {"synth": 0})
    record = io.read_metadata(path)
    assert record["command"] == "gen"
    assert record["argv"] == ["gen", "--out", "data"]
    assert record["config"] == json.loads(json.dumps(config))
    assert record["seeds"] == {"synth": 0}
    assert set(record["versions"]) == {"terrawind", "numpy", "scipy", "python"}

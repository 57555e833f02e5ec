"""On-disk formats: binary grid files, station CSVs, model checkpoints, loss and report
CSVs, and run metadata. Every writer is atomic (temp file + rename)."""
import csv
import io
import json
import logging
import platform
import struct
from dataclasses import asdict
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np
import scipy

from .denoiser import ConvLayer, DenoiserModel
from .diffusion import NoiseSchedule, NormStats, make_linear_schedule
from .engines.utils import PathLike, atomic_write_bytes, atomic_write_text
from .exceptions import (
    BadMagic,
    CheckpointError,
    DuplicateStation,
    GridFormatError,
    TruncatedPayload,
    VersionMismatch,
)
from .grid import Field2D
from .metrics import EvalReport
from .synthetic import StationObs

logger = logging.getLogger(__name__)

GRID_MAGIC = b"WSRG"
GRID_VERSION = 1
GRID_HEADER = struct.Struct("<4sHIId")  # magic, version, rows, cols, cell_size_km

CHECKPOINT_MAGIC = b"WSRM"
CHECKPOINT_VERSION = 1
_CHECKPOINT_PREFIX = struct.Struct("<4sHI")  # magic, version, JSON header length

STATION_FIELDS = ["id", "row", "col", "height_m", "speed_mps"]


def grid_to_bytes(field: Field2D) -> bytes:
    header = GRID_HEADER.pack(GRID_MAGIC, GRID_VERSION, field.rows, field.cols, field.cell_size_km)
    return header + field.values.astype("<f4").tobytes()


def grid_from_bytes(data: bytes) -> Field2D:
    magic = data[:4]
    if magic != GRID_MAGIC:
        raise BadMagic(magic)
    if len(data) < GRID_HEADER.size:
        raise TruncatedPayload(GRID_HEADER.size, len(data))
    _, version, rows, cols, cell_size_km = GRID_HEADER.unpack_from(data)
    if version != GRID_VERSION:
        raise VersionMismatch(version, GRID_VERSION)
    payload = data[GRID_HEADER.size :]
    expected = rows * cols * 4
    if len(payload) < expected:
        raise TruncatedPayload(expected, len(payload))
    if len(payload) > expected:
        raise GridFormatError(f"{len(payload) - expected} trailing bytes after grid payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    return Field2D(values, cell_size_km)


def write_grid(field: Field2D, path: PathLike) -> None:
    atomic_write_bytes(path, grid_to_bytes(field))


def read_grid(path: PathLike) -> Field2D:
    return grid_from_bytes(Path(path).read_bytes())


def read_stations(path: PathLike) -> List[StationObs]:
    """Parses a station CSV; a header-only file yields an empty list."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != STATION_FIELDS:
            raise GridFormatError(f"station file {path} must start with header {','.join(STATION_FIELDS)}")
        stations = []
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(STATION_FIELDS):
                raise GridFormatError(f"{path}:{line_no}: expected {len(STATION_FIELDS)} columns, got {len(row)}")
            station = StationObs(row[0], int(row[1]), int(row[2]), float(row[3]), float(row[4]))
            if station.cell in seen:
                raise DuplicateStation(station.row, station.col)
            seen.add(station.cell)
            stations.append(station)
    return stations


def write_stations(stations: Sequence[StationObs], path: PathLike) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(STATION_FIELDS)
    for s in stations:
        writer.writerow([s.id, s.row, s.col, repr(s.height_m), repr(s.speed_mps)])
    atomic_write_text(path, buffer.getvalue())


def save_checkpoint(model: DenoiserModel, sched: NoiseSchedule, path: PathLike) -> None:
    """Versioned header plus little-endian float64 parameters in header order."""
    params = model.parameters()
    header = {
        "padding": model.padding,
        "in_channels": model.in_channels,
        "params": [[name, list(array.shape)] for name, array in params.items()],
        "schedule": {"T": sched.T, "beta_start": sched.beta_start, "beta_end": sched.beta_end},
        "norm_stats": asdict(model.norm_stats),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(array, dtype="<f8").tobytes() for array in params.values())
    prefix = _CHECKPOINT_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes))
    atomic_write_bytes(path, prefix + header_bytes + payload)
    logger.info("[io.save_checkpoint] wrote %d parameters to %s", sum(a.size for a in params.values()), path)


def load_checkpoint(path: PathLike) -> Tuple[DenoiserModel, NoiseSchedule]:
    data = Path(path).read_bytes()
    if len(data) < _CHECKPOINT_PREFIX.size or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a model checkpoint")
    _, version, header_len = _CHECKPOINT_PREFIX.unpack_from(data)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported version {version}, expected {CHECKPOINT_VERSION}")
    start = _CHECKPOINT_PREFIX.size
    try:
        header = json.loads(data[start : start + header_len].decode("utf-8"))
        shapes = [(name, tuple(shape)) for name, shape in header["params"]]
        schedule = header["schedule"]
        norm_stats = NormStats(**header["norm_stats"])
        padding = header["padding"]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed header: {e}") from e

    payload = data[start + header_len :]
    expected = sum(int(np.prod(shape)) for _, shape in shapes) * 8
    if len(payload) != expected:
        raise CheckpointError(f"parameter payload is {len(payload)} bytes, expected {expected}")
    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in shapes:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += count * 8

    n_layers = sum(1 for name, _ in shapes if name.endswith(".weight"))
    try:
        layers = [ConvLayer(arrays[f"layers.{i}.weight"], arrays[f"layers.{i}.bias"]) for i in range(n_layers)]
        model = DenoiserModel(layers, arrays["time_embedding"], norm_stats, padding)
    except KeyError as e:
        raise CheckpointError(f"missing parameter {e}") from e
    if model.in_channels != header.get("in_channels"):
        raise CheckpointError("in_channels does not match the first layer")
    sched = make_linear_schedule(schedule["T"], schedule["beta_start"], schedule["beta_end"])
    if sched.T != model.T:
        raise CheckpointError(f"schedule has {sched.T} steps but the time embedding has {model.T}")
    return model, sched


def write_losses(losses: Sequence[float], path: PathLike) -> None:
    lines = ["iteration,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(losses, start=1)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_report(report: EvalReport, path: PathLike) -> None:
    """CSV header plus one row; a ``key=value`` twin is written next to it with a .txt suffix."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(EvalReport.FIELDS)
    writer.writerow(report.csv_row())
    atomic_write_text(path, buffer.getvalue())
    atomic_write_text(Path(path).with_suffix(".txt"), report.to_text())


def read_report(path: PathLike) -> EvalReport:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if len(rows) != 1:
        raise GridFormatError(f"report {path} must hold exactly one row, found {len(rows)}")
    row = rows[0]
    values: Dict[str, Any] = {key: float(row[key]) for key in EvalReport.FIELDS if key != "n_pixels"}
    return EvalReport(n_pixels=int(row["n_pixels"]), **values)


def versions() -> Dict[str, str]:
    try:
        terrawind_version = metadata.version("terrawind")
    except metadata.PackageNotFoundError:
        terrawind_version = "unknown"
    return {
        "terrawind": terrawind_version,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_metadata(
    path: PathLike, command: str, argv: Sequence[str], config: Mapping[str, Any], seeds: Mapping[str, int]
) -> None:
    record = {
        "command": command,
        "argv": list(argv),
        "config": dict(config),
        "seeds": dict(seeds),
        "versions": versions(),
    }
    atomic_write_text(path, json.dumps(record, indent=2, sort_keys=True) + "\n")


def read_metadata(path: PathLike) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)

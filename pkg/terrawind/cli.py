"""Command-line pipeline: gen -> train -> downscale / assimilate -> eval, plus the
interpolation baseline.

Every command writes ``<out>.meta.json`` (``metadata.json`` inside the output directory
for ``gen``) holding the argv, the fully defaulted configuration and the seeds. Passing
such a metadata file back as ``--config`` reproduces the run.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from . import io
from .benchmark import scene_patches
from .config import RunConfig
from .denoiser import train
from .engines.diffusion import DiffusionClient, DiffusionDownscaler
from .engines.interp import InterpClient, InterpDownscaler
from .exceptions import BaseError, ConfigError, EmptyDataset, UsageError
from .grid import coarsen
from .metrics import cdf_table, evaluate
from .profile import lift_stations
from .synthetic import generate_scene, sample_stations

logger = logging.getLogger(__name__)

PROG = "terrawind"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_json(path)


def _with_seed(cfg: RunConfig, seed: Optional[int]) -> RunConfig:
    if seed is None:
        return cfg
    return replace(cfg, seeds=replace(cfg.seeds, sample=seed))


def _seeds(cfg: RunConfig) -> Dict[str, int]:
    return {
        "synth": cfg.synth.seed,
        "train": cfg.train.seed,
        "sample": cfg.seeds.sample,
        "stations": cfg.seeds.stations,
    }


def _metadata(path: Path, command: str, argv: Sequence[str], cfg: RunConfig) -> None:
    io.write_metadata(path, command, argv, cfg.to_dict(), _seeds(cfg))


def _meta_path(out: str) -> Path:
    return Path(out + ".meta.json")


def cmd_gen(args: argparse.Namespace, argv: Sequence[str]) -> None:
    cfg = load_config(args.config)
    out = Path(args.out)
    n_stations = cfg.data.da_stations + cfg.data.holdout_stations
    for s in range(cfg.data.scenes):
        synth = replace(cfg.synth, seed=cfg.synth.seed + s)
        scene = generate_scene(synth)
        scene_dir = out / f"scene_{s:03d}"
        io.write_grid(scene.truth, scene_dir / "truth.wsrg")
        io.write_grid(scene.sim, scene_dir / "sim.wsrg")
        io.write_grid(scene.terrain, scene_dir / "terrain.wsrg")
        io.write_grid(coarsen(scene.sim, cfg.data.factor), scene_dir / "lr_sim.wsrg")
        stations = []
        if n_stations:
            stations = sample_stations(scene.truth, n_stations, cfg.seeds.stations + s, cfg.profile.hub_height_m)
        io.write_stations(stations[: cfg.data.da_stations], scene_dir / "stations.csv")
        io.write_stations(stations[cfg.data.da_stations :], scene_dir / "holdout.csv")
        logger.info("[cli.gen] wrote %s", scene_dir)
    _metadata(out / "metadata.json", "gen", argv, cfg)


def cmd_train(args: argparse.Namespace, argv: Sequence[str]) -> None:
    cfg = load_config(args.config)
    scene_dirs = sorted(p for p in Path(args.data).glob("scene_*") if p.is_dir())
    if not scene_dirs:
        raise EmptyDataset()
    dataset = []
    for scene_dir in scene_dirs:
        truth = io.read_grid(scene_dir / "truth.wsrg")
        terrain = io.read_grid(scene_dir / "terrain.wsrg")
        dataset.extend(scene_patches(truth, terrain, cfg))
    result = train(dataset, cfg.train_config(), cfg.model, progress=args.progress)
    io.save_checkpoint(result.model, result.schedule, args.out)
    io.write_losses(result.losses, Path(args.out).with_suffix(".loss.csv"))
    _metadata(_meta_path(args.out), "train", argv, cfg)


def _diffusion_downscaler(args: argparse.Namespace, lr_rows: int, terrain_rows: Optional[int], cfg: RunConfig) -> DiffusionDownscaler:
    client = DiffusionClient.from_checkpoint(args.model, progress=args.progress)
    factor = terrain_rows // lr_rows if terrain_rows is not None else cfg.data.factor
    return DiffusionDownscaler(client, factor)


def cmd_downscale(args: argparse.Namespace, argv: Sequence[str]) -> None:
    cfg = _with_seed(load_config(args.config), args.seed)
    lr = io.read_grid(args.lr)
    terrain = io.read_grid(args.terrain) if args.terrain else None
    downscaler = _diffusion_downscaler(args, lr.rows, terrain.rows if terrain else None, cfg)
    downscaler.downscale_to_file(lr, args.out, terrain, seed=cfg.seeds.sample)
    _metadata(_meta_path(args.out), "downscale", argv, cfg)


def cmd_assimilate(args: argparse.Namespace, argv: Sequence[str]) -> None:
    cfg = _with_seed(load_config(args.config), args.seed)
    lr = io.read_grid(args.lr)
    terrain = io.read_grid(args.terrain)
    stations = lift_stations(io.read_stations(args.stations), cfg.profile.hub_height_m, cfg.profile.params)
    downscaler = _diffusion_downscaler(args, lr.rows, terrain.rows, cfg)
    result = downscaler.assimilate(lr, terrain, stations, cfg.assimilation, seed=cfg.seeds.sample)
    io.write_grid(result, args.out)
    logger.info("[cli.assimilate] %d stations blended", len(stations))
    _metadata(_meta_path(args.out), "assimilate", argv, cfg)


def cmd_eval(args: argparse.Namespace, argv: Sequence[str]) -> None:
    cfg = load_config(args.config)
    pred = io.read_grid(args.pred)
    truth = io.read_grid(args.truth)
    mask = [s.cell for s in io.read_stations(args.holdout)] if args.holdout else None
    report = evaluate(pred, truth, mask, cfg.eval.resolve_range())
    io.write_report(report, args.out)

    table = cdf_table({"pred": pred, "truth": truth}, cfg.eval.probs)
    lines = ["prob,pred,truth"] + [
        f"{p!r},{table['pred'][i]!r},{table['truth'][i]!r}" for i, p in enumerate(cfg.eval.probs)
    ]
    io.atomic_write_text(Path(args.out).with_suffix(".cdf.csv"), "\n".join(lines) + "\n")
    _metadata(_meta_path(args.out), "eval", argv, cfg)


def cmd_baseline(args: argparse.Namespace, argv: Sequence[str]) -> None:
    cfg = load_config(args.config)
    factor = args.factor or cfg.data.factor
    downscaler = InterpDownscaler(InterpClient(), args.method, factor)
    downscaler.downscale_to_file(io.read_grid(args.lr), args.out)
    _metadata(_meta_path(args.out), "baseline", argv, cfg)


COMMANDS: Dict[str, Callable[[argparse.Namespace, Sequence[str]], None]] = {
    "gen": cmd_gen,
    "train": cmd_train,
    "downscale": cmd_downscale,
    "assimilate": cmd_assimilate,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Terrain-aware diffusion downscaling of wind fields.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--progress", action="store_true", help="show progress bars")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("gen", help="generate synthetic scenes")
    gen.add_argument("--config")
    gen.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="train the denoiser")
    tr.add_argument("--config")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True)

    ds = sub.add_parser("downscale", help="conditional super-resolution without observations")
    ds.add_argument("--model", required=True)
    ds.add_argument("--lr", required=True)
    ds.add_argument("--terrain")
    ds.add_argument("--config")
    ds.add_argument("--seed", type=int)
    ds.add_argument("--out", required=True)

    da = sub.add_parser("assimilate", help="super-resolution with station observations blended in")
    da.add_argument("--model", required=True)
    da.add_argument("--lr", required=True)
    da.add_argument("--terrain", required=True)
    da.add_argument("--stations", required=True)
    da.add_argument("--config")
    da.add_argument("--seed", type=int)
    da.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="score a prediction against truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--holdout", help="station CSV; restricts pixel metrics to its cells")
    ev.add_argument("--config")
    ev.add_argument("--out", required=True)

    bl = sub.add_parser("baseline", help="interpolation baseline")
    bl.add_argument("--method", default="bicubic")
    bl.add_argument("--lr", required=True)
    bl.add_argument("--factor", type=int)
    bl.add_argument("--config")
    bl.add_argument("--out", required=True)
    return parser


def _report_error(e: BaseException) -> int:
    message = " ".join(str(e).split())
    print(f"{PROG}: error={type(e).__name__} message={message}", file=sys.stderr)
    return 2 if isinstance(e, (ConfigError, UsageError)) else 1


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return _report_error(e)
    except SystemExit as e:  # --help
        return int(e.code or 0)

    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args, argv)
    except (BaseError, OSError, ValueError) as e:
        logger.debug("[cli.main] %s failed", args.command, exc_info=True)
        return _report_error(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())

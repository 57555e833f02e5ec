"""Runs the desk-scale synthetic benchmarks and prints a pass/fail table.

    python scripts/benchmark.py --config bench.json --seeds 20 --patches 50 -v

Besides the pass/fail checks it prints the radius sweep (dynamic vs fixed 2/4/6, per
terrain class) for the terrain and terrain-free models, and per-class wind-speed
deciles of truth, plain sampling and assimilated sampling.
"""
import argparse
import logging
import sys
import time

from terrawind.benchmark import (
    assimilation_benchmark,
    cdf_benchmark,
    radius_benchmark,
    super_resolution_benchmark,
    train_model,
)
from terrawind.cli import load_config

# desk-scale pass margins
MIN_BIAS_REDUCTION_PERCENT = 10.0
MIN_PSNR_GAIN_DB = 0.5
MIN_SSIM_GAIN = 0.02


def print_radius_table(title, result):
    table = result.table()
    groups = list(next(iter(table.values())))
    print(title)
    print(f"  {'setting':<10}" + "".join(f"{g + ' mae':>14}{g + ' rmse':>14}" for g in groups))
    for setting, row in table.items():
        print(f"  {setting:<10}" + "".join(f"{row[g][0]:14.4f}{row[g][1]:14.4f}" for g in groups))


def print_cdf_table(comparison):
    for label, series in sorted(comparison.quantiles.items()):
        print(f"wind-speed deciles, {label} terrain")
        print(f"  {'p':<6}" + "".join(f"{name:>10}" for name in series))
        for i, p in enumerate(comparison.probs):
            print(f"  {p:<6.1f}" + "".join(f"{values[i]:10.3f}" for values in series.values()))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config")
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--patches", type=int, default=50)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--progress", action="store_true")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    cfg = load_config(args.config)
    started = time.time()
    with_terrain = train_model(cfg, use_terrain=True, progress=args.progress)
    without_terrain = train_model(cfg, use_terrain=False, progress=args.progress)

    da = assimilation_benchmark(cfg, with_terrain, args.seeds)
    radius = radius_benchmark(cfg, with_terrain, args.seeds)
    radius_free = radius_benchmark(cfg, without_terrain, args.seeds)
    cdf = cdf_benchmark(cfg, with_terrain, args.seeds)
    sr = super_resolution_benchmark(cfg, with_terrain, without_terrain, args.patches, args.workers)

    print_radius_table("radius sweep, terrain model", radius)
    print_radius_table("radius sweep, terrain-free model", radius_free)
    print_cdf_table(cdf)

    checks = [
        ("assimilation bias reduction %", da.reduction_percent, da.reduction_percent >= MIN_BIAS_REDUCTION_PERCENT),
        ("dynamic radius MAE <= fixed-2 MAE", radius.mean_errors("dynamic")[0], radius.dynamic_wins),
        ("PSNR gain over bicubic (dB)", sr.diffusion.psnr_db - sr.bicubic.psnr_db,
         sr.diffusion.psnr_db - sr.bicubic.psnr_db >= MIN_PSNR_GAIN_DB),
        ("SSIM gain over bicubic", sr.diffusion.ssim - sr.bicubic.ssim, sr.diffusion.ssim - sr.bicubic.ssim >= MIN_SSIM_GAIN),
        ("terrain PSNR - terrain-free PSNR (dB)", sr.diffusion.psnr_db - sr.diffusion_no_terrain.psnr_db,
         sr.diffusion.psnr_db >= sr.diffusion_no_terrain.psnr_db),
    ]
    for name, value, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<40} {value:9.4f}")
    print(f"elapsed {time.time() - started:.0f}s")
    return 0 if all(ok for _, _, ok in checks) else 1


if __name__ == "__main__":
    sys.exit(main())

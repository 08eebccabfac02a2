"""Command-line pipeline: simulate -> pod -> sensors -> bound -> measure -> reconstruct -> evaluate."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig, desk_config, quick_config
from .estimation import (
    apriori_bound_curve,
    build_error_report,
    cross_gramian,
    reconstruct,
    select_rom_dimension,
)
from .mesh import CONTROL_POINTS, StructuredGrid, build_grid, food_point
from .observation import assemble_observer, build_pixel_grid, food_exclusion, measure, sensor_from_rect
from .placement import SensorPool, greedy_place, regular_placement
from .rom import assemble_snapshots, compute_pod
from .solver import Snapshot, run_case, sample_parameters

log = logging.getLogger("frostrom")

PRESETS = {"desk": desk_config, "quick": quick_config}


class PipelineError(RuntimeError):
    pass


def load_config(source: str | None) -> PipelineConfig:
    if source is None:
        return desk_config()
    if source in PRESETS:
        return PRESETS[source]()
    return PipelineConfig.load(source)


def grid_for(cfg: PipelineConfig) -> StructuredGrid:
    return build_grid(cfg.geometry, cfg.grid.nx, cfg.grid.ny)


def control_cells(grid: StructuredGrid) -> dict[str, int]:
    return {name: food_point(grid, *off) for name, off in CONTROL_POINTS.items()}


def _simulate_one(args):
    cfg_dict, index, params = args
    cfg = PipelineConfig.from_dict(cfg_dict)
    grid = grid_for(cfg)
    return run_case(grid, params, cfg.time.dt, cfg.time.t_final, cfg.time.stride, settings=cfg.solver)


def cmd_simulate(cfg: PipelineConfig, out_dir, jobs: int = 1) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = grid_for(cfg)
    params = sample_parameters(cfg.sampling.count, cfg.sampling.seed)
    tasks = [(cfg.to_dict(), k, p) for k, p in enumerate(params)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_simulate_one, tasks))
    else:
        results = [_simulate_one(t) for t in tasks]
    cfg.save(out / "config.json")
    paths = []
    for k, (p, snaps) in enumerate(zip(params, results)):
        split = "train" if k < cfg.sampling.n_train else "test"
        path = out / f"run_{k:03d}.frost"
        io.write_frost(path, snaps, grid.grid_hash)
        io.write_json(
            path.with_suffix(".json"),
            {
                "run": k,
                "split": split,
                "params": p.to_dict(),
                "dt": cfg.time.dt,
                "t_final": cfg.time.t_final,
                "stride": cfg.time.stride,
                "snapshots": len(snaps),
                "solver": cfg.solver.to_dict(),
            },
            grid.grid_hash,
            cfg.hash,
        )
        paths.append(path)
        log.info("run %d (%s) done: %d snapshots", k, split, len(snaps))
    return paths


def runs_by_split(run_dir, split: str) -> list[Path]:
    paths = []
    for meta_path in sorted(Path(run_dir).glob("run_*.json")):
        meta = json.loads(meta_path.read_text())
        if split == "all" or meta["split"] == split:
            paths.append(meta_path.with_suffix(".frost"))
    if not paths:
        raise PipelineError(f"no {split} runs found in {run_dir}")
    return paths


def cmd_pod(cfg: PipelineConfig, runs, out, n_max: int | None = None):
    grid = grid_for(cfg)
    loaded = [io.read_frost(p, grid.grid_hash) for p in runs]
    A = assemble_snapshots(loaded, cfg.rom.subtract_mean)
    n_max = n_max if n_max is not None else min(cfg.rom.n_max, A.n_rows, A.n_columns)
    weights = grid.cell_area / grid.cell_area.mean() if cfg.rom.area_weighted else None
    basis = compute_pod(A, n_max, weights)
    io.write_pod(out, basis)
    io.write_json(
        Path(out).with_suffix(".json"),
        {
            "runs": [str(p) for p in runs],
            "n_max": basis.n_max,
            "columns": A.n_columns,
            "subtract_mean": cfg.rom.subtract_mean,
            "area_weighted": cfg.rom.area_weighted,
        },
        grid.grid_hash,
        cfg.hash,
    )
    return basis


def _pool(cfg: PipelineConfig, grid: StructuredGrid, exclude_food: bool | None = None) -> SensorPool:
    exclude_food = cfg.sensors.exclude_food if exclude_food is None else exclude_food
    sensors = build_pixel_grid(grid, cfg.sensors.pixel_size, food_exclusion(grid) if exclude_food else None)
    return SensorPool.from_sensors(sensors, grid.n_cells, cfg.sensors.mode, grid.grid_hash)


def _lattice_shape(cfg: PipelineConfig, grid: StructuredGrid) -> tuple[int, int]:
    full = build_pixel_grid(grid, cfg.sensors.pixel_size)
    return max(s.lattice[0] for s in full) + 1, max(s.lattice[1] for s in full) + 1


def cmd_sensors(cfg: PipelineConfig, rom, out, placement: str | None = None, m: int | None = None, n: int | None = None):
    grid = grid_for(cfg)
    placement = placement or cfg.sensors.placement
    m = m if m is not None else cfg.sensors.m
    pool = _pool(cfg, grid)
    extra = {"placement": placement, "pool_size": len(pool), "exclude_food": cfg.sensors.exclude_food}
    if placement == "full":
        chosen = list(range(len(pool)))
    elif placement == "regular":
        chosen = regular_placement(pool, m, _lattice_shape(cfg, grid)).indices
    elif placement == "greedy":
        basis = io.read_pod(rom, grid.grid_hash)
        if n is None:
            n = cfg.estimation.n
        if n == "auto":
            n = select_rom_dimension(apriori_bound_curve(basis, pool.observer))
        pl = greedy_place(basis.phi[:, :n], pool, m)
        chosen = pl.indices
        extra.update({"n": n, "objectives": pl.objectives})
    else:
        raise PipelineError(f"unknown placement {placement!r}")
    sensors = [pool.candidates[k] for k in chosen]
    extra["pool_indices"] = chosen
    io.write_json(out, io.sensor_layout(sensors, cfg.sensors.mode, grid.grid_hash, extra), grid.grid_hash, cfg.hash)
    return sensors


def load_observer(cfg: PipelineConfig, grid: StructuredGrid, path):
    layout = io.read_json(path, grid.grid_hash)
    sensors = [sensor_from_rect(grid, r, lat) for r, lat in zip(layout["rects"], layout["lattice"])]
    return assemble_observer(sensors, grid.n_cells, layout["mode"], grid.grid_hash)


def cmd_bound(cfg: PipelineConfig, rom, sensors, out):
    grid = grid_for(cfg)
    basis = io.read_pod(rom, grid.grid_hash)
    W = load_observer(cfg, grid, sensors)
    curve = apriori_bound_curve(basis, W)
    io.write_csv(out, ["n", "e"], curve.rows())
    n_star = select_rom_dimension(curve)
    io.write_json(
        Path(out).with_suffix(".json"),
        {"n_star": n_star, "m": W.n_sensors, "s_hat": curve.s_hat.tolist()},
        grid.grid_hash,
        cfg.hash,
    )
    return curve, n_star


def cmd_measure(cfg: PipelineConfig, sensors, run, out, noise_sd: float = 0.0, seed: int | None = None):
    grid = grid_for(cfg)
    W = load_observer(cfg, grid, sensors)
    _, snaps = io.read_frost(run, grid.grid_hash)
    fields = np.column_stack([s.temperature for s in snaps])
    ell = measure(W, fields, noise_sd, seed)
    times = [s.time for s in snaps]
    io.write_measurements(out, times, ell, grid.grid_hash, snaps[0].params)
    return ell


def cmd_reconstruct(cfg: PipelineConfig, rom, sensors, measurements, out, n: int | str | None = None):
    grid = grid_for(cfg)
    basis = io.read_pod(rom, grid.grid_hash)
    W = load_observer(cfg, grid, sensors)
    _, records = io.read_frost(measurements, grid.grid_hash)
    ell = np.column_stack([r.temperature for r in records])
    if ell.shape[0] != W.n_sensors:
        raise PipelineError(f"measurements have {ell.shape[0]} entries, layout has {W.n_sensors} sensors")
    n = cfg.estimation.n if n is None else n
    if n == "auto":
        n = select_rom_dimension(apriori_bound_curve(basis, W))
    n = int(n)
    if n >= W.n_sensors:
        raise PipelineError(f"well-posedness needs N > m > n; got n={n} >= m={W.n_sensors}")
    G = cross_gramian(W, basis, n)
    rec = reconstruct(basis, W, n, ell, G)
    snaps = [Snapshot(r.time, r.params, rec.field[:, k]) for k, r in enumerate(records)]
    io.write_frost(out, snaps, grid.grid_hash)
    io.write_json(
        Path(out).with_suffix(".json"),
        {"n": n, "m": W.n_sensors, "s_hat_n": G.s_min, "residual": np.atleast_1d(rec.residual).tolist()},
        grid.grid_hash,
        cfg.hash,
    )
    return rec


def cmd_evaluate(cfg: PipelineConfig, truth, recon, out_dir):
    grid = grid_for(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, t_snaps = io.read_frost(truth, grid.grid_hash)
    _, r_snaps = io.read_frost(recon, grid.grid_hash)
    if len(t_snaps) != len(r_snaps):
        raise PipelineError("truth and reconstruction have different snapshot counts")
    times = np.array([s.time for s in t_snaps])
    T = np.column_stack([s.temperature for s in t_snaps])
    R = np.column_stack([s.temperature for s in r_snaps])
    points = control_cells(grid)
    report = build_error_report(T, R, times, points)
    (out / "report.json").write_text(report.to_json(grid_hash=grid.grid_hash_hex, config_hash=cfg.hash) + "\n")
    io.write_csv(out / "error_vs_time.csv", ["t", "value"], zip(times, report.l2_percent))
    for name, cell in points.items():
        io.write_csv(
            out / f"local_{name}.csv",
            ["t", "truth", "recon", "error_percent"],
            zip(times, T[cell], R[cell], report.local[name]),
        )
    return report


def _error_json(exc: BaseException) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frostrom", description=__doc__)
    p.add_argument("--config", help="config JSON path or preset name (desk, quick)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the forward model over sampled parameters")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("pod", help="POD basis from the training runs")
    s.add_argument("--runs", required=True, help="directory written by simulate")
    s.add_argument("--split", default="train", choices=("train", "test", "all"))
    s.add_argument("--n-max", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("sensors", help="sensor layout (full pool, greedy or regular)")
    s.add_argument("--rom")
    s.add_argument("--placement", choices=("full", "greedy", "regular"))
    s.add_argument("--m", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--exclude-food", action="store_true")
    s.add_argument("--out", required=True)

    s = sub.add_parser("bound", help="a-priori error bound e(n)")
    s.add_argument("--rom", required=True)
    s.add_argument("--sensors", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("measure", help="synthetic pixel data from a stored run")
    s.add_argument("--sensors", required=True)
    s.add_argument("--run", required=True)
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("reconstruct", help="least-squares reconstruction of full fields")
    s.add_argument("--rom", required=True)
    s.add_argument("--sensors", required=True)
    s.add_argument("--measurements", required=True)
    s.add_argument("--n", default=None, help="ROM dimension or 'auto'")
    s.add_argument("--out", required=True)

    s = sub.add_parser("evaluate", help="error report and plot data")
    s.add_argument("--truth", required=True)
    s.add_argument("--recon", required=True)
    s.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "simulate":
            cmd_simulate(cfg, args.out, args.jobs)
        elif args.command == "pod":
            cmd_pod(cfg, runs_by_split(args.runs, args.split), args.out, args.n_max)
        elif args.command == "sensors":
            if args.exclude_food:
                cfg.sensors.exclude_food = True
            if args.placement == "greedy" and not args.rom:
                raise PipelineError("greedy placement needs --rom")
            cmd_sensors(cfg, args.rom, args.out, args.placement, args.m, args.n)
        elif args.command == "bound":
            cmd_bound(cfg, args.rom, args.sensors, args.out)
        elif args.command == "measure":
            cmd_measure(cfg, args.sensors, args.run, args.out, args.noise_sd, args.seed)
        elif args.command == "reconstruct":
            n = args.n if args.n in (None, "auto") else int(args.n)
            cmd_reconstruct(cfg, args.rom, args.sensors, args.measurements, args.out, n)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.truth, args.recon, args.out)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON error line
        print(_error_json(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

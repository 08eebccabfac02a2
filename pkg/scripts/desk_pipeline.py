"""Run the full CLI chain on a preset and print the headline numbers.

    python scripts/desk_pipeline.py --preset quick --work /tmp/frost --jobs 4
"""
import argparse
import json
import time
from pathlib import Path

from frostrom.cli import main, runs_by_split
from frostrom.placement import budget_for


def run(*argv):
    if main(list(argv)) != 0:
        raise SystemExit(f"step failed: {' '.join(argv)}")


def cli():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="quick", help="config preset or JSON path")
    ap.add_argument("--work", default="frost_work")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--factor", type=float, default=1.5, help="sensor budget m = ceil(factor * n)")
    args = ap.parse_args()
    work = Path(args.work)
    c = ["--config", args.preset]
    start = time.perf_counter()

    run(*c, "simulate", "--out", str(work / "runs"), "--jobs", str(args.jobs))
    run(*c, "pod", "--runs", str(work / "runs"), "--out", str(work / "rom.pod"))
    for tag, extra in (("full", []), ("nofood", ["--exclude-food"])):
        run(*c, "sensors", "--out", str(work / f"{tag}.json"), *extra)
        run(*c, "bound", "--rom", str(work / "rom.pod"), "--sensors", str(work / f"{tag}.json"), "--out", str(work / f"bound_{tag}.csv"))
    n_star = json.loads((work / "bound_full.json").read_text())["n_star"]
    m = budget_for(n_star, args.factor)
    for placement in ("greedy", "regular"):
        run(*c, "sensors", "--rom", str(work / "rom.pod"), "--placement", placement, "--m", str(m), "--n", str(n_star),
            "--out", str(work / f"{placement}.json"))

    rows = []
    for run_path in runs_by_split(work / "runs", "test"):
        for layout in ("full", "nofood", "greedy", "regular"):
            tag = f"{run_path.stem}_{layout}"
            run(*c, "measure", "--sensors", str(work / f"{layout}.json"), "--run", str(run_path), "--out", str(work / f"{tag}.meas"))
            run(*c, "reconstruct", "--rom", str(work / "rom.pod"), "--sensors", str(work / f"{layout}.json"),
                "--measurements", str(work / f"{tag}.meas"), "--n", str(n_star), "--out", str(work / f"{tag}.frost"))
            run(*c, "evaluate", "--truth", str(run_path), "--recon", str(work / f"{tag}.frost"), "--out", str(work / tag))
            rep = json.loads((work / tag / "report.json").read_text())
            rows.append((run_path.stem, layout, rep["time_average"], rep["accumulated"]))

    print(f"n* = {n_star}, budget m = {m}, wall time {time.perf_counter() - start:.0f} s")
    print(f"{'run':10s} {'layout':8s} {'mean l2 %':>10s} {'accum %':>10s}")
    for r in rows:
        print(f"{r[0]:10s} {r[1]:8s} {r[2]:10.4f} {r[3]:10.4f}")


if __name__ == "__main__":
    cli()

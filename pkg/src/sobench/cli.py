"""Command line driver: `bench run`, `bench summarize`, `bench plot`."""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .bench import (
    RSE_CHECKPOINTS,
    config_from_sources,
    parse_config_file,
    read_trace_csv,
    run_bench,
    summarize,
    write_summary_csv,
)


def _add_run_parser(sub):
    p = sub.add_parser("run", help="run a benchmark sweep")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--task", choices=["meanvar", "newsvendor", "classification"])
    p.add_argument("--sizes", help="comma-separated problem sizes")
    p.add_argument("--backend", help="comma-separated backends (sequential, parallel)")
    p.add_argument("--reps", type=int, help="repetitions per cell (default 7)")
    p.add_argument("--seed", type=int, help="master seed (default 42)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--parallel-reps", action="store_true",
                   help="run repetitions concurrently (timing unreliable)")


def _cmd_run(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    cfg = config_from_sources(
        file_values,
        task=args.task,
        sizes=[int(s) for s in args.sizes.split(",")] if args.sizes else None,
        backends=args.backend.split(",") if args.backend else None,
        reps=args.reps,
        seed=args.seed,
        out=args.out,
        parallel_reps=True if args.parallel_reps else None,
    )
    written = run_bench(cfg)
    print(f"wrote {len(written)} files to {cfg.out}")
    return 0


def _cmd_summarize(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.dir, "trace_*.csv")))
    if not paths:
        print(f"no trace CSVs found in {args.dir}", file=sys.stderr)
        return 1
    rows = summarize([read_trace_csv(p) for p in paths])
    out_path = os.path.join(args.dir, "summary.csv")
    write_summary_csv(rows, out_path)
    header = f"{'task':<16}{'size':>9}{'backend':>12}{'time_ms':>12}{'±2σ_ms':>10}"
    header += "".join(f"{'rse' + str(c) + '%':>11}" for c in RSE_CHECKPOINTS)
    print(header)
    for row in rows:
        line = f"{row.task:<16}{row.size:>9}{row.backend:>12}"
        line += f"{row.mean_time_ns / 1e6:>12.2f}{row.ci_halfwidth_ns / 1e6:>10.2f}"
        for ck in RSE_CHECKPOINTS:
            cell = row.rse_at.get(ck)
            line += f"{cell[0]:>11.2f}" if cell else f"{'-':>11}"
        print(line)
    print(f"summary written to {out_path}")
    return 0


def _cmd_plot(args) -> int:
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plotting needs matplotlib (pip install sobench[plots]); CSVs are the contract",
              file=sys.stderr)
        return 1
    paths = sorted(glob.glob(os.path.join(args.dir, "trace_*.csv")))
    if not paths:
        print(f"no trace CSVs found in {args.dir}", file=sys.stderr)
        return 1
    rows = summarize([read_trace_csv(p) for p in paths])
    by_task: dict = {}
    for row in rows:
        by_task.setdefault(row.task, []).append(row)
    for task, task_rows in by_task.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        backends = sorted({r.backend for r in task_rows})
        for backend in backends:
            pts = sorted((r.size, r.mean_time_ns, r.ci_halfwidth_ns)
                         for r in task_rows if r.backend == backend)
            sizes = [p[0] for p in pts]
            secs = [p[1] / 1e9 for p in pts]
            errs = [p[2] / 1e9 for p in pts]
            ax.errorbar(sizes, secs, yerr=errs, marker="o", capsize=3, label=backend)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("problem size")
        ax.set_ylabel("mean run time [s] (±2σ)")
        ax.set_title(task)
        ax.legend()
        out = os.path.join(args.dir, f"time_{task}.svg")
        fig.savefig(out, bbox_inches="tight")
        plt.close(fig)
        print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bench",
                                     description="simulation-optimization benchmark driver")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)
    p_sum = sub.add_parser("summarize", help="aggregate trace CSVs in a directory")
    p_sum.add_argument("dir")
    p_plot = sub.add_parser("plot", help="best-effort SVG charts from trace CSVs")
    p_plot.add_argument("dir")
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "summarize":
        return _cmd_summarize(args)
    return _cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())

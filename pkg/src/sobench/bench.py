"""Benchmark orchestration: instances, runs, RSE metrics, CSV emission.

A bench run sweeps (size x backend x repetition) cells for one task,
writing one trace CSV per cell plus a summary CSV of timing and RSE
statistics. All non-timing output is a pure function of (config, seed):
the instance comes from stream 0, repetition k samples from stream 2 + k,
and both backends share the same streams so their traces are comparable
(and, by the backend contract, bit-identical).
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .backend import DEFAULT_CHUNK, make_backend
from .errors import ConfigurationError, UndefinedMetric
from .frank_wolfe import FwConfig, fw_run
from .records import RunRecord
from .sampling import GaussianSpec, RngStream, synth_classification, uniform01
from .sqn import SqnConfig, sqn_run
from .tasks import (
    LogisticTask,
    MeanVarProblem,
    MeanVarTask,
    NewsvendorProblem,
    NewsvendorTask,
)

TASKS = ("meanvar", "newsvendor", "classification")
RSE_CHECKPOINTS = (50, 100, 500, 1000)

# Stream-id allocation (see sampling module docstring).
INSTANCE_STREAM = 0
FIRST_REP_STREAM = 2

TRACE_HEADER = ["task", "size", "backend", "rep", "iteration", "objective", "elapsed_ns"]
SUMMARY_HEADER = [
    "task", "size", "backend", "mean_time_ns", "ci2s_ns",
    "rse50", "rse50_ci", "rse100", "rse100_ci",
    "rse500", "rse500_ci", "rse1000", "rse1000_ci",
]

_DEFAULT_SIZES = {
    "meanvar": [500, 5000, 10_000, 50_000, 100_000],
    "newsvendor": [100, 1000, 10_000, 100_000, 1_000_000],
    "classification": [50, 500, 1000, 5000],
}

# Sizes at and above which the per-gradient sample count doubles.
_BIG_SIZE = {"meanvar": 100_000, "newsvendor": 1_000_000}


@dataclass
class BenchConfig:
    task: str
    sizes: list[int] = field(default_factory=list)
    backends: list[str] = field(default_factory=lambda: ["sequential", "parallel"])
    reps: int = 7
    seed: int = 42
    out: str = "bench_out"
    iterations: int | None = None  # total FW steps / SQN iterations
    resample_every: int = 25  # FW epoch length M
    sample_size: int | None = None  # per-gradient draw count; None = size rule
    sample_schedule: str = "constant"
    chunk_size: int = DEFAULT_CHUNK
    sqn_pair_every: int = 10
    sqn_memory: int = 25
    sqn_beta: float = 2.0
    sqn_grad_batch: int = 50
    sqn_hess_batch: int = 300
    parallel_reps: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigurationError(f"unknown task {self.task!r}")
        if not self.sizes:
            self.sizes = list(_DEFAULT_SIZES[self.task])
        if self.reps < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.iterations is None:
            self.iterations = 2000 if self.task == "classification" else 1500
        if self.task != "classification" and self.iterations % self.resample_every:
            raise ConfigurationError(
                f"iterations ({self.iterations}) must be a multiple of "
                f"resample_every ({self.resample_every})"
            )

    def sample_size_for(self, size: int) -> int:
        if self.sample_size is not None:
            return self.sample_size
        big = _BIG_SIZE.get(self.task)
        return 50 if big is not None and size >= big else 25


def _uniform_range(stream: RngStream, n: int, lo: float, hi: float) -> np.ndarray:
    u = uniform01(stream, n)
    # clamp away exact zeros so open-interval invariants (e.g. sigma > 0)
    # hold; probability 2^-53 per draw, statistically invisible
    np.maximum(u, 2.0 ** -53, out=u)
    return lo + (hi - lo) * u


def gen_meanvar_instance(d: int, stream: RngStream) -> MeanVarTask:
    """mu ~ U(-1,1)^d, sigma ~ U(0, 0.025)^d, diagonal covariance."""
    if d < 2:
        raise ConfigurationError("need at least 2 assets")
    mu = _uniform_range(stream, d, -1.0, 1.0)
    sigma = _uniform_range(stream, d, 0.0, 0.025)
    return MeanVarTask(spec=GaussianSpec(mean=mu, diag_std=sigma))


def gen_newsvendor_instance(n: int, stream: RngStream) -> NewsvendorTask:
    """Demand mu ~ U(20,50), sigma ~ U(10,20); single budget C = 0.5 sum(mu).

    Cost ranges k ~ U(1,2), v ~ U(3,5), h ~ U(0.5,1) guarantee k - v < 0
    and v + h > 0; unit resource costs with C at half the mean demand make
    the budget bind without being degenerate.
    """
    if n < 1:
        raise ConfigurationError("need at least 1 product")
    mu = _uniform_range(stream, n, 20.0, 50.0)
    sigma = _uniform_range(stream, n, 10.0, 20.0)
    k = _uniform_range(stream, n, 1.0, 2.0)
    v = _uniform_range(stream, n, 3.0, 5.0)
    h = _uniform_range(stream, n, 0.5, 1.0)
    return NewsvendorTask(
        unit_cost=k, holding_cost=h, selling_value=v,
        demand_mean=mu, demand_std=sigma,
        budget_costs=np.ones(n), budget=0.5 * float(np.sum(mu)),
    )


def gen_classification_instance(n: int, stream: RngStream) -> LogisticTask:
    return LogisticTask(data=synth_classification(n, stream))


def rse(y_t: float, y_star: float) -> float:
    """Relative squared error in percent: ((y_t - y*) / y_t)^2 * 100."""
    if y_t == 0.0:
        raise UndefinedMetric("objective value at checkpoint is zero")
    r = (y_t - y_star) / y_t
    return r * r * 100.0


def run_cell(config: BenchConfig, size: int, backend_kind: str, rep: int) -> RunRecord:
    """Run one (size, backend, repetition) cell and return its trace."""
    _kernels.warmup()  # JIT compilation must not land in the timed region
    backend = make_backend(backend_kind, config.chunk_size)
    instance_stream = RngStream(config.seed, INSTANCE_STREAM)
    opt_stream = RngStream(config.seed, FIRST_REP_STREAM + rep)
    if config.task == "classification":
        task = gen_classification_instance(size, instance_stream)
        sqn_cfg = SqnConfig(
            pair_every=config.sqn_pair_every,
            memory=config.sqn_memory,
            beta=config.sqn_beta,
            grad_batch=config.sqn_grad_batch,
            hess_batch=config.sqn_hess_batch,
            iterations=config.iterations,
            stream=opt_stream,
        )
        return sqn_run(task, sqn_cfg, backend, task_label="classification", size=size, rep=rep)

    if config.task == "meanvar":
        task = gen_meanvar_instance(size, instance_stream)
        problem = MeanVarProblem(task, backend)
    else:
        task = gen_newsvendor_instance(size, instance_stream)
        problem = NewsvendorProblem(task, backend)
    fw_cfg = FwConfig(
        epochs=config.iterations // config.resample_every,
        inner_iters=config.resample_every,
        sample_size=config.sample_size_for(size),
        stream=opt_stream,
        sample_schedule=config.sample_schedule,
    )
    return fw_run(problem, fw_cfg, backend, task_label=config.task, size=size, rep=rep)


def trace_filename(task: str, size: int, backend: str, rep: int) -> str:
    return f"trace_{task}_{size}_{backend}_rep{rep}.csv"


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_trace_csv(record: RunRecord, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for i in range(record.iterations.size):
            w.writerow([
                record.task, record.size, record.backend, record.rep,
                int(record.iterations[i]), _fmt(record.objectives[i]),
                int(record.elapsed_ns[i]),
            ])


def read_trace_csv(path: str) -> RunRecord:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != TRACE_HEADER:
        raise ConfigurationError(f"unexpected trace header in {path}")
    body = rows[1:]
    task, size, backend, rep = body[0][0], int(body[0][1]), body[0][2], int(body[0][3])
    return RunRecord(
        task=task, size=size, backend=backend, rep=rep, seed=0,
        iterations=np.array([int(r[4]) for r in body], dtype=np.int64),
        objectives=np.array([float(r[5]) for r in body]),
        elapsed_ns=np.array([int(r[6]) for r in body], dtype=np.int64),
        final_iterate=np.empty(0),
    )


@dataclass
class SummaryRow:
    task: str
    size: int
    backend: str
    mean_time_ns: float
    ci_halfwidth_ns: float
    rse_at: dict  # checkpoint -> (mean %, 2 sigma %) or None when undefined

    def to_csv_row(self) -> list:
        row = [self.task, self.size, self.backend, _fmt(self.mean_time_ns), _fmt(self.ci_halfwidth_ns)]
        for ck in RSE_CHECKPOINTS:
            cell = self.rse_at.get(ck)
            if cell is None:
                row.extend(["", ""])
            else:
                row.extend([_fmt(cell[0]), _fmt(cell[1])])
        return row


def summarize(records: list[RunRecord]) -> list[SummaryRow]:
    """Aggregate traces per (task, size, backend) across repetitions."""
    cells: dict = {}
    for rec in records:
        cells.setdefault((rec.task, rec.size, rec.backend), []).append(rec)
    rows = []
    for (task, size, backend), reps in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        times = np.array([float(r.elapsed_ns[-1]) for r in reps])
        if times.size > 1:
            half = 2.0 * float(np.std(times, ddof=1))
        else:
            warnings.warn(f"single repetition for {task}/{size}/{backend}: reporting sigma = 0")
            half = 0.0
        rse_at = {}
        for ck in RSE_CHECKPOINTS:
            vals = []
            for r in reps:
                if ck > r.iterations.size:
                    continue
                try:
                    vals.append(rse(r.objective_at(ck), r.final_objective))
                except UndefinedMetric:
                    continue
            if not vals:
                rse_at[ck] = None
            else:
                arr = np.array(vals)
                spread = 2.0 * float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
                rse_at[ck] = (float(arr.mean()), spread)
        rows.append(SummaryRow(task, size, backend, float(times.mean()), half, rse_at))
    return rows


def write_summary_csv(rows: list[SummaryRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for row in rows:
            w.writerow(row.to_csv_row())


def run_bench(config: BenchConfig) -> list[str]:
    """Execute the full sweep; returns written file paths.

    Completion is marked by a ``.done`` sentinel in the output directory;
    a missing sentinel flags partial output from an aborted run. With
    ``parallel_reps`` the repetitions of a cell run concurrently on their
    disjoint streams (timing becomes unreliable and a marker file says so).
    """
    os.makedirs(config.out, exist_ok=True)
    done_path = os.path.join(config.out, ".done")
    if os.path.exists(done_path):
        os.remove(done_path)
    written = []
    all_records = []
    for size in config.sizes:
        for backend_kind in config.backends:
            if config.parallel_reps and config.reps > 1:
                with ThreadPoolExecutor(max_workers=min(config.reps, os.cpu_count() or 1)) as pool:
                    recs = list(pool.map(
                        lambda rep: run_cell(config, size, backend_kind, rep),
                        range(config.reps),
                    ))
            else:
                recs = [run_cell(config, size, backend_kind, rep) for rep in range(config.reps)]
            for rec in recs:
                path = os.path.join(config.out, trace_filename(rec.task, rec.size, rec.backend, rec.rep))
                write_trace_csv(rec, path)
                written.append(path)
            all_records.extend(recs)
    summary_path = os.path.join(config.out, "summary.csv")
    write_summary_csv(summarize(all_records), summary_path)
    written.append(summary_path)
    if config.parallel_reps:
        marker = os.path.join(config.out, "TIMING_UNRELIABLE")
        with open(marker, "w") as fh:
            fh.write("repetitions ran concurrently; timing columns are not comparable\n")
        written.append(marker)
    with open(done_path, "w") as fh:
        fh.write("ok\n")
    return written


# ---------------------------------------------------------------------------
# Flat key-value config files
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "task": str,
    "sizes": "int_list",
    "backends": "str_list",
    "reps": int,
    "seed": int,
    "out": str,
    "iterations": int,
    "resample_every": int,
    "sample_size": int,
    "sample_schedule": str,
    "backend.chunk_size": int,
    "sqn.L": int,
    "sqn.memory": int,
    "sqn.beta": float,
    "sqn.b": int,
    "sqn.b_h": int,
    "parallel_reps": "bool",
}

_KEY_TO_FIELD = {
    "backend.chunk_size": "chunk_size",
    "sqn.L": "sqn_pair_every",
    "sqn.memory": "sqn_memory",
    "sqn.beta": "sqn_beta",
    "sqn.b": "sqn_grad_batch",
    "sqn.b_h": "sqn_hess_batch",
    "iterations": "iterations",
}


def parse_config_file(path: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment; unknown keys error."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigurationError(f"{path}:{lineno}: unknown config key {key!r}")
            kind = _CONFIG_KEYS[key]
            try:
                if kind == "int_list":
                    parsed = [int(v) for v in value.split(",") if v.strip()]
                elif kind == "str_list":
                    parsed = [v.strip() for v in value.split(",") if v.strip()]
                elif kind == "bool":
                    if value.lower() not in ("true", "false", "0", "1"):
                        raise ValueError(value)
                    parsed = value.lower() in ("true", "1")
                else:
                    parsed = kind(value)
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
            out[_KEY_TO_FIELD.get(key, key)] = parsed
    return out


def config_from_sources(file_values: dict | None = None, **overrides) -> BenchConfig:
    """Merge config-file values with CLI overrides (overrides win)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if "task" not in merged:
        raise ConfigurationError("no task given (config file or --task)")
    return BenchConfig(**merged)

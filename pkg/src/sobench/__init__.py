"""Simulation-optimization benchmark toolkit.

Three stochastic optimization tasks (mean-variance portfolio,
multi-product newsvendor, binary classification) solved with a stochastic
Frank-Wolfe method and a stochastic quasi-Newton method, on two
interchangeable compute backends (sequential and data-parallel) that
produce bit-identical results. The `bench` CLI reproduces convergence
(RSE) and timing studies at desk scale.
"""

from .backend import make_backend, ParallelBackend, SequentialBackend
from .bench import BenchConfig, rse, run_bench, summarize
from .frank_wolfe import FwConfig, FwState, duality_gap, fw_run, fw_step_size, fw_update
from .lmo import PolytopeSet, SimplexSlackSet, lmo_general, lmo_simplex_slack, lmo_single_budget
from .records import RunRecord
from .sampling import (
    ClassificationData,
    GaussianSpec,
    RngStream,
    sample_demands,
    sample_indices,
    sample_returns,
    standard_normal,
    synth_classification,
    uniform01,
)
from .sqn import CorrectionPair, SqnConfig, SqnEngine, SqnState, hessian_update, sqn_run
from .tasks import (
    LogisticTask,
    MeanVarProblem,
    MeanVarSampleSet,
    MeanVarTask,
    NewsvendorProblem,
    NewsvendorTask,
    build_sample_set,
    logistic_gradient,
    logistic_hvp,
    logistic_loss,
    mv_gradient,
    mv_objective,
    nv_gradient_exact,
    nv_gradient_hat,
    nv_objective_exact,
)

__version__ = "0.1.0"

"""branchsim: simulation toolkit for branching linear recursions.

Exact weighted-tree Monte Carlo, the linear-complexity iterative bootstrap,
Kantorovich-Rubinstein distance machinery, tail asymptotics, and a
reproducible experiment CLI.
"""

from .asymptotics import TailAsymptotic, g_k, tail_coefficient, zeta_tail
from .bootstrap import SamplePool, advance_pool, init_pool, run_bootstrap
from .exact import (
    BatchRunResult,
    BudgetExceededError,
    TreeRunResult,
    expected_node_count,
    simulate_r_batch,
    simulate_r_exact,
    simulate_w_batch,
    simulate_w_exact,
)
from .metrics import (
    AnalyticCDF,
    EmpiricalDistribution,
    HFunction,
    d1_empirical,
    d1_vs_analytic,
    empirical_d1_bound,
    estimate_h,
    geometric_sum,
    theorem_bound,
)
from .model import (
    DRAW_COUNTER,
    BranchingVectorSpec,
    DistributionSpec,
    MomentReport,
    UnsupportedMomentError,
    check_conditions,
    q_moment,
    rho,
    sample_vector,
    zeta_value,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticCDF",
    "BatchRunResult",
    "BranchingVectorSpec",
    "BudgetExceededError",
    "DRAW_COUNTER",
    "DistributionSpec",
    "EmpiricalDistribution",
    "HFunction",
    "MomentReport",
    "SamplePool",
    "TailAsymptotic",
    "TreeRunResult",
    "UnsupportedMomentError",
    "advance_pool",
    "check_conditions",
    "d1_empirical",
    "d1_vs_analytic",
    "empirical_d1_bound",
    "estimate_h",
    "expected_node_count",
    "g_k",
    "geometric_sum",
    "init_pool",
    "q_moment",
    "rho",
    "run_bootstrap",
    "sample_vector",
    "simulate_r_batch",
    "simulate_r_exact",
    "simulate_w_batch",
    "simulate_w_exact",
    "tail_coefficient",
    "theorem_bound",
    "zeta_value",
    "__version__",
]

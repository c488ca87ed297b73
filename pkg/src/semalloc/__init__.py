"""Semantic-compression-aware bandwidth and power allocation."""
from .errors import DomainError, InfeasibleError, NonConvergenceError
from .link import LinkParams, UserLink, g_term, monte_carlo_success, success_prob
from .task_perf import FIXTURES, PerfPointSet, TaskPerfModel, eta, fit_perf_model, fixture
from .semantics import (
    ImportanceWeights, asc_compress, importance_weights, mi_gap, mi_upper_bound,
    mutual_information, threshold_for_ratio,
)
from .scenario import Scenario, ScenarioError, desk_preset, load_scenario, paper_preset, random_scenario
from .allocator import Allocation, SlackState, convex_step, init_feasible, sca_allocate
from .selection import SelectionInstance, branch_and_bound, lp_relaxation
from .planner import (
    Solution, baseline_fcr, baseline_fra, baseline_msr, crra, crraus, optimal_ratios, phi_total,
    phi_user,
)
from .harness import ResultRow, RunConfig, emit_csv, read_csv, run, verify_lemma1

__version__ = "0.1.0"

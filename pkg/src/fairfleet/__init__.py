"""Fairness-aware fleet scheduling and trace-driven emulation.

Allocates spatially distributed tasks from multiple customers to a
shared vehicle fleet, maximizing the alpha-fair utility of long-term
per-customer throughputs by searching the convex boundary of feasible
round allocations.
"""

from .boundary import (
    DegenerateFaceError,
    EmptyRoundError,
    Face,
    face_weights,
    full_boundary,
    init_face,
    is_valid_extension,
    make_face,
    opt_in_face,
    search_boundary,
)
from .emulator import (
    POLICIES,
    Metrics,
    SimState,
    Trace,
    baseline_dedicated,
    baseline_max_throughput,
    baseline_round_robin,
    run_trace,
    step,
)
from .fairness import (
    EPSILON_RATE,
    LEXIMIN_ALPHA,
    alpha_fair_utility,
    is_leximin,
    jain_index,
    leximin_key,
    utility_compare,
)
from .gen import PRESETS, Scenario, generate, write_scenario
from .model import (
    Instance,
    InterestMap,
    Path,
    Schedule,
    Task,
    TravelModel,
    Vehicle,
    build_path,
    empty_schedule,
    path_cost,
    path_violation,
    read_tasks_jsonl,
    read_travel_matrix_csv,
    read_vehicles_json,
    sequence_cost,
    sequence_feasible,
    travel_time,
    write_tasks_jsonl,
    write_travel_matrix_csv,
    write_vehicles_json,
)
from .oracle import (
    ORACLE_TASK_CAP,
    ORACLE_VEHICLE_CAP,
    FeasibleSet,
    convex_boundary,
    enumerate_feasible_allocations,
    oracle_report,
    pareto_frontier,
)
from .scheduler import (
    History,
    ReplanResult,
    RoundConfig,
    RoundResult,
    Scheduler,
    StaticRunResult,
    plan_round,
    replan,
    run_round,
    run_static_rounds,
    select_allocation,
    update_history,
)
from .vrp import (
    ExactSizeError,
    RoundSolver,
    SolverConfig,
    SolverRequest,
    build_warm_start_suite,
    exact_vrp,
    greedy_alpha_heuristic,
    heuristic_vrp,
    solve_weighted_vrp,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateFaceError",
    "EmptyRoundError",
    "EPSILON_RATE",
    "ExactSizeError",
    "Face",
    "FeasibleSet",
    "History",
    "Instance",
    "InterestMap",
    "LEXIMIN_ALPHA",
    "Metrics",
    "ORACLE_TASK_CAP",
    "ORACLE_VEHICLE_CAP",
    "POLICIES",
    "PRESETS",
    "Path",
    "ReplanResult",
    "RoundConfig",
    "RoundResult",
    "RoundSolver",
    "Scenario",
    "Schedule",
    "Scheduler",
    "SimState",
    "SolverConfig",
    "SolverRequest",
    "StaticRunResult",
    "Task",
    "Trace",
    "TravelModel",
    "Vehicle",
    "alpha_fair_utility",
    "baseline_dedicated",
    "baseline_max_throughput",
    "baseline_round_robin",
    "build_path",
    "build_warm_start_suite",
    "convex_boundary",
    "empty_schedule",
    "enumerate_feasible_allocations",
    "exact_vrp",
    "face_weights",
    "full_boundary",
    "generate",
    "greedy_alpha_heuristic",
    "heuristic_vrp",
    "init_face",
    "is_leximin",
    "is_valid_extension",
    "jain_index",
    "leximin_key",
    "make_face",
    "opt_in_face",
    "oracle_report",
    "pareto_frontier",
    "path_cost",
    "path_violation",
    "plan_round",
    "read_tasks_jsonl",
    "read_travel_matrix_csv",
    "read_vehicles_json",
    "replan",
    "run_round",
    "run_static_rounds",
    "run_trace",
    "search_boundary",
    "select_allocation",
    "sequence_cost",
    "sequence_feasible",
    "solve_weighted_vrp",
    "step",
    "travel_time",
    "update_history",
    "utility_compare",
    "write_scenario",
    "write_tasks_jsonl",
    "write_travel_matrix_csv",
    "write_vehicles_json",
]

"""Solver library for cyclic inventory routing with supply uncertainty.

Builds a repeating delivery schedule for a set of customers (exact set
partitioning over enumerated cluster columns) together with a dynamic
buy/sell purchasing policy for the producer (cyclic average-cost
optimization), and couples the two through penalty weights tuned by
line or grid search. Includes Monte-Carlo evaluation and a CLI.
"""

from .clustergen import (Cluster, ClusterPool, Schedule, base_stock,
                         check_cc2, delivery_load, emergency_cost,
                         enumerate_clusters, holding_cost, order_distribution,
                         price_cluster, storage_horizon)
from .instance import (Customer, Instance, Producer, generate, load_instance,
                       scale, validate)
from .mdp import (MdpModel, OutflowModel, Policy, action_cost, build_model,
                  build_outflow, extract_sS)
from .mdp import solve as solve_mdp
from .routing import Route, shortest_route
from .search import (Evaluator, EvalRecord, evaluate, grid_search,
                     line_search, step_by_step)
from .setpart import (InfeasibleError, PenaltyParams, Selection, brute_force,
                      make_selection, objective)
from .setpart import solve as solve_selection
from .simulate import SimReport, simulate_aggregate, simulate_full
from .stochastics import (DiscreteDistribution, Gaussian, discretize,
                          normal_cdf, normal_quantile,
                          partial_expectation_pos, round_half_up)

__version__ = "0.1.0"

__all__ = [
    "Cluster", "ClusterPool", "Schedule", "base_stock", "check_cc2",
    "delivery_load", "emergency_cost", "enumerate_clusters", "holding_cost",
    "order_distribution", "price_cluster", "storage_horizon",
    "Customer", "Instance", "Producer", "generate", "load_instance",
    "scale", "validate",
    "MdpModel", "OutflowModel", "Policy", "action_cost", "build_model",
    "build_outflow", "extract_sS", "solve_mdp",
    "Route", "shortest_route",
    "Evaluator", "EvalRecord", "evaluate", "grid_search", "line_search",
    "step_by_step",
    "InfeasibleError", "PenaltyParams", "Selection", "brute_force",
    "make_selection", "objective", "solve_selection",
    "SimReport", "simulate_aggregate", "simulate_full",
    "DiscreteDistribution", "Gaussian", "discretize", "normal_cdf",
    "normal_quantile", "partial_expectation_pos", "round_half_up",
    "__version__",
]

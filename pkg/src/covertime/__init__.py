"""Minimum-time target coverage on finite MDPs for one or several agents."""

from .errors import (AssumptionViolated, CapExceeded, ConstructionFailed, CoverTimeError,
                     EmptyPart, InfiniteCoverTime, NonConvergence, RowSumError,
                     SingletonTransfer, SingularSystemError, StateIndexError,
                     StepCapExceeded, TooManyAgents)
from .mdp import (Mdp, StationaryPolicy, TargetSet, exists_irreducible_policy,
                  expected_hitting_times_for_policy, induced_chain, load_mdp, save_mdp, validate)
from .product import (CoverValueTable, ProductPolicy, evaluate_policy, optimal_cover_time,
                      optimal_policy_iteration)
from .heuristic import phase_value_iteration, plan_and_execute
from .model_graph import ModelGraph, build_model_graph
from .partition import (ClusterSpec, Partition, brute_force_optimal_partition,
                        greedy_m_center_init, heuristic_partition, partition_transfers_swaps)
from .baselines import brute_force_cover_time_graph, nearest_neighbor_rollout
from .records import RolloutRecord
from .sim import BatchStats, Instance, PlannerConfig, multi_agent_cover, run_batch

__version__ = "0.1.0"

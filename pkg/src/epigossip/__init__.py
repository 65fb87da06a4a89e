"""Epistemic gossip: depth-bounded knowledge states, call protocols, plan
verification and search, and the SAT reduction for goals with negations."""

from .graph import CommGraph, complete_bipartite, complete_digraph, complete_graph, path_graph
from .knowledge import (
    Change,
    DepthOverflowError,
    Fluent,
    InvalidStepError,
    K,
    KnowledgeState,
    OneWayCall,
    ParallelStep,
    Plan,
    SignedGoal,
    TwoWayCall,
    goal_T,
    initial_state,
    neg,
    pos,
)
from .planner import (
    PlanError,
    ProblemInstance,
    SearchBudgetExceeded,
    execute,
    hierarchy_demo,
    min_parallel_steps,
    quick_infeasible,
    search_optimal,
    solve_neg,
    verify,
)
from .protocols import NoProtocolError, auto_select
from .reduction import CnfFormula, cnf, extract_assignment, parse_dimacs, sat_oracle, sat_to_gossip

__version__ = "0.1.0"

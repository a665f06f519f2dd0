"""plpmcmc: MCMC-based conditional inference for PRISM-style probabilistic
logic programs, with Q-value proposal adaptation and exact brute-force oracles.
"""

from .lang import (
    ParseError,
    PlpError,
    Program,
    ProgramError,
    Var,
    parse_goal,
    parse_program,
    switch_outcomes,
    term_to_str,
    unify,
)
from .worlds import (
    extends,
    forget,
    mutually_exclusive,
    partition,
    pick_value,
    prob,
)
from .evaluator import (
    EvalError,
    EvalResult,
    StepLimitExceeded,
    UnsatisfiableEvidence,
    initial_sample,
    sample_eval,
)
from .adapt import (
    AdaptedSource,
    QStore,
    adapt,
    adapted_dist,
    increment_within_bound,
    independent_sampler,
)
from .mcmc import (
    ChainConfig,
    ChainResult,
    MultiSwitch,
    SingleSwitch,
    accept_prob,
    resample,
    run_chain,
)
from .oracle import (
    BranchLimitExceeded,
    ExactResult,
    exact_conditional,
    exact_conditional_worlds,
    exact_prob,
    exact_prob_worlds,
)
from . import bench

__all__ = [
    "AdaptedSource",
    "BranchLimitExceeded",
    "ChainConfig",
    "ChainResult",
    "EvalError",
    "EvalResult",
    "ExactResult",
    "MultiSwitch",
    "ParseError",
    "PlpError",
    "Program",
    "ProgramError",
    "QStore",
    "SingleSwitch",
    "StepLimitExceeded",
    "UnsatisfiableEvidence",
    "Var",
    "accept_prob",
    "adapt",
    "adapted_dist",
    "bench",
    "exact_conditional",
    "exact_conditional_worlds",
    "exact_prob",
    "exact_prob_worlds",
    "extends",
    "forget",
    "increment_within_bound",
    "independent_sampler",
    "initial_sample",
    "mutually_exclusive",
    "parse_goal",
    "parse_program",
    "partition",
    "pick_value",
    "prob",
    "resample",
    "run_chain",
    "sample_eval",
    "switch_outcomes",
    "term_to_str",
    "unify",
]

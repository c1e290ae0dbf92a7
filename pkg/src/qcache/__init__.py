"""Cache replacement policy competitiveness and WCET bounds via IPET."""
from .cache_sim import Policy, SetAssocConfig, simulate, simulate_set_assoc
from .competitiveness import ClaimMode, CompetitivenessClaim, SearchBudget, check_claim, verify_exhaustive
from .ipet import AnalysisConfig, analyze_program
from .milp import LinearModel, solve_exact
from .oracle import worst_observed
from .program import LatencyModel, parse_program

__all__ = [
    "Policy",
    "SetAssocConfig",
    "simulate",
    "simulate_set_assoc",
    "ClaimMode",
    "CompetitivenessClaim",
    "SearchBudget",
    "check_claim",
    "verify_exhaustive",
    "AnalysisConfig",
    "analyze_program",
    "LinearModel",
    "solve_exact",
    "worst_observed",
    "LatencyModel",
    "parse_program",
]

"""Optimal transport, optimal channels and KL-divergence geometry on finite spaces."""
from .errors import (
    BudgetError,
    DimensionError,
    MarginalMismatchError,
    OTKLError,
    SolverStateError,
    SupportError,
)
from .measures import (
    CostMatrix,
    Distribution,
    InfoBudget,
    JointDistribution,
    cross_information,
    entropy,
    kl_divergence,
    marginals,
    mutual_information,
)
from .transport_lp import TransportSolution, dual_value, solve_otp
from .channel import ChannelSolution, solve_ocp, solve_ocp_at_beta, value_of_information
from .info_otp import ConstrainedTransportSolution, check_theorem1, solve_constrained_otp
from .geometry import (
    PotentialPair,
    check_theorem2,
    cumulant,
    epsilon_feasibility,
    kl_minus_decomposition,
    kl_upper_bound,
    law_of_cosines,
)

__all__ = [
    "BudgetError", "DimensionError", "MarginalMismatchError", "OTKLError", "SolverStateError",
    "SupportError", "CostMatrix", "Distribution", "InfoBudget", "JointDistribution",
    "cross_information", "entropy", "kl_divergence", "marginals", "mutual_information",
    "TransportSolution", "dual_value", "solve_otp", "ChannelSolution", "solve_ocp",
    "solve_ocp_at_beta", "value_of_information", "ConstrainedTransportSolution",
    "check_theorem1", "solve_constrained_otp", "PotentialPair", "check_theorem2", "cumulant",
    "epsilon_feasibility", "kl_minus_decomposition", "kl_upper_bound", "law_of_cosines",
]

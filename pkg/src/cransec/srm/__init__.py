"""Secrecy-rate maximization by CCCP over SDP-relaxed subproblems."""
from .build import Subproblem, build_subproblem
from .certificates import CertificateReport, check_rank_certificates, compute_Y, kkt_residuals
from .evaluate import constraint_residuals, max_violation, surrogate_value
from .instance import VARIANTS, PowerConstraintSpec, PowerMode, ScaledInstance, prepare_instance
from .solve import SolveTrace, SRMResult, final_secrecy, run_cccp, solve_best_of, solve_srm
from .state import Anchors, AuxState, evaluate_aux, init_aux

__all__ = [
    "Anchors", "AuxState", "CertificateReport", "PowerConstraintSpec", "PowerMode", "SRMResult",
    "ScaledInstance", "SolveTrace", "Subproblem", "VARIANTS", "build_subproblem", "check_rank_certificates",
    "compute_Y", "constraint_residuals", "evaluate_aux", "init_aux", "kkt_residuals", "max_violation",
    "final_secrecy", "prepare_instance", "run_cccp", "solve_best_of", "solve_srm", "surrogate_value",
]

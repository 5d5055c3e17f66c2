"""Design, certification and scheduling of frugal resolvent splitting methods."""
from .design import (Design, ValidityReport, default_c, graph_stats, load_design, max_gamma,
                     preset, save_design, validate)
from .discrete import (branch_and_bound, min_edges_design, min_time_design_milp,
                       min_time_design_misdp)
from .errors import (DivergenceError, InfeasibleDesignError, SolverFailureError,
                     SplitForgeError)
from .factor import factor_cholesky, factor_eigen, factor_stieltjes
from .pep import (PEPCertificate, certify, pep_bound_d, pep_bound_n, pep_optimal_gamma_d,
                  pep_optimal_gamma_n, pep_optimal_W)
from .runtime import make_instance, run_d_iteration, run_n_iteration
from .sched import (Schedule, TimingModel, compute_schedule, export_gantt, iteration_stats,
                    lower_bound_q)
from .sdpdesign import ConstraintSet, Objective, dblock_constraints, solve_design

__version__ = "0.1.0"

"""Clearing payments, optimal bailouts and robust affine control for liability networks."""
from .control import ControlSolution, LemmaReport, check_lemma1, control_solution, solve_control
from .dynamic import (FREE, PRORATA, PaymentPlan, Trajectory, build_multistage_lp, clear_multistage,
                      discount_coeffs, feasible, simulate, terminal_weights)
from .lp import Constraint, LpProblem, LpSolution, LpStatus, LpValidationError, add_abs_epigraph, solve
from .network import (FinancialNetwork, NetworkValidationError, Scenario, ScenarioFileError, Violation,
                      admissible, load_bundled, load_scenario, pro_rata_matrix, save_scenario,
                      validate, validate_scenario)
from .robust import (EXACT, PAPER, AffinePolicy, RobustInfeasibleError, RobustSolution, UncertaintyBox,
                     adversarial_realization, evaluate_policy, monte_carlo, solve_robust,
                     worst_case_bounds)
from .static import ClearingResult, clear_free, clear_prorata, picard_clearing
from .suite import run_paper_suite

__version__ = "0.1.0"

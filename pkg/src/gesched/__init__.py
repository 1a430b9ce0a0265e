"""Optimal transmission scheduling for remote estimation over a two-state
Markov channel: value iteration, structural verification, and Monte Carlo
simulation."""

__version__ = "0.1.0"

from .model import (AssumptionViolation, ConfigError, ModelParams,
                    ParameterError, SolverConfig, load_config,
                    stationary_belief, validate, validate_config)
from .dynamics import (belief_next_no_tx, belief_next_tx, error_next,
                       folded_kernel_no_ack, gaussian_pdf, instantaneous_cost,
                       kernel_no_ack)
from .grids import (BeliefGrid, ErrorGrid, QuadratureRule, build_grids,
                    interp_belief, quadrature_for)
from .solver import (NEVER, BackupOperator, NonConvergence, PolicyTable,
                     QTable, Solution, StructureViolation, ThresholdProfile,
                     ValueTable, backup_q0, backup_q1, extract_policy,
                     extract_thresholds, solve, unfold, vi_step)
from .verify import CheckResult, VerificationReport, run_all
from .sim import (AlwaysTransmit, ErrorThreshold, EpisodeTrace, NeverTransmit,
                  Periodic, PolicyComparison, SimStats, ThresholdPolicy,
                  compare_policies, estimate_cost, run_episode,
                  verify_stability_bound)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Online learning over hidden-convex losses ``ℓ_t = h_t ∘ q``."""
from . import adversaries, domains, geometry, lab, learners
from .adversaries import (BanditObservation, CurlCycleAdversary, LinearHiddenSequence, LossRound,
                          QuadraticHiddenSequence, bandit_query, curl_cycle_round,
                          linear_hidden_sequence, quadratic_hidden_sequence, rectangle_circulation)
from .domains import Ball, Box, Scaled, bregman_project, euclidean_project, omd_step, shrunken
from .geometry import (AssumptionConstants, CompatReport, MetricField, Regularizer,
                       Reparameterization, bregman_divergence, compatibility_check, gallery_pair,
                       reconstruct_regularizer)
from .lab import (RateFit, RegretTrace, audit_geometry, bandit_decomposition, coupling_experiment,
                  fit_rate, hindsight_comparator, lower_bound_experiment, run_bandit,
                  run_bandit_batch, run_full_information, run_full_information_batch)
from .learners import (LearnerState, StepSizePlan, bogd_update, ogd_update, omd_update,
                       plan_stepsize_theorem1, plan_stepsize_theorem4)

__version__ = "0.1.0"

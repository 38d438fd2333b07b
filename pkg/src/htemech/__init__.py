"""Heterogeneous treatment effects as evidence about causal mechanisms.

Structural data-generating processes with mediators, exact and Monte Carlo
mediation decompositions, regression-based HTE tests, a seeded power-study
engine, and the interpretive tools that connect detected heterogeneity to
mechanism activation.
"""

__version__ = "0.1.0"

from .dgp import (CovariateSpec, MediatorSpec, OutcomeSpec, StructuralDGP, Term, TransformSpec, builtin_dgp,
                  potential_outcome, sample_units, turnout_dgp, two_mech_dgp, voter_dgp)
from .effects import (ConditionalEffects, EffectDecomposition, ExclusionReport, MembershipVerdict, check_effective,
                      check_exclusion, conditional_effects, is_mdv, is_relevant, oracle_voter_cate,
                      unit_decomposition, verify_identification, verify_linear_invariance)
from .estimate import (DesignSpec, InteractionOLS, LogitFit, LogitIRLS, OlsFit, diff_cate_test, fit_logit, fit_ols,
                       recover_utility, utility_interaction_fit)
from .inference import (BayesConfig, BayesPosterior, CaseVerdict, MonotoneSpec, NormalNoise, UniformNoise,
                        bayes_density, bayes_point, check_sign_conditions, classify_case, monotone_hte)
from .simulate import SimCell, SimGrid, mu_for_support, power_table, run_cell, run_grid

__all__ = [
    "CovariateSpec", "MediatorSpec", "OutcomeSpec", "StructuralDGP", "Term", "TransformSpec", "builtin_dgp",
    "potential_outcome", "sample_units", "turnout_dgp", "two_mech_dgp", "voter_dgp",
    "ConditionalEffects", "EffectDecomposition", "ExclusionReport", "MembershipVerdict", "check_effective",
    "check_exclusion", "conditional_effects", "is_mdv", "is_relevant", "oracle_voter_cate", "unit_decomposition",
    "verify_identification", "verify_linear_invariance",
    "DesignSpec", "InteractionOLS", "LogitFit", "LogitIRLS", "OlsFit", "diff_cate_test", "fit_logit", "fit_ols",
    "recover_utility", "utility_interaction_fit",
    "BayesConfig", "BayesPosterior", "CaseVerdict", "MonotoneSpec", "NormalNoise", "UniformNoise", "bayes_density",
    "bayes_point", "check_sign_conditions", "classify_case", "monotone_hte",
    "SimCell", "SimGrid", "mu_for_support", "power_table", "run_cell", "run_grid",
]

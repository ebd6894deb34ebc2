"""Penalized quasi-likelihood with within-cluster resampling (PQL_WCR).

Variable selection and estimation for clustered/longitudinal data whose
cluster size may be informative about the response.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .model_core import (BINOMIAL, GAUSSIAN, DatasetView, DomainError, Family, LongitudinalDataset,
                         ModelFamily, full_gee_score, mean_link, quasi_loglik, quasi_score, variance_fn)
from .penalty import PenaltyKind, PenaltySpec, penalty_derivative, penalty_value, soft_threshold
from .solver import (DivergenceError, FitResult, SolverOptions, bic_score, fit_penalized, kkt_violation,
                     tune_lambda)
from .wcr import (AggregateResult, ResampleIndex, WcrEnsemble, aggregate, draw_resample, run_wcr,
                  selected_set, tune_aggregation)

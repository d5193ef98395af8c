"""Adaptive multichannel detection in subspace interference.

A library plus experiment CLI for a family of adaptive detectors that reject
structured interference and trade robustness against selectivity under signal
mismatch, with closed-form operating characteristics and a Monte Carlo engine
that validates them.
"""

__version__ = "0.1.0"

from .analytic import (AnalyticParams, cdf_glrt_central, cdf_glrt_conditional,
                       esnr_params, has_analytic, incomplete_gamma_reg,
                       invert_threshold, pd_abort_i, pd_aed, pd_for, pd_glrt_i,
                       pd_twabort_i, pd_wabort_i, pdf_beta_h0, pdf_beta_h1,
                       pfa_abort_i, pfa_aed, pfa_for, pfa_glrt_i,
                       pfa_twabort_i, pfa_wabort_i)
from .detectors import (DetectorKind, DetectorSpec, SufficientPair,
                        detector_statistic, loss_factor, loss_factor_values,
                        statistic_values, sufficient_pair,
                        sufficient_pair_reference, sufficient_pairs)
from .errors import (AccuracyError, ConfigError, ConstructionError,
                     InsufficientTrialsError, InvalidParameterError,
                     ThresholdInversionError, TwabortError,
                     UnsupportedDetectorError)
from .montecarlo import (EstimateResult, PairSamples, TrialPlan, binomial_se,
                         calibrate_threshold, empirical_threshold, estimate_pd,
                         run_plan, simulate_pairs)
from .scenario import (DataBatch, MismatchMetrics, Scenario,
                       build_actual_signal, build_interference_vector,
                       build_nominal_matrix, complex_gaussian,
                       covariance_exponential, generate_interference_subspace,
                       make_scenario, mismatch_metrics, sample_batch,
                       sample_complex_gaussian)

_SUBMODULES = ("analytic", "cli", "detectors", "errors", "experiments",
               "montecarlo", "scenario")
__all__ = [name for name in dir()
           if not name.startswith("_") and name not in _SUBMODULES]

"""Estimation of drift coefficients in linear SPDEs from local measurements.

The library simulates linear second-order stochastic PDEs driven by
space-time white noise on the unit cube, extracts spatially localized
measurements through scaled point-spread functions, computes the augmented
maximum-likelihood estimator of the coefficient vector, and provides the
asymptotic-covariance, inference and reproducing-kernel machinery needed to
study the estimator's convergence and the matching two-point lower bounds.
"""

__version__ = "0.1.0"

from .errors import (Degenerate, Divergent, FactorizationFailure, Infeasible,
                     LocalSPDEError, NonElliptic, NotDissipative,
                     NotSelfAdjoint, SingularGram, SingularInformation,
                     SupportViolation)
from .kernels import (KernelSpec, bump_kernel, kernel_by_name,
                      laplacian_bump_kernel, normalized, scale_kernel)
from .operators import (DiagonalizingTransform, GalerkinSystem, OperatorSpec,
                        advection_diffusion_spec, diagonalize,
                        ellipticity_check, galerkin_drift,
                        operator_spec_from_config, operator_spec_to_config,
                        reaction_spec_2d)
from .simulate import (CoefficientTrajectory, Stepper, build_stepper,
                       sample_initial, simulate_path, stationary_covariance)
from .measurements import (CovarianceModel, MeasurementDesign,
                           MeasurementPath, ProjectionTensors,
                           analytic_covariance, design_grid,
                           extract_measurements, kernel_gram,
                           measurement_path_covariance, project_kernel)
from .estimator import (EstimateReport, augmented_mle, observed_fisher,
                        rate_matrix, standardized_error)
from .fourier import asymptotic_sigma, fractional_norm_sq
from .inference import (InferenceConfig, ReactionModel, ReactionTestResult,
                        chi2_quantile, confidence_set_membership,
                        ks_pvalue, ks_statistic, lilliefors_normal,
                        normal_quantile, reaction_test)
from .rkhs import (GaussianPairTruncation, SampledFunction,
                   hellinger_gaussian, lower_bound_condition,
                   measurement_rkhs_bound, nystrom_rkhs_norm, ou_rkhs_inner,
                   ou_rkhs_norm, rkhs_bound_check, spde_rkhs_norm)
from .experiments import ExperimentConfig, run_experiment

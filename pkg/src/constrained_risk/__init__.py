"""Constrained risk lower bounds via chi-square affinities.

Library entry points are re-exported here; see ``constrained-risk --help``
for the command line.
"""

__version__ = "0.1.0"

from ._accel import backend_name
from .bounds import (BoundReport, bound_convex, bound_for_loss, bound_from_models, bound_generic,
                     bound_power)
from .dist import (Discrete, Gaussian, Product, Score, Tilted, builtin_score, in_G0,
                   influence_pairing, mean_influence, parse_model, phi, rejection_sample,
                   tilt_sample)
from .divergence import (AffinityResult, affinity, affinity_closed_form, affinity_gaussian,
                         affinity_monte_carlo, affinity_product, affinity_quadrature,
                         chi_square_quadrature, verify_lemma_tilt)
from .errors import (AbsoluteContinuityError, ConfigError, ConstrainedRiskError, InfeasibleError,
                     InvalidInputError, NumericError)
from .experiments import ExperimentConfig, ExperimentReport, run_experiment
from .loss import LossFn, absolute, custom, parse_loss, power, squared, threshold
from .simulate import (Estimator, hodges_estimator, mc_risk, oracle_min_risk, sample_mean,
                       violation_search)

import types as _types

__all__ = sorted(name for name, obj in globals().items()
                 if not name.startswith("_") and not isinstance(obj, _types.ModuleType))

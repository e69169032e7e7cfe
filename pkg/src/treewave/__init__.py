"""Random wavelet series driven by hidden Markov trees.

Modules: ``kernels`` (transition schedules), ``params`` (derived
parameters), ``tree`` (sampling), ``synth`` (coefficients and paths),
``spectrum`` (predicted multifractal spectra), ``analysis`` (empirical
estimators), ``mc`` (Monte Carlo harness), ``config`` and ``cli``.
"""

from .errors import (AmbiguityError, ConfigurationError, DefinitionError, DomainError, RangeError,
                     TreewaveError, UndefinedExponentError, UnknownEventError)
from .kernels import (ConstantKernels, ExplicitTable, Geometric, KernelSchedule, PairDistribution,
                      ProductBernoulli, Remark4Kernels, Table, remark4_schedule, validate_schedule)
from .params import DerivedParams, derive, phi0, phi_gf
from .tree import TreeSample, sample_tree
from .synth import CoefficientField, SamplePath, analyze, coefficients, fractional_integrate, synthesize
from .spectrum import SpectrumPrediction, large_deviation_spectrum, p_theta_empty, predict_spectrum
from .analysis import (box_dimension, construct_point, estimate_beta, estimate_holder, holder_field,
                       iso_holder_sets, layer_counts, limsup_membership, locality_check)
from .mc import mc_moment, mc_probability, mc_theta_dimension
from .config import RunConfig, parse_config

__version__ = "0.1.0"

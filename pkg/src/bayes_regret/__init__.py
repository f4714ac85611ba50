"""Discrete Bayesian priors with explicit finite-horizon log-loss regret guarantees."""

__version__ = "0.1.0"

from .errors import ConsistencyError, EnumerationBudgetError, InputError, UndefinedConditionalError
from .measures import (
    Alphabet,
    Bernoulli,
    ChangePoint,
    Dirac,
    IID,
    Markov,
    ModelClass,
    ProcessMeasure,
    Uniform,
    build_class,
    conditional,
    marginal,
    sample,
    uniform_measure,
)
from .mixture import Component, DiscretePrior
from .loss import MCEstimate, cumulative_kl, mc_loss, predict_next, restricted_kl
from .prior import assemble_prior, build_construction, mix_with_uniform, weights
from .bounds import bound_rhs, verify_theorem1

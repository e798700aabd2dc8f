"""Preferential Bayesian optimization from pairwise comparisons.

Thompson sampling over a pair-kernel posterior, baseline pair-selection
policies, a benchmark harness with regret accounting, and an interactive
session service for live human judging.
"""

from importlib import resources

from .inference import (
    LOGISTIC,
    LogisticLink,
    NoConvergence,
    PreferenceHistory,
    PrefPosterior,
    beta,
    fit,
    information_gain,
    kappa_from_norm,
    predict_mean,
    predict_var,
    sample_posterior,
    sigma,
)
from .kernels import (
    BaseKernel,
    DuelingKernel,
    RkhsSample,
    draw_rkhs_sample,
    eval_base,
    eval_dueling,
    gram,
    mercer_truncation,
)
from .numeric import (
    DimensionMismatch,
    NotPsd,
    PsdFactor,
    factor_psd,
    rng_from_seed,
    sample_mvn,
    solve_psd,
)
from .policies import (
    CandidateSet,
    PairDecision,
    duel_ucb_select,
    gpts_select,
    maxminlcb_select,
    pfts_select,
    popbo_select,
    random_select,
)
from .scalar_gp import ScalarPosterior, fit_scalar

__version__ = "0.1.0"


def fixture_path(name: str):
    """Filesystem path of a bundled data fixture (e.g. catalyst_synthetic.csv)."""
    return resources.files("prefbo.data").joinpath(name)

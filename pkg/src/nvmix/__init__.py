"""Semiparametric estimation for normal variance-mean mixtures."""

__version__ = "0.1.0"

from .special_functions import bessel_k, complex_pow, log_gamma  # noqa: E402
from .models import (  # noqa: E402
    Beta, GIG, Gamma, GigParams, MixtureModel, PointMass, Sample,
    exact_mellin_of_mixing, gh_density, gig_density, gig_laplace, gig_sample, mixture_sample,
)
from .mu_estimator import MuEstimate, WeightFunction, estimate_mu, sine_weight, w_n  # noqa: E402
from .mellin_estimator import (  # noqa: E402
    DensityEstimate, EstimatorConfig, MellinEstimate, ecf, estimate_density_known_mu,
    estimate_density_plugin, mellin_g_hat, mellin_L_hat,
)
from .evaluation import MonteCarloStudy, fit_slope, r_metric, refit_density, run_study  # noqa: E402

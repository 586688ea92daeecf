"""Matrix-free Schatten p-norm estimation for symmetric positive semi-definite operators."""

from .chebyshev import (ChebyshevModel, SpectralInterval, SpectrumViolationError, cheby_coeffs,
                        cheby_eval, cheby_schatten_estimate, degree_bound, trefethen_bound)
from .harness import Envelope, ExperimentPlan, n_sweep, quantile, run_envelope
from .linops import DenseSym, FunctionOperator, LinearOperator, SparseSym
from .matgen import gen_synthetic, load_matrix_market, trefethen, write_matrix_market
from .montecarlo import (EstimateReport, McConfig, cheby_sample_bound, sample_bound,
                         schatten_estimate, schatten_exact, trace_estimate)
from .oed import HeatModel, PosteriorCovOp, dense_posterior_cov, posterior_schatten
from .probes import ProbeStream
from .spectrum import estimate_interval

__all__ = [
    "ChebyshevModel", "DenseSym", "Envelope", "EstimateReport", "ExperimentPlan",
    "FunctionOperator", "HeatModel", "LinearOperator", "McConfig", "PosteriorCovOp",
    "ProbeStream", "SparseSym", "SpectralInterval", "SpectrumViolationError",
    "cheby_coeffs", "cheby_eval", "cheby_sample_bound", "cheby_schatten_estimate",
    "degree_bound", "dense_posterior_cov", "estimate_interval", "gen_synthetic",
    "load_matrix_market", "n_sweep", "posterior_schatten", "quantile", "run_envelope",
    "sample_bound", "schatten_estimate", "schatten_exact", "trace_estimate", "trefethen",
    "trefethen_bound", "write_matrix_market",
]

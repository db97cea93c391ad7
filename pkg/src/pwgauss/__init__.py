"""Gaussian interpolation of bandlimited functions in the flat limit.

Paley-Wiener test functions with closed-form spectra, Gaussian interpolants
on lattice and perturbed-lattice nodes, and spectral/spatial error analysis
as the Gaussian flattens.
"""
from .errors import FactorizationFailure, HypothesisViolation, PWGaussError, SizeCapExceeded
from .geometry import SpectrumDomain, contains, inscribed_delta, measure
from .nodes import NodeRecipe, NodeSet, kadec_perturb, lattice_nodes, separation
from .kernel import (GaussianKernel, assemble_gram, kernel_eval, kernel_spectrum,
                     min_eigenvalue_estimate, solve_coefficients)
from .pwspace import (Atom, BandlimitedFunction, pw_eval, pw_l2_norm, pw_spectrum,
                      random_bandlimited, sample_on_nodes, sup_bound_check)
from .interpolator import Interpolant, build_interpolant, interp_eval, interp_spectrum
from .analysis import (ErrorReport, RateFit, TruncationPolicy, fit_rate, l2_error,
                       lambda_sweep, out_of_band_energy, sup_error, truncation_study)

__version__ = "0.1.0"

__all__ = [
    "PWGaussError", "HypothesisViolation", "FactorizationFailure", "SizeCapExceeded",
    "SpectrumDomain", "contains", "inscribed_delta", "measure",
    "NodeRecipe", "NodeSet", "kadec_perturb", "lattice_nodes", "separation",
    "GaussianKernel", "assemble_gram", "kernel_eval", "kernel_spectrum",
    "min_eigenvalue_estimate", "solve_coefficients",
    "Atom", "BandlimitedFunction", "pw_eval", "pw_l2_norm", "pw_spectrum",
    "random_bandlimited", "sample_on_nodes", "sup_bound_check",
    "Interpolant", "build_interpolant", "interp_eval", "interp_spectrum",
    "ErrorReport", "RateFit", "TruncationPolicy", "fit_rate", "l2_error", "lambda_sweep",
    "out_of_band_energy", "sup_error", "truncation_study",
]

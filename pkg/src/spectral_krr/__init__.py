"""Kernel ridge regression on manifolds with closed-form Laplace-Beltrami spectra."""

from .errors import (
    InvalidPointError,
    InvalidSpecError,
    LevelSplitError,
    NotInRKHSError,
    NumericalError,
    SpectralKRRError,
    UnsupportedManifoldError,
    ValidityError,
)
from .manifolds import circle, get_manifold, sphere2, sphere3, torus
from .kernels import KernelSpec, SpectralCoeffs, bandlimited, heat, kernel_eval, kernel_matrix, sobolev
from .regression import Samples, assumption_constants, fit, l2_error, predict

__version__ = "0.1.0"

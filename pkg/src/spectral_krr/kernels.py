"""Spectral-filter kernels k(x, y) = sum_l g(lambda_l) u_l(x) u_l(y).

Infinite-rank families (heat, Sobolev) are truncated at an eigen-level
boundary chosen from an analytic majorant of the neglected terms, so every
kernel value carries a certificate: the omitted tail is below
``tau * |partial sum|`` for every evaluated pair.

Rounding is separate from truncation: level terms are summed in floating
point, so each value also carries an absolute error of order machine
epsilon times k(x, x).  Heat kernels at small t and large distance fall
below that floor and are then accurate in absolute, not relative, terms.
If the tolerance cannot be met below the eigenvalue ceiling (slowly
decaying Sobolev filters), the ceiling is used and a warning is issued.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import manifolds as mf
from .errors import InvalidSpecError, NotInRKHSError

DEFAULT_TAU = 1e-12
FAMILIES = ("bandlimited", "heat", "sobolev")

# hard ceiling on the truncation eigenvalue; torus entries keep the number of
# lattice vectors below the ceiling at a few times 1e4
_LAMBDA_CEILING = {"circle": 4.0e6, "sphere2": 9.0e4, "sphere3": 9.0e4}
_TORUS_CEILING = {1: 4.0e6, 2: 4.0e4, 3: 2.5e3, 4: 4.0e2}


def lambda_ceiling(manifold):
    if manifold.kind == "torus":
        return _TORUS_CEILING[manifold.dim]
    return _LAMBDA_CEILING[manifold.kind]


@dataclass(frozen=True)
class KernelSpec:
    family: str
    param: float
    manifold: mf.SpectralManifold
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpecError(f"unknown kernel family {self.family!r}")
        if not (self.param > 0 and math.isfinite(self.param)):
            raise InvalidSpecError(f"{self.family} parameter must be positive and finite")
        if self.family == "sobolev" and self.param <= self.manifold.dim / 2:
            raise InvalidSpecError(
                f"sobolev order s={self.param} must exceed m/2={self.manifold.dim / 2}"
            )
        if not 0 < self.tau < 1:
            raise InvalidSpecError("truncation tolerance must lie in (0, 1)")

    @property
    def finite_rank(self):
        return self.family == "bandlimited"

    @property
    def omega(self):
        if self.family != "bandlimited":
            raise AttributeError("only bandlimited kernels have a bandlimit")
        return self.param

    def g(self, lam):
        """Spectral filter, vectorized over eigenvalues."""
        lam = np.asarray(lam, dtype=float)
        if self.family == "bandlimited":
            return np.where(lam <= self.param**2, 1.0, 0.0)
        if self.family == "heat":
            return np.exp(-lam * self.param / 2.0)
        return (1.0 + lam) ** (-self.param)


def bandlimited(manifold, omega, tau=DEFAULT_TAU):
    return KernelSpec("bandlimited", float(omega), manifold, tau)


def heat(manifold, t, tau=DEFAULT_TAU):
    return KernelSpec("heat", float(t), manifold, tau)


def sobolev(manifold, s, tau=DEFAULT_TAU):
    return KernelSpec("sobolev", float(s), manifold, tau)


@dataclass
class SpectralCoeffs:
    """Coefficients in the fixed eigenbasis, for every basis function with lambda <= lambda_max."""

    manifold: mf.SpectralManifold
    coeffs: np.ndarray
    lambda_max: float
    _lams: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        self._lams = mf.basis_lambdas(self.manifold, self.lambda_max)
        if self.coeffs.shape[0] != self._lams.shape[0]:
            raise ValueError(
                f"{self.coeffs.shape[0]} coefficients given but {self.manifold.name} has "
                f"{self._lams.shape[0]} basis functions with lambda <= {self.lambda_max}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")

    @classmethod
    def zeros(cls, manifold, lambda_max):
        return cls(manifold, np.zeros(mf.basis_size(manifold, lambda_max)), lambda_max)

    @property
    def lambdas(self):
        return self._lams

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def resized(self, lambda_max):
        """Zero-pad or cut to another level cap (cutting drops the higher modes)."""
        size = mf.basis_size(self.manifold, lambda_max)
        out = np.zeros(size)
        k = min(size, self.coeffs.shape[0])
        out[:k] = self.coeffs[:k]
        return SpectralCoeffs(self.manifold, out, lambda_max)

    def mass_above(self, lambda_max):
        """L2 norm of the part of the expansion above ``lambda_max``."""
        return float(np.linalg.norm(self.coeffs[self._lams > math.floor(lambda_max)]))

    def evaluate(self, X):
        return mf.eigenfunction_matrix(self.manifold, X, self.lambda_max) @ self.coeffs


# ---------------------------------------------------------------------------
# tail majorants


def tail_majorant(spec, lam_cut, power=1):
    """Upper bound on sum over levels with lambda > lam_cut of g(lambda)^power * mult / vol.

    Since |sum_{j in level} u_j(x) u_j(y)| <= mult / vol on the built-in
    (homogeneous) manifolds, this also bounds the truncation error of the
    kernel at every pair.
    """
    man = spec.manifold
    lam_int = int(math.floor(lam_cut))
    if spec.family == "bandlimited":
        band = mf.list_levels(man, spec.param**2)
        return sum(lv.multiplicity for lv in band if lv.lam > lam_int) / man.volume
    if spec.family == "heat":
        a = power * spec.param / 2.0
        if man.kind in ("circle", "torus"):
            val = _lattice_heat_tail(man.dim, a, lam_int)
        else:
            val = _sphere_heat_tail(man.kind, a, lam_int)
    else:
        sig = power * spec.param
        val = _sobolev_tail(man, sig, lam_int)
    return val / man.volume


def _lattice_heat_tail(m, a, lam_int):
    # {|k|^2 > L} lies outside the cube max|k_i| <= floor(sqrt(L/m))
    J = math.isqrt(lam_int // m) if m > 1 else math.isqrt(lam_int)
    j = np.arange(-J, J + 1)
    S = float(np.exp(-a * j * j).sum())
    first = math.exp(-a * (J + 1) ** 2)
    ratio = math.exp(-a * (2 * J + 3))
    T = 2.0 * first / (1.0 - ratio) if ratio < 1 else math.inf
    if m == 1:
        return T
    return S**m * math.expm1(m * math.log1p(T / S))


def _sphere_heat_tail(kind, a, lam_int):
    L = mf._max_degree(kind, lam_int)
    lam = lambda l: mf._degree_lambda(kind, l)
    mult = lambda l: mf._degree_mult(kind, l)
    total, l = 0.0, L + 1
    # consecutive-term ratios are nonincreasing, so once one drops below 1/2
    # the rest is dominated by a geometric series
    for _ in range(100000):
        h = mult(l) * math.exp(-a * lam(l))
        r = mult(l + 1) / mult(l) * math.exp(-a * (lam(l + 1) - lam(l)))
        if r < 0.5:
            return total + h / (1.0 - r)
        total += h
        l += 1
    return math.inf


def _sobolev_tail(man, sig, lam_int):
    kind = man.kind
    if kind == "circle":
        J = math.isqrt(lam_int)
        if J < 1:
            return math.inf
        return 2.0 * J ** (1 - 2 * sig) / (2 * sig - 1)
    if kind == "torus":
        m = man.dim
        R = math.sqrt(lam_int + 1)
        Rp = R - math.sqrt(m) / 2
        if Rp <= 0:
            return math.inf
        Vm = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
        return (1 + math.sqrt(m) / (2 * R)) ** (2 * sig) * m * Vm * Rp ** (m - 2 * sig) / (2 * sig - m)
    L = mf._max_degree(kind, lam_int)
    if L < 1:
        return math.inf
    if kind == "sphere2":
        return (L * (L + 1)) ** (1 - sig) / (sig - 1)
    return (L + 1) ** (3 - 2 * sig) / (2 * sig - 3)


def truncation_cut(spec, ref, power=1):
    """Smallest level eigenvalue whose tail majorant is below ``tau * ref``.

    Returns ``(lambda_cut, tail_bound)``.  If the ceiling is reached first,
    the ceiling and its (larger) tail bound are returned.
    """
    man = spec.manifold
    if spec.family == "bandlimited":
        return float(math.floor(spec.param**2)), 0.0
    target = spec.tau * ref
    ceiling = lambda_ceiling(man)
    lam = 4.0
    while tail_majorant(spec, lam, power) >= target:
        if lam >= ceiling:
            tail = tail_majorant(spec, ceiling, power)
            warnings.warn(
                f"{spec.family} kernel on {man.name}: truncation tolerance {spec.tau:g} not reachable "
                f"below lambda={ceiling:g}; certified tail bound is {tail:.3g}",
                RuntimeWarning, stacklevel=3,
            )
            return ceiling, tail
        lam = min(2.0 * lam, ceiling)
    levels = [lv.lam for lv in mf.list_levels(man, lam)]
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if tail_majorant(spec, levels[mid], power) < target:
            hi = mid
        else:
            lo = mid + 1
    return levels[lo], tail_majorant(spec, levels[lo], power)


# ---------------------------------------------------------------------------
# evaluation


def _level_weighted_sum(spec, levels, X, Y):
    acc = None
    for lv, Z in zip(levels, mf.iter_zonal_sums(spec.manifold, levels, X, Y)):
        w = float(spec.g(lv.lam))
        if w == 0.0:
            continue
        acc = w * Z if acc is None else acc + w * Z
    if acc is None:
        acc = np.zeros(np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]))
    return acc


def kernel_cross_with_cut(spec, X, Y):
    """Kernel values between two point batches and the truncation eigenvalue used."""
    man = spec.manifold
    X = mf.as_points(man, X)[:, None, :]
    Y = mf.as_points(man, Y)[None, :, :]
    if spec.family == "bandlimited":
        cut = spec.param**2
        return _level_weighted_sum(spec, mf.list_levels(man, cut), X, Y), cut
    # first pass: certify relative to the constant mode, a lower bound on the diagonal
    cut, tail = truncation_cut(spec, 1.0 / man.volume)
    K = _level_weighted_sum(spec, mf.list_levels(man, cut), X, Y)
    # no point certifying truncation below the rounding floor of the sum
    diag = sum(float(spec.g(lv.lam)) * lv.multiplicity for lv in mf.list_levels(man, cut)) / man.volume
    floor = np.finfo(float).eps * diag
    ref = max(float(np.min(np.abs(K))), floor) if K.size else floor
    if K.size and tail >= spec.tau * ref:
        cut2, _ = truncation_cut(spec, ref)
        if cut2 > cut:
            cut = cut2
            K = _level_weighted_sum(spec, mf.list_levels(man, cut), X, Y)
    return K, cut


def kernel_cross(spec, X, Y):
    """Matrix of kernel values k(X_i, Y_j)."""
    return kernel_cross_with_cut(spec, X, Y)[0]


def kernel_eval(spec, x, y):
    """Kernel value at a single pair of points."""
    return float(kernel_cross(spec, mf.as_point(spec.manifold, x), mf.as_point(spec.manifold, y))[0, 0])


def kernel_matrix(spec, points):
    """Symmetric Gram matrix; the upper triangle is mirrored so symmetry is exact."""
    C = kernel_cross(spec, points, points)
    return np.triu(C) + np.triu(C, 1).T


def spectral_weights(spec, lambda_max):
    """g(lambda) for each basis function up to ``lambda_max``."""
    return spec.g(mf.basis_lambdas(spec.manifold, lambda_max))


def rkhs_norm_sq(spec, coeffs):
    """Squared RKHS norm sum_j c_j^2 / g(lambda_j)."""
    c = coeffs.coeffs
    w = spec.g(coeffs.lambdas)
    outside = (w == 0) & (c != 0)
    if np.any(outside):
        raise NotInRKHSError(
            f"{int(outside.sum())} nonzero coefficients where g(lambda) = 0"
        )
    inside = w > 0
    return float(np.sum(c[inside] ** 2 / w[inside]))

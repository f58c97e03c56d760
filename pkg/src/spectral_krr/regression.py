"""Kernel ridge / minimum-norm interpolation and the RKHS error-bound calculators.

Measure convention: kernels and eigenfunctions live on the unnormalized
volume measure.  The bound formulas are stated for a probability measure,
under which the operator eigenvalues are ``t_l = g(lambda_l) / vol`` and the
orthonormal eigenfunctions are ``sqrt(vol) * u_l``; L2 errors returned here
are unnormalized and callers divide by ``sqrt(vol)`` before comparing with a
bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels as kn
from . import manifolds as mf
from .bounds import BoundReport
from .errors import LevelSplitError, NumericalError, ValidityError

RCOND = 1e-10
_PREDICT_CHUNK = 200_000  # max kernel pairs evaluated at once


@dataclass
class Samples:
    points: np.ndarray
    values: np.ndarray
    truth: kn.SpectralCoeffs | None = None
    sigma: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if len(self.points) != self.values.shape[0] or self.values.shape[0] < 1:
            raise ValueError("need the same positive number of points and responses")


@dataclass(frozen=True)
class FitResult:
    spec: kn.KernelSpec
    points: np.ndarray
    weights: np.ndarray
    alpha: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.weights.shape[0]


def _check_finite(a, what, condition=None):
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite {what}", condition=condition)


def fit(spec, samples, alpha):
    """Solve (n alpha I + K) a = Y, or a = K^+ Y when alpha == 0.

    Finite-rank (bandlimited) kernels are solved in feature space: with
    K = Phi Phi^T and a thin SVD Phi = U S V^T, the same weights follow
    from U without forming the n x n Gram matrix.  The pseudoinverse drops
    eigenvalues of K below ``RCOND`` times the largest one.
    """
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError("alpha must be a nonnegative finite number")
    X = mf.as_points(spec.manifold, samples.points)
    Y = samples.values
    _check_finite(Y, "responses")
    n = X.shape[0]
    if spec.finite_rank:
        a, diag = _fit_features(spec, X, Y, alpha)
    else:
        a, diag = _fit_gram(spec, X, Y, alpha)
    diag.update(rcond=RCOND, n=n)
    _check_finite(a, "dual weights", diag.get("condition"))
    return FitResult(spec, X, a, float(alpha), diag)


def _fit_features(spec, X, Y, alpha):
    n = X.shape[0]
    Phi = mf.eigenfunction_matrix(spec.manifold, X, spec.param**2)
    _check_finite(Phi, "feature matrix")
    U, s, _ = np.linalg.svd(Phi, full_matrices=False)
    ev = s**2  # nonzero eigenvalues of K
    top = ev[0] if ev.size else 0.0
    keep = ev > RCOND * top if top > 0 else np.zeros_like(ev, dtype=bool)
    UY = U.T @ Y
    if alpha == 0:
        a = U[:, keep] @ (UY[keep] / ev[keep])
        cond = top / ev[keep].min() if keep.any() else math.inf
    else:
        na = n * alpha
        a = U @ (UY / (ev + na)) + (Y - U @ UY) / na
        cond = (top + na) / ((ev.min() if ev.size == n else 0.0) + na)
    return a, {"rank": int(keep.sum()), "condition": float(cond), "solver": "features"}


def _fit_gram(spec, X, Y, alpha):
    n = X.shape[0]
    K = kn.kernel_matrix(spec, X)
    _check_finite(K, "Gram matrix")
    if alpha > 0:
        A = K + n * alpha * np.eye(n)
        try:
            cf = scipy.linalg.cho_factor(A, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Cholesky failed: {exc}") from exc
        a = scipy.linalg.cho_solve(cf, Y)
        ev = np.linalg.eigvalsh(K)
        cond = (ev[-1] + n * alpha) / (max(ev[0], 0.0) + n * alpha)
        return a, {"rank": n, "condition": float(cond), "solver": "cholesky"}
    ev, V = np.linalg.eigh(K)
    top = ev[-1]
    keep = ev > RCOND * top
    a = V[:, keep] @ ((V[:, keep].T @ Y) / ev[keep])
    cond = top / ev[keep].min() if keep.any() else math.inf
    return a, {"rank": int(keep.sum()), "condition": float(cond), "solver": "pinv"}


def predict(fit_result, x):
    """f_hat(x) = sum_i a_i k(x, X_i); scalar for one point, array for a batch."""
    spec = fit_result.spec
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and spec.manifold.kind != "circle")
    X = mf.as_points(spec.manifold, x)
    a = fit_result.weights
    out = np.empty(X.shape[0])
    step = max(1, _PREDICT_CHUNK // max(1, fit_result.n))
    for lo in range(0, X.shape[0], step):
        out[lo:lo + step] = kn.kernel_cross(spec, X[lo:lo + step], fit_result.points) @ a
    return float(out[0]) if single else out


def spectral_expand(fit_result, lambda_max):
    """Coefficients of f_hat up to ``lambda_max`` and a bound on the L2 norm of the rest.

    c_j = g(lambda_j) sum_i a_i u_j(X_i).  The remainder satisfies
    ||f_hat_tail||^2 <= (sum_i |a_i|)^2 / vol * sum_{tail levels} g^2 mult.
    """
    spec = fit_result.spec
    man = spec.manifold
    Phi = mf.eigenfunction_matrix(man, fit_result.points, lambda_max)
    coeffs = kn.spectral_weights(spec, lambda_max) * (Phi.T @ fit_result.weights)
    a1 = float(np.abs(fit_result.weights).sum())
    if a1 == 0:
        tail = 0.0
    else:
        tail = a1 * math.sqrt(kn.tail_majorant(spec, lambda_max, power=2))
    return kn.SpectralCoeffs(man, coeffs, lambda_max), tail


@dataclass(frozen=True)
class L2Error:
    error: float
    certified_slack: float


def l2_error(fit_result, truth, lambda_max):
    """Unnormalized L2 distance between the fit and a spectrally given truth.

    ``error`` is exact over levels up to ``lambda_max``; the true distance
    lies in [error, error + certified_slack].
    """
    est, fit_tail = spectral_expand(fit_result, lambda_max)
    t = truth.resized(lambda_max)
    err = float(np.linalg.norm(est.coeffs - t.coeffs))
    slack = fit_tail + truth.mass_above(lambda_max)
    return L2Error(err, slack)


def monte_carlo_l2_sq(fit_result, truth, n_test, seed):
    """Monte Carlo estimate of ||f_hat - f*||^2 and its standard error."""
    man = fit_result.spec.manifold
    Z = mf.sample_uniform(man, n_test, seed)
    diff2 = (predict(fit_result, Z) - truth.evaluate(Z)) ** 2
    return man.volume * float(diff2.mean()), man.volume * float(diff2.std(ddof=1)) / math.sqrt(n_test)


# ---------------------------------------------------------------------------
# theorem inputs and bounds


@dataclass
class TheoremInputs:
    p: int
    t_next: float
    K_p: float
    R_p: float
    gamma: float
    gamma_prime: float
    vol: float
    trace_tail: float | None = None
    sigma: float | None = None
    delta: float | None = None
    alpha: float | None = None
    n: int | None = None
    f_norm_H: float | None = None
    psi1_norm: float | None = None

    def __post_init__(self):
        for name in ("t_next", "K_p", "R_p", "gamma", "gamma_prime"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.p < 1:
            raise ValueError("p must be a positive integer")


def _sample_gate(inp):
    return max(7.0, 3.0 * inp.gamma_prime) * inp.K_p * math.log(max(2.0, 4.0 * inp.gamma) * inp.p / inp.delta)


def bound_rkhs(inputs, noisy, measured=math.nan):
    """Bias, noise and total error bound for the general RKHS theorem (normalized L2).

    Conditions with an unspecified universal constant are reported in
    ``advisory`` and never enter ``conditions``.
    """
    inp = inputs
    if inp.delta is None or not 0 < inp.delta < 1:
        raise ValidityError("delta must lie in (0, 1)")
    if inp.n is None or inp.alpha is None:
        raise ValueError("n and alpha are required")
    bias_coef = math.sqrt(2.0 * inp.alpha) + 6.0 * math.sqrt(inp.t_next)
    if bias_coef == 0:
        bias = 0.0
    elif inp.f_norm_H is None:
        bias = math.nan
    else:
        bias = bias_coef * inp.f_norm_H
    conditions = {"sample_size": inp.n >= _sample_gate(inp)}
    advisory = {"n_gate": _sample_gate(inp)}
    noise = 0.0
    if noisy:
        if inp.sigma is None:
            raise ValueError("noisy bound needs sigma")
        coef = noise_coefficient(inp.gamma)
        noise = coef * (math.sqrt(inp.p) + 2.0 * math.sqrt(math.log(4.0 / inp.delta))) / math.sqrt(inp.n) * inp.sigma
        conditions["alpha_ge_54_t_next"] = inp.alpha >= 54.0 * inp.t_next
        advisory["noise_gate_ratio"] = _noise_gate_ratio(inp)
    total = bias + noise
    return BoundReport(
        measured=measured,
        bound=total,
        conditions=conditions,
        terms={"bias": bias, "noise": noise},
        advisory=advisory,
    )


def noise_coefficient(gamma):
    return 4.0 * (1.0 + math.sqrt(gamma) / 8.0)


def _noise_gate_ratio(inp):
    """n / log^2 n divided by (1 v gamma') (K_p / p) psi1^2 / sigma^2; the theorem wants >= C."""
    if inp.psi1_norm is None or not inp.sigma or inp.n < 2:
        return math.nan
    lhs = inp.n / math.log(inp.n) ** 2
    rhs = max(1.0, inp.gamma_prime) * inp.K_p / inp.p * inp.psi1_norm**2 / inp.sigma**2
    return lhs / rhs


def bl_dimension(manifold, omega):
    """3 sqrt(m) V_m / (2 pi)^m * vol * omega^m."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    m = manifold.dim
    Vm = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
    return 3.0 * math.sqrt(m) * Vm / (2 * math.pi) ** m * manifold.volume * omega**m


def _tail_cut(spec, first_lambda):
    man = spec.manifold
    if spec.family == "bandlimited":
        return spec.param**2
    head = float(spec.g(first_lambda)) / man.volume
    cut, _ = kn.truncation_cut(spec, head if head > 0 else np.finfo(float).tiny)
    return max(cut, first_lambda)


def _tail_level_sum(spec, first_lambda):
    """sum over levels with lambda >= first_lambda of g * mult / vol, certified to tau."""
    levels = mf.list_levels(spec.manifold, _tail_cut(spec, first_lambda))
    tail = [lv for lv in levels if lv.lam >= first_lambda]
    return sum(float(spec.g(lv.lam)) * lv.multiplicity for lv in tail) / spec.manifold.volume


def _tail_diag(spec, first_lambda, x):
    """sum over levels with lambda >= first_lambda of g * sum_j u_j(x)^2, by zonal sums."""
    man = spec.manifold
    levels = [lv for lv in mf.list_levels(man, _tail_cut(spec, first_lambda)) if lv.lam >= first_lambda]
    return sum(
        float(spec.g(lv.lam)) * float(z[0])
        for lv, z in zip(levels, mf.iter_zonal_sums(man, levels, x, x))
    )


def assumption_constants(manifold, spec, p):
    """Exact incoherence and tail constants for a level-boundary cutoff of ``p`` functions.

    Returns a partial :class:`TheoremInputs` (no sigma/delta/alpha/n).
    """
    if spec.manifold != manifold:
        raise ValueError("kernel is defined on a different manifold")
    count, last = 0, None
    lam = 0.0
    while count < p:
        lam = max(4.0, 2 * lam)
        levels = mf.list_levels(manifold, lam)
        count = 0
        for lv in levels:
            count += lv.multiplicity
            last = lv
            if count >= p:
                break
    if count != p:
        raise LevelSplitError(
            f"p={p} splits the eigen-level lambda={last.lam} "
            f"(boundaries at {count - last.multiplicity} and {count})"
        )
    vol = manifold.volume
    x0 = mf.sample_uniform(manifold, 1, 0)
    head_levels = mf.list_levels(manifold, last.lam)
    N_x = sum(float(z[0]) for z in mf.iter_zonal_sums(manifold, head_levels, x0, x0))
    K_p = vol * N_x
    nxt = mf.next_level(manifold, last.lam)
    t_next = float(spec.g(nxt.lam)) / vol
    # homogeneous spaces: sum_{j in level} u_j(x)^2 = mult / vol at every x,
    # so R_p and tr T_{G-perp} coincide
    trace_tail = _tail_level_sum(spec, nxt.lam)
    R_p = _tail_diag(spec, nxt.lam, x0)
    if t_next > 0:
        gamma = trace_tail / (t_next * p)
        gamma_prime = R_p / (t_next * K_p)
    else:
        gamma = gamma_prime = 0.0
    return TheoremInputs(
        p=p, t_next=t_next, K_p=K_p, R_p=R_p, gamma=gamma, gamma_prime=gamma_prime,
        vol=vol, trace_tail=trace_tail,
    )

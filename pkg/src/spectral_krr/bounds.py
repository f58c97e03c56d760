"""Geometry-side bounds: counting functions, pointwise Weyl law, heat-kernel
diagonal / tail / comparison bounds, and Monte Carlo checks of the
operator-concentration statements used by the regression analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels as kn
from . import manifolds as mf
from .errors import LevelSplitError, ValidityError

DEFAULT_EPSILON = 0.5


@dataclass
class BoundReport:
    """A bound next to the quantity it controls.

    ``caveats`` lists reasons the inequality is reported but not asserted
    (e.g. the derivation does not cover the dimension).
    """

    measured: float
    bound: float
    conditions: dict = field(default_factory=dict)
    epsilon: float | None = None
    terms: dict = field(default_factory=dict)
    advisory: dict = field(default_factory=dict)
    caveats: list = field(default_factory=list)
    margin: float = field(init=False)

    def __post_init__(self):
        self.margin = self.bound - self.measured

    @property
    def applicable(self):
        return all(self.conditions.values())

    @property
    def verified(self):
        return self.applicable and self.margin >= 0

    @property
    def asserted(self):
        """True when a failure of this report should count as a violation."""
        return self.applicable and not self.caveats


class BoundValue(NamedTuple):
    bound: float
    conditions: dict


class WeylBound(NamedTuple):
    bound: float
    lambda_threshold: float


def _check_epsilon(eps):
    if not 0 < eps < 2.0 / 3.0:
        raise ValidityError(f"epsilon={eps} outside (0, 2/3)")


def unit_ball_volume(m):
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def weyl_constant(m):
    """2 sqrt(m) V_m / (2 pi)^m, the Weyl coefficient without the (1 + eps) factor."""
    return 2.0 * math.sqrt(m) * unit_ball_volume(m) / (2 * math.pi) ** m


# ---------------------------------------------------------------------------
# counting function and Weyl bound


def counting_function(manifold, x, lam):
    """N_x(lambda) = sum_{lambda_l <= lambda} u_l(x)^2, via zonal sums at (x, x)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    P = mf.as_point(manifold, x)
    levels = mf.list_levels(manifold, lam)
    return float(sum(z[0] for z in mf.iter_zonal_sums(manifold, levels, P, P)))


def weyl_threshold(m, eps, kappa):
    return m * (m - 1) ** 2 * kappa / (6.0 * eps)


def weyl_bound(m, lam, epsilon=DEFAULT_EPSILON, kappa=0.0):
    """Pointwise Weyl bound 2(1+eps) sqrt(m) V_m / (2pi)^m lambda^(m/2) and its lambda threshold."""
    _check_epsilon(epsilon)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return WeylBound(
        (1 + epsilon) * weyl_constant(m) * lam ** (m / 2),
        weyl_threshold(m, epsilon, kappa),
    )


def verify_weyl(manifold, x, lam, epsilon=DEFAULT_EPSILON):
    wb = weyl_bound(manifold.dim, lam, epsilon, manifold.curvature_kappa)
    return BoundReport(
        measured=counting_function(manifold, x, lam),
        bound=wb.bound,
        conditions={"lambda >= m(m-1)^2 kappa/(6 eps)": lam >= wb.lambda_threshold},
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# heat kernel diagonal


def heat_diag(manifold, t, x):
    """k_t(x, x) from the certified truncated series."""
    if t <= 0:
        raise ValueError("t must be positive")
    return kn.kernel_eval(kn.heat(manifold, t), x, x)


def heat_time_threshold(m, eps, kappa):
    """6 eps / ((m-1)^2 kappa); infinite when the denominator vanishes."""
    den = (m - 1) ** 2 * kappa
    return math.inf if den == 0 else 6.0 * eps / den


def heat_diag_bound(m, t, epsilon=DEFAULT_EPSILON, kappa=0.0):
    """(1 + eps) / (2 pi t)^(m/2) with its small-time condition."""
    _check_epsilon(epsilon)
    if t <= 0:
        raise ValueError("t must be positive")
    thr = heat_time_threshold(m, epsilon, kappa)
    return BoundValue(
        (1 + epsilon) / (2 * math.pi * t) ** (m / 2),
        {"t <= 6 eps/((m-1)^2 kappa)": t <= thr},
    )


def _dimension_caveats(m, kappa):
    out = []
    if m < 3:
        out.append("m<3 derivation caveat")
    if kappa == 0:
        # the comparison argument needs a positive upper curvature bound
        out.append("kappa=0 derivation caveat")
    return out


def verify_heat_diag(manifold, t, x, epsilon=DEFAULT_EPSILON):
    bv = heat_diag_bound(manifold.dim, t, epsilon, manifold.curvature_kappa)
    return BoundReport(
        measured=heat_diag(manifold, t, x),
        bound=bv.bound,
        conditions=bv.conditions,
        epsilon=epsilon,
        caveats=_dimension_caveats(manifold.dim, manifold.curvature_kappa),
    )


# ---------------------------------------------------------------------------
# comparison bounds (m >= 3)


@dataclass(frozen=True)
class ComparisonQuery:
    m: int
    K1: float
    K2: float
    r: float
    t: float

    def __post_init__(self):
        if self.m < 3:
            raise ValidityError("comparison bounds need m >= 3")
        if self.K1 < 0 or self.K2 <= 0 or self.r < 0 or self.t <= 0:
            raise ValidityError("need K1 >= 0, K2 > 0, r >= 0, t > 0")


def _gaussian(m, t, r):
    return math.exp(-r * r / (2 * t)) / (2 * math.pi * t) ** (m / 2)


def heat_lower_bound(m, t, K1=0.0, r=0.0):
    """Lower comparison bound under Ricci >= -(m-1) K1 (r = 0 gives the diagonal)."""
    if m < 3:
        raise ValidityError("lower comparison bound needs m >= 3")
    if K1 < 0 or t <= 0 or r < 0:
        raise ValidityError("need K1 >= 0, t > 0, r >= 0")
    z = math.sqrt(K1) * r
    shape = 1.0 if z == 0 else (z / math.sinh(z)) ** ((m - 1) / 2)
    return math.exp(-(m - 1) ** 2 * K1 * t / 8) * shape * _gaussian(m, t, r)


def heat_upper_offdiag(m, t, K2, r):
    """Upper comparison bound under sectional curvature <= K2, for 0 <= r < pi/sqrt(K2)."""
    if m < 3:
        raise ValidityError("upper comparison bound needs m >= 3")
    if K2 <= 0 or t <= 0 or r < 0:
        raise ValidityError("need K2 > 0, t > 0, r >= 0")
    z = math.sqrt(K2) * r
    if z >= math.pi:
        raise ValidityError(f"r={r} is not below pi/sqrt(K2)={math.pi / math.sqrt(K2)}")
    shape = 1.0 if z == 0 else (z / math.sin(z)) ** ((m - 1) / 2)
    return math.exp((m - 1) ** 2 * K2 * t / 8) * shape * _gaussian(m, t, r)


def comparison_bounds(query):
    """(lower, upper) comparison values for a :class:`ComparisonQuery`."""
    q = query
    return (
        heat_lower_bound(q.m, q.t, q.K1, q.r),
        heat_upper_offdiag(q.m, q.t, q.K2, q.r),
    )


def lower_diag_simplified(m, t, epsilon, K1):
    """(1 - eps) / (2 pi t)^(m/2) with its condition t <= 8 eps/((m-1)^2 K1)."""
    if m < 3:
        raise ValidityError("needs m >= 3")
    thr = math.inf if K1 == 0 else 8.0 * epsilon / ((m - 1) ** 2 * K1)
    return BoundValue((1 - epsilon) / (2 * math.pi * t) ** (m / 2), {"t <= 8 eps/((m-1)^2 K1)": t <= thr})


# ---------------------------------------------------------------------------
# heat tail


def heat_tail(manifold, t, lam, x):
    """sum over levels with lambda_l >= lam of exp(-lambda_l t/2) sum_j u_j(x)^2."""
    if t <= 0 or lam < 0:
        raise ValueError("need t > 0 and lambda >= 0")
    spec = kn.heat(manifold, t)
    P = mf.as_point(manifold, x)
    head = math.exp(-lam * t / 2) / manifold.volume
    cut, _ = kn.truncation_cut(spec, head if head > 0 else np.finfo(float).tiny)
    levels = [lv for lv in mf.list_levels(manifold, max(cut, lam)) if lv.lam >= lam]
    return float(sum(
        math.exp(-lv.lam * t / 2) * z[0]
        for lv, z in zip(levels, mf.iter_zonal_sums(manifold, levels, P, P))
    ))


def heat_tail_bound(m, t, lam, epsilon=DEFAULT_EPSILON, kappa=0.0):
    """exp(-lambda t/2) 2(1+eps) sqrt(m) V_m/(2pi)^m lambda^(m/2) with both gates."""
    _check_epsilon(epsilon)
    thr = heat_time_threshold(m, epsilon, kappa)
    return BoundValue(
        math.exp(-lam * t / 2) * (1 + epsilon) * weyl_constant(m) * lam ** (m / 2),
        {
            "t <= 6 eps/((m-1)^2 kappa)": t <= thr,
            "lambda >= m/t": lam >= m / t,
        },
    )


def verify_heat_tail(manifold, t, lam, x, epsilon=DEFAULT_EPSILON):
    bv = heat_tail_bound(manifold.dim, t, lam, epsilon, manifold.curvature_kappa)
    return BoundReport(
        measured=heat_tail(manifold, t, lam, x),
        bound=bv.bound,
        conditions=bv.conditions,
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# concentration checks


def trial_rng(seed, trial):
    """Independent generator for one trial, derived from (seed, trial)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)))


def _level_cut_for_count(manifold, p):
    count = 0
    lam = 0.0
    while True:
        lam = max(4.0, 2 * lam)
        count = 0
        for lv in mf.list_levels(manifold, lam):
            count += lv.multiplicity
            if count == p:
                return lv.lam
            if count > p:
                raise LevelSplitError(f"p={p} splits the eigen-level lambda={lv.lam}")


def binomial_floor(prob, trials):
    """prob - 3 binomial standard deviations."""
    return prob - 3.0 * math.sqrt(prob * (1 - prob) / trials)


@dataclass
class GramCheck:
    pass_rate: float
    min_eigs: np.ndarray
    quantiles: dict


def empirical_gram_check(manifold, spec, p, n, trials, delta, seed):
    """Smallest eigenvalue of the empirical second-moment matrix of the first p
    normalized eigenfunctions, per trial; passes when it is at least 1/2.

    ``spec`` is accepted for symmetry with :func:`empirical_tail_check`; the
    check depends only on the eigenbasis.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    if not 0 < delta < 1:
        raise ValidityError("delta must lie in (0, 1)")
    cut = _level_cut_for_count(manifold, p)
    scale = math.sqrt(manifold.volume)
    mins = np.empty(trials)
    for k in range(trials):
        X = mf.sample_uniform(manifold, n, trial_rng(seed, k))
        V = scale * mf.eigenfunction_matrix(manifold, X, cut)
        mins[k] = np.linalg.eigvalsh(V.T @ V / n)[0]
    q = np.quantile(mins, [0.05, 0.5, 0.95])
    return GramCheck(float(np.mean(mins >= 0.5)), mins, {"q05": q[0], "q50": q[1], "q95": q[2]})


@dataclass
class TailCheck:
    pass_rate: float
    op_norms: np.ndarray
    t_next: float
    neglected: float


def empirical_tail_check(manifold, spec, p, n, trials, delta, seed, tail_tol=1e-10):
    """Operator norm of the empirical tail operator P_n(W x W) on G-perp, per trial.

    In the basis sqrt(t_l) v_l of the tail, the operator is A^T A / n with
    A_il = sqrt(t_l) v_l(X_i) = sqrt(g(lambda_l)) u_l(X_i).  The tail basis
    is cut where the neglected trace is below ``tail_tol * t_{p+1}``.
    Passes when the norm is at most 2 t_{p+1}.
    """
    if spec.family != "heat":
        raise ValueError("tail check needs a heat kernel (nontrivial tail)")
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    if not 0 < delta < 1:
        raise ValidityError("delta must lie in (0, 1)")
    head_cut = _level_cut_for_count(manifold, p)
    nxt = mf.next_level(manifold, head_cut)
    t_next = float(spec.g(nxt.lam)) / manifold.volume
    cut, neglected = kn.truncation_cut(
        kn.KernelSpec("heat", spec.param, manifold, tail_tol), t_next
    )
    cut = max(cut, nxt.lam)
    lams = mf.basis_lambdas(manifold, cut)
    tail_cols = lams > head_cut
    w = np.sqrt(spec.g(lams[tail_cols]))
    norms = np.empty(trials)
    for k in range(trials):
        X = mf.sample_uniform(manifold, n, trial_rng(seed, k))
        A = mf.eigenfunction_matrix(manifold, X, cut)[:, tail_cols] * w
        norms[k] = np.linalg.eigvalsh(A.T @ A / n)[-1]
    return TailCheck(float(np.mean(norms <= 2 * t_next)), norms, t_next, neglected)

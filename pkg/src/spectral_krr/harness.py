"""Seeded, replayable regression experiments and bound-verification suites.

Per-trial randomness comes from ``numpy.random.SeedSequence(master_seed,
spawn_key=(grid_index, trial_index))``; the first 64-bit word of its state
is the recorded trial seed.  Every trial is therefore a pure function of
(config, grid index, trial index), and sweeps give identical output for any
number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import bounds as bd
from . import kernels as kn
from . import manifolds as mf
from . import regression as rg
from .errors import NotInRKHSError, NumericalError, SpectralKRRError

CSV_COLUMNS = (
    "trial", "seed", "n", "alpha", "error_l2_normalized", "bound_total",
    "bound_bias", "bound_noise", "gates_met", "wall_ms",
)
CONFIG_KEYS = ("manifold", "kernel", "target", "alpha", "n", "n_grid", "noise",
               "delta", "trials", "seed", "out")
TARGET_PRESETS = ("random_inband", "single_mode", "heat_smooth", "zero")
_TARGET_STREAM = 2**32 - 1  # spawn key reserved for the target draw
# rounding allowance when comparing an error with a bound (exact recovery
# gives errors near 1e-15 against a bound of 0)
COVERAGE_ATOL = 1e-10


class ConfigError(SpectralKRRError, ValueError):
    pass


# ---------------------------------------------------------------------------
# noise


def _psi1_gaussian(sigma):
    # E exp(|xi|/c) = 2 exp(s^2/2) Phi(s) with s = sigma/c; solve for = 2
    f = lambda s: math.log(2.0) + s * s / 2 + special.log_ndtr(s) - math.log(2.0)
    s = optimize.brentq(f, 1e-9, 10.0, xtol=1e-15)
    return sigma / s


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean noise with standard deviation ``sigma``.

    ``psi1_norm`` is inf{c : E exp(|xi|/c) <= 2}.  Laplace noise uses scale
    sigma / sqrt(2) so its variance is sigma^2, giving psi1 = sqrt(2) sigma.
    """

    family: str = "none"
    sigma: float = 0.0
    psi1_norm: float = field(init=False, compare=False)

    def __post_init__(self):
        if self.family not in ("none", "gaussian", "laplace"):
            raise ConfigError(f"unknown noise family {self.family!r}")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ConfigError("noise sigma must be a nonnegative number")
        if self.family == "none" or self.sigma == 0:
            psi = 0.0
        elif self.family == "gaussian":
            psi = _psi1_gaussian(self.sigma)
        else:
            psi = math.sqrt(2.0) * self.sigma
        object.__setattr__(self, "psi1_norm", psi)

    @property
    def effective_sigma(self):
        return 0.0 if self.family == "none" else self.sigma

    def sample(self, rng, n):
        if self.family == "none" or self.sigma == 0:
            return np.zeros(n)
        if self.family == "gaussian":
            return self.sigma * rng.standard_normal(n)
        return rng.laplace(0.0, self.sigma / math.sqrt(2.0), n)


# ---------------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    manifold: str
    kernel: dict
    target: object = "random_inband"
    alpha: object = 0.0
    n: int | None = None
    n_grid: list | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    delta: float = 0.05
    trials: int = 200
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        try:
            self.manifold_obj = mf.get_manifold(self.manifold)
        except SpectralKRRError as exc:
            raise ConfigError(str(exc)) from exc
        self.kernel = dict(self.kernel)
        fam = self.kernel.get("family")
        param_key = {"bandlimited": "omega", "heat": "t", "sobolev": "s"}.get(fam)
        if param_key is None:
            raise ConfigError(f"unknown kernel family {fam!r}")
        if param_key not in self.kernel:
            raise ConfigError(f"{fam} kernel needs key {param_key!r}")
        extra = set(self.kernel) - {"family", "omega", "t", "s", "tau"}
        if extra:
            raise ConfigError(f"unknown kernel keys {sorted(extra)}")
        if (self.n is None) == (self.n_grid is None):
            raise ConfigError("give exactly one of n and n_grid")
        ns = [self.n] if self.n is not None else list(self.n_grid)
        if not ns or any(int(v) != v or v < 1 for v in ns):
            raise ConfigError("sample sizes must be positive integers")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not (self.alpha == "auto" or (isinstance(self.alpha, (int, float)) and self.alpha >= 0)):
            raise ConfigError("alpha must be a nonnegative number or 'auto'")
        if self.alpha == "auto" and fam != "heat":
            raise ConfigError("alpha 'auto' is only defined for the heat kernel")
        if isinstance(self.target, str) and self.target not in TARGET_PRESETS:
            raise ConfigError(f"unknown target preset {self.target!r}")
        if isinstance(self.target, dict) and set(self.target) != {"lambda_max", "coeffs"}:
            raise ConfigError("explicit target needs keys lambda_max and coeffs")
        for om in self.omegas():
            if om is not None and om <= 0:
                raise ConfigError("omega must be positive")
        # surface invalid kernel parameters now rather than per trial
        try:
            self.kernel_spec()
        except SpectralKRRError as exc:
            raise ConfigError(str(exc)) from exc

    # -- grids -------------------------------------------------------------

    def sample_sizes(self):
        return [int(self.n)] if self.n is not None else [int(v) for v in self.n_grid]

    def omegas(self):
        om = self.kernel.get("omega")
        if isinstance(om, (list, tuple)):
            return [float(v) for v in om]
        return [None if om is None else float(om)]

    def grid(self):
        """(n, omega) pairs; sample size varies fastest."""
        return [(n, om) for om in self.omegas() for n in self.sample_sizes()]

    def kernel_spec(self, omega=None):
        fam = self.kernel["family"]
        tau = float(self.kernel.get("tau", kn.DEFAULT_TAU))
        man = self.manifold_obj
        if fam == "bandlimited":
            om = omega if omega is not None else self.omegas()[0]
            return kn.bandlimited(man, om, tau)
        if fam == "heat":
            return kn.heat(man, float(self.kernel["t"]), tau)
        return kn.sobolev(man, float(self.kernel["s"]), tau)

    def band_omega(self, omega):
        """Bandlimit used for p and the theorem gates."""
        if omega is not None:
            return omega
        man = self.manifold_obj
        fam = self.kernel["family"]
        if fam == "heat":
            return math.sqrt(man.dim / float(self.kernel["t"]))
        return math.sqrt(mf.next_level(man, 0.0).lam)

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        d = {
            "manifold": self.manifold,
            "kernel": dict(self.kernel),
            "target": self.target,
            "alpha": self.alpha,
        }
        if self.n is not None:
            d["n"] = self.n
        else:
            d["n_grid"] = list(self.n_grid)
        d.update(
            noise={"family": self.noise.family, "sigma": self.noise.sigma},
            delta=self.delta, trials=self.trials, seed=self.seed, out=self.out,
        )
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("manifold", "kernel"):
            if key not in d:
                raise ConfigError(f"missing config key {key!r}")
        noise = d.get("noise") or {}
        if set(noise) - {"family", "sigma"}:
            raise ConfigError("noise takes keys family and sigma")
        kwargs = {k: d[k] for k in CONFIG_KEYS if k in d and k != "noise"}
        return cls(noise=NoiseModel(noise.get("family", "none"), float(noise.get("sigma", 0.0))), **kwargs)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def loads(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()


# ---------------------------------------------------------------------------
# targets


def derive_seed(master_seed, grid_index, trial_index):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(grid_index), int(trial_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def build_target(config, omega=None):
    """The fixed true function for a grid point, as spectral coefficients."""
    man = config.manifold_obj
    tgt = config.target
    if isinstance(tgt, dict):
        return kn.SpectralCoeffs(man, np.asarray(tgt["coeffs"], float), float(tgt["lambda_max"]))
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed), spawn_key=(_TARGET_STREAM,)))
    band = config.band_omega(omega) ** 2
    if tgt == "zero":
        return kn.SpectralCoeffs.zeros(man, band)
    if tgt == "single_mode":
        lam1 = mf.next_level(man, 0.0).lam
        c = np.zeros(mf.basis_size(man, lam1))
        c[1] = math.sqrt(man.volume)
        return kn.SpectralCoeffs(man, c, lam1)
    if tgt == "random_inband":
        lam_cap = band
        c = rng.standard_normal(mf.basis_size(man, lam_cap))
    else:  # heat_smooth
        t = float(config.kernel.get("t", 1.0))
        lam_cap = 2.0 * math.log(1e9) / t
        lams = mf.basis_lambdas(man, lam_cap)
        c = rng.standard_normal(lams.shape[0]) * np.exp(-lams * t / 2)
    c *= math.sqrt(man.volume) / np.linalg.norm(c)
    return kn.SpectralCoeffs(man, c, lam_cap)


# ---------------------------------------------------------------------------
# trials


@dataclass
class TrialRecord:
    trial: int
    seed: int
    n: int
    alpha: float
    error_l2_normalized: float
    bound_total: float
    bound_bias: float
    bound_noise: float
    gates_met: bool
    wall_ms: float
    grid_index: int = 0
    omega: float | None = None
    conditions: dict = field(default_factory=dict)
    certified_slack: float = 0.0
    failure: str | None = None

    @property
    def covered(self):
        """Error, pushed up by its certified slack, is within the bound."""
        return self.error_l2_normalized + self.certified_slack <= self.bound_total + COVERAGE_ATOL


def _alpha_for(config, spec, omega):
    if config.alpha != "auto":
        return float(config.alpha)
    man = spec.manifold
    return 54.0 * math.exp(-omega**2 * spec.param / 2) / man.volume


def theorem_bound(config, spec, omega, n, alpha, f_norm_H):
    """Bias/noise bound (normalized L2) and the gates of the matching theorem."""
    man = spec.manifold
    m, vol, kappa = man.dim, man.volume, man.curvature_kappa
    sigma = config.noise.effective_sigma
    delta = config.delta
    p_eff = rg.bl_dimension(man, omega)
    spread = math.sqrt(p_eff) + 2.0 * math.sqrt(math.log(4.0 / delta))
    if spec.family == "bandlimited":
        bias = math.sqrt(2 * alpha) * f_norm_H if alpha > 0 else 0.0
        noise = 4.0 * spread / math.sqrt(n) * sigma
        gates = {
            "n >= 7p log(2p/delta)": n >= 7 * p_eff * math.log(2 * p_eff / delta),
            "omega^2 >= m(m-1)^2 kappa/3": omega**2 >= m * (m - 1) ** 2 * kappa / 3,
        }
        return bias, noise, gates
    if spec.family == "heat":
        t = spec.param
        t_gate = math.inf if (m - 1) ** 2 * kappa == 0 else 3.0 / ((m - 1) ** 2 * kappa)
        decay = math.exp(-omega**2 * t / 2) / vol
        bias = (math.sqrt(2 * alpha) + 6.0 * math.sqrt(decay)) * f_norm_H
        noise = 4.5 * spread / math.sqrt(n) * sigma
        gates = {
            "t <= 3/((m-1)^2 kappa)": t <= t_gate,
            "omega^2 >= m/t": omega**2 >= m / t * (1 - 1e-12),
            "alpha >= 54 e^(-omega^2 t/2)/vol": alpha >= 54.0 * decay * (1 - 1e-12),
            "n >= 7p log(4p/delta)": n >= 7 * p_eff * math.log(4 * p_eff / delta),
        }
        return bias, noise, gates
    # sobolev: general theorem with exact constants at the band boundary
    p = mf.basis_size(man, omega**2)
    inp = rg.assumption_constants(man, spec, p)
    inp.sigma, inp.delta, inp.alpha, inp.n, inp.f_norm_H = sigma, delta, alpha, n, f_norm_H
    inp.psi1_norm = config.noise.psi1_norm
    rep = rg.bound_rkhs(inp, noisy=sigma > 0)
    return rep.terms["bias"], rep.terms["noise"], dict(rep.conditions)


def _error_cut(spec, truth):
    if spec.finite_rank:
        return max(spec.param**2, truth.lambda_max)
    cut, _ = kn.truncation_cut(spec, 1.0 / spec.manifold.volume, power=2)
    return max(cut, truth.lambda_max)


def run_trial(config, trial_index, grid_index=0, _target=None):
    """One seeded trial at grid point ``grid_index``; never raises for numerical trouble."""
    start = time.perf_counter()
    n, omega_cfg = config.grid()[grid_index]
    spec = config.kernel_spec(omega_cfg)
    omega = config.band_omega(omega_cfg)
    seed = derive_seed(config.seed, grid_index, trial_index)
    truth = _target if _target is not None else build_target(config, omega_cfg)
    alpha = _alpha_for(config, spec, omega)
    rec = TrialRecord(
        trial=int(trial_index), seed=seed, n=n, alpha=alpha,
        error_l2_normalized=math.nan, bound_total=math.nan, bound_bias=math.nan,
        bound_noise=math.nan, gates_met=False, wall_ms=0.0,
        grid_index=grid_index, omega=omega,
    )
    try:
        try:
            f_norm = math.sqrt(kn.rkhs_norm_sq(spec, truth))
        except NotInRKHSError:
            f_norm = math.inf
        bias, noise, gates = theorem_bound(config, spec, omega, n, alpha, f_norm)
        rec.bound_bias, rec.bound_noise = bias, noise
        rec.bound_total = bias + noise
        rec.conditions = gates
        rec.gates_met = all(gates.values()) and math.isfinite(rec.bound_total)

        rng = np.random.default_rng(seed)
        X = mf.sample_uniform(spec.manifold, n, rng)
        Y = truth.evaluate(X) + config.noise.sample(rng, n)
        result = rg.fit(spec, rg.Samples(X, Y, truth, config.noise.effective_sigma), alpha)
        err = rg.l2_error(result, truth, _error_cut(spec, truth))
        root_vol = math.sqrt(spec.manifold.volume)
        rec.error_l2_normalized = err.error / root_vol
        rec.certified_slack = err.certified_slack / root_vol
    except NumericalError as exc:
        rec.failure = f"numerical: {exc}"
    except SpectralKRRError as exc:
        rec.failure = f"{type(exc).__name__}: {exc}"
    rec.wall_ms = (time.perf_counter() - start) * 1e3
    return rec


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class GridSummary:
    grid_index: int
    n: int
    omega: float
    alpha: float
    median: float
    q05: float
    q95: float
    bound_median: float
    bias_median: float
    n_gated: int
    coverage: float
    failures: int


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list
    summaries: list
    slopes: dict

    def coverage_floor(self):
        return coverage_floor(1.0 - 2.0 * self.config.delta, sum(s.n_gated for s in self.summaries))

    def overall_coverage(self):
        gated = [r for r in self.records if r.gates_met and r.failure is None]
        return float(np.mean([r.covered for r in gated])) if gated else math.nan

    def to_json(self):
        return {
            "config": self.config.to_dict(),
            "grid": [s.__dict__ for s in self.summaries],
            "slopes": self.slopes,
            "coverage": self.overall_coverage(),
            "coverage_floor": self.coverage_floor(),
            "psi1_norm": self.config.noise.psi1_norm,
        }


def coverage_floor(prob, trials):
    if trials == 0:
        return math.nan
    return prob - 3.0 * math.sqrt(prob * (1 - prob) / trials)


def _loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _semilog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])


def run_sweep(config, workers=1):
    """All trials at every grid point, aggregated; output order is independent of ``workers``."""
    grid = config.grid()
    targets = [build_target(config, om) for _, om in grid]
    jobs = [(g, k) for g in range(len(grid)) for k in range(config.trials)]

    def job(gk):
        g, k = gk
        return run_trial(config, k, g, _target=targets[g])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(job, jobs))
    else:
        records = [job(gk) for gk in jobs]
    records.sort(key=lambda r: (r.grid_index, r.trial))

    summaries = []
    for g, (n, _) in enumerate(grid):
        recs = [r for r in records if r.grid_index == g]
        ok = [r for r in recs if r.failure is None]
        errs = np.array([r.error_l2_normalized for r in ok]) if ok else np.array([math.nan])
        gated = [r for r in ok if r.gates_met]
        summaries.append(GridSummary(
            grid_index=g, n=n, omega=recs[0].omega, alpha=recs[0].alpha,
            median=float(np.median(errs)),
            q05=float(np.quantile(errs, 0.05)), q95=float(np.quantile(errs, 0.95)),
            bound_median=float(np.median([r.bound_total for r in recs])),
            bias_median=float(np.median([r.bound_bias for r in recs])),
            n_gated=len(gated),
            coverage=float(np.mean([r.covered for r in gated])) if gated else math.nan,
            failures=len(recs) - len(ok),
        ))
    slopes = {}
    ns = config.sample_sizes()
    if len(ns) > 1:
        for om in {s.omega for s in summaries}:
            rows = [s for s in summaries if s.omega == om]
            key = "log_error_vs_log_n" if len(config.omegas()) == 1 else f"log_error_vs_log_n@omega={om:g}"
            slopes[key] = _loglog_slope([s.n for s in rows], [s.median for s in rows])
    if len(config.omegas()) > 1:
        for n in ns:
            rows = [s for s in summaries if s.n == n]
            sfx = "" if len(ns) == 1 else f"@n={n}"
            om2 = [s.omega**2 for s in rows]
            slopes["log_error_vs_omega2" + sfx] = _semilog_slope(om2, [s.median for s in rows])
            slopes["log_bias_bound_vs_omega2" + sfx] = _semilog_slope(om2, [s.bias_median for s in rows])
    return SweepResult(config, records, summaries, slopes)


# ---------------------------------------------------------------------------
# CSV


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def records_csv(records, include_timing=False):
    """RFC-4180 CSV text of trial records.

    ``wall_ms`` is left empty unless ``include_timing`` is set, so that
    identical configs give byte-identical files.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        row = [getattr(r, c) for c in CSV_COLUMNS]
        row = [_fmt(v) for v in row]
        if not include_timing:
            row[-1] = ""
        w.writerow(row)
    return buf.getvalue()


def write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# bound suites

SUITES = ("weyl", "heat-diag", "heat-tail", "comparison", "gram", "tail-op")
REPORT_COLUMNS = ("suite", "manifold", "params", "measured", "bound", "margin",
                  "conditions_met", "status", "note")
WEYL_GRID = (4.0, 16.0, 64.0, 256.0, 1024.0)
# kernel values are certified to 1e-12 relative; a bound that is attained
# exactly (S^3 comparison bound at K2 = 1) must not flip on rounding
NUMERIC_RTOL = 1e-10


@dataclass
class BoundRow:
    suite: str
    manifold: str
    params: dict
    report: bd.BoundReport
    note: str = ""

    @property
    def status(self):
        rep = self.report
        if not rep.applicable:
            return "not-applicable"
        if rep.caveats:
            return "caveat"
        slack = NUMERIC_RTOL * max(abs(rep.bound), abs(rep.measured))
        return "ok" if rep.margin >= -slack else "violation"

    def as_dict(self):
        rep = self.report
        return {
            "suite": self.suite,
            "manifold": self.manifold,
            "params": json.dumps(self.params, sort_keys=True),
            "measured": rep.measured,
            "bound": rep.bound,
            "margin": rep.margin,
            "conditions_met": rep.applicable,
            "status": self.status,
            "note": "; ".join(filter(None, [self.note, *rep.caveats])),
        }


def _random_points(man, k, seed):
    return mf.sample_uniform(man, k, bd.trial_rng(seed, 0))


def _worst(reports):
    """Report with the smallest margin across sampled points, with the spread noted."""
    worst = min(reports, key=lambda r: r.margin)
    meas = [r.measured for r in reports]
    return worst, max(meas) - min(meas)


def _suite_weyl(seed, eps):
    rows = []
    for man in (mf.circle(), mf.torus(2), mf.sphere3()):
        X = _random_points(man, 20, seed)
        for lam in WEYL_GRID:
            reps = [bd.verify_weyl(man, x, lam, eps) for x in X]
            worst, spread = _worst(reps)
            rows.append(BoundRow("weyl", man.name, {"lambda": lam, "eps": eps}, worst,
                                 f"x-spread {spread:.3g}"))
    return rows


def _suite_heat_diag(seed, eps):
    rows = []
    s3 = mf.sphere3()
    thr = bd.heat_time_threshold(3, eps, 1.0)
    X = _random_points(s3, 5, seed)
    ts = [thr * (k + 1) / 20 for k in range(20)] + [1.25 * thr, 2.0 * thr]
    for t in ts:
        reps = [bd.verify_heat_diag(s3, t, x, eps) for x in X]
        worst, spread = _worst(reps)
        rows.append(BoundRow("heat-diag", s3.name, {"t": t, "eps": eps}, worst, f"x-spread {spread:.3g}"))
        measured = worst.measured
        low = bd.heat_lower_bound(3, t, 0.0)
        # lower bound: the "measured" side is the bound value, so margin = k - lower
        rows.append(BoundRow("heat-diag-lower", s3.name, {"t": t, "K1": 0.0},
                             bd.BoundReport(measured=low, bound=measured)))
    s2 = mf.sphere2()
    thr2 = bd.heat_time_threshold(2, eps, 1.0)
    x2 = _random_points(s2, 1, seed)[0]
    for k in range(1, 11):
        t = thr2 * k / 10
        rows.append(BoundRow("heat-diag", s2.name, {"t": t, "eps": eps}, bd.verify_heat_diag(s2, t, x2, eps)))
    return rows


def _suite_heat_tail(seed, eps):
    rows = []
    for man, ts in ((mf.circle(), (0.25, 0.5, 1.0, 2.0, 4.0)), (mf.sphere3(), (0.1, 0.25, 0.5, 0.75))):
        x = _random_points(man, 1, seed)[0]
        for t in ts:
            base = man.dim / t
            for factor in (1.0, 2.0, 4.0, 8.0):
                lam = base * factor
                rows.append(BoundRow("heat-tail", man.name, {"t": t, "lambda": lam, "eps": eps},
                                     bd.verify_heat_tail(man, t, lam, x, eps)))
        # one point below the lambda gate, reported as not applicable
        rows.append(BoundRow("heat-tail", man.name, {"t": ts[-1], "lambda": man.dim / ts[-1] / 2, "eps": eps},
                             bd.verify_heat_tail(man, ts[-1], man.dim / ts[-1] / 2, x, eps)))
    return rows


def _sphere3_at_distance(r):
    return np.array([math.sin(r), 0.0, 0.0, math.cos(r)])


def _suite_comparison(seed, eps):
    rows = []
    s3 = mf.sphere3()
    north = np.array([0.0, 0.0, 0.0, 1.0])
    for t in (0.25, 0.5, 1.0):
        spec = kn.heat(s3, t)
        for r in np.linspace(0.0, math.pi, 101)[:-1][::5]:
            val = kn.kernel_eval(spec, north, _sphere3_at_distance(r))
            up = bd.heat_upper_offdiag(3, t, 1.0, r)
            lo = bd.heat_lower_bound(3, t, 0.0, r)
            rows.append(BoundRow("comparison-upper", s3.name, {"t": t, "r": float(r), "K2": 1.0},
                                 bd.BoundReport(measured=val, bound=up)))
            rows.append(BoundRow("comparison-lower", s3.name, {"t": t, "r": float(r), "K1": 0.0},
                                 bd.BoundReport(measured=lo, bound=val)))
    return rows


def _rate_report(pass_rate, delta, trials):
    allowed = 1.0 - bd.binomial_floor(1.0 - delta, trials)
    return bd.BoundReport(measured=1.0 - pass_rate, bound=allowed)


def gram_gate(K_p, p, delta):
    return math.ceil(7 * K_p * math.log(p / delta))


def tail_gate(inputs, delta):
    return math.ceil(3 * inputs.R_p / inputs.t_next * math.log(2 * inputs.trace_tail / (inputs.t_next * delta)))


def _suite_gram(seed, eps, trials=200, delta=0.05):
    rows = []
    for man, p in ((mf.circle(), 5), (mf.sphere2(), 9), (mf.sphere3(), 5)):
        n = gram_gate(p, p, delta)  # K_p = p on homogeneous spaces
        chk = bd.empirical_gram_check(man, None, p, n, trials, delta, seed)
        rows.append(BoundRow("gram", man.name, {"p": p, "n": n, "delta": delta, "trials": trials},
                             _rate_report(chk.pass_rate, delta, trials),
                             f"pass_rate {chk.pass_rate:.3f}, median min-eig {chk.quantiles['q50']:.3f}"))
    return rows


def _suite_tail_op(seed, eps, trials=200, delta=0.05):
    rows = []
    for man, t, p in ((mf.circle(), 1.0, 5), (mf.sphere2(), 0.5, 9), (mf.sphere3(), 0.5, 5)):
        spec = kn.heat(man, t)
        inp = rg.assumption_constants(man, spec, p)
        n = tail_gate(inp, delta)
        chk = bd.empirical_tail_check(man, spec, p, n, trials, delta, seed)
        rows.append(BoundRow("tail-op", man.name, {"t": t, "p": p, "n": n, "delta": delta, "trials": trials},
                             _rate_report(chk.pass_rate, delta, trials),
                             f"pass_rate {chk.pass_rate:.3f}, median norm/t_next {np.median(chk.op_norms) / chk.t_next:.3f}"))
    return rows


_SUITE_FUNCS = {
    "weyl": _suite_weyl,
    "heat-diag": _suite_heat_diag,
    "heat-tail": _suite_heat_tail,
    "comparison": _suite_comparison,
    "gram": _suite_gram,
    "tail-op": _suite_tail_op,
}


def report_bounds(selector, seed=0, epsilon=bd.DEFAULT_EPSILON):
    """Rows of bound reports for one suite."""
    if selector not in _SUITE_FUNCS:
        raise ConfigError(f"unknown suite {selector!r}; choose from {', '.join(SUITES)}")
    return _SUITE_FUNCS[selector](seed, epsilon)


def any_violation(rows):
    return any(r.status == "violation" for r in rows)


def rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        d = r.as_dict()
        w.writerow([_fmt(d[c]) if isinstance(d[c], (float, bool, int)) else d[c] for c in REPORT_COLUMNS])
    return buf.getvalue()


def rows_json(rows):
    return json.dumps([r.as_dict() for r in rows], indent=2)

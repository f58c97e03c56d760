import math

import numpy as np
import pytest

from spectral_krr import kernels as kn
from spectral_krr import manifolds as mf
from spectral_krr import regression as rg
from spectral_krr.errors import LevelSplitError, ValidityError


def inband_truth(man, omega, seed):
    c = np.random.default_rng(seed).standard_normal(mf.basis_size(man, omega**2))
    return kn.SpectralCoeffs(man, c, omega**2)


def noiseless(man, truth, n, seed):
    X = mf.sample_uniform(man, n, seed)
    return rg.Samples(X, truth.evaluate(X), truth)


def test_single_sample_scalar_solve():
    spec = kn.heat(mf.sphere2(), 0.5)
    x = mf.sample_uniform(mf.sphere2(), 1, 0)
    c = kn.kernel_eval(spec, x, x)
    res = rg.fit(spec, rg.Samples(x, [2.0]), 0.3)
    assert res.weights[0] == pytest.approx(2.0 / (0.3 + c), rel=1e-14)
    z = mf.sample_uniform(mf.sphere2(), 1, 1)
    assert rg.predict(res, z[0]) == pytest.approx(res.weights[0] * kn.kernel_eval(spec, z, x), rel=1e-12)


def test_zero_responses_give_zero_fit():
    spec = kn.heat(mf.circle(), 1.0)
    X = mf.sample_uniform(mf.circle(), 20, 1)
    res = rg.fit(spec, rg.Samples(X, np.zeros(20)), 0.0)
    assert np.all(res.weights == 0)
    assert rg.predict(res, [0.1, 2.0]).tolist() == [0.0, 0.0]
    coeffs, tail = rg.spectral_expand(res, 16)
    assert coeffs.norm() == 0 and tail == 0


def test_bandlimited_interpolation_circle():
    s1 = mf.circle()
    truth = inband_truth(s1, 2.5, 0)
    smp = noiseless(s1, truth, 50, 1)
    res = rg.fit(kn.bandlimited(s1, 2.5), smp, 0.0)
    assert res.diagnostics["rank"] == 5 and res.diagnostics["solver"] == "features"
    assert np.max(np.abs(rg.predict(res, smp.points) - smp.values)) <= 1e-9
    assert rg.l2_error(res, truth, 6.25).error < 1e-8


def test_feature_fit_matches_dense_pseudoinverse():
    s2 = mf.sphere2()
    spec = kn.bandlimited(s2, 2.5)
    smp = noiseless(s2, inband_truth(s2, 2.5, 3), 40, 4)
    smp.values = smp.values + 0.1 * np.random.default_rng(5).standard_normal(40)
    K = kn.kernel_matrix(spec, smp.points)
    a_dense = np.linalg.pinv(K, rcond=1e-10, hermitian=True) @ smp.values
    np.testing.assert_allclose(rg.fit(spec, smp, 0.0).weights, a_dense, atol=1e-10 * np.abs(a_dense).max())
    a_ridge = np.linalg.solve(K + 40 * 0.01 * np.eye(40), smp.values)
    np.testing.assert_allclose(rg.fit(spec, smp, 0.01).weights, a_ridge, rtol=1e-9)


@pytest.mark.parametrize("spec", [kn.heat(mf.sphere2(), 0.5), kn.bandlimited(mf.sphere3(), 3.0)])
def test_representer_stationarity(spec):
    man = spec.manifold
    X = mf.sample_uniform(man, 60, 2)
    Y = np.sin(3 * X[:, 0]) + 0.1
    alpha = 1e-3
    res = rg.fit(spec, rg.Samples(X, Y), alpha)
    K = kn.kernel_matrix(spec, X)
    r = (60 * alpha * np.eye(60) + K) @ res.weights - Y
    assert np.linalg.norm(r) < 1e-8 * np.linalg.norm(Y)


def test_ridge_limit_to_pseudoinverse():
    s1 = mf.circle()
    spec = kn.heat(s1, 0.3)
    X = 2 * np.pi * (np.arange(12) + 0.3) / 12
    Y = np.cos(X) + 0.5 * np.sin(3 * X)
    ref = rg.fit(spec, rg.Samples(X, Y), 0.0)
    Z = np.linspace(0, 2 * np.pi, 50)
    p_ref = rg.predict(ref, Z)
    gaps = [np.max(np.abs(rg.predict(rg.fit(spec, rg.Samples(X, Y), a), Z) - p_ref))
            for a in 10.0 ** -np.arange(2, 11)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-6


def test_spectral_expand_matches_trapezoid_quadrature():
    s1 = mf.circle()
    spec = kn.heat(s1, 1.0)
    X = mf.sample_uniform(s1, 30, 7)
    res = rg.fit(spec, rg.Samples(X, np.cos(2 * X[:, 0]) + 0.2), 1e-3)
    coeffs, tail = rg.spectral_expand(res, 100)
    z = 2 * np.pi * np.arange(4096) / 4096
    quad = mf.eigenfunction_matrix(s1, z, 100).T @ rg.predict(res, z) * (2 * np.pi / 4096)
    np.testing.assert_allclose(coeffs.coeffs, quad, atol=1e-8)
    assert tail < 1e-12


def test_bandlimited_expand_has_zero_tail():
    spec = kn.bandlimited(mf.sphere2(), 3.0)
    smp = noiseless(mf.sphere2(), inband_truth(mf.sphere2(), 3.0, 1), 30, 2)
    _, tail = rg.spectral_expand(rg.fit(spec, smp, 0.0), 9.0)
    assert tail == 0.0


def test_l2_error_examples():
    s1 = mf.circle()
    truth = kn.SpectralCoeffs(s1, [0.5, 1.0, -2.0, 0.0, 3.0], 4)
    zero = rg.FitResult(kn.heat(s1, 1.0), mf.as_points(s1, [0.1, 0.2]), np.zeros(2), 0.0)
    err = rg.l2_error(zero, truth, 4)
    assert err.error == pytest.approx(truth.norm())
    assert err.certified_slack == 0.0


def test_spectral_error_matches_monte_carlo():
    s2 = mf.sphere2()
    truth = inband_truth(s2, 3.0, 8)
    smp = noiseless(s2, truth, 80, 9)
    smp.values = smp.values + 0.3 * np.random.default_rng(1).standard_normal(80)
    res = rg.fit(kn.heat(s2, 0.2), smp, 1e-3)
    err = rg.l2_error(res, truth, 600)
    mc, se = rg.monte_carlo_l2_sq(res, truth, 100_000, 10)
    assert abs(err.error**2 - mc) < 3 * se
    assert err.certified_slack < 1e-6 * err.error


def test_exact_recovery_sphere2():
    s2 = mf.sphere2()
    truth = inband_truth(s2, 3.5, 2)
    smp = noiseless(s2, truth, 300, 3)
    res = rg.fit(kn.bandlimited(s2, 3.5), smp, 0.0)
    assert res.diagnostics["rank"] == mf.basis_size(s2, 12.25) == 16
    assert rg.l2_error(res, truth, 12.25).error / math.sqrt(s2.volume) < 1e-8


def test_noise_coefficients():
    assert rg.noise_coefficient(1.0) == 4.5
    assert rg.noise_coefficient(0.0) == 4.0


def test_bound_rkhs_examples():
    inp = rg.TheoremInputs(p=5, t_next=0.0, K_p=5, R_p=0.0, gamma=0.0, gamma_prime=0.0,
                           vol=2 * math.pi, delta=0.05, alpha=0.0, n=200, f_norm_H=3.0)
    rep = rg.bound_rkhs(inp, noisy=False)
    assert rep.bound == 0.0 and rep.applicable
    inp.sigma = 0.1
    rep = rg.bound_rkhs(inp, noisy=True)
    expect = 4 * (math.sqrt(5) + 2 * math.sqrt(math.log(80))) / math.sqrt(200) * 0.1
    assert rep.terms["noise"] == pytest.approx(expect)
    assert rep.conditions["alpha_ge_54_t_next"]
    assert "n_gate" in rep.advisory
    inp.delta = 1.5
    with pytest.raises(ValidityError):
        rg.bound_rkhs(inp, noisy=True)


def test_bound_rkhs_flags_small_alpha():
    inp = rg.TheoremInputs(p=5, t_next=1e-3, K_p=5, R_p=1e-3, gamma=1.0, gamma_prime=1.0,
                           vol=2 * math.pi, delta=0.05, alpha=1e-3, n=1000, f_norm_H=1.0, sigma=0.1)
    rep = rg.bound_rkhs(inp, noisy=True)
    assert not rep.conditions["alpha_ge_54_t_next"]
    assert math.isfinite(rep.bound)


def test_bl_dimension():
    assert rg.bl_dimension(mf.circle(), 2.5) == pytest.approx(15.0)
    assert rg.bl_dimension(mf.sphere2(), 5.0) == pytest.approx(75 * math.sqrt(2))
    for man in (mf.torus(3), mf.sphere3()):
        assert rg.bl_dimension(man, 2.0) == pytest.approx(8 * rg.bl_dimension(man, 1.0))


def test_assumption_constants_examples():
    s1 = mf.circle()
    inp = rg.assumption_constants(s1, kn.heat(s1, 1.0), 5)
    assert inp.K_p == pytest.approx(5.0, rel=1e-14)
    assert inp.t_next == pytest.approx(math.exp(-4.5) / (2 * math.pi), rel=1e-14)
    assert inp.R_p == pytest.approx(inp.trace_tail, rel=1e-12)
    band = rg.assumption_constants(s1, kn.bandlimited(s1, 2.5), 5)
    assert (band.R_p, band.t_next, band.gamma, band.gamma_prime) == (0, 0, 0, 0)
    with pytest.raises(LevelSplitError):
        rg.assumption_constants(s1, kn.heat(s1, 1.0), 4)


def test_sphere3_gamma_prime():
    # the tail lemma gives gamma' <= 1 once p is large; it is not yet true at small p
    s3 = mf.sphere3()
    spec = kn.heat(s3, 1.0)
    gp = {p: rg.assumption_constants(s3, spec, p).gamma_prime for p in (5, 14, 30, 55)}
    # levels l >= 2 against t_next = e^-4 / vol and K_p = 5
    l = np.arange(2, 40)
    assert gp[5] == pytest.approx(np.sum((l + 1) ** 2 * np.exp(-l * (l + 2) / 2 + 4)) / 5, rel=1e-12)
    assert gp[14] > 1
    assert gp[30] <= 1 and gp[55] <= 1
    # R_p by direct summation over levels l >= 3 (lambda = 15, 24, ...)
    l = np.arange(3, 60)
    R = np.sum(np.exp(-l * (l + 2) / 2) * (l + 1) ** 2) / (2 * np.pi**2)
    assert rg.assumption_constants(s3, spec, 14).R_p == pytest.approx(R, rel=1e-11)

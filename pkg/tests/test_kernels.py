import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_krr import kernels as kn
from spectral_krr import manifolds as mf
from spectral_krr.errors import InvalidSpecError, NotInRKHSError

from oracles import sphere2_heat_legendre, sphere3_heat_images, wrapped_gaussian


@pytest.mark.parametrize("t", [0.05, 0.5, 1.0, 3.0])
def test_circle_heat_matches_wrapped_gaussian(t):
    s1 = mf.circle()
    rng = np.random.default_rng(0)
    X, Y = rng.uniform(0, 2 * np.pi, 100), rng.uniform(0, 2 * np.pi, 100)
    K = kn.kernel_cross(kn.heat(s1, t), X, Y)
    ref = wrapped_gaussian(X[:, None] - Y[None, :], t)
    diag = float(wrapped_gaussian(0.0, t))
    # relative accuracy above the rounding floor, absolute below it
    big = ref > 1e-6 * diag
    np.testing.assert_allclose(K[big], ref[big], rtol=1e-9)
    assert np.max(np.abs(K - ref) - kn.DEFAULT_TAU * np.abs(ref)) < 1e-14 * diag


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_sphere3_heat_matches_image_sum(t):
    s3 = mf.sphere3()
    north = np.array([0.0, 0.0, 0.0, 1.0])
    spec = kn.heat(s3, t)
    for r in np.linspace(0.05, 3.0, 25):
        y = np.array([math.sin(r), 0, 0, math.cos(r)])
        assert kn.kernel_eval(spec, north, y) == pytest.approx(sphere3_heat_images(r, t), rel=1e-9)


def test_sphere2_heat_matches_legendre_series():
    s2 = mf.sphere2()
    X = mf.sample_uniform(s2, 20, 4)
    Y = mf.sample_uniform(s2, 20, 5)
    for t in (0.2, 1.0):
        K = kn.kernel_cross(kn.heat(s2, t), X, Y)
        ref = np.array([[sphere2_heat_legendre(float(x @ y), t) for y in Y] for x in X])
        np.testing.assert_allclose(K, ref, rtol=1e-10, atol=1e-14 * K.max())


def test_bandlimited_circle_diagonal():
    assert kn.kernel_eval(kn.bandlimited(mf.circle(), 1.5), 0.7, 0.7) == pytest.approx(3 / (2 * math.pi), rel=1e-15)


def test_heat_large_time_sphere2_is_constant_mode():
    s2 = mf.sphere2()
    X = mf.sample_uniform(s2, 2, 1)
    val = kn.kernel_eval(kn.heat(s2, 60.0), X[0], X[1])
    assert abs(val - 1 / (4 * math.pi)) < 1e-12 / (4 * math.pi)


def test_single_point_gram():
    spec = kn.heat(mf.sphere2(), 0.3)
    x = mf.sample_uniform(mf.sphere2(), 1, 0)
    K = kn.kernel_matrix(spec, x)
    assert K.shape == (1, 1)
    assert K[0, 0] == pytest.approx(kn.kernel_eval(spec, x, x))


def test_bandlimited_rank():
    X = mf.sample_uniform(mf.circle(), 40, 3)
    K = kn.kernel_matrix(kn.bandlimited(mf.circle(), 3.7), X)
    s = np.linalg.svd(K, compute_uv=False)
    assert np.sum(s > 1e-10 * s[0]) == 7


def test_sphere3_heat_gram_positive_definite():
    X = mf.sample_uniform(mf.sphere3(), 50, 8)
    K = kn.kernel_matrix(kn.heat(mf.sphere3(), 0.5), X)
    assert np.linalg.eigvalsh(K)[0] > 0


@pytest.mark.parametrize("spec", [
    kn.heat(mf.sphere2(), 0.2),
    kn.sobolev(mf.circle(), 2.5),
    kn.heat(mf.torus(3), 0.5),
    kn.heat(mf.sphere3(), 0.4),
])
def test_gram_symmetric_and_constant_diagonal(spec):
    X = mf.sample_uniform(spec.manifold, 30, 2)
    K = kn.kernel_matrix(spec, X)
    assert np.array_equal(K, K.T)
    d = np.diag(K)
    assert np.max(np.abs(d - d[0])) < 1e-10 * d[0]


def test_heat_semigroup_on_circle():
    s1 = mf.circle()
    z = 2 * np.pi * np.arange(4096) / 4096
    x, y = 0.4, 2.9
    t, s = 0.3, 0.7
    kx = kn.kernel_cross(kn.heat(s1, t), [x], z)[0]
    ky = kn.kernel_cross(kn.heat(s1, s), z, [y])[:, 0]
    quad = np.sum(kx * ky) * 2 * np.pi / 4096
    assert quad == pytest.approx(kn.kernel_eval(kn.heat(s1, t + s), x, y), rel=1e-8)


def test_torus_heat_factorizes():
    # at t = 1 the smallest kernel values stay well above the 1e-12 truncation floor
    t = 1.0
    X = mf.sample_uniform(mf.torus(2), 100, 0)
    Y = mf.sample_uniform(mf.torus(2), 100, 1)
    K2 = np.array([kn.kernel_eval(kn.heat(mf.torus(2), t), x, y) for x, y in zip(X, Y)])
    K1 = wrapped_gaussian(X[:, 0] - Y[:, 0], t) * wrapped_gaussian(X[:, 1] - Y[:, 1], t)
    np.testing.assert_allclose(K2, K1, rtol=1e-10)


@pytest.mark.parametrize("spec", [kn.heat(mf.circle(), 0.2), kn.heat(mf.sphere3(), 0.3), kn.sobolev(mf.sphere2(), 4.0)])
def test_truncation_certificate(spec):
    man = spec.manifold
    X = mf.sample_uniform(man, 5, 1)
    Y = mf.sample_uniform(man, 5, 2)
    K, cut = kn.kernel_cross_with_cut(spec, X, Y)
    levels = mf.list_levels(man, 4 * cut + 50)
    more = kn._level_weighted_sum(spec, levels, mf.as_points(man, X)[:, None], mf.as_points(man, Y)[None])
    assert np.max(np.abs(more - K) / np.abs(K)) < 10 * spec.tau


def test_unreachable_tolerance_warns():
    spec = kn.sobolev(mf.sphere2(), 2.0)
    with pytest.warns(RuntimeWarning, match="not reachable"):
        cut, tail = kn.truncation_cut(spec, 1 / (4 * math.pi))
    assert cut == 9.0e4 and 0 < tail < 1e-4


def test_tail_majorant_dominates_exact_tail():
    for spec in (kn.heat(mf.circle(), 0.5), kn.heat(mf.torus(3), 0.5), kn.heat(mf.sphere2(), 0.5),
                 kn.sobolev(mf.circle(), 1.5), kn.sobolev(mf.torus(2), 2.0), kn.sobolev(mf.sphere3(), 2.5)):
        man = spec.manifold
        for cut in (4, 16, 64):
            exact = sum(float(spec.g(lv.lam)) * lv.multiplicity
                        for lv in mf.list_levels(man, 4000) if lv.lam > cut) / man.volume
            assert kn.tail_majorant(spec, cut) >= exact


def test_rkhs_norm_examples():
    s2 = mf.sphere2()
    c = kn.SpectralCoeffs(s2, np.arange(9.0), 6)
    assert kn.rkhs_norm_sq(kn.bandlimited(s2, 3.0), c) == pytest.approx(np.sum(np.arange(9.0) ** 2))
    single = np.zeros(9)
    single[4] = 1.0
    assert kn.rkhs_norm_sq(kn.heat(s2, 0.8), kn.SpectralCoeffs(s2, single, 6)) == pytest.approx(math.exp(6 * 0.4))
    assert kn.rkhs_norm_sq(kn.sobolev(s2, 2.0), kn.SpectralCoeffs.zeros(s2, 20)) == 0.0
    with pytest.raises(NotInRKHSError):
        kn.rkhs_norm_sq(kn.bandlimited(s2, 1.5), c)


def test_spec_validation():
    with pytest.raises(InvalidSpecError):
        kn.sobolev(mf.sphere2(), 1.0)
    with pytest.raises(InvalidSpecError):
        kn.heat(mf.circle(), -1)
    with pytest.raises(InvalidSpecError):
        kn.heat(mf.circle(), 1.0, tau=0)
    with pytest.raises(InvalidSpecError):
        kn.KernelSpec("matern", 1.0, mf.circle())
    with pytest.raises(ValueError):
        kn.SpectralCoeffs(mf.circle(), [1.0, 2.0], 1)


def test_spectral_coeffs_resize_and_mass():
    c = kn.SpectralCoeffs(mf.circle(), [1.0, 2.0, 2.0, 3.0, 4.0], 4)
    assert c.mass_above(1) == pytest.approx(5.0)
    r = c.resized(9)
    assert r.coeffs.shape == (7,) and r.norm() == pytest.approx(c.norm())
    assert c.resized(1).norm() == pytest.approx(3.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_heat_kernel_symmetric_positive(t, a, b):
    spec = kn.heat(mf.circle(), t)
    kab, kba = kn.kernel_eval(spec, a, b), kn.kernel_eval(spec, b, a)
    diag = kn.kernel_eval(spec, a, a)
    assert kab > -1e-15 * diag
    ref = float(wrapped_gaussian(a - b, t))
    assert abs(kab - ref) < kn.DEFAULT_TAU * ref + 1e-14 * diag
    assert abs(kab - kba) <= 1e-12 * diag
    assert kab <= diag * (1 + 1e-12)

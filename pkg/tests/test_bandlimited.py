import math

import numpy as np
import pytest
from scipy.special import beta as beta_fn

from bnsharp.bandlimited import (BandLimitedFunction, DecayModel,
                                 NonIntegrableTailError, akhiezer_family,
                                 cos_product, cs_extremal, norm_lp_truncated,
                                 poisson_window_sum, sinc_kernel,
                                 sinc_sq_half_kernel, tensor_product,
                                 window_axis_sum, _moment_1d)
from bnsharp.body import ConvexBody
from bnsharp.trigpoly import DifferentialOperator, apply_operator, norm_lp


def test_sinc_values():
    h = sinc_kernel(2)
    assert h(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0)
    assert abs(h(np.array([[math.pi, math.pi]]))[0]) < 1e-15
    h1 = sinc_kernel(1)
    x = np.array([[0.5], [1.7], [-3.0]])
    assert np.allclose(h1(x), np.sin(x[:, 0]) / x[:, 0])


def test_poisson_window_sum_converges_to_one():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3 * math.pi, 3 * math.pi, size=(20, 1))
    prev = None
    for K in (50, 200, 800):
        v, b = poisson_window_sum(x, K)
        err = np.abs(v - 1.0).max()
        assert err <= b.max() * (1 + 1e-9)
        if prev is not None:
            assert err < prev
        prev = err


def test_poisson_window_sum_multivariate():
    rng = np.random.default_rng(2)
    x = rng.uniform(-3 * math.pi, 3 * math.pi, size=(10, 2))
    v, b = poisson_window_sum(x, 500)
    assert np.all(np.abs(v - 1.0) <= b * (1 + 1e-9))
    assert b.max() < 1e-2


def test_window_axis_sum_exact_identity_point():
    # at theta = 0 only l = 0 contributes and the sum is exactly 1
    v, b = window_axis_sum(np.array([0.0]), 10)
    assert v[0] == pytest.approx(1.0, abs=1e-30)


def test_akhiezer_value_at_zero_is_beta():
    for q, d in ((2.0, 1), (1.0, 2), (0.5, 3), (math.inf, 1)):
        f = akhiezer_family(1.0, q, 0.1)
        expect = beta_fn(d + 2, d + 2)
        assert f(np.array([[0.0]]))[0].real == pytest.approx(expect, rel=1e-12)


def test_akhiezer_parameter_validation():
    with pytest.raises(ValueError):
        akhiezer_family(1.0, 2.0, 1.5)
    with pytest.raises(ValueError):
        akhiezer_family(1.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        akhiezer_family(1.0, 2.0, 0.1, s=0)


def _ratio_q(f, s, q, R):
    num = norm_lp_truncated(_as_blf(f, f.derivative((s,))), q, R)
    den = norm_lp_truncated(f, q, R)
    return num.value / den.value


def _as_blf(f, ev):
    return BandLimitedFunction(
        m=1, evaluate=ev, spectral_body=f.spectral_body,
        sup_bound=f.sup_bound, decay=f.decay, label="derived")


def test_akhiezer_derivative_ratio_climbs_to_bernstein_constant():
    # M = 1, q = 2, s = 1: the ratio rises toward 1 as the window shrinks
    r1 = _ratio_q(akhiezer_family(1.0, 2.0, 0.1), 1, 2.0, 400.0)
    r2 = _ratio_q(akhiezer_family(1.0, 2.0, 0.05), 1, 2.0, 800.0)
    assert r2 > r1
    assert 0.9 < r1 < 1.0
    assert r2 > 0.97


def test_akhiezer_tensor_realizes_mixed_derivative_ratio():
    # prod_j f_{h, sigma_j}(x_j): the alpha-derivative ratio approaches
    # sigma^alpha from below
    sigma = (2.0, 3.0)
    alpha = (1, 1)
    fs = [akhiezer_family(s, 2.0, 0.05 * s) for s in sigma]
    F = tensor_product(fs)
    dF = F.derivative(alpha)
    blf = BandLimitedFunction(
        m=2, evaluate=dF, spectral_body=F.spectral_body,
        sup_bound=F.sup_bound, decay=F.decay, label="dF",
        factors=tuple(_as_blf(f, f.derivative((1,))) for f in fs))
    num = norm_lp_truncated(blf, 2.0, 400.0)
    den = norm_lp_truncated(F, 2.0, 400.0)
    ratio = num.value / den.value
    target = sigma[0] ** alpha[0] * sigma[1] ** alpha[1]
    assert ratio < target * (1 + 1e-9)
    assert ratio > 0.94 * target


def test_moment_integral_against_quadrature():
    # the semi-analytic 1-D moment transform is the engine behind the
    # conjugate-symbol extremals; check it against brute quadrature
    xs, ws = np.polynomial.legendre.leggauss(4000)
    for n in (0, 1, 2, 3):
        for sigma in (1.0, 2.0):
            x = sigma * xs
            w = sigma * ws
            for u in (0.0, 0.3, 5.0, 17.0, 300.5):
                brute = np.sum(w * x ** n * np.exp(1j * u * x))
                mine = _moment_1d(n, sigma, np.array([u]))[0]
                assert mine == pytest.approx(brute, abs=5e-11 * sigma ** n)


def test_cs_extremal_ratio_matches_closed_form_tightly():
    # equality case of the L2 -> sup bound, m = 1: the ratio reproduces
    # the closed form to 1e-6 once the truncation radius is generous
    from bnsharp.constants import candidate_lower_bound_E, closed_e2_inf
    body = ConvexBody.cube(1.0, 1)
    op = DifferentialOperator.identity(1)
    f = cs_extremal(body, op)
    cand = candidate_lower_bound_E(f, 2.0, math.inf, op, R=3.2e5)
    ref = closed_e2_inf(body, op)
    assert cand.value == pytest.approx(ref.value, rel=1e-6)


def test_cs_extremal_hermitian_symmetry():
    f = cs_extremal(ConvexBody.cube(1.0, 2),
                    DifferentialOperator.laplacian(2))
    u = np.array([[0.3, 1.2], [2.0, -0.7]])
    assert np.allclose(f(-u), np.conj(f(u)), atol=1e-12)
    fb = cs_extremal(ConvexBody.ball(1.0, 2),
                     DifferentialOperator.identity(2), freq_budget=64.0)
    assert np.allclose(fb(-u), np.conj(fb(u)), atol=1e-10)


def test_cs_extremal_generic_matches_factored_on_boxes():
    # same body computed through both code paths
    body = ConvexBody.cube(1.0, 2)
    op = DifferentialOperator.identity(2)
    fact = cs_extremal(body, op)
    from bnsharp.bandlimited import _indicator_transform
    gen = _indicator_transform(body, op, freq_budget=64.0,
                               nodes_per_axis=None)
    u = np.array([[0.0, 0.0], [1.5, -2.0], [10.0, 3.3], [40.0, -20.0]])
    assert np.allclose(fact(u), gen(u), rtol=1e-9, atol=1e-9)


def test_cos_product_spectrum_and_coefficients():
    T = cos_product(1.0, [2.0, 3.0])
    assert sorted(T.coefficients) == [(-2, -3), (-2, 3), (2, -3), (2, 3)]
    assert all(v == pytest.approx(0.25) for v in T.coefficients.values())
    with pytest.raises(ValueError):
        cos_product(0.3, [1.0, 1.0])


def test_cos_product_single_axis_ratio():
    T = cos_product(10.0, [1.0])
    DT = apply_operator(DifferentialOperator.monomial((1,)), T)
    L = 80  # divisible by 4*10
    for q in (0.5, 1.0, 2.0, math.inf):
        r = (norm_lp(DT, q, L=L, refine=False).value /
             norm_lp(T, q, L=L, refine=False).value)
        assert r == pytest.approx(10.0, rel=1e-9)


def test_norm_truncated_sinc_l2():
    h = sinc_kernel(1)
    est = norm_lp_truncated(h, 2.0, 1e4)
    assert est.value == pytest.approx(math.sqrt(math.pi), abs=1e-4)
    assert est.tail_bound < 2e-3
    assert est.upper() >= math.sqrt(math.pi)


def test_norm_truncated_zero_function():
    z = BandLimitedFunction(
        m=1, evaluate=lambda x: np.zeros(np.asarray(x).shape[:-1],
                                         dtype=complex),
        spectral_body=ConvexBody.cube(1.0, 1), sup_bound=0.0,
        decay=DecayModel.make_product([(1.0, 2.0)]), label="zero")
    assert norm_lp_truncated(z, 1.0, 50.0).value == 0.0


def test_norm_truncated_sup_case():
    f = sinc_sq_half_kernel(1)
    est = norm_lp_truncated(f, math.inf, 64.0)
    assert est.value == pytest.approx(1.0, rel=1e-6)
    assert est.tail_bound == pytest.approx(16.0 / 65.0 ** 2)


def test_non_integrable_tail_raises():
    h = sinc_kernel(1)  # decay order 1: L_1 tail cannot be certified
    with pytest.raises(NonIntegrableTailError):
        norm_lp_truncated(h, 1.0, 100.0)
    hsq = sinc_sq_half_kernel(1)  # order 2: L_{1/2} tail diverges too
    with pytest.raises(NonIntegrableTailError):
        norm_lp_truncated(hsq, 0.5, 100.0)


def test_decay_verification_rejects_false_envelope():
    with pytest.raises(ValueError, match="envelope violated"):
        f = BandLimitedFunction(
            m=1,
            evaluate=lambda x: np.ones(np.asarray(x).shape[:-1],
                                       dtype=complex),
            spectral_body=ConvexBody.cube(1.0, 1), sup_bound=1.0,
            decay=DecayModel.make_product([(1.0, 2.0)]), label="liar")
        f.verify_decay()


def test_tensor_product_metadata():
    f = tensor_product([sinc_kernel(1), sinc_sq_half_kernel(1)])
    assert f.m == 2
    assert f.spectral_body.sigma == (1.0, 1.0)
    x = np.array([[0.7, -1.1]])
    expect = (np.sin(0.7) / 0.7) * (np.sin(-0.55) / -0.55) ** 2
    assert f(x)[0] == pytest.approx(expect)

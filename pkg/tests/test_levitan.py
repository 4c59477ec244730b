import math

import numpy as np
import pytest

from bnsharp.bandlimited import (BandLimitedFunction, DecayModel,
                                 akhiezer_family, cs_extremal,
                                 sinc_sq_half_kernel, tensor_product)
from bnsharp.body import ConvexBody
from bnsharp.levitan import (TruncationFailure, check_norm_contraction,
                             check_operator_error, levitan_coefficients,
                             levitan_evaluate, m_a_schedule, plan_truncation,
                             _poly_eval_points)
from bnsharp.trigpoly import DifferentialOperator


def constant_one():
    """f = 1, the degenerate-spectrum edge case of the periodization."""
    return BandLimitedFunction(
        m=1,
        evaluate=lambda x: np.ones(np.asarray(x).shape[:-1], dtype=complex),
        spectral_body=ConvexBody.cube(1e-6, 1), sup_bound=1.0,
        decay=DecayModel.make_radial(1.0, 0.0), label="one")


def test_periodization_of_constant_is_one():
    f = constant_one()
    xs = np.array([[0.0], [1.3], [-2.9]])
    vals = levitan_evaluate(f, 2.0, xs, eps=1e-5)
    assert np.allclose(vals, 1.0, atol=2e-5)


def test_window_input_fixed_point_at_origin():
    # S_1(h^2(./2), 0) keeps only the k = 0 term: exactly f(0) = 1
    f = sinc_sq_half_kernel(1)
    v = levitan_evaluate(f, 1.0, np.array([[0.0]]), eps=1e-10)
    assert abs(v[0] - 1.0) < 1e-12


def test_truncation_plan_certificate():
    f = sinc_sq_half_kernel(1)
    K, bound = plan_truncation(f, 2.0, 1e-8)
    assert bound <= 1e-8
    # the plan must reject an unbounded input
    bad = BandLimitedFunction(
        m=1, evaluate=f.evaluate, spectral_body=f.spectral_body,
        sup_bound=math.inf, decay=f.decay, label="unbounded")
    with pytest.raises(ValueError):
        plan_truncation(bad, 2.0, 1e-8)
    with pytest.raises(ValueError):
        levitan_evaluate(f, 2.0, np.array([[0.0]]), eps=-1.0)
    with pytest.raises(ValueError):
        levitan_evaluate(f, 0.5, np.array([[0.0]]))


def test_coefficients_spectrum_and_consistency():
    f = sinc_sq_half_kernel(1)
    res = levitan_coefficients(f, 2.0, eps=1e-9)
    # spectrum inside (a + c)V with c = 1 for the unit cube
    enlarged = ConvexBody.cube(1.0, 1).lattice_points(3.0)
    assert set(res.polynomial.coefficients) <= set(enlarged)
    assert res.out_of_spectrum <= 1e-9
    # two independent code paths agree on fresh points
    ys = np.array([[0.3], [1.1], [-2.2], [0.77]])
    direct = res.evaluate(2.0 * ys)
    synth = _poly_eval_points(res.polynomial, ys)
    assert np.abs(direct - synth).max() < 5e-9


def test_real_input_gives_hermitian_coefficients():
    f = sinc_sq_half_kernel(1)
    res = levitan_coefficients(f, 2.0, eps=1e-9)
    co = res.polynomial.coefficients
    for k, v in co.items():
        mk = tuple(-c for c in k)
        assert abs(v - np.conj(co[mk])) < 1e-9
        assert abs(v.imag) < 1e-9


def test_generic_box_sum_matches_tensor_path():
    tens = sinc_sq_half_kernel(2)
    # the same function presented without tensor structure exercises the
    # generic multivariate lattice sum
    m = 2
    C = (1.0 + 2.0 * math.sqrt(m)) ** 2
    generic = BandLimitedFunction(
        m=m, evaluate=tens.evaluate, spectral_body=tens.spectral_body,
        sup_bound=1.0, decay=DecayModel.make_radial(C, 2.0),
        label="window-generic")
    generic.verify_decay()
    xs = np.array([[0.4, -0.9], [2.0, 1.0], [-3.0, 0.2]])
    a = 2.0
    v1 = levitan_evaluate(tens, a, xs, eps=1e-8)
    v2 = levitan_evaluate(generic, a, xs, eps=1e-4)
    assert np.abs(v1 - v2).max() < 2e-4

    r1 = levitan_coefficients(tens, a, eps=1e-8)
    r2 = levitan_coefficients(generic, a, eps=1e-4)
    for k in r1.polynomial.coefficients:
        a1 = r1.polynomial.coefficients[k]
        a2 = r2.polynomial.coefficients.get(k, 0j)
        assert abs(a1 - a2) < 5e-4


def test_pointwise_bound_one_sixth():
    f = sinc_sq_half_kernel(1)
    for a in (4.0, 8.0):
        xs = np.linspace(-a / 2, a / 2, 31)[:, None]
        s = levitan_evaluate(f, a, xs, eps=1e-10)
        err = np.abs(f(xs) - s)
        bound = (np.abs(xs[:, 0]) / a) ** 2 / 6.0
        assert np.all(err <= bound + 1e-10)


def test_contraction_reports():
    f = sinc_sq_half_kernel(1)
    for p in (1.0, 2.0, math.inf):
        rep = check_norm_contraction(f, 2.0, p)
        assert rep.passed
        assert math.isfinite(rep.slack)
    rep_half = check_norm_contraction(f, 2.0, 0.5)
    assert rep_half.passed and math.isinf(rep_half.slack)


def test_contraction_tensor_multivariate():
    F = tensor_product([akhiezer_family(1.0, 2.0, 0.1),
                        akhiezer_family(1.0, 2.0, 0.1)])
    rep = check_norm_contraction(F, 2.0, 2.0)
    assert rep.passed and math.isfinite(rep.slack)


def test_contraction_zero_function():
    z = BandLimitedFunction(
        m=1,
        evaluate=lambda x: np.zeros(np.asarray(x).shape[:-1], dtype=complex),
        spectral_body=ConvexBody.cube(1.0, 1), sup_bound=0.0,
        decay=DecayModel.make_product([(1.0, 2.0)]), label="zero")
    rep = check_norm_contraction(z, 2.0, 1.0)
    assert rep.lhs == pytest.approx(0.0, abs=1e-12)
    assert rep.rhs.value == pytest.approx(0.0, abs=1e-12)
    assert rep.passed


def test_operator_error_identity_reduces_to_pointwise():
    f = sinc_sq_half_kernel(1)
    op = DifferentialOperator.identity(1)
    xs = np.linspace(-1.5, 1.5, 21)[:, None]
    rep = check_operator_error(f, 8.0, op, xs)
    # identity errors obey the quadratic bound, so B stays negligible
    assert rep.A < 1.0 / 6.0 + 0.05
    assert abs(rep.B) < 0.01
    assert rep.max_error <= (1.5 / 8.0) ** 2 / 6.0 + 1e-9


def test_operator_error_first_derivative_stable_fit():
    f = sinc_sq_half_kernel(1)
    op = DifferentialOperator.partial(1, 0)
    xs = np.linspace(-1.5, 1.5, 21)[:, None]
    reports = [check_operator_error(f, a, op, xs) for a in (4.0, 8.0, 16.0)]
    errs = [r.max_error for r in reports]
    assert errs[0] > errs[1] > errs[2]
    # fitted coefficients stay bounded as the scale grows
    assert max(abs(r.A) for r in reports) < 1.0
    assert max(abs(r.B) for r in reports) < 1.0


def test_pointwise_error_quadratic_decay_rate():
    f = sinc_sq_half_kernel(1)
    x = np.array([[1.0]])
    a_values = np.array([4.0, 8.0, 16.0, 32.0])
    errs = [abs(levitan_evaluate(f, a, x, eps=1e-12)[0] - f(x)[0])
            for a in a_values]
    slope = np.polyfit(np.log(a_values), np.log(errs), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.3)


def test_out_of_spectrum_guard_fires():
    # lie about the spectral body: claim a smaller band than the truth
    f = sinc_sq_half_kernel(1)
    lying = BandLimitedFunction(
        m=1, evaluate=f.evaluate,
        spectral_body=ConvexBody.cube(0.25, 1), sup_bound=1.0,
        decay=f.decay, label="undersized")
    with pytest.raises(TruncationFailure):
        levitan_coefficients(lying, 2.0, eps=1e-9)


def test_m_a_schedule():
    assert m_a_schedule(4.0, 2.0, 0, 2, 0.5) == pytest.approx(2.0)
    assert m_a_schedule(1.0, 2.0, 0, 2, 0.5) == pytest.approx(1.0)
    # q = inf allows any delta below 1
    assert m_a_schedule(9.0, math.inf, 1, 3, 0.5) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        m_a_schedule(4.0, 2.0, 0, 2, 2.0 / 3.0)   # boundary of the interval
    with pytest.raises(ValueError):
        m_a_schedule(4.0, 2.0, 1, 2, 0.9)          # above min(q/m, ...)
    with pytest.raises(ValueError):
        m_a_schedule(0.5, 2.0, 0, 2, 0.1)


def test_levitan_cs_extremal_input():
    body = ConvexBody.cube(1.0, 1)
    op = DifferentialOperator.identity(1)
    f = cs_extremal(body, op)
    rep = check_norm_contraction(f, 2.0, 2.0)
    assert rep.passed

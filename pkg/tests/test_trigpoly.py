import json
import math

import numpy as np
import pytest

from bnsharp.body import ConvexBody
from bnsharp.trigpoly import (AliasingError, DifferentialOperator,
                              TrigPolynomial, apply_operator, default_grid,
                              evaluate_grid, norm_lp, random_polynomial)


def test_symbol_values():
    d1 = DifferentialOperator.partial(2, 0)
    assert d1.symbol([3.0, 5.0]) == pytest.approx(3.0)
    lap = DifferentialOperator.laplacian(2)
    assert lap.symbol_at_ik([1.0, 2.0])[0] == pytest.approx(-5.0)
    ident = DifferentialOperator.identity(2)
    assert ident.symbol([17.0, -4.0]) == pytest.approx(1.0)
    assert ident.symbol_at_ik([3.0, 3.0])[0] == pytest.approx(1.0)


def test_operator_validation():
    with pytest.raises(ValueError, match="orders"):
        DifferentialOperator(2, 2, {(2, 0): 1.0, (0, 1): 1.0})
    with pytest.raises(ValueError, match="identity"):
        DifferentialOperator(1, 0, {(0,): 2.0})
    with pytest.raises(ValueError, match="nonzero"):
        DifferentialOperator(1, 1, {(1,): 0.0})


def test_apply_operator_spectral():
    T = TrigPolynomial(1, {(1,): 1.0})
    out = apply_operator(DifferentialOperator.partial(1, 0), T)
    assert out.coefficients[(1,)] == pytest.approx(1j)

    T2 = TrigPolynomial(2, {(1, 2): 1.0})
    out2 = apply_operator(DifferentialOperator.laplacian(2), T2)
    assert out2.coefficients[(1, 2)] == pytest.approx(-5.0)

    rnd = random_polynomial(ConvexBody.cube(1.0, 2).lattice_points(2.0), 3)
    same = apply_operator(DifferentialOperator.identity(2), rnd)
    assert same.coefficients == rnd.coefficients


def test_apply_operator_linear_and_translation_commuting():
    spec = ConvexBody.cube(1.0, 1).lattice_points(3.0)
    T1 = random_polynomial(spec, 1)
    T2 = random_polynomial(spec, 2)
    op = DifferentialOperator.monomial((2,))
    lhs = apply_operator(op, T1 + T2.scale(2.5))
    rhs = apply_operator(op, T1) + apply_operator(op, T2).scale(2.5)
    for k in lhs.coefficients:
        assert lhs.coefficients[k] == pytest.approx(rhs.coefficients[k])
    tau = [0.37]
    a = apply_operator(op, T1.translated(tau))
    b = apply_operator(op, T1).translated(tau)
    for k in a.coefficients:
        assert a.coefficients[k] == pytest.approx(b.coefficients[k])


def test_evaluate_grid_examples():
    ones = evaluate_grid(TrigPolynomial(1, {(0,): 1.0}), 4)
    assert np.allclose(ones, 1.0)

    cos = TrigPolynomial(1, {(1,): 0.5, (-1,): 0.5})
    vals = evaluate_grid(cos, 4).real
    assert np.allclose(vals, [-1.0, 0.0, 1.0, 0.0], atol=1e-14)

    two_cos = TrigPolynomial(1, {(1,): 1.0, (-1,): 1.0})
    vals8 = evaluate_grid(two_cos, 8)
    x = -math.pi + 2 * math.pi * np.arange(8) / 8
    assert np.allclose(vals8, 2 * np.cos(x), atol=1e-14)
    assert np.abs(vals8).max() == pytest.approx(2.0)


def test_evaluate_grid_aliasing_guard():
    T = TrigPolynomial(1, {(3,): 1.0})
    with pytest.raises(AliasingError):
        evaluate_grid(T, 6)
    evaluate_grid(T, 7)  # alias-free boundary is fine


def test_norm_examples():
    const = TrigPolynomial(1, {(0,): 1.0})
    assert norm_lp(const, 2.0).value == pytest.approx(math.sqrt(2 * math.pi),
                                                      rel=1e-14)
    cos3 = TrigPolynomial(1, {(3,): 0.5, (-3,): 0.5})
    assert norm_lp(cos3, math.inf, L=24).value == pytest.approx(1.0)
    cos = TrigPolynomial(1, {(1,): 0.5, (-1,): 0.5})
    assert norm_lp(cos, 2.0).value == pytest.approx(math.sqrt(math.pi),
                                                    rel=1e-12)


def test_norm_rejects_bad_exponent():
    T = TrigPolynomial(1, {(0,): 1.0})
    with pytest.raises(ValueError):
        norm_lp(T, 0.0)
    with pytest.raises(ValueError):
        norm_lp(T, -1.0)


def test_norm_of_zero_polynomial():
    Z = TrigPolynomial(1, {(0,): 0.0})
    assert Z.is_zero()
    assert norm_lp(Z, 2.0).value == 0.0
    assert norm_lp(Z, math.inf, L=8).value == 0.0


def test_parseval_identity():
    spec = ConvexBody.parallelepiped([1.0, 2.0]).lattice_points(2.0)
    T = random_polynomial(spec, 5)
    n2 = norm_lp(T, 2.0).value
    parseval = math.sqrt(
        (2 * math.pi) ** 2 * sum(abs(c) ** 2
                                 for c in T.coefficients.values()))
    assert n2 == pytest.approx(parseval, rel=1e-10)


def test_quasi_triangle_inequality():
    spec = ConvexBody.cube(1.0, 1).lattice_points(4.0)
    for p in (0.5, 1.0, 2.0, math.inf):
        pt = min(1.0, p)
        for seed in range(5):
            F1 = random_polynomial(spec, 2 * seed)
            F2 = random_polynomial(spec, 2 * seed + 1)
            L = 64
            n12 = norm_lp(F1 + F2, p, L=L, refine=False).value
            n1 = norm_lp(F1, p, L=L, refine=False).value
            n2 = norm_lp(F2, p, L=L, refine=False).value
            assert n12 ** pt <= n1 ** pt + n2 ** pt + 1e-10


def test_translation_invariance_on_grid_shifts():
    spec = ConvexBody.cube(1.0, 1).lattice_points(3.0)
    T = random_polynomial(spec, 9)
    L = 28
    tau = [2 * math.pi * 5 / L]
    for p in (0.5, 1.0, 2.0, math.inf):
        a = norm_lp(T, p, L=L, refine=False).value
        b = norm_lp(T.translated(tau), p, L=L, refine=False).value
        assert b == pytest.approx(a, rel=1e-12)


def test_resolution_stress_fractional_exponent():
    # quadrature of |T|^p for p < 1 converges algebraically until the grid
    # resolves the near-zeros of T; the stress level is where doubling the
    # resolution moves the value by under 1e-6
    spec = ConvexBody.cube(1.0, 1).lattice_points(5.0)
    T = random_polynomial(spec, 13)
    base = default_grid(T, oversample=128)
    v1 = norm_lp(T, 0.5, L=base, refine=False).value
    v2 = norm_lp(T, 0.5, L=tuple(2 * L for L in base), refine=False).value
    assert v2 == pytest.approx(v1, rel=1e-6)


def test_sup_norm_certificate_brackets_truth():
    spec = ConvexBody.cube(1.0, 1).lattice_points(6.0)
    T = random_polynomial(spec, 21)
    est = norm_lp(T, math.inf, L=64)
    dense = np.abs(evaluate_grid(T, 4096)).max()
    assert est.value <= dense * (1 + 1e-12)
    assert dense <= est.upper() * (1 + 1e-12)


def test_random_polynomial_contract():
    spec = ConvexBody.parallelepiped([1.0, 2.0]).lattice_points(1.0)
    T1 = random_polynomial(spec, 7)
    T2 = random_polynomial(spec, 7)
    assert T1.coefficients == T2.coefficients
    assert len(T1.coefficients) == 15
    single = ConvexBody.cube(0.1, 2).lattice_points(1.0)
    T3 = random_polynomial(single, 0)
    assert list(T3.coefficients) == [(0, 0)]
    from bnsharp.body import LatticeSet
    with pytest.raises(ValueError):
        random_polynomial(LatticeSet(1, ()), 0)


def test_budget_validation():
    body = ConvexBody.cube(1.0, 1)
    TrigPolynomial(1, {(2,): 1.0}, budget=(body, 2.0))
    with pytest.raises(ValueError, match="outside the declared spectrum"):
        TrigPolynomial(1, {(3,): 1.0}, budget=(body, 2.0))


def test_serialization_roundtrip():
    spec = ConvexBody.parallelepiped([1.0, 2.0]).lattice_points(1.0)
    T = random_polynomial(spec, 17)
    back = TrigPolynomial.from_text(T.to_text())
    assert back.coefficients == T.coefficients
    back2 = TrigPolynomial.from_json(T.to_json())
    assert back2.coefficients == T.coefficients
    obj = json.loads(T.to_json())
    assert obj["m"] == 2


def test_serialization_errors():
    with pytest.raises(ValueError):
        TrigPolynomial.from_text("")
    with pytest.raises(ValueError, match="inconsistent"):
        TrigPolynomial.from_text("0 0 1.0 0.0\n0 1.0 0.0")

import random

import pytest
import sympy as sp

from fedforge.checks import associativity, star_axioms
from fedforge.dequantize import base_poisson, random_polys
from fedforge.quantizer import (
    UncertifiedOrder,
    check_kappa_poisson,
    check_tau,
    check_tau_classical,
    extract_C,
    kappa,
    kappa_linear_part,
    star,
    tau,
    tau_classical,
    verify_natural,
)
from fedforge.scalars import I, ONE, ZERO
from fedforge.series import GradedSeries, SeriesError, monomial
from oracles import ALL_FIXTURES, MAIN_FIXTURES, NU, X, from_sympy, random_sympy_poly, taylor_lift, to_sympy


def xm(d, a, b):
    return monomial(d.profile, x=(a, b))


def test_tau_flat_examples(fdata):
    d = fdata("moyal2")
    y1 = monomial(d.profile, f={0: 1})
    assert tau(xm(d, 1, 0), d) == xm(d, 1, 0) + y1
    assert tau(xm(d, 2, 0), d) == xm(d, 2, 0) + (xm(d, 1, 0) * y1).scale(2) + y1 * y1


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_tau_of_one(fdata, name):
    d = fdata(name)
    one = GradedSeries.one(d.profile)
    assert tau(one, d) == one and tau_classical(one, d) == one


def test_flat_tau_is_taylor_lift(fdata):
    d = fdata("moyal2")
    rng = random.Random(12)
    for _ in range(6):
        f = random_sympy_poly(rng, 4)
        assert to_sympy(tau(from_sympy(f, d.profile), d)) == taylor_lift(f)
        assert to_sympy(tau_classical(from_sympy(f, d.profile), d)) == taylor_lift(f)


def test_tau_handles_nu_formal_input(fdata):
    d = fdata("torsion2")
    f = xm(d, 1, 1)
    assert tau(f.times_nu(1), d) == tau(f, d).times_nu(1).truncate(order=d.K)


def test_tau_rejects_fiber_input(fdata):
    d = fdata("moyal2")
    with pytest.raises(SeriesError):
        tau(monomial(d.profile, f={0: 1}), d)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_tau_checks(fdata, name):
    d = fdata(name)
    for f in random_polys(d, 3, 3, 4):
        for v in check_tau(f, d) + check_tau_classical(f, d):
            assert v.passed, v.line()


def test_star_moyal_examples(fdata):
    d = fdata("moyal2")
    x1, x2 = xm(d, 1, 0), xm(d, 0, 1)
    half_inu = monomial(d.profile, I / 2, nu=1)
    assert star(x1, x2, d).value == x1 * x2 + half_inu
    assert star(x2, x1, d).value == x1 * x2 - half_inu
    lhs = star(x1 * x1, x2 * x2, d).value
    want = sp.expand(X[0] ** 2 * X[1] ** 2 + 2 * sp.I * NU * X[0] * X[1] - NU**2 / 2)
    assert to_sympy(lhs) == want


def test_star_wick_examples(fdata):
    d = fdata("wick2")
    x1, x2 = xm(d, 1, 0), xm(d, 0, 1)
    assert star(x1, x2, d).value == x1 * x2 + monomial(d.profile, I, nu=1)
    assert star(x2, x1, d).value == x1 * x2


def test_star_series_certification(fdata):
    d = fdata("moyal2")
    s = star(xm(d, 2, 0), xm(d, 0, 2), d)
    assert s.certified_order == 4
    assert len(s.coefficients) == 5
    assert s.render() == "x1^2*x2^2 + 2*i*x1*x2*nu - 1/2*nu^2"
    with pytest.raises(UncertifiedOrder):
        s.coefficient(5)
    with pytest.raises(UncertifiedOrder):
        extract_C(d, 5, xm(d, 1, 0), xm(d, 0, 1))
    assert extract_C(d, 0, xm(d, 1, 0), xm(d, 0, 1)) == xm(d, 1, 1)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_star_axioms(fdata, name):
    d = fdata(name)
    fs = random_polys(d, 6, 3, 21)
    for v in star_axioms(d, list(zip(fs[::2], fs[1::2]))):
        assert v.passed, v.line()


@pytest.mark.parametrize("name", ["wick2", "curved2"])
def test_associativity(fdata, name):
    d = fdata(name)
    fs = random_polys(d, 9, 3, 22)
    (v,) = associativity(d, [tuple(fs[i : i + 3]) for i in range(0, 9, 3)])
    assert v.passed, v.line()


@pytest.mark.parametrize("name", ["torsion2", "curved2"])
def test_tau_classical_is_poisson_morphism(fdata, name):
    d = fdata(name)
    W = d.bundle
    fs = random_polys(d, 4, 2, 23)
    for f, g in zip(fs[::2], fs[1::2]):
        tf, tg = tau_classical(f, d), tau_classical(g, d)
        assert (tau_classical(f * g, d) - tf * tg).is_zero()
        assert (tau_classical(base_poisson(d, f, g), d) - W.poisson(tf, tg)).is_zero()


def test_kappa_flat(fdata):
    for name in ("moyal2", "moyal2-omega"):
        d = fdata(name)
        assert kappa(d) == [xm(d, 1, 0) + monomial(d.profile, f={0: 1}), xm(d, 0, 1) + monomial(d.profile, f={1: 1})]


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_kappa_linear_part_and_poisson(fdata, name):
    d = fdata(name)
    chi = kappa_linear_part(d)
    assert chi == [[ONE, ZERO], [ZERO, ONE]]
    assert check_kappa_poisson(d).passed


def test_kappa_torsion_has_higher_terms(fdata):
    d = fdata("torsion2")
    k = kappa(d)
    assert any(sum(key[2]) >= 2 for s in k for key in s.terms)


def test_verify_natural_examples(fdata):
    assert verify_natural(fdata("moyal2"), 1, 0).passed
    assert verify_natural(fdata("torsion2"), 3, 1).passed
    for name in MAIN_FIXTURES:
        assert verify_natural(fdata(name), 2, 0).passed
    with pytest.raises(SeriesError):
        verify_natural(fdata("moyal2"), 3, 2)
    with pytest.raises(SeriesError):
        verify_natural(fdata("moyal2"), 9, 0)

"""Acceptance criteria, one test per criterion, all at exact rational equality.

Run under pytest (a summary block is printed at the end of the session) or
directly with ``python tests/test_acceptance.py``.
"""

import contextlib
import random
import sys

import pytest
import sympy as sp

from fedforge.checks import associativity, negative_controls, stability_checks, star_axioms
from fedforge.dequantize import (
    check_pipeline_agreement,
    dequantize,
    random_polys,
    source_target,
    verify_morphisms,
    verify_symplectic,
    zeta_of_xi,
)
from fedforge.fedosov import fedosov_checks
from fedforge.quantizer import check_kappa_poisson, star, tau, verify_natural
from fedforge.scalars import GaussianRational
from fedforge.series import monomial
from fedforge.symbols import op_L, op_R
from oracles import (
    ALL_FIXTURES,
    LAM_F1,
    MAIN_FIXTURES,
    NU,
    data_for,
    f4_closed_form_residual,
    from_sympy,
    moyal_star,
    nu_coeff,
    random_sympy_poly,
    to_sympy,
)

K = 8
RESULTS: dict[int, str] = {}


@contextlib.contextmanager
def criterion(num: int, title: str):
    try:
        yield
    except BaseException:
        RESULTS[num] = f"acceptance {num:>2}: FAIL  {title}"
        print(RESULTS[num])
        raise
    RESULTS[num] = f"acceptance {num:>2}: PASS  {title}"
    print(RESULTS[num])


def failures(verdicts):
    return [v.line() for v in verdicts if not v.passed]


def test_criterion_01_moyal_reproduction():
    with criterion(1, "star on F1 equals the brute-force Moyal expansion through nu^4"):
        d = data_for("moyal2", K)
        rng = random.Random(2024)
        for _ in range(20):
            f, g = random_sympy_poly(rng, 4), random_sympy_poly(rng, 4)
            s = star(from_sympy(f, d.profile), from_sympy(g, d.profile), d)
            assert s.certified_order >= 4
            got = to_sympy(s.value)
            want = moyal_star(f, g, LAM_F1, 4)
            for r in range(5):
                assert nu_coeff(got, r) == nu_coeff(want, r), (f, g, r)


def test_criterion_02_associativity():
    with criterion(2, "(f*g)*h = f*(g*h) through nu^(K/2) on F1-F4, 10 triples each"):
        for name in MAIN_FIXTURES:
            d = data_for(name, K)
            assert d.certified_order == K // 2
            fs = random_polys(d, 30, 3, 77)
            triples = [tuple(fs[i : i + 3]) for i in range(0, 30, 3)]
            assert not failures(associativity(d, triples)), name


def test_criterion_03_star_axioms():
    with criterion(3, "C0 = fg, C1 antisymmetric part = i{f,g}, C1 = (i/2) Lambda df dg"):
        for name in ALL_FIXTURES:
            d = data_for(name, K)
            fs = random_polys(d, 10, 3, 31)
            assert not failures(star_axioms(d, list(zip(fs[::2], fs[1::2])))), name


def test_criterion_04_fedosov_residuals():
    with criterion(4, "Fedosov residuals, D^2 = 0, r|nu=0 = r^v, Bianchi identities"):
        for name in ALL_FIXTURES:
            d = data_for(name, K)
            verdicts = {v.name: v for v in fedosov_checks(d)}
            assert not failures(verdicts.values()), name
            for eq in ("Fedosov equation residual", "classical Fedosov equation residual"):
                assert verdicts[eq].valid >= K - 1  # every degree the recursion produced
            for key in ("D^2 = 0 on probes", "(D^v)^2 = 0 on probes", "r|nu=0 = r^v", "delta T = 0", "delta R = nabla T"):
                assert key in verdicts


@pytest.mark.xfail(
    strict=True,
    reason="the one-term closed form misses nu^2/4 dx1^dx2; the exact r is (1 - sqrt(1 - nu)) times the same form",
)
def test_criterion_05_closed_form_r_on_F4():
    with criterion(5, "r on F4 equals (nu/2)(y1 dx2 - y2 dx1) exactly"):
        d = data_for("moyal2-omega", K)
        form = monomial(d.profile, f={0: 1}, odd=(1,)) - monomial(d.profile, f={1: 1}, odd=(0,))
        assert d.r == form.times_nu(1).scale(GaussianRational(1, 0) / 2)
        # the hand oracle must also accept the closed form
        assert sp.expand(f4_closed_form_residual()(NU / 2)) == 0


def test_criterion_06_zeta_two_pipelines():
    with criterion(6, "zeta by inversion equals sigma(Z_p) by probing, to fiber order 4, on F1-F4"):
        for name in MAIN_FIXTURES:
            d = data_for(name, K)
            zx = zeta_of_xi(d, 4)
            v = check_pipeline_agreement(d, zx, 4)
            assert v.passed, (name, v.line())


def test_criterion_07_morphisms():
    with criterion(7, "S, T multiplicative and (anti-)Poisson, {Sf, Tg} = 0, 10 pairs each"):
        for name in MAIN_FIXTURES:
            d = data_for(name, K)
            s, t = source_target(d)
            fs = random_polys(d, 20, 3, 91)
            assert not failures(verify_morphisms(d, s, t, list(zip(fs[::2], fs[1::2])))), name


def test_criterion_08_symplectic_and_kappa():
    with criterion(8, "symplectic identity for (s, t) and the kappa Poisson identity on F1-F4"):
        for name in MAIN_FIXTURES:
            d = data_for(name, K)
            v, _ = verify_symplectic(d)
            assert v.passed, (name, v.line())
            assert check_kappa_poisson(d).passed, name


def test_criterion_09_naturality():
    with criterion(9, "verify_natural for all k <= K, l <= (k-1)/2; L and R stay natural"):
        for name in ALL_FIXTURES:
            d = data_for(name, K)
            for k in range(1, K + 1):
                for l in range(0, (k - 1) // 2 + 1):
                    v = verify_natural(d, k, l)
                    assert v.passed, (name, v.line())
            for f in random_polys(d, 2, 2, 13):
                w = tau(f, d)
                op_L(w, d)  # raises NaturalityError if an (i nu)^r coefficient has order > r
                op_R(w, d)


def test_criterion_10_stability_and_controls():
    with criterion(10, "certified values unchanged at K+2; negative controls trip"):
        for name in MAIN_FIXTURES:
            d = data_for(name, K)
            fs = random_polys(d, 4, 2, 55)
            assert not failures(stability_checks(d, list(zip(fs[::2], fs[1::2])))), name
            controls = negative_controls(d, dequantize(d, samples=1), seed=2)
            assert len(controls) == 2 and not failures(controls), name


def main() -> int:
    tests = [obj for nm, obj in sorted(globals().items()) if nm.startswith("test_criterion_")]
    bad = 0
    for fn in tests:
        try:
            fn()
        except Exception:  # noqa: BLE001 - the line is already printed
            bad += 1
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())

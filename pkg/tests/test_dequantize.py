import pytest
import sympy as sp

from fedforge.checks import corrupt_zeta, dequantizer_checks
from fedforge.dequantize import (
    S_of,
    T_of,
    dequantize,
    random_polys,
    source_target,
    verify_morphisms,
    verify_symplectic,
    xi_of_zeta,
    zeta_of_xi,
)
from fedforge.scalars import GaussianRational
from fedforge.series import GradedSeries, monomial
from oracles import ALL_FIXTURES, LAM_F1, X, XI, forms_to_sympy, to_sympy

HALF = sp.Rational(1, 2)


def truncate(expr, prof):
    poly = sp.Poly(sp.expand(expr), *X, *XI)
    keep = [
        c * sp.prod([g**e for g, e in zip((*X, *XI), m)])
        for m, c in poly.terms()
        if sum(m[:2]) <= prof.x_order and sum(m[2:]) <= prof.order
    ]
    return sp.expand(sp.Add(*keep))


def xi_of_zeta_oracle(d, lam):
    # y^k -> (1/2) Lambda^{kj} zeta_j and its transpose, plugged into r^v_p
    r = forms_to_sympy(d.r_classical)
    Y = sp.symbols("y1 y2")
    first = {Y[k]: HALF * sum(lam[k][j] * XI[j] for j in range(2)) for k in range(2)}
    second = {Y[k]: HALF * sum(lam[j][k] * XI[j] for j in range(2)) for k in range(2)}
    out = []
    for p in range(2):
        rp = r.get((p,), sp.Integer(0))
        out.append(XI[p] - rp.subs(first, simultaneous=True) + rp.subs(second, simultaneous=True))
    return out


@pytest.mark.parametrize("name", ["moyal2", "moyal2-omega"])
def test_flat_coordinate_change_is_identity(fdata, name):
    d = fdata(name)
    xz, zx = xi_of_zeta(d), zeta_of_xi(d)
    assert xz == [monomial(xz[0].profile, f={p: 1}) for p in range(2)]
    assert zx == [monomial(zx[0].profile, f={p: 1}) for p in range(2)]


def test_torsion_coordinate_change_matches_hand_substitution(fdata):
    d = fdata("torsion2")
    xz = xi_of_zeta(d)
    want = xi_of_zeta_oracle(d, LAM_F1)
    prof = xz[0].profile
    assert [to_sympy(s) for s in xz] == [truncate(w, prof) for w in want]
    # r^v is even in y at Deg 2, so the quadratic corrections cancel
    assert all(s.component("deg_s", 2).is_zero() for s in xz)
    cubic = [s.component("deg_s", 3) for s in zeta_of_xi(d)]
    assert any(c.terms for c in cubic)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_round_trip(fdata, name):
    res = dequantize(fdata(name))
    assert res.verdicts[0].name == "xi(zeta(xi)) = xi" and res.verdicts[0].passed
    assert res.verdicts[1].passed, res.verdicts[1].line()


def test_moyal_source_target(fdata):
    d = fdata("moyal2")
    s, t = source_target(d)
    prof = s[0].profile
    x = [monomial(prof, x={k: 1}) for k in range(2)]
    xi = [monomial(prof, f={k: 1}) for k in range(2)]
    h = GaussianRational(1, 0) / 2
    assert s == [x[0] + xi[1].scale(h), x[1] - xi[0].scale(h)]
    assert t == [x[0] - xi[1].scale(h), x[1] + xi[0].scale(h)]


def test_wick_source_target(fdata):
    d = fdata("wick2")
    s, t = source_target(d)
    prof = s[0].profile
    x = [monomial(prof, x={k: 1}) for k in range(2)]
    xi = [monomial(prof, f={k: 1}) for k in range(2)]
    assert s == [xi[1] + x[0], x[1]]
    assert t == [x[0], xi[0] + x[1]]


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_S_and_T_preserve_unit(fdata, name):
    d = fdata(name)
    s, t = source_target(d)
    one = GradedSeries.one(d.profile)
    assert S_of(one, s) == GradedSeries.one(s[0].profile)
    assert T_of(one, t) == GradedSeries.one(t[0].profile)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_full_dequantization(fdata, name):
    res = dequantize(fdata(name))
    assert res.ok, [v.line() for v in res.verdicts if not v.passed]
    assert res.t_minus_s_constant == GaussianRational(-1, 0)


def test_morphism_identities_named(fdata):
    d = fdata("torsion2")
    s, t = source_target(d)
    fs = random_polys(d, 4, 3, 5)
    names = [v.name for v in verify_morphisms(d, s, t, list(zip(fs[::2], fs[1::2])))]
    assert names == ["S(fg) = Sf Sg", "S{f,g} = {Sf,Sg}", "T(fg) = Tf Tg", "T{f,g} = -{Tf,Tg}", "{Sf,Tg} = 0"]


@pytest.mark.parametrize("name", ["torsion2", "curved2"])
def test_symplectic_identity(fdata, name):
    v, lhs = verify_symplectic(fdata(name))
    assert v.passed, v.line()
    assert lhs.terms


def test_corrupt_zeta():
    from fedforge.series import VariableProfile

    prof = VariableProfile(2, 4, 4, "xi")
    x1, x2 = (monomial(prof, f={p: 1}) for p in range(2))
    cubic = x1 * x1 * x1
    assert corrupt_zeta([x1 + cubic, x2]) == [x1, x2]
    assert corrupt_zeta([x1, x2]) == [x1 + x1 * x1, x2]


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_negative_controls_trip(fdata, name):
    d = fdata(name)
    verdicts = dequantizer_checks(d, seed=1, samples=2)
    assert all(v.passed for v in verdicts), [v.line() for v in verdicts if not v.passed]
    assert sum(v.name.startswith("negative control") for v in verdicts) == 2

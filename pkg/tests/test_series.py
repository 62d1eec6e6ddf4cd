import random

import pytest
from hypothesis import given, strategies as st

from fedforge.scalars import I, GaussianRational
from fedforge.series import (
    EXACT,
    NU,
    GradedSeries,
    ProfileMismatch,
    SeriesError,
    TruncationError,
    VariableProfile,
    fv,
    make_series,
    monomial,
    reverse_fiber_system,
    xv,
)

P = VariableProfile(2, 6, 6, "y")
XI = VariableProfile(2, 4, 5, "xi")
ZETA = XI.with_tag("zeta")


def y(k, c=1, **kw):
    return monomial(P, c, f={k - 1: 1}, **kw)


def x(k):
    return monomial(P, x={k - 1: 1})


def dx(k):
    return monomial(P, odd=(k - 1,))


nu = monomial(P, nu=1)


# ---------------------------------------------------------------- construction


def test_make_series_examples():
    assert make_series(P, [({"x": (1, 0)}, 1)]) == x(1)
    assert make_series(P, [({}, 1)]) == GradedSeries.one(P)
    form = make_series(P, [({"f": (1, 0), "odd": (1,)}, 1), ({"f": (0, 1), "odd": (0,)}, -1)])
    assert form == y(1) * dx(2) - y(2) * dx(1)
    assert form.render() == "y1*dx2 - y2*dx1"


def test_make_series_validity_is_profile_caps():
    s = make_series(P, [({"x": (1, 0)}, 1)])
    assert s.valid_x == P.x_order and s.valid == P.order
    assert make_series(P, [({"x": (1, 0)}, 1)], exact=True).valid_x == EXACT


@pytest.mark.parametrize(
    "terms, err",
    [
        ([({"x": (7, 0)}, 1)], TruncationError),
        ([({"f": (4, 3)}, 1)], TruncationError),
        ([({"x": (1, 0)}, 1), ({"x": (1, 0)}, 2)], SeriesError),
        ([({"odd": (1, 0)}, 1)], SeriesError),
        ([((0, (1,), (0, 0), ()), 1)], SeriesError),
    ],
)
def test_make_series_errors(terms, err):
    with pytest.raises(err):
        make_series(P, terms)


def test_zero_coefficients_never_stored():
    assert (x(1) - x(1)).terms == {}
    assert monomial(P, 0, x=(1, 0)).terms == {}


# ---------------------------------------------------------------- arithmetic


def test_add_examples():
    one = GradedSeries.one(P)
    a = one + y(1) * nu
    assert a + y(1) * nu == one + (y(1) * nu).scale(2)
    assert x(1) + (-x(1)) == GradedSeries.zero(P)


def test_add_takes_min_validity():
    a = x(1).with_validity(valid_x=3)
    assert (a + x(2)).valid_x == 3


def test_profile_mismatch():
    with pytest.raises(ProfileMismatch):
        x(1) + monomial(XI, x={0: 1})


def test_grassmann_signs():
    assert (dx(1) * dx(2)).render() == "dx1^dx2"
    assert dx(2) * dx(1) == -(dx(1) * dx(2))
    assert (dx(1) * dx(1)).is_zero()
    assert (y(1) * dx(2)) * (y(2) * dx(1)) == -(y(1) * y(2) * dx(1) * dx(2))


def test_truncation_drops_and_records():
    big = x(1) ** 4 * x(2) ** 3
    assert big.is_zero() and big.valid_x == 6
    w = y(1) ** 4 * y(2) ** 3
    assert w.is_zero() and w.valid == 6


# ---------------------------------------------------------------- calculus


def test_derivative_examples():
    assert (y(1) * y(2)).deriv(fv(0)) == y(2)
    d = (x(1) * x(1)).deriv(xv(0))
    assert d == x(1).scale(2) and d.valid_x == EXACT
    d = (x(1) * x(1)).with_validity(valid_x=5).deriv(xv(0))
    assert d.valid_x == 4
    assert (nu * nu * y(1)).deriv(NU) == (nu * y(1)).scale(2)


def test_x_derivative_of_exhausted_jet():
    with pytest.raises(TruncationError):
        x(1).with_validity(valid_x=0).deriv(xv(0))


def test_interior_product():
    w = dx(1) * dx(2)
    assert w.interior(0) == dx(2)
    assert w.interior(1) == -dx(1)
    assert y(1).interior(0).is_zero()


def test_component_examples():
    s = nu + y(1) * y(2)
    assert s.component("Deg", 2) == s
    t = nu * y(1) * dx(2)
    assert t.component("deg_a", 1) == t
    assert t.component("deg_a", 0).is_zero()
    u = GradedSeries.one(P) + nu * y(1)
    assert u.component("deg_s", 1) == nu * y(1)
    assert u.component("deg_nu", 0) == GradedSeries.one(P)


def test_exact_div_nu():
    assert (nu + nu * nu * y(1)).exact_div_nu() == GradedSeries.one(P) + nu * y(1)
    with pytest.raises(SeriesError):
        (GradedSeries.one(P) + nu).exact_div_nu()
    assert GradedSeries.zero(P).exact_div_nu().is_zero()


# ---------------------------------------------------------------- substitution


def test_substitute_linear_relabel():
    xi1, xi2 = monomial(XI, f={0: 1}), monomial(XI, f={1: 1})
    src = monomial(XI, f={0: 1, 1: 1})
    out = src.substitute({fv(0): xi2, fv(1): -xi1})
    assert out == -(xi1 * xi2)


def test_substitute_across_tags():
    zeta = monomial(ZETA, f={0: 1})
    out = (y(1) * y(2)).substitute({fv(0): monomial(ZETA, f={1: 1}), fv(1): -zeta}, ZETA)
    assert out.profile == ZETA
    assert out == -(zeta * monomial(ZETA, f={1: 1}))


def test_substitute_taylor_shift():
    z1 = monomial(ZETA, f={0: 1})
    x1 = monomial(ZETA, x={0: 1})
    f = x1 + x1 * x1
    out = f.substitute({xv(0): x1 + z1})
    assert out == (x1 + z1) + (x1 + z1) * (x1 + z1)


def test_substitute_rejects_constant():
    with pytest.raises(SeriesError):
        y(1).substitute({fv(0): GradedSeries.one(P)})


# ---------------------------------------------------------------- reversion


def test_reverse_identity():
    F = [monomial(ZETA, f={p: 1}) for p in range(2)]
    assert reverse_fiber_system(F) == [monomial(XI, f={p: 1}) for p in range(2)]


def test_reverse_quadratic_example():
    z1, z2 = (monomial(ZETA, f={p: 1}) for p in range(2))
    G = reverse_fiber_system([z1 + z2 * z2, z2])
    x1, x2 = (monomial(XI, f={p: 1}) for p in range(2))
    assert G == [x1 - x2 * x2, x2]


def test_reverse_requires_identity_linear_part():
    z1, z2 = (monomial(ZETA, f={p: 1}) for p in range(2))
    with pytest.raises(SeriesError):
        reverse_fiber_system([z1.scale(2), z2])


# ---------------------------------------------------------------- rendering


def test_render_canonical_order():
    s = x(1) * x(2) + nu.scale(I / 2)
    assert s.render() == "x1*x2 + 1/2*i*nu"
    assert GradedSeries.zero(P).render() == "0"
    c = GradedSeries.constant(P, GaussianRational("1/2", "-1/3"))
    assert c.render() == "1/2-1/3*i"


# ---------------------------------------------------------------- properties


def series_strategy(profile=P, parity=None):
    term = st.tuples(
        st.integers(0, 1),
        st.tuples(st.integers(0, 2), st.integers(0, 2)),
        st.tuples(st.integers(0, 2), st.integers(0, 2)),
        st.sampled_from([(), (0,), (1,), (0, 1)] if parity is None else ([(), (0, 1)] if parity == 0 else [(0,), (1,)])),
        st.integers(-3, 3),
        st.integers(-1, 1),
    )

    def build(ts):
        raw = {}
        for nu_, xe, fe, odd, re, im in ts:
            raw[(nu_, xe, fe, odd)] = GaussianRational(re, im)
        return GradedSeries._build(profile, raw)

    return st.lists(term, max_size=4).map(build)


S = series_strategy()


@given(S, S, S)
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + b) - b == a


@given(st.integers(0, 1), st.integers(0, 1), st.data())
def test_graded_commutativity(pa, pb, data):
    a = data.draw(series_strategy(parity=pa))
    b = data.draw(series_strategy(parity=pb))
    assert a * b == (b * a).scale(-1 if pa and pb else 1)


@given(S, S, st.sampled_from([xv(0), xv(1), fv(0), fv(1), NU]))
def test_leibniz(a, b, var):
    # equal where both sides are known; the product may have lost terms at the cap
    assert ((a * b).deriv(var) - (a.deriv(var) * b + a * b.deriv(var))).is_zero()


@given(S, S)
def test_substitution_homomorphism(a, b):
    rng = random.Random(len(a.terms) * 7 + len(b.terms))
    sub = {}
    for k in range(2):
        s = monomial(P, rng.choice((1, -1)), f={rng.randrange(2): 1})
        s = s + monomial(P, rng.randint(-2, 2), f={0: 1, 1: 1}, x={k: 1})
        sub[fv(k)] = s
    assert (a * b).substitute(sub) == a.substitute(sub) * b.substitute(sub)


@given(S)
def test_x_validity_monotone(a):
    a = (a + 1).with_validity(valid_x=4)
    assert a.deriv(xv(0)).valid_x <= 3
    assert (a * a).valid_x == 4
    assert all(sum(k[1]) <= 4 for k in (a * a).terms)
    # O(x^5) * O(x^5) is O(x^10): a product of two unknown tails
    tail = GradedSeries.zero(P, valid_x=4)
    assert (tail * tail).valid_x == 9


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(2, 4), st.integers(0, 4), st.integers(-2, 2)), max_size=4))
def test_reverse_round_trip(extra):
    F = [monomial(ZETA, f={p: 1}) for p in range(2)]
    for p, deg, split, c in extra:
        a = min(split, deg)
        F[p] = F[p] + monomial(ZETA, c, f=(a, deg - a))
    G = reverse_fiber_system(F)
    assert reverse_fiber_system(G) == F

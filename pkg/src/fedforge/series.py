"""Sparse truncated series in base jets ``x``, fiber variables, odd forms and ``nu``.

A monomial key is ``(nu, xexp, fexp, odd)``:

* ``nu``   -- exponent of the deformation parameter,
* ``xexp`` -- exponent tuple of the base-point jet variables ``x^1..x^n``,
* ``fexp`` -- exponent tuple of the fiber variables (``y``, ``xi`` or ``zeta``),
* ``odd``  -- strictly increasing tuple of odd generators; indices ``0..n-1``
  are ``dx^k``, indices ``n..2n-1`` (when a profile allows them) are ``dzeta_k``.

Indices are 0-based internally and 1-based in rendered text.

Truncation.  Every profile carries an x-degree cap and a cap on the weighted
degree ``2*nu + |fexp|`` (the total grading ``Deg`` for the Weyl fiber; the plain
fiber degree for nu-free symbols).  Each series records how far its stored
terms are trustworthy: ``valid_x`` (x-degree) and ``valid`` (weighted degree).
Stored terms never exceed either bound, so a difference with no stored terms
is an identity "modulo justified degrees".  ``math.inf`` means the series is
known exactly (a polynomial that never lost information to truncation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _iproduct
from typing import Callable, Iterable, Mapping

from .scalars import ONE, ZERO, GaussianRational, as_scalar

__all__ = [
    "EXACT",
    "NU",
    "FIBER_TAGS",
    "GradedSeries",
    "ProfileMismatch",
    "SeriesError",
    "TruncationError",
    "VariableProfile",
    "fv",
    "xv",
    "make_series",
    "monomial",
    "reverse_fiber_system",
]

EXACT = math.inf
FIBER_TAGS = ("y", "xi", "zeta")
NU = ("nu", 0)


def xv(k: int) -> tuple[str, int]:
    """Variable id of the base coordinate ``x^{k+1}`` (0-based ``k``)."""
    return ("x", k)


def fv(k: int) -> tuple[str, int]:
    """Variable id of the ``k``-th (0-based) fiber coordinate."""
    return ("f", k)


class SeriesError(ValueError):
    pass


class ProfileMismatch(SeriesError):
    pass


class TruncationError(SeriesError):
    """A derivative or division needs information the series no longer has."""


@dataclass(frozen=True)
class VariableProfile:
    n: int
    x_order: int
    order: int
    tag: str = "y"
    odd: int | None = None

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise SeriesError(f"chart dimension must be even and >= 2, got {self.n}")
        if self.x_order < 1 or self.order < 1:
            raise SeriesError("truncation orders must be >= 1")
        if self.tag not in FIBER_TAGS:
            raise SeriesError(f"unknown fiber tag {self.tag!r}")
        if self.odd is None:
            object.__setattr__(self, "odd", self.n)

    @property
    def fiber_order(self) -> int:
        return self.order

    @property
    def nu_order(self) -> int:
        return self.order // 2

    def with_tag(self, tag: str) -> "VariableProfile":
        return VariableProfile(self.n, self.x_order, self.order, tag, self.odd)

    def admits(self, key) -> bool:
        nu, x, f, odd = key
        return (
            sum(x) <= self.x_order
            and 2 * nu + sum(f) <= self.order
            and all(0 <= j < self.odd for j in odd)
        )

    def fiber_name(self, k: int) -> str:
        return f"{self.tag}{k + 1}"


# ---------------------------------------------------------------- helpers


def _wdeg(key) -> int:
    return 2 * key[0] + sum(key[2])


def _add_t(a: tuple, b: tuple) -> tuple:
    return tuple(i + j for i, j in zip(a, b))


_MERGE_CACHE: dict = {}


def merge_odd(a: tuple, b: tuple) -> tuple[int, tuple]:
    """Exterior product of two sorted odd monomials: ``(sign, merged)``."""
    hit = _MERGE_CACHE.get((a, b))
    if hit is not None:
        return hit
    if not a or not b:
        res = (1, a or b)
    elif set(a) & set(b):
        res = (0, ())
    else:
        # count inversions of the concatenation
        inv = 0
        for p in a:
            for q in b:
                if q < p:
                    inv += 1
        res = (-1 if inv & 1 else 1, tuple(sorted(a + b)))
    _MERGE_CACHE[(a, b)] = res
    return res


def _falling(e: tuple, g: tuple) -> int:
    """prod_i e_i! / (e_i - g_i)!"""
    out = 1
    for ei, gi in zip(e, g):
        for t in range(gi):
            out *= ei - t
    return out


def _sub_indices(e: tuple):
    return _iproduct(*(range(k + 1) for k in e))


def _canon_odd(odd) -> tuple[int, tuple]:
    """Sort an odd index sequence, returning the permutation sign."""
    odd = list(odd)
    if len(set(odd)) != len(odd):
        return 0, ()
    sign = 1
    for i in range(len(odd)):
        for j in range(len(odd) - 1 - i):
            if odd[j] > odd[j + 1]:
                odd[j], odd[j + 1] = odd[j + 1], odd[j]
                sign = -sign
    return sign, tuple(odd)


def sort_key(key):
    nu, x, f, odd = key
    return (nu, sum(x), tuple(-e for e in x), sum(f), tuple(-e for e in f), len(odd), odd)


# ---------------------------------------------------------------- the series


class GradedSeries:
    """Immutable sparse truncated series.  See the module docstring."""

    __slots__ = ("profile", "terms", "valid_x", "valid")

    def __init__(self, profile: VariableProfile, terms: Mapping, valid_x=EXACT, valid=EXACT):
        self.profile = profile
        self.terms = terms
        self.valid_x = valid_x
        self.valid = valid

    # construction -----------------------------------------------------

    @classmethod
    def _build(cls, profile, raw: Mapping, valid_x=EXACT, valid=EXACT) -> "GradedSeries":
        """Normalize: apply storage caps (recording lost information) and validity."""
        xcap, cap = profile.x_order, profile.order
        terms = {}
        for key, c in raw.items():
            if not c:
                continue
            xd = sum(key[1])
            wd = 2 * key[0] + sum(key[2])
            if xd > xcap:
                valid_x = min(valid_x, xcap)
                continue
            if wd > cap:
                valid = min(valid, cap)
                continue
            terms[key] = c
        if valid_x < EXACT or valid < EXACT:
            terms = {k: c for k, c in terms.items() if sum(k[1]) <= valid_x and _wdeg(k) <= valid}
        return cls(profile, terms, valid_x, valid)

    @classmethod
    def zero(cls, profile, valid_x=EXACT, valid=EXACT) -> "GradedSeries":
        return cls(profile, {}, valid_x, valid)

    @classmethod
    def one(cls, profile) -> "GradedSeries":
        return cls.constant(profile, ONE)

    @classmethod
    def constant(cls, profile, c) -> "GradedSeries":
        n = profile.n
        return cls._build(profile, {(0, (0,) * n, (0,) * n, ()): as_scalar(c)})

    # basic queries ----------------------------------------------------

    @property
    def n(self) -> int:
        return self.profile.n

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, GaussianRational)):
            other = GradedSeries.constant(self.profile, other)
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self.profile == other.profile and self.terms == other.terms

    def __hash__(self):
        return hash((self.profile, frozenset(self.terms.items())))

    def same_as(self, other: "GradedSeries") -> bool:
        """Structural equality including validity bookkeeping."""
        return self == other and self.valid_x == other.valid_x and self.valid == other.valid

    def coeff(self, key) -> GaussianRational:
        return self.terms.get(key, ZERO)

    def min_wdeg(self):
        """Lower bound of the weighted degree, unknown tail included."""
        stored = min((_wdeg(k) for k in self.terms), default=EXACT)
        return min(stored, self.valid + 1)

    def min_xdeg(self):
        stored = min((sum(k[1]) for k in self.terms), default=EXACT)
        return min(stored, self.valid_x + 1)

    def max_fiber_degree(self) -> int:
        return max((sum(k[2]) for k in self.terms), default=0)

    def is_fiber_free(self) -> bool:
        return all(not any(k[2]) for k in self.terms)

    def is_even(self) -> bool:
        return all(len(k[3]) % 2 == 0 for k in self.terms)

    def is_odd(self) -> bool:
        return all(len(k[3]) % 2 == 1 for k in self.terms)

    def parity(self) -> int:
        """0 or 1 for deg_a-homogeneous parity; raises if mixed."""
        pars = {len(k[3]) % 2 for k in self.terms}
        if len(pars) > 1:
            raise SeriesError("series has mixed deg_a parity")
        return pars.pop() if pars else 0

    # ring operations --------------------------------------------------

    def _check(self, other: "GradedSeries"):
        if not isinstance(other, GradedSeries):
            raise TypeError(f"expected GradedSeries, got {type(other).__name__}")
        if self.profile != other.profile:
            raise ProfileMismatch(f"profile mismatch: {self.profile} vs {other.profile}")

    def _coerce(self, other) -> "GradedSeries":
        if isinstance(other, GradedSeries):
            self._check(other)
            return other
        return GradedSeries.constant(self.profile, as_scalar(other))

    def __add__(self, other) -> "GradedSeries":
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return GradedSeries._build(
            self.profile, out, min(self.valid_x, other.valid_x), min(self.valid, other.valid)
        )

    __radd__ = __add__

    def __neg__(self) -> "GradedSeries":
        return GradedSeries(self.profile, {k: -c for k, c in self.terms.items()}, self.valid_x, self.valid)

    def __sub__(self, other) -> "GradedSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "GradedSeries":
        return self._coerce(other) - self

    def scale(self, c) -> "GradedSeries":
        c = as_scalar(c)
        if not c:
            return GradedSeries.zero(self.profile, self.valid_x, self.valid)
        return GradedSeries(self.profile, {k: v * c for k, v in self.terms.items()}, self.valid_x, self.valid)

    def __mul__(self, other) -> "GradedSeries":
        if not isinstance(other, GradedSeries):
            return self.scale(other)
        self._check(other)
        return contract_product(self, other, _POINTWISE)

    def __rmul__(self, other) -> "GradedSeries":
        return self.scale(other)

    def __pow__(self, k: int) -> "GradedSeries":
        out = GradedSeries.one(self.profile)
        for _ in range(k):
            out = out * self
        return out

    def times_nu(self, k: int = 1) -> "GradedSeries":
        raw = {(key[0] + k, key[1], key[2], key[3]): c for key, c in self.terms.items()}
        return GradedSeries._build(self.profile, raw, self.valid_x, self.valid + 2 * k)

    # calculus ---------------------------------------------------------

    def deriv(self, var) -> "GradedSeries":
        """Formal partial derivative in an even variable (``xv(k)``, ``fv(k)``, ``NU``)."""
        kind, j = var
        out = {}
        if kind == "x":
            if self.valid_x <= 0:
                raise TruncationError("x-jet order exhausted: cannot differentiate in x")
            for (nu, x, f, odd), c in self.terms.items():
                e = x[j]
                if e:
                    nx = x[:j] + (e - 1,) + x[j + 1 :]
                    out[(nu, nx, f, odd)] = c * e
            return GradedSeries._build(self.profile, out, self.valid_x - 1, self.valid)
        if kind == "f":
            for (nu, x, f, odd), c in self.terms.items():
                e = f[j]
                if e:
                    nf = f[:j] + (e - 1,) + f[j + 1 :]
                    out[(nu, x, nf, odd)] = c * e
            return GradedSeries._build(self.profile, out, self.valid_x, self.valid - 1)
        if kind == "nu":
            for (nu, x, f, odd), c in self.terms.items():
                if nu:
                    out[(nu - 1, x, f, odd)] = c * nu
            return GradedSeries._build(self.profile, out, self.valid_x, self.valid - 2)
        raise SeriesError(f"cannot differentiate with respect to {var!r}; use interior()")

    def interior(self, j: int) -> "GradedSeries":
        """Contraction ``i(d/dx^j)`` with the sign of ``j``'s slot in the odd monomial."""
        out = {}
        for (nu, x, f, odd), c in self.terms.items():
            if j in odd:
                pos = odd.index(j)
                out[(nu, x, f, odd[:pos] + odd[pos + 1 :])] = -c if pos % 2 else c
        return GradedSeries(self.profile, out, self.valid_x, self.valid)

    def wedge_left(self, j: int) -> "GradedSeries":
        """``dx^j ^ self`` (or ``dzeta`` for ``j >= n``)."""
        out = {}
        for (nu, x, f, odd), c in self.terms.items():
            if j in odd:
                continue
            sign, nodd = merge_odd((j,), odd)
            out[(nu, x, f, nodd)] = c if sign > 0 else -c
        return GradedSeries(self.profile, out, self.valid_x, self.valid)

    def exact_div_nu(self) -> "GradedSeries":
        out = {}
        for (nu, x, f, odd), c in self.terms.items():
            if nu == 0:
                raise SeriesError("series is not divisible by nu")
            out[(nu - 1, x, f, odd)] = c
        return GradedSeries(self.profile, out, self.valid_x, self.valid - 2)

    # gradings ---------------------------------------------------------

    def component(self, grading: str, k: int) -> "GradedSeries":
        """Homogeneous part for ``deg_nu``, ``deg_s``, ``deg_a`` or ``Deg``.

        A ``Deg`` component at or below the validity bound is known exactly.
        """
        fn = _GRADINGS[grading]
        terms = {key: c for key, c in self.terms.items() if fn(key) == k}
        valid = self.valid
        if grading == "Deg" and k <= self.valid:
            valid = EXACT
        return GradedSeries(self.profile, terms, self.valid_x, valid)

    def graded_parts(self, grading: str) -> dict[int, "GradedSeries"]:
        fn = _GRADINGS[grading]
        buckets: dict[int, dict] = {}
        for key, c in self.terms.items():
            buckets.setdefault(fn(key), {})[key] = c
        return {
            d: GradedSeries(
                self.profile, t, self.valid_x, EXACT if grading == "Deg" and d <= self.valid else self.valid
            )
            for d, t in sorted(buckets.items())
        }

    def truncate(self, order=None, x_order=None) -> "GradedSeries":
        """Forget everything above the given weighted / x degrees."""
        v = self.valid if order is None else min(self.valid, order)
        vx = self.valid_x if x_order is None else min(self.valid_x, x_order)
        return GradedSeries._build(self.profile, self.terms, vx, v)

    def with_validity(self, valid_x=None, valid=None) -> "GradedSeries":
        """Declare (only ever lower) validity bounds."""
        return self.truncate(valid, valid_x)

    def at_fiber_zero(self) -> "GradedSeries":
        return GradedSeries(
            self.profile, {k: c for k, c in self.terms.items() if not any(k[2])}, self.valid_x, self.valid
        )

    def at_nu_zero(self) -> "GradedSeries":
        return GradedSeries(
            self.profile, {k: c for k, c in self.terms.items() if k[0] == 0}, self.valid_x, self.valid
        )

    def nu_coefficients(self) -> dict[int, "GradedSeries"]:
        """Split ``sum nu^m c_m`` into ``{m: c_m}`` (each ``c_m`` nu-free)."""
        out: dict[int, dict] = {}
        for (nu, x, f, odd), c in self.terms.items():
            out.setdefault(nu, {})[(0, x, f, odd)] = c
        return {
            m: GradedSeries(self.profile, t, self.valid_x, self.valid - 2 * m)
            for m, t in sorted(out.items())
        }

    def odd_components(self) -> dict[tuple, "GradedSeries"]:
        """Split by odd monomial: ``{odd: coefficient series}``."""
        out: dict[tuple, dict] = {}
        for (nu, x, f, odd), c in self.terms.items():
            out.setdefault(odd, {})[(nu, x, f, ())] = c
        return {o: GradedSeries(self.profile, t, self.valid_x, self.valid) for o, t in out.items()}

    def retag(self, profile: VariableProfile) -> "GradedSeries":
        """Move into another profile with the same ``n``; fiber content needs equal tags."""
        if profile.n != self.n:
            raise ProfileMismatch("cannot retag across chart dimensions")
        if profile.tag != self.profile.tag and not self.is_fiber_free():
            raise ProfileMismatch(f"cannot retag a {self.profile.tag}-series as {profile.tag}")
        return GradedSeries._build(profile, self.terms, self.valid_x, self.valid)

    def map_coefficients(self, fn: Callable) -> "GradedSeries":
        return GradedSeries._build(
            self.profile, {k: fn(c) for k, c in self.terms.items()}, self.valid_x, self.valid
        )

    # substitution -----------------------------------------------------

    def substitute(self, assignment: Mapping, profile: VariableProfile | None = None) -> "GradedSeries":
        """Composition ``a(x + c(x, t), sigma(x, t))`` followed by re-expansion.

        ``assignment`` maps fiber variables ``fv(k)`` to series with no
        fiber-degree-0 term and base variables ``xv(k)`` to ``x^k + c`` with ``c``
        of fiber degree >= 1.  Every substituted series must live in ``profile``
        (default: this series' profile); the result does too.
        """
        target = profile or self.profile
        n = self.n
        fib_sub: dict[int, GradedSeries] = {}
        x_shift: dict[int, GradedSeries] = {}
        for var, s in assignment.items():
            if not isinstance(s, GradedSeries):
                s = GradedSeries.constant(target, as_scalar(s))
            if s.profile != target:
                raise ProfileMismatch("substituted series must live in the target profile")
            kind, k = var
            if kind == "f":
                if any(not any(key[2]) for key in s.terms):
                    raise SeriesError(
                        f"substitution for fiber variable {k + 1} has a fiber-free term; "
                        "truncation would be unsound"
                    )
                fib_sub[k] = s
            elif kind == "x":
                c = s - monomial(target, x={k: 1})
                if any(not any(key[2]) for key in c.terms):
                    raise SeriesError(f"x{k + 1} may only be shifted by terms of positive fiber degree")
                x_shift[k] = c
            else:
                raise SeriesError(f"cannot substitute for {var!r}")
        if target.tag != self.profile.tag and not self.is_fiber_free():
            missing = [k for k in range(n) if k not in fib_sub and any(key[2][k] for key in self.terms)]
            if missing:
                raise ProfileMismatch("fiber variables of a different tag must all be substituted")
        if target.n != n or target.odd < max((max(k[3]) + 1 for k in self.terms if k[3]), default=0):
            raise ProfileMismatch("target profile cannot hold the odd variables")

        if not x_shift:
            return _substitute_fibers(self, fib_sub, target)

        # Taylor formula in the shifted base variables.
        shifted = sorted(x_shift)
        result = GradedSeries.zero(target)
        max_total = target.order
        frontier = [((0,) * n, self, GradedSeries.one(target))]
        seen = set()
        while frontier:
            alpha, deriv, cpow = frontier.pop()
            if alpha in seen:
                continue
            seen.add(alpha)
            if not deriv.terms and deriv.valid_x == EXACT and deriv.valid == EXACT:
                continue
            term = _substitute_fibers(deriv, fib_sub, target) * cpow
            result = result + term.scale(_inv_factorial(alpha))
            if sum(alpha) >= max_total or cpow.is_zero() and cpow.valid == EXACT:
                continue
            for k in shifted:
                if deriv.valid_x <= 0:
                    break
                nalpha = alpha[:k] + (alpha[k] + 1,) + alpha[k + 1 :]
                frontier.append((nalpha, deriv.deriv(xv(k)), cpow * x_shift[k]))
        return result

    # rendering --------------------------------------------------------

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: sort_key(kv[0]))

    def render(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for key, c in self.sorted_terms():
            pieces.append(_render_term(self.profile, key, c))
        out = pieces[0]
        for p in pieces[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    __str__ = render

    def __repr__(self) -> str:
        vx = "exact" if self.valid_x == EXACT else self.valid_x
        v = "exact" if self.valid == EXACT else self.valid
        return f"<GradedSeries[{self.profile.tag}] {self.render()} | valid_x={vx} valid={v}>"


def _inv_factorial(alpha) -> GaussianRational:
    d = 1
    for a in alpha:
        d *= math.factorial(a)
    return GaussianRational(1) / d


_GRADINGS = {
    "deg_nu": lambda k: k[0],
    "deg_s": lambda k: sum(k[2]),
    "deg_a": lambda k: len(k[3]),
    "Deg": lambda k: 2 * k[0] + sum(k[2]),
}


def _render_term(profile, key, c) -> str:
    nu, x, f, odd = key
    factors = []
    for j, e in enumerate(x):
        if e:
            factors.append(f"x{j + 1}" + (f"^{e}" if e > 1 else ""))
    for j, e in enumerate(f):
        if e:
            factors.append(profile.fiber_name(j) + (f"^{e}" if e > 1 else ""))
    if nu:
        factors.append("nu" + (f"^{nu}" if nu > 1 else ""))
    if odd:
        names = [f"dx{j + 1}" if j < profile.n else f"d{profile.tag}{j - profile.n + 1}" for j in odd]
        factors.append("^".join(names))
    body = "*".join(factors)
    if not factors:
        return c.render()
    if c == ONE:
        return body
    if c == -ONE:
        return "-" + body
    cs = c.render()
    if c.re != 0 and c.im != 0:
        cs = f"({cs})"
    return f"{cs}*{body}"


# ---------------------------------------------------------------- products

# A contraction table entry: (gamma, delta, nu_increment, coefficient series or None).
# ``None`` stands for the scalar 1.
_POINTWISE = None


def contract_product(a: GradedSeries, b: GradedSeries, table, nu_step: int = 1, fiber_zero_only: bool = False) -> GradedSeries:
    """``sum_{gamma,delta} c_{gamma,delta} nu^(nu_step*k) d^gamma a * d^delta b`` (fiber derivatives).

    ``table`` is ``None`` for the plain graded-commutative product, otherwise a
    mapping ``k -> list of (gamma, delta, coeff)`` with ``|gamma| = |delta| = k``;
    ``coeff`` is a fiber-free series (possibly x-dependent) or a scalar.  With
    ``fiber_zero_only`` only the terms free of fiber variables are produced.
    """
    prof = a.profile
    n = prof.n
    cap, xcap = prof.order, prof.x_order
    out: dict = {}
    dropped = dropped_x = False
    zero_f = (0,) * n
    levels = {0: [(zero_f, zero_f, None)]} if table is None else table

    # validity of the exact result, before storage caps; each level shifts
    # the weighted degree by (2*nu_step - 2)*k
    shift = min([0] + [(2 * nu_step - 2) * k for k in levels if levels[k]])
    valid = min(a.valid + b.min_wdeg(), b.valid + a.min_wdeg()) + shift
    valid_x = min(a.valid_x + b.min_xdeg(), b.valid_x + a.min_xdeg())
    for entries in levels.values():
        for _, _, cf in entries:
            if isinstance(cf, GradedSeries) and cf.valid_x < EXACT:
                valid_x = min(valid_x, cf.valid_x + a.min_xdeg() + b.min_xdeg())
    limit = min(cap, valid)
    xlimit = min(xcap, valid_x)

    ga = _group_by_fiber(a.terms)
    gb = _group_by_fiber(b.terms)
    for fa, la in ga.items():
        sa = sum(fa)
        min_nu_a = min(t[0] for t in la)
        for fb, lb in gb.items():
            sb = sum(fb)
            if fiber_zero_only and sa != sb:
                continue
            min_nu_b = min(t[0] for t in lb)
            for k, entries in levels.items():
                if k > sa or k > sb:
                    continue
                if fiber_zero_only and k != sa:
                    continue
                fdeg = sa + sb - 2 * k
                lowest = 2 * (min_nu_a + min_nu_b + nu_step * k) + fdeg
                if lowest > limit:
                    dropped = dropped or lowest > cap
                    continue
                for gamma, delta, cf in entries:
                    if fiber_zero_only:
                        if gamma != fa or delta != fb:
                            continue
                    elif any(g > e for g, e in zip(gamma, fa)) or any(d > e for d, e in zip(delta, fb)):
                        continue
                    fac = _falling(fa, gamma) * _falling(fb, delta)
                    newf = tuple(fa[i] - gamma[i] + fb[i] - delta[i] for i in range(n))
                    if cf is None:
                        cterms = ((None, ONE),)
                    elif isinstance(cf, GradedSeries):
                        cterms = tuple((key[1], c) for key, c in cf.terms.items())
                    else:
                        cterms = ((None, cf),)
                    for nua, xa, oa, ca in la:
                        for nub, xb, ob, cb in lb:
                            nu = nua + nub + nu_step * k
                            wd = 2 * nu + fdeg
                            if wd > limit:
                                dropped = dropped or wd > cap
                                continue
                            sign, odd = merge_odd(oa, ob)
                            if not sign:
                                continue
                            base = ca * cb
                            if fac != 1 or sign != 1:
                                base = base * (fac * sign)
                            xab = tuple(p + q for p, q in zip(xa, xb))
                            for xc, cc in cterms:
                                x = xab if xc is None else tuple(p + q for p, q in zip(xab, xc))
                                if sum(x) > xlimit:
                                    dropped_x = dropped_x or sum(x) > xcap
                                    continue
                                key = (nu, x, newf, odd)
                                val = base if cc is ONE else base * cc
                                prev = out.get(key)
                                out[key] = val if prev is None else prev + val
    if dropped:
        valid = min(valid, cap)
    if dropped_x:
        valid_x = min(valid_x, xcap)
    return GradedSeries._build(prof, out, valid_x, valid)


def _group_by_fiber(terms: Mapping) -> dict:
    groups: dict = {}
    for (nu, x, f, odd), c in terms.items():
        groups.setdefault(f, []).append((nu, x, odd, c))
    return groups


def _substitute_fibers(a: GradedSeries, fib_sub: Mapping[int, GradedSeries], target) -> GradedSeries:
    n = a.n
    if not fib_sub:
        return a if a.profile == target else a.retag(target)
    powers: dict = {}

    def power(k: int, e: int) -> GradedSeries:
        key = (k, e)
        if key not in powers:
            powers[key] = GradedSeries.one(target) if e == 0 else power(k, e - 1) * fib_sub[k]
        return powers[key]

    cache: dict = {}
    by_f: dict = {}
    for (nu, x, f, odd), c in a.terms.items():
        subf = tuple(f[k] if k in fib_sub else 0 for k in range(n))
        keepf = tuple(0 if k in fib_sub else f[k] for k in range(n))
        by_f.setdefault(subf, {})[(nu, x, keepf, odd)] = c
    result_terms: dict = {}
    valid, valid_x = a.valid, a.valid_x
    for subf, rest in by_f.items():
        if subf not in cache:
            p = GradedSeries.one(target)
            for k, e in enumerate(subf):
                if e:
                    p = p * power(k, e)
            cache[subf] = p
        factor = cache[subf]
        restser = GradedSeries._build(target, rest, EXACT, EXACT)
        prod = restser * factor
        valid = min(valid, prod.valid)
        valid_x = min(valid_x, prod.valid_x)
        for key, c in prod.terms.items():
            prev = result_terms.get(key)
            result_terms[key] = c if prev is None else prev + c
    # the unknown tail of ``a`` stays above a.valid: substitutions have fiber degree >= 1
    return GradedSeries._build(target, result_terms, valid_x, valid)


# ---------------------------------------------------------------- constructors


def _key_from_desc(profile: VariableProfile, desc) -> tuple:
    """Build a key from ``dict(x=..., f=..., nu=..., odd=...)`` (0-based maps or tuples)."""
    n = profile.n

    def vec(v):
        if v is None:
            return (0,) * n
        if isinstance(v, Mapping):
            out = [0] * n
            for k, e in v.items():
                out[k] = e
            return tuple(out)
        v = tuple(v)
        if len(v) != n:
            raise SeriesError(f"exponent tuple {v} has wrong length")
        return v

    return (int(desc.get("nu", 0)), vec(desc.get("x")), vec(desc.get("f")), tuple(desc.get("odd", ())))


def monomial(profile: VariableProfile, coeff=1, *, x=None, f=None, nu=0, odd=()) -> GradedSeries:
    """Exact single-term series; ``odd`` may be unsorted (sign applied)."""
    sign, codd = _canon_odd(odd)
    key = _key_from_desc(profile, {"x": x, "f": f, "nu": nu, "odd": codd})
    c = as_scalar(coeff) * sign
    return GradedSeries._build(profile, {key: c})


def make_series(profile: VariableProfile, terms: Iterable, *, exact: bool = False) -> GradedSeries:
    """Canonical series from ``(key_spec, coeff)`` pairs.

    ``key_spec`` is a key tuple ``(nu, xexp, fexp, odd)`` or a dict with
    ``x``/``f``/``nu``/``odd`` entries.  Errors on keys beyond the profile,
    duplicates, and non-canonical odd monomials.  The result is valid to the
    profile caps unless ``exact`` (then it is an exact polynomial).
    """
    out = {}
    for desc, c in terms:
        key = desc if isinstance(desc, tuple) else _key_from_desc(profile, desc)
        nu, x, f, odd = key
        if len(x) != profile.n or len(f) != profile.n:
            raise SeriesError(f"key {key} does not match chart dimension {profile.n}")
        if any(e < 0 for e in x + f) or nu < 0:
            raise SeriesError(f"negative exponent in {key}")
        if list(odd) != sorted(set(odd)):
            raise SeriesError(f"odd monomial {odd} is not strictly increasing")
        if not profile.admits(key):
            raise TruncationError(f"term {key} exceeds the truncation profile")
        if key in out:
            raise SeriesError(f"duplicate monomial {key}")
        out[key] = as_scalar(c)
    if exact:
        return GradedSeries._build(profile, out)
    return GradedSeries._build(profile, out, profile.x_order, profile.order)


# ---------------------------------------------------------------- reversion


def reverse_fiber_system(F: list[GradedSeries], target: VariableProfile | None = None) -> list[GradedSeries]:
    """Compositional inverse of ``F_p(x, u) = u_p + O(u^2)`` in the fiber variables.

    The input lives in a ``xi`` or ``zeta`` profile; the output lives in the
    other one (or ``target``).  Fixed point ``u^(m+1) = v - (F - id)(u^(m))``
    iterated ``order`` times.
    """
    if not F:
        raise SeriesError("empty system")
    src = F[0].profile
    n = src.n
    if len(F) != n or any(s.profile != src for s in F):
        raise ProfileMismatch("reverse_fiber_system needs n series in one profile")
    if target is None:
        other = {"xi": "zeta", "zeta": "xi"}.get(src.tag)
        if other is None:
            raise SeriesError("reverse_fiber_system works on xi/zeta series")
        target = src.with_tag(other)
    for p, s in enumerate(F):
        for key, c in s.terms.items():
            fd = sum(key[2])
            if key[3] or key[0]:
                raise SeriesError("system must be nu-free and even")
            if fd == 0:
                raise SeriesError(f"component {p + 1} has a fiber-free term")
            if fd == 1:
                expected = ONE if (key[2][p] == 1 and not any(key[1])) else ZERO
                if c != expected:
                    raise SeriesError("fiber-linear part is not the identity")
        for q in range(n):
            e = (0, (0,) * n, tuple(1 if i == q else 0 for i in range(n)), ())
            if q == p and e not in s.terms:
                raise SeriesError("fiber-linear part is not the identity")
    ident = [monomial(src, f={p: 1}) for p in range(n)]
    nonlinear = [F[p] - ident[p] for p in range(n)]
    v = [monomial(target, f={p: 1}) for p in range(n)]
    u = list(v)
    for _ in range(target.order):
        assign = {fv(q): u[q] for q in range(n)}
        u = [v[p] - nonlinear[p].substitute(assign, target) for p in range(n)]
    return u

"""Fiberwise structures on sections of the Weyl bundle tensored with forms.

Elements are ``y``-tagged :class:`GradedSeries`.  A :class:`WeylBundle` binds
them to the chart data (``Lambda``, ``Gamma``) and a truncation profile, and
caches the contraction tables of the fiber product.
"""

from __future__ import annotations

import math
from functools import cached_property

from .scalars import I, ONE, GaussianRational
from .series import (
    EXACT,
    GradedSeries,
    ProfileMismatch,
    SeriesError,
    VariableProfile,
    contract_product,
    fv,
    monomial,
    xv,
)

__all__ = ["WeylBundle", "DivisibilityError"]


class DivisibilityError(SeriesError):
    """A quantity that must be divisible by ``nu`` is not."""


def _matrices(rows: tuple, cols: tuple):
    """Non-negative integer matrices with the given row and column sums."""
    n = len(rows)
    if n == 0:
        yield ()
        return
    first, rest = rows[0], rows[1:]

    def splits(total, caps):
        if len(caps) == 1:
            if total <= caps[0]:
                yield (total,)
            return
        for v in range(min(total, caps[0]) + 1):
            for tail in splits(total - v, caps[1:]):
                yield (v,) + tail

    for row in splits(first, cols):
        remaining = tuple(c - v for c, v in zip(cols, row))
        for sub in _matrices(rest, remaining):
            yield (row,) + sub


def _multi_indices(n: int, k: int):
    if n == 1:
        yield (k,)
        return
    for v in range(k, -1, -1):
        for tail in _multi_indices(n - 1, k - v):
            yield (v,) + tail


class WeylBundle:
    """The algebra ``(W tensor Lambda, o)`` on one chart at a fixed truncation.

    ``lam[j][k]`` and ``gamma[l][j][k]`` (= ``Gamma^l_{jk}``) are fiber-free
    series in ``profile``.
    """

    def __init__(self, profile: VariableProfile, lam, gamma):
        if profile.tag != "y":
            raise ProfileMismatch("the Weyl bundle uses y-tagged series")
        self.profile = profile
        self.n = profile.n
        self.lam = [[self._jet(c) for c in row] for row in lam]
        self.gamma = [[[self._jet(c) for c in row] for row in mat] for mat in gamma]
        self.omega_upper = [
            [(self.lam[j][k] - self.lam[k][j]).scale(GaussianRational(1, 0) / 2) for k in range(self.n)]
            for j in range(self.n)
        ]

    def _jet(self, c) -> GradedSeries:
        if isinstance(c, GradedSeries):
            if not c.is_fiber_free():
                raise SeriesError("geometric coefficients must be fiber-free")
            return c.retag(self.profile) if c.profile != self.profile else c
        return GradedSeries.constant(self.profile, c)

    def check(self, *elements: GradedSeries):
        for e in elements:
            if not isinstance(e, GradedSeries):
                raise TypeError(f"expected GradedSeries, got {type(e).__name__}")
            if e.profile != self.profile:
                raise ProfileMismatch(f"element profile {e.profile} does not match bundle {self.profile}")

    def element(self, terms, exact=True) -> GradedSeries:
        from .series import make_series

        return make_series(self.profile, terms, exact=exact)

    def y(self, k: int) -> GradedSeries:
        return monomial(self.profile, f={k: 1})

    def dx(self, k: int) -> GradedSeries:
        return monomial(self.profile, odd=(k,))

    # product tables ---------------------------------------------------

    @staticmethod
    def _const(s: GradedSeries):
        """Scalar value of a constant series, else ``None``."""
        if s.valid_x != EXACT:
            return None
        keys = list(s.terms)
        if not keys:
            return 0
        if len(keys) == 1 and not any(keys[0][1]) and keys[0][0] == 0 and not keys[0][3]:
            return s.terms[keys[0]]
        return None

    def _contraction(self, coeffs, k: int):
        """Entries ``(gamma, delta, c)`` with ``c = sum_m prod coeffs[j][l]^m_jl / m_jl!``."""
        n = self.n
        consts = [[self._const(c) for c in row] for row in coeffs]
        all_const = all(v is not None for row in consts for v in row)
        entries = []
        for gamma in _multi_indices(n, k):
            for delta in _multi_indices(n, k):
                if all_const:
                    total = GaussianRational(0)
                    for m in _matrices(gamma, delta):
                        term = ONE
                        for j in range(n):
                            for l in range(n):
                                e = m[j][l]
                                if e:
                                    term = term * (consts[j][l] ** e) / math.factorial(e)
                        total = total + term
                    if total:
                        entries.append((gamma, delta, total))
                else:
                    total = GradedSeries.zero(self.profile)
                    for m in _matrices(gamma, delta):
                        term = GradedSeries.one(self.profile)
                        for j in range(n):
                            for l in range(n):
                                e = m[j][l]
                                if e:
                                    term = (term * coeffs[j][l] ** e).scale(GaussianRational(1) / math.factorial(e))
                        total = total + term
                    if total.terms:
                        entries.append((gamma, delta, total))
                    elif total.valid_x != EXACT:
                        entries.append((gamma, delta, total))
        return entries

    @cached_property
    def _product_table(self):
        # (i nu / 2)^k: the nu^k goes to the kernel, (i/2)^k into the coefficient
        table = {}
        half_i = I / 2
        for k in range(0, self.profile.order // 2 + 1):
            scale = half_i**k
            entries = []
            for gamma, delta, c in self._contraction(self.lam, k):
                entries.append((gamma, delta, c * scale if not isinstance(c, GradedSeries) else c.scale(scale)))
            table[k] = entries
        return table

    @cached_property
    def _poisson_table(self):
        return {1: self._contraction(self.omega_upper, 1)}

    # operations -------------------------------------------------------

    def product(self, a: GradedSeries, b: GradedSeries) -> GradedSeries:
        """The fiberwise product ``a o b``."""
        self.check(a, b)
        return contract_product(a, b, self._product_table)

    def commutator(self, a: GradedSeries, b: GradedSeries) -> GradedSeries:
        """Graded commutator ``a o b - (-1)^{|a||b|} b o a``."""
        sign = -1 if (a.parity() and b.parity()) else 1
        ab = self.product(a, b)
        ba = self.product(b, a)
        return ab + ba if sign < 0 else ab - ba

    def scaled_commutator(self, a: GradedSeries, b: GradedSeries) -> GradedSeries:
        """``(1/(i nu)) [a, b]``."""
        c = self.commutator(a, b)
        try:
            q = c.exact_div_nu()
        except SeriesError as exc:
            raise DivisibilityError(f"commutator is not divisible by nu: {c.render()}") from exc
        return q.scale(-I)

    def poisson(self, a: GradedSeries, b: GradedSeries) -> GradedSeries:
        """``{a, b}_TM = omega^{jk} d_j a d_k b`` (form parts multiplied in order)."""
        self.check(a, b)
        return contract_product(a, b, self._poisson_table, nu_step=0)

    def pairing(self, a: GradedSeries, b: GradedSeries) -> GradedSeries:
        """``<a, b> = (a o b)|_{y=0}``; both arguments must be 0-forms."""
        self.check(a, b)
        if any(k[3] for k in a.terms) or any(k[3] for k in b.terms):
            raise SeriesError("pairing is defined on 0-forms only")
        return contract_product(a, b, self._product_table, fiber_zero_only=True)

    def delta(self, a: GradedSeries) -> GradedSeries:
        self.check(a)
        out = GradedSeries.zero(self.profile, a.valid_x, a.valid - 1)
        for j in range(self.n):
            out = out + a.deriv(fv(j)).wedge_left(j)
        return out

    def delta_inv(self, a: GradedSeries) -> GradedSeries:
        """``(1/(p+q)) y^j i(d/dx^j)`` on each ``(deg_s, deg_a) = (p, q)`` piece."""
        self.check(a)
        raw: dict = {}
        for (nu, x, f, odd), c in a.terms.items():
            w = sum(f) + len(odd)
            if w == 0:
                continue
            c = c / w
            for pos, j in enumerate(odd):
                nf = f[:j] + (f[j] + 1,) + f[j + 1 :]
                key = (nu, x, nf, odd[:pos] + odd[pos + 1 :])
                val = -c if pos % 2 else c
                prev = raw.get(key)
                raw[key] = val if prev is None else prev + val
        return GradedSeries._build(self.profile, raw, a.valid_x, a.valid + 1)

    def nabla(self, a: GradedSeries) -> GradedSeries:
        """``dx^j ^ (d/dx^j - Gamma^l_{jk} y^k d/dy^l) a``."""
        self.check(a)
        n = self.n
        dy = [a.deriv(fv(l)) for l in range(n)]
        ydy = {}
        out = GradedSeries.zero(self.profile, a.valid_x - 1, a.valid)
        for j in range(n):
            term = a.deriv(xv(j))
            for l in range(n):
                for k in range(n):
                    g = self.gamma[l][j][k]
                    if not g.terms and g.valid_x == EXACT:
                        continue
                    if (k, l) not in ydy:
                        ydy[(k, l)] = self.y(k) * dy[l]
                    term = term - g * ydy[(k, l)]
            out = out + term.wedge_left(j)
        return out
